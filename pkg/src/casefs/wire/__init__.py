"""HTTP binding, remote client and change-log poller for integration mode."""

from casefs.wire.client import RemoteRepository
from casefs.wire.poller import ChangePoller, DeadLetter, load_checkpoint, poll_changes, save_checkpoint
from casefs.wire.server import create_app, serve

__all__ = [
    "ChangePoller",
    "DeadLetter",
    "RemoteRepository",
    "create_app",
    "load_checkpoint",
    "poll_changes",
    "save_checkpoint",
    "serve",
]
