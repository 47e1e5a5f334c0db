"""Change-log poller: the integration-mode event source.

Each round fetches a page of changes after the checkpointed token, derives
CaseFileItem events through the shadow index, hands them to the handler and
then persists token, shadow and dead letters together.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from casefs.errors import TransportError
from casefs.events import CaseFileItemEvent, ShadowIndex, derive_events

log = logging.getLogger(__name__)

DEFAULT_POLL_INTERVAL = 0.5
BACKOFF_INITIAL = 0.25
BACKOFF_FACTOR = 2.0
BACKOFF_CAP = 8.0


@dataclass
class DeadLetter:
    token: int | None
    event: CaseFileItemEvent
    error: str

    def to_json(self) -> dict:
        return {"token": self.token, "event": self.event.to_json(), "error": self.error}

    @classmethod
    def from_json(cls, data: dict) -> DeadLetter:
        return cls(data.get("token"), CaseFileItemEvent.from_json(data["event"]), data.get("error", ""))


def load_checkpoint(path: str | os.PathLike) -> tuple[ShadowIndex, list[DeadLetter]]:
    path = Path(path)
    if not path.exists():
        return ShadowIndex(), []
    data = json.loads(path.read_text("utf-8"))
    shadow = ShadowIndex.from_json(data.get("shadow", {}))
    shadow.last_token = int(data.get("token", shadow.last_token))
    return shadow, [DeadLetter.from_json(d) for d in data.get("deadLetters", [])]


def save_checkpoint(path: str | os.PathLike, shadow: ShadowIndex, dead_letters: list[DeadLetter]) -> None:
    path = Path(path)
    payload = {
        "token": shadow.last_token,
        "shadow": shadow.to_json(),
        "deadLetters": [d.to_json() for d in dead_letters],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
    os.replace(tmp, path)


class ChangePoller:
    """Repository-wide poller; handler failures are retried once, then dead-lettered."""

    def __init__(
        self,
        client,
        handler: Callable[[CaseFileItemEvent], None],
        from_token: int = 0,
        batch_size: int = 100,
        poll_interval: float = DEFAULT_POLL_INTERVAL,
        checkpoint_path: str | os.PathLike | None = None,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be positive")
        self.client = client
        self.handler = handler
        self.batch_size = batch_size
        self.poll_interval = poll_interval
        self.checkpoint_path = checkpoint_path
        if checkpoint_path is not None and Path(checkpoint_path).exists():
            self.shadow, self.dead_letters = load_checkpoint(checkpoint_path)
        else:
            self.shadow, self.dead_letters = ShadowIndex(), []
            self.shadow.last_token = from_token
        self.backoff = BACKOFF_INITIAL

    @property
    def token(self) -> int:
        return self.shadow.last_token

    def run_once(self) -> int:
        """One round. Returns the number of changes fetched; raises TransportError."""
        batch, _ = self.client.get_content_changes(self.token, self.batch_size)
        events = derive_events(batch, self.shadow, flush=not batch)
        for event in events:
            self._deliver(event)
        if batch or events:
            self.checkpoint()
        return len(batch)

    def drain(self) -> int:
        """Poll until the change log is exhausted and any held DELETED is flushed."""
        total = 0
        while True:
            fetched = self.run_once()
            total += fetched
            if fetched == 0:
                return total

    def run(self, stop: threading.Event | None = None) -> None:
        stop = stop or threading.Event()
        while not stop.is_set():
            try:
                fetched = self.run_once()
            except TransportError as exc:
                log.warning("poll failed, retrying in %.2fs: %s", self.backoff, exc)
                stop.wait(self.backoff)
                self.backoff = min(self.backoff * BACKOFF_FACTOR, BACKOFF_CAP)
                continue
            self.backoff = BACKOFF_INITIAL
            if fetched < self.batch_size:
                stop.wait(self.poll_interval)

    def checkpoint(self) -> None:
        if self.checkpoint_path is not None:
            save_checkpoint(self.checkpoint_path, self.shadow, self.dead_letters)

    def drain_dead_letters(self) -> list[DeadLetter]:
        letters, self.dead_letters = self.dead_letters, []
        self.checkpoint()
        return letters

    def _deliver(self, event: CaseFileItemEvent) -> None:
        for attempt in (1, 2):
            try:
                self.handler(event)
                return
            except Exception as exc:  # handler code is arbitrary
                if attempt == 2:
                    log.error("dead-lettering %s at token %s: %s", event.kind.value, event.source_token, exc)
                    self.dead_letters.append(DeadLetter(event.source_token, event, repr(exc)))


def poll_changes(
    client,
    from_token: int,
    batch_size: int,
    handler: Callable[[CaseFileItemEvent], None],
    stop: threading.Event | None = None,
    **kwargs,
) -> ChangePoller:
    """Run a poller until ``stop`` is set; returns it so callers can inspect dead letters."""
    poller = ChangePoller(client, handler, from_token=from_token, batch_size=batch_size, **kwargs)
    poller.run(stop)
    return poller
