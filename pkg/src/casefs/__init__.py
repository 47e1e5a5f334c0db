"""casefs: a CMMN case-file engine on a CMIS-style content repository."""

from casefs.casefile import (
    EMPTY_ELEMENT,
    EMPTY_ITEM,
    CaseFile,
    CaseFileHandle,
    CaseFileItemRef,
    Element,
    create_case_file,
    list_cases,
    open_case,
)
from casefs.events import (
    CaseFileItemEvent,
    EventDispatcher,
    EventKind,
    LifecycleState,
    OnPartSubscription,
    ShadowIndex,
    apply_transition,
    attach_push,
    derive_events,
)
from casefs.repo import Repository

__version__ = "0.1.0"

__all__ = [
    "EMPTY_ELEMENT",
    "EMPTY_ITEM",
    "CaseFile",
    "CaseFileHandle",
    "CaseFileItemEvent",
    "CaseFileItemRef",
    "Element",
    "EventDispatcher",
    "EventKind",
    "LifecycleState",
    "OnPartSubscription",
    "Repository",
    "ShadowIndex",
    "apply_transition",
    "attach_push",
    "create_case_file",
    "derive_events",
    "list_cases",
    "open_case",
]
