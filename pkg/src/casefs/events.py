"""CaseFileItem lifecycle events.

Two producers feed the same ``CaseFileItemEvent`` stream:

* ``map_push_event`` turns a committed repository ``Mutation`` into events
  synchronously (embedded mode).
* ``derive_events`` reconstructs the same events from a polled change log and a
  client-side ``ShadowIndex`` (integration mode).

``EventDispatcher`` routes events to onPart subscriptions and tracks each
item's lifecycle state.
"""

from __future__ import annotations

import itertools
import logging
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable

from casefs.errors import InvalidArgumentError, InvalidTransitionError
from casefs.repo.store import ROOT_FOLDER_ID, Mutation, Repository
from casefs.repo.types import BaseType, ChangeEvent, ChangeType

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    CREATE = "create"
    UPDATE = "update"
    REPLACE = "replace"
    ADD_CHILD = "addChild"
    REMOVE_CHILD = "removeChild"
    ADD_REFERENCE = "addReference"
    REMOVE_REFERENCE = "removeReference"
    DELETE = "delete"


class LifecycleState(str, Enum):
    AVAILABLE = "Available"
    DISCARDED = "Discarded"


def apply_transition(state: LifecycleState | None, kind: EventKind | str) -> LifecycleState:
    """One step of the CaseFileItem lifecycle; ``None`` is the initial pseudo-state."""
    kind = EventKind(kind)
    if state is None:
        if kind is EventKind.CREATE:
            return LifecycleState.AVAILABLE
        raise InvalidTransitionError(f"{kind.value} before create")
    if state is LifecycleState.DISCARDED:
        raise InvalidTransitionError(f"{kind.value} on a discarded item")
    if kind is EventKind.CREATE:
        raise InvalidTransitionError("create on an available item")
    if kind is EventKind.DELETE:
        return LifecycleState.DISCARDED
    return LifecycleState.AVAILABLE


@dataclass(frozen=True)
class CaseFileItemEvent:
    kind: EventKind
    case_id: str | None
    item_object_id: str
    related_object_id: str | None = None
    source_token: int | None = None
    item_name: str = ""

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "caseId": self.case_id,
            "itemObjectId": self.item_object_id,
            "relatedObjectId": self.related_object_id,
            "sourceToken": self.source_token,
            "itemName": self.item_name,
        }

    @classmethod
    def from_json(cls, data: dict) -> CaseFileItemEvent:
        return cls(
            kind=EventKind(data["kind"]),
            case_id=data.get("caseId"),
            item_object_id=data["itemObjectId"],
            related_object_id=data.get("relatedObjectId"),
            source_token=data.get("sourceToken"),
            item_name=data.get("itemName", ""),
        )


# -- embedded mode -----------------------------------------------------------


def map_push_event(
    mutation: Mutation,
    names: dict[str, str] | None = None,
    root_folder_id: str = ROOT_FOLDER_ID,
) -> list[CaseFileItemEvent]:
    """Events for one committed mutation. ``names`` maps related object ids to names."""
    names = names or {}
    rec = mutation.record
    case = rec.case_root_id
    token = mutation.tokens[-1] if mutation.tokens else None

    def ev(kind, item, related=None, name=None):
        return CaseFileItemEvent(kind, case, item, related, token, names.get(item, "") if name is None else name)

    op = mutation.op
    if op == "create":
        if rec.is_relationship:
            return [
                ev(EventKind.ADD_REFERENCE, mutation.source_id, rec.object_id),
                ev(EventKind.ADD_REFERENCE, mutation.target_id, rec.object_id),
            ]
        return [ev(EventKind.CREATE, rec.object_id, name=rec.name)] + [
            ev(EventKind.ADD_CHILD, p, rec.object_id) for p in rec.parent_ids if p != root_folder_id
        ]
    if op == "update":
        return [] if rec.is_relationship else [ev(EventKind.UPDATE, rec.object_id, name=rec.name)]
    if op in ("file", "unfile"):
        events = [ev(EventKind.UPDATE, rec.object_id, name=rec.name)]
        if mutation.folder_id != root_folder_id:
            kind = EventKind.ADD_CHILD if op == "file" else EventKind.REMOVE_CHILD
            events.append(ev(kind, mutation.folder_id, rec.object_id))
        return events
    if op == "delete":
        if rec.is_relationship:
            return [
                ev(EventKind.REMOVE_REFERENCE, mutation.source_id, rec.object_id),
                ev(EventKind.REMOVE_REFERENCE, mutation.target_id, rec.object_id),
            ]
        return [ev(EventKind.DELETE, rec.object_id, name=rec.name)] + [
            ev(EventKind.REMOVE_CHILD, p, rec.object_id) for p in rec.parent_ids if p != root_folder_id
        ]
    if op == "checkin":
        return [ev(EventKind.REPLACE, rec.object_id, mutation.previous.object_id, name=rec.name)]
    if op == "acl":
        logger.debug("security change on %s has no case-file event", rec.object_id)
        return []
    raise InvalidArgumentError(f"unknown mutation op {op!r}")


def attach_push(repo: Repository, handler: Callable[[CaseFileItemEvent], None]) -> Callable[[Mutation], None]:
    """Feed every mutation of ``repo`` through ``map_push_event`` into ``handler``."""

    def listener(mutation: Mutation):
        rec = mutation.record
        related = [*rec.parent_ids, mutation.folder_id, mutation.source_id, mutation.target_id]
        names = {}
        for oid in related:
            if oid and oid not in names:
                try:
                    names[oid] = repo.get_object(oid).name
                except Exception:
                    names[oid] = ""
        for event in map_push_event(mutation, names, repo.root_folder_id):
            handler(event)

    repo.add_listener(listener)
    return listener


# -- integration mode --------------------------------------------------------


@dataclass
class ShadowEntry:
    name: str
    base_type: BaseType
    parent_ids: tuple[str, ...] = ()
    source_id: str | None = None
    target_id: str | None = None
    case_id: str | None = None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "baseType": self.base_type.value,
            "parentIds": list(self.parent_ids),
            "sourceId": self.source_id,
            "targetId": self.target_id,
            "caseId": self.case_id,
        }

    @classmethod
    def from_json(cls, data: dict) -> ShadowEntry:
        return cls(
            name=data["name"],
            base_type=BaseType(data["baseType"]),
            parent_ids=tuple(data.get("parentIds", ())),
            source_id=data.get("sourceId"),
            target_id=data.get("targetId"),
            case_id=data.get("caseId"),
        )


@dataclass
class ShadowIndex:
    """Last-known shape of every object seen in the change log.

    ``aliases`` maps superseded version ids to their replacements, ``pending``
    holds a DELETED change that may still pair with a following CREATED.
    """

    root_folder_id: str = ROOT_FOLDER_ID
    entries: dict[str, ShadowEntry] = field(default_factory=dict)
    aliases: dict[str, str] = field(default_factory=dict)
    last_token: int = 0
    pending: ChangeEvent | None = None
    skipped: int = 0

    def resolve(self, object_id: str | None) -> str | None:
        seen = set()
        while object_id in self.aliases and object_id not in seen:
            seen.add(object_id)
            object_id = self.aliases[object_id]
        return object_id

    def name_of(self, object_id: str | None) -> str:
        entry = self.entries.get(object_id) if object_id else None
        return entry.name if entry else ""

    def case_of(self, object_id: str | None) -> str | None:
        entry = self.entries.get(self.resolve(object_id)) if object_id else None
        return entry.case_id if entry else None

    def to_json(self) -> dict:
        return {
            "rootFolderId": self.root_folder_id,
            "entries": {k: v.to_json() for k, v in self.entries.items()},
            "aliases": dict(self.aliases),
            "lastToken": self.last_token,
            "pending": self.pending.to_json() if self.pending else None,
            "skipped": self.skipped,
        }

    @classmethod
    def from_json(cls, data: dict) -> ShadowIndex:
        return cls(
            root_folder_id=data.get("rootFolderId", ROOT_FOLDER_ID),
            entries={k: ShadowEntry.from_json(v) for k, v in data.get("entries", {}).items()},
            aliases=dict(data.get("aliases", {})),
            last_token=int(data.get("lastToken", 0)),
            pending=ChangeEvent.from_json(data["pending"]) if data.get("pending") else None,
            skipped=int(data.get("skipped", 0)),
        )


def derive_events(
    changes: Iterable[ChangeEvent],
    shadow: ShadowIndex,
    flush: bool = False,
) -> list[CaseFileItemEvent]:
    """Map polled change-log entries onto CaseFileItem events, updating ``shadow``.

    Entries at or below ``shadow.last_token`` are ignored, so re-polled batches
    never produce events twice. A non-relationship DELETED is held back until
    the next entry arrives (or ``flush`` is set) because a DELETED immediately
    followed by the CREATED of its new version is a single replace.
    """
    out: list[CaseFileItemEvent] = []
    for change in changes:
        if change.token <= shadow.last_token:
            continue
        shadow.last_token = change.token
        held = shadow.pending
        if held is not None:
            shadow.pending = None
            if _is_replace_pair(held, change):
                out.append(_replace(held, change, shadow))
                continue
            out.extend(_derive_one(held, shadow))
        if change.change_type is ChangeType.DELETED and change.base_type is not BaseType.RELATIONSHIP:
            shadow.pending = change
            continue
        out.extend(_derive_one(change, shadow))
    if flush and shadow.pending is not None:
        held, shadow.pending = shadow.pending, None
        out.extend(_derive_one(held, shadow))
    return out


def _is_replace_pair(deleted: ChangeEvent, created: ChangeEvent) -> bool:
    if created.change_type is not ChangeType.CREATED or created.base_type is not deleted.base_type:
        return False
    if deleted.version_series_id and created.version_series_id:
        return deleted.version_series_id == created.version_series_id
    # best effort for feeds without series ids
    return deleted.name == created.name and set(deleted.parent_ids) == set(created.parent_ids)


def _replace(deleted: ChangeEvent, created: ChangeEvent, shadow: ShadowIndex) -> CaseFileItemEvent:
    old = shadow.entries.pop(deleted.object_id, None)
    case_id = old.case_id if old else _case_for_new(created, shadow)
    shadow.entries[created.object_id] = ShadowEntry(
        created.name, created.base_type, tuple(created.parent_ids), case_id=case_id
    )
    shadow.aliases[deleted.object_id] = created.object_id
    return CaseFileItemEvent(
        EventKind.REPLACE, case_id, created.object_id, deleted.object_id, created.token, created.name
    )


def _case_for_new(change: ChangeEvent, shadow: ShadowIndex) -> str | None:
    if change.base_type is BaseType.RELATIONSHIP:
        return shadow.case_of(change.source_id)
    if change.base_type is BaseType.FOLDER and not change.parent_ids:
        return change.object_id
    for pid in change.parent_ids:
        if pid in shadow.entries:
            return shadow.entries[pid].case_id
    return None


def _derive_one(change: ChangeEvent, shadow: ShadowIndex) -> list[CaseFileItemEvent]:
    root = shadow.root_folder_id
    oid, token = change.object_id, change.token
    is_rel = change.base_type is BaseType.RELATIONSHIP

    if change.change_type is ChangeType.SECURITY:
        logger.debug("security change on %s has no case-file event", oid)
        return []

    if change.change_type is ChangeType.CREATED:
        case_id = _case_for_new(change, shadow)
        shadow.entries[oid] = ShadowEntry(
            change.name, change.base_type, tuple(change.parent_ids), change.source_id, change.target_id, case_id
        )
        if is_rel:
            return _reference_events(EventKind.ADD_REFERENCE, change, case_id, shadow)
        return [CaseFileItemEvent(EventKind.CREATE, case_id, oid, None, token, change.name)] + [
            CaseFileItemEvent(EventKind.ADD_CHILD, case_id, p, oid, token, shadow.name_of(p))
            for p in change.parent_ids
            if p != root
        ]

    entry = shadow.entries.get(oid)
    if entry is None:
        shadow.skipped += 1
        logger.warning("no shadow entry for %s at token %s; %s skipped", oid, token, change.change_type.value)
        return []

    if change.change_type is ChangeType.UPDATED:
        before, after = entry.parent_ids, tuple(change.parent_ids)
        entry.parent_ids, entry.name = after, change.name
        if is_rel:
            return []
        events = [CaseFileItemEvent(EventKind.UPDATE, entry.case_id, oid, None, token, change.name)]
        events += [
            CaseFileItemEvent(EventKind.ADD_CHILD, entry.case_id, p, oid, token, shadow.name_of(p))
            for p in after
            if p not in before and p != root
        ]
        events += [
            CaseFileItemEvent(EventKind.REMOVE_CHILD, entry.case_id, p, oid, token, shadow.name_of(p))
            for p in before
            if p not in after and p != root
        ]
        return events

    # DELETED
    del shadow.entries[oid]
    if is_rel:
        return _reference_events(EventKind.REMOVE_REFERENCE, change, entry.case_id, shadow, entry)
    parents = change.parent_ids or entry.parent_ids
    return [CaseFileItemEvent(EventKind.DELETE, entry.case_id, oid, None, token, change.name)] + [
        CaseFileItemEvent(EventKind.REMOVE_CHILD, entry.case_id, p, oid, token, shadow.name_of(p))
        for p in parents
        if p != root
    ]


def _reference_events(kind, change: ChangeEvent, case_id, shadow: ShadowIndex, entry: ShadowEntry | None = None):
    source = shadow.resolve(change.source_id or (entry.source_id if entry else None))
    target = shadow.resolve(change.target_id or (entry.target_id if entry else None))
    return [
        CaseFileItemEvent(kind, case_id, source, change.object_id, change.token, shadow.name_of(source)),
        CaseFileItemEvent(kind, case_id, target, change.object_id, change.token, shadow.name_of(target)),
    ]


# -- onPart subscriptions ----------------------------------------------------


Sink = Callable[[CaseFileItemEvent], None]


@dataclass
class OnPartSubscription:
    """Fires ``sink`` for events of ``kinds`` on the selected item.

    ``selector`` is an item name or object id; None matches every item.
    ``case_id`` None matches every case.
    """

    kinds: frozenset
    sink: Sink
    case_id: str | None = None
    selector: str | None = None
    subscription_id: str = ""

    def __post_init__(self):
        self.kinds = frozenset(EventKind(k) for k in self.kinds)
        if not self.kinds:
            raise InvalidArgumentError("a subscription needs at least one event kind")

    def matches(self, event: CaseFileItemEvent) -> bool:
        if event.kind not in self.kinds:
            return False
        if self.case_id is not None and self.case_id != event.case_id:
            return False
        return self.selector is None or self.selector in (event.item_object_id, event.item_name)


class EventDispatcher:
    """Delivers events to subscriptions in registration order, one event at a time.

    Events dispatched while a delivery is in progress (from a sink, or from
    another thread) are queued and delivered by the thread already draining.
    """

    def __init__(self, strict: bool = False):
        self.strict = strict
        self._subs: dict[str, OnPartSubscription] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._drain_lock = threading.Lock()
        self._queue: deque[CaseFileItemEvent] = deque()
        self._states: dict[str, LifecycleState] = {}
        self.failures: list[tuple[CaseFileItemEvent, BaseException]] = []

    def subscribe(self, sub: OnPartSubscription) -> str:
        with self._lock:
            if not sub.subscription_id:
                sub.subscription_id = f"sub-{next(self._ids)}"
            self._subs[sub.subscription_id] = sub
            return sub.subscription_id

    def unsubscribe(self, subscription_id: str) -> None:
        with self._lock:
            if self._subs.pop(subscription_id, None) is None:
                logger.warning("unsubscribe: no subscription %r", subscription_id)

    def state_of(self, object_id: str) -> LifecycleState | None:
        with self._lock:
            return self._states.get(object_id)

    def dispatch(self, event: CaseFileItemEvent) -> None:
        with self._lock:
            self._queue.append(event)
        errors: list[InvalidTransitionError] = []
        while self._queue and self._drain_lock.acquire(blocking=False):
            try:
                while True:
                    with self._lock:
                        if not self._queue:
                            break
                        current = self._queue.popleft()
                    try:
                        self._deliver(current)
                    except InvalidTransitionError as exc:
                        errors.append(exc)
            finally:
                self._drain_lock.release()
        if errors:
            raise errors[0]

    def _deliver(self, event: CaseFileItemEvent):
        with self._lock:
            self._advance(event)
            targets = [s for s in self._subs.values() if s.matches(event)]
            if event.kind is EventKind.REPLACE and event.related_object_id:
                for sub in self._subs.values():
                    if sub.selector == event.related_object_id:
                        sub.selector = event.item_object_id
        for sub in targets:
            try:
                sub.sink(event)
            except Exception as exc:
                logger.exception("onPart sink %s failed", sub.subscription_id)
                self.failures.append((event, exc))

    def _advance(self, event: CaseFileItemEvent):
        key = event.item_object_id
        if event.kind is EventKind.REPLACE:
            prior = self._states.pop(event.related_object_id, None) if event.related_object_id else None
            current = prior if prior is not None else self._states.get(key, LifecycleState.AVAILABLE)
        else:
            current = self._states.get(key)
            if current is None and event.kind is not EventKind.CREATE and not self.strict:
                # joined the stream after this item was created
                current = LifecycleState.AVAILABLE
        self._states[key] = apply_transition(current, event.kind)
