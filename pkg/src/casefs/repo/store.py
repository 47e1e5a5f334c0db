"""In-process content repository with an append-only change log.

All mutations go through one re-entrant lock. Each mutation appends one or
more ``ChangeEvent`` entries, writes the matching journal line (event plus
full object snapshot) and then notifies listeners with a ``Mutation``.
"""

from __future__ import annotations

import bisect
import json
import logging
import os
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Iterator

from casefs.errors import (
    BaseTypeMismatchError,
    ConflictError,
    DanglingEndpointError,
    DuplicatePropertyError,
    DuplicateTypeError,
    FilingError,
    FolderNotEmptyError,
    InvalidArgumentError,
    MissingPropertyError,
    NameConflictError,
    NotAFolderError,
    NotFoundError,
    TypeNotFoundError,
    UnknownPropertyError,
    VersioningError,
)
from casefs.repo.types import (
    Ace,
    BaseType,
    Cardinality,
    ChangeEvent,
    ChangeType,
    ContentStream,
    DataKind,
    ObjectRecord,
    PropertyDefinition,
    PropertyValue,
    TypeDefinition,
    utc_now,
)

logger = logging.getLogger(__name__)

ROOT_FOLDER_ID = "root"
OBJECT_ID_PREFIX = "obj-"
SECONDARY_TYPES_PROPERTY = "secondaryTypeIds"
DESCRIPTION_PROPERTY = "cmis:description"

_COMMON_PROPERTIES = (
    PropertyDefinition(DESCRIPTION_PROPERTY, DataKind.STRING),
    PropertyDefinition(SECONDARY_TYPES_PROPERTY, DataKind.ID, Cardinality.MULTI),
)

BASE_TYPE_DEFINITIONS = tuple(
    TypeDefinition(
        type_id=base.value,
        base_type=base,
        display_name=base.value.split(":")[1].capitalize(),
        property_defs=() if base is BaseType.SECONDARY else _COMMON_PROPERTIES,
    )
    for base in BaseType
)


@dataclass(frozen=True)
class Mutation:
    """What a committed operation did, as seen by push-mode listeners.

    ``record`` is the object after the operation (before it, for deletes).
    ``previous`` is the superseded version for checkins. ``folder_id`` is the
    folder touched by file/unfile. ``source_id``/``target_id`` are relationship
    endpoints resolved to their latest versions.
    """

    op: str
    record: ObjectRecord
    previous: ObjectRecord | None = None
    folder_id: str | None = None
    source_id: str | None = None
    target_id: str | None = None
    tokens: tuple[int, ...] = ()


Listener = Callable[[Mutation], None]


class Repository:
    """The embedded repository. Pass ``journal_path`` to persist and replay."""

    def __init__(
        self,
        journal_path: str | os.PathLike | None = None,
        repository_id: str = "casefs",
        principal: str = "system",
        fsync: bool = False,
    ):
        self.repository_id = repository_id
        self.principal = principal
        self._fsync = fsync
        self._lock = threading.RLock()
        self._types: dict[str, TypeDefinition] = {}
        self._objects: dict[str, ObjectRecord] = {}
        self._children: dict[str, list[str]] = {}
        self._series: dict[str, list[str]] = {}
        self._index_counters: dict[tuple[str, str], int] = {}
        self._log: list[ChangeEvent] = []
        self._tokens: list[int] = []
        self._journal: list[dict] = []
        self._listeners: list[Listener] = []
        self._next_id = 1
        self._journal_file = None

        for tdef in BASE_TYPE_DEFINITIONS:
            self._types[tdef.type_id] = tdef
        root = ObjectRecord(
            object_id=ROOT_FOLDER_ID,
            type_id=BaseType.FOLDER.value,
            base_type=BaseType.FOLDER,
            name="/",
            version_series_id=ROOT_FOLDER_ID,
        )
        self._objects[ROOT_FOLDER_ID] = root
        self._children[ROOT_FOLDER_ID] = []
        self._series[ROOT_FOLDER_ID] = [ROOT_FOLDER_ID]

        self.journal_path = Path(journal_path) if journal_path is not None else None
        if self.journal_path is not None:
            if self.journal_path.exists():
                with open(self.journal_path, encoding="utf-8") as fh:
                    self._replay(json.loads(line) for line in fh if line.strip())
            self._journal_file = open(self.journal_path, "a", encoding="utf-8")

    @classmethod
    def from_journal(cls, entries: Iterable[dict], **kwargs) -> Repository:
        """Build a fresh in-memory repository by replaying journal entries."""
        repo = cls(**kwargs)
        repo._replay(entries)
        return repo

    def close(self):
        with self._lock:
            if self._journal_file is not None:
                self._journal_file.close()
                self._journal_file = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- listeners -----------------------------------------------------------

    def add_listener(self, listener: Listener) -> None:
        with self._lock:
            self._listeners.append(listener)

    def remove_listener(self, listener: Listener) -> None:
        with self._lock:
            if listener in self._listeners:
                self._listeners.remove(listener)

    # -- repository / type services -------------------------------------------

    @property
    def root_folder_id(self) -> str:
        return ROOT_FOLDER_ID

    @property
    def latest_token(self) -> int:
        with self._lock:
            return self._tokens[-1] if self._tokens else 0

    def repository_info(self) -> dict:
        return {
            "repositoryId": self.repository_id,
            "rootFolderId": ROOT_FOLDER_ID,
            "latestChangeLogToken": self.latest_token,
        }

    def create_type(self, definition: TypeDefinition) -> str:
        with self._lock:
            definition = self._validate_type(definition)
            self._types[definition.type_id] = definition
            self._write_journal({"type": definition.to_json()})
            return definition.type_id

    def get_type(self, type_id: str) -> TypeDefinition:
        with self._lock:
            try:
                return self._types[type_id]
            except KeyError:
                raise TypeNotFoundError(f"unknown type {type_id!r}") from None

    def list_types(self) -> list[TypeDefinition]:
        with self._lock:
            return list(self._types.values())

    def effective_property_defs(self, type_id: str) -> dict[str, PropertyDefinition]:
        """Own plus inherited property definitions, root-most first."""
        with self._lock:
            chain = []
            tdef = self.get_type(type_id)
            while tdef is not None:
                chain.append(tdef)
                tdef = self._types.get(tdef.parent_type_id) if tdef.parent_type_id else None
            defs: dict[str, PropertyDefinition] = {}
            for t in reversed(chain):
                for pdef in t.property_defs:
                    defs[pdef.property_id] = pdef
            return defs

    def _validate_type(self, definition: TypeDefinition):
        if not definition.type_id:
            raise InvalidArgumentError("type id must be non-empty")
        if definition.type_id in self._types:
            raise DuplicateTypeError(f"type {definition.type_id!r} already exists")
        parent_id = definition.parent_type_id or definition.base_type.value
        parent = self._types.get(parent_id)
        if parent is None:
            raise InvalidArgumentError(f"unknown parent type {parent_id!r}")
        if parent.base_type is not definition.base_type:
            raise BaseTypeMismatchError(
                f"type {definition.type_id!r} has base {definition.base_type.value} "
                f"but parent {parent_id!r} has base {parent.base_type.value}"
            )
        inherited = self.effective_property_defs(parent_id)
        own: set[str] = set()
        for pdef in definition.property_defs:
            if pdef.property_id in own or pdef.property_id in inherited:
                raise DuplicatePropertyError(
                    f"property {pdef.property_id!r} already defined for {definition.type_id!r}"
                )
            own.add(pdef.property_id)
        return replace(definition, parent_type_id=parent_id)

    # -- reads ---------------------------------------------------------------

    def get_object(self, object_id: str) -> ObjectRecord:
        with self._lock:
            return self._live(object_id).copy()

    def get_latest_version(self, object_id: str) -> ObjectRecord:
        with self._lock:
            return self._latest_of(self._live(object_id)).copy()

    def get_children(self, folder_id: str) -> list[ObjectRecord]:
        with self._lock:
            folder = self._live(folder_id)
            if not folder.is_folder:
                raise NotAFolderError(f"{folder_id} is not a folder")
            return [self._objects[cid].copy() for cid in self._children[folder_id]]

    def get_relationships(self, object_id: str, direction: str = "either") -> list[ObjectRecord]:
        """Live relationships whose source and/or target is any version of the object's series."""
        if direction not in ("source", "target", "either"):
            raise InvalidArgumentError(f"bad direction {direction!r}")
        with self._lock:
            series = self._live(object_id).version_series_id
            found = []
            for rec in self._objects.values():
                if not rec.is_relationship:
                    continue
                as_source = self._series_of(rec.source_id) == series
                as_target = self._series_of(rec.target_id) == series
                if (
                    (direction == "source" and as_source)
                    or (direction == "target" and as_target)
                    or (direction == "either" and (as_source or as_target))
                ):
                    found.append(rec.copy())
            return found

    def get_content_stream(self, object_id: str) -> ContentStream | None:
        with self._lock:
            return self._live(object_id).content

    def list_case_roots(self) -> list[ObjectRecord]:
        """Parentless folders other than the repository root; each is a case file."""
        with self._lock:
            return [
                rec.copy()
                for rec in self._objects.values()
                if rec.is_folder and not rec.parent_ids and rec.object_id != ROOT_FOLDER_ID
            ]

    def objects(self, include_old_versions: bool = False) -> Iterator[ObjectRecord]:
        with self._lock:
            records = [
                rec.copy()
                for rec in self._objects.values()
                if rec.object_id != ROOT_FOLDER_ID and (include_old_versions or rec.is_latest_version)
            ]
        return iter(records)

    # -- change log ----------------------------------------------------------

    def get_content_changes(self, from_token: int = 0, max_items: int = 100) -> tuple[list[ChangeEvent], int]:
        if from_token < 0:
            raise InvalidArgumentError("token must be non-negative")
        if max_items < 1:
            raise InvalidArgumentError("max must be positive")
        with self._lock:
            start = bisect.bisect_right(self._tokens, from_token)
            batch = self._log[start : start + max_items]
        return batch, (batch[-1].token if batch else from_token)

    def journal_entries(self) -> list[dict]:
        with self._lock:
            return json.loads(json.dumps(self._journal))

    # -- object services -----------------------------------------------------

    def create_object(
        self,
        type_id: str,
        name: str,
        properties: dict | None = None,
        parent_id: str | None = None,
        content: ContentStream | None = None,
        source_id: str | None = None,
        target_id: str | None = None,
        principal: str | None = None,
    ) -> ObjectRecord:
        principal = principal or self.principal
        with self._lock:
            tdef = self._types.get(type_id)
            if tdef is None:
                raise InvalidArgumentError(f"unknown type {type_id!r}")
            base = tdef.base_type
            if base is BaseType.SECONDARY:
                raise InvalidArgumentError(f"secondary type {type_id!r} is not creatable")
            if not isinstance(name, str) or not name:
                raise InvalidArgumentError("name must be a non-empty string")
            if content is not None and base is not BaseType.DOCUMENT:
                raise InvalidArgumentError("only documents carry a content stream")
            props = self._build_properties(type_id, properties or {})

            rec = ObjectRecord(
                object_id=self._new_id(),
                type_id=type_id,
                base_type=base,
                name=name,
                properties=props,
                content=content,
                created_by=principal,
                last_modified_by=principal,
            )
            rec.version_series_id = rec.object_id
            if rec.creation_date != rec.last_modification_date:
                rec.last_modification_date = rec.creation_date

            if base is BaseType.RELATIONSHIP:
                if parent_id is not None:
                    raise InvalidArgumentError("relationships cannot be filed")
                source = self._endpoint(source_id, "source")
                target = self._endpoint(target_id, "target")
                rec.source_id, rec.target_id = source.object_id, target.object_id
                rec.case_root_id = source.case_root_id
            else:
                if source_id is not None or target_id is not None:
                    raise InvalidArgumentError("only relationships have source/target")
                if parent_id is not None:
                    parent = self._folder(parent_id)
                    rec.parent_ids = [parent.object_id]
                    rec.case_root_id = parent.case_root_id
                elif base is BaseType.FOLDER:
                    rec.case_root_id = rec.object_id

            if rec.case_root_id is not None and rec.case_root_id != rec.object_id:
                key = (rec.case_root_id, name)
                rec.case_index = self._index_counters.get(key, 0)
            for pid in rec.parent_ids:
                self._check_sibling_name(pid, rec)

            if rec.case_root_id is not None and rec.case_root_id != rec.object_id:
                self._index_counters[(rec.case_root_id, name)] = rec.case_index + 1
            self._install(rec)
            token = self._append(ChangeType.CREATED, rec, rec.parent_ids)
            self._notify(
                Mutation(
                    "create",
                    rec.copy(),
                    source_id=self._latest_id(rec.source_id),
                    target_id=self._latest_id(rec.target_id),
                    tokens=(token,),
                )
            )
            return rec.copy()

    def update_properties(self, object_id: str, patch: dict, principal: str | None = None) -> ObjectRecord:
        with self._lock:
            rec = self._mutable(object_id)
            defs = self._allowed_defs(rec.type_id, patch.get(SECONDARY_TYPES_PROPERTY, _UNSET), rec)
            new_props = dict(rec.properties)
            for pid, raw in patch.items():
                pdef = defs.get(pid)
                if pdef is None:
                    raise UnknownPropertyError(f"{rec.type_id} has no property {pid!r}")
                if raw is None:
                    if pdef.required:
                        raise MissingPropertyError(f"required property {pid!r} cannot be removed")
                    new_props.pop(pid, None)
                else:
                    new_props[pid] = pdef.coerce(raw)
            self._check_secondary_ids(rec.type_id, new_props)
            rec = replace(rec, properties=new_props)
            return self._commit_update(rec, principal, "update")

    def set_content_stream(self, object_id: str, content: ContentStream | None, principal: str | None = None) -> ObjectRecord:
        with self._lock:
            rec = self._mutable(object_id)
            if rec.base_type is not BaseType.DOCUMENT:
                raise InvalidArgumentError("only documents carry a content stream")
            rec = replace(rec, content=content)
            return self._commit_update(rec, principal, "update")

    def file_in(self, object_id: str, folder_id: str, principal: str | None = None) -> ObjectRecord:
        with self._lock:
            rec = self._mutable(object_id)
            folder = self._folder(folder_id)
            if rec.is_relationship:
                raise FilingError("relationships cannot be filed")
            if rec.is_folder:
                raise FilingError("folders cannot be multi-filed")
            if folder_id in rec.parent_ids:
                raise FilingError(f"{object_id} is already filed in {folder_id}")
            if folder.case_root_id != rec.case_root_id:
                raise FilingError(f"{folder_id} belongs to a different case than {object_id}")
            self._check_sibling_name(folder_id, rec)
            rec = replace(rec, parent_ids=[*rec.parent_ids, folder_id])
            return self._commit_update(rec, principal, "file", folder_id=folder_id)

    def unfile(self, object_id: str, folder_id: str, principal: str | None = None) -> ObjectRecord:
        with self._lock:
            rec = self._mutable(object_id)
            if rec.is_folder:
                raise FilingError("folders cannot be unfiled")
            if folder_id not in rec.parent_ids:
                raise FilingError(f"{object_id} is not filed in {folder_id}")
            rec = replace(rec, parent_ids=[p for p in rec.parent_ids if p != folder_id])
            return self._commit_update(rec, principal, "unfile", folder_id=folder_id)

    def apply_acl(self, object_id: str, acl: list[Ace], principal: str | None = None) -> ObjectRecord:
        with self._lock:
            rec = self._mutable(object_id)
            acl = [a if isinstance(a, Ace) else Ace.from_json(a) for a in acl]
            rec = replace(rec, acl=acl, last_modified_by=principal or self.principal)
            rec.last_modification_date = max(utc_now(), rec.last_modification_date)
            self._install(rec)
            token = self._append(ChangeType.SECURITY, rec, rec.parent_ids)
            self._notify(Mutation("acl", rec.copy(), tokens=(token,)))
            return rec.copy()

    def delete_object(self, object_id: str, principal: str | None = None) -> None:
        with self._lock:
            if object_id == ROOT_FOLDER_ID:
                raise ConflictError("the root folder cannot be deleted")
            rec = self._mutable(object_id)
            if rec.is_folder and self._children[object_id]:
                raise FolderNotEmptyError(f"folder {object_id} is not empty")
            if not rec.is_relationship:
                for rel in self.get_relationships(object_id):
                    self._delete_one(self._objects[rel.object_id])
            self._delete_one(rec)

    def checkin(
        self,
        object_id: str,
        content: ContentStream | None = None,
        patch: dict | None = None,
        principal: str | None = None,
    ) -> ObjectRecord:
        """Install a new major version; the old one stays readable but unfiled."""
        principal = principal or self.principal
        with self._lock:
            old = self._live(object_id)
            if old.base_type is not BaseType.DOCUMENT:
                raise VersioningError(f"{object_id} is not a document")
            if not old.is_latest_version:
                raise VersioningError(f"{object_id} is not the latest version")
            props = dict(old.properties)
            if patch:
                defs = self._allowed_defs(old.type_id, patch.get(SECONDARY_TYPES_PROPERTY, _UNSET), old)
                for pid, raw in patch.items():
                    pdef = defs.get(pid)
                    if pdef is None:
                        raise UnknownPropertyError(f"{old.type_id} has no property {pid!r}")
                    if raw is None:
                        if pdef.required:
                            raise MissingPropertyError(f"required property {pid!r} cannot be removed")
                        props.pop(pid, None)
                    else:
                        props[pid] = pdef.coerce(raw)
                self._check_secondary_ids(old.type_id, props)
            major = int(old.version_label.split(".")[0])
            now = utc_now()
            new = replace(
                old.copy(),
                object_id=self._new_id(),
                properties=props,
                content=content if content is not None else old.content,
                version_label=f"{major + 1}.0",
                is_latest_version=True,
                created_by=principal,
                last_modified_by=principal,
                creation_date=now,
                last_modification_date=now,
            )
            former_parents = list(old.parent_ids)
            superseded = replace(old.copy(), is_latest_version=False, parent_ids=[])
            self._install(superseded)
            t1 = self._append(ChangeType.DELETED, superseded, former_parents)
            self._install(new)
            t2 = self._append(ChangeType.CREATED, new, new.parent_ids)
            self._notify(Mutation("checkin", new.copy(), previous=superseded.copy(), tokens=(t1, t2)))
            return new.copy()

    # -- internals -----------------------------------------------------------

    def _new_id(self) -> str:
        oid = f"{OBJECT_ID_PREFIX}{self._next_id}"
        self._next_id += 1
        return oid

    def _live(self, object_id: str) -> ObjectRecord:
        rec = self._objects.get(object_id)
        if rec is None:
            raise NotFoundError(f"object {object_id!r} not found")
        return rec

    def _mutable(self, object_id: str) -> ObjectRecord:
        rec = self._live(object_id)
        if object_id == ROOT_FOLDER_ID:
            raise ConflictError("the root folder is read-only")
        if not rec.is_latest_version:
            raise VersioningError(f"{object_id} is an old version and cannot be modified")
        return rec

    def _folder(self, folder_id: str) -> ObjectRecord:
        rec = self._live(folder_id)
        if not rec.is_folder:
            raise NotAFolderError(f"{folder_id} is not a folder")
        return rec

    def _endpoint(self, object_id: str | None, role: str) -> ObjectRecord:
        rec = self._objects.get(object_id) if object_id else None
        if rec is None:
            raise DanglingEndpointError(f"relationship {role} {object_id!r} does not exist")
        if rec.is_relationship or object_id == ROOT_FOLDER_ID:
            raise DanglingEndpointError(f"relationship {role} {object_id!r} is not a valid endpoint")
        if not rec.is_latest_version:
            raise DanglingEndpointError(f"relationship {role} {object_id!r} is an old version")
        return rec

    def _series_of(self, object_id: str | None) -> str | None:
        rec = self._objects.get(object_id) if object_id else None
        return rec.version_series_id if rec is not None else None

    def _latest_of(self, rec: ObjectRecord) -> ObjectRecord:
        return self._objects[self._series[rec.version_series_id][-1]]

    def _latest_id(self, object_id: str | None) -> str | None:
        rec = self._objects.get(object_id) if object_id else None
        return self._latest_of(rec).object_id if rec is not None else None

    def _check_sibling_name(self, folder_id: str, rec: ObjectRecord):
        for cid in self._children[folder_id]:
            sib = self._objects[cid]
            if cid != rec.object_id and sib.name == rec.name and sib.case_index == rec.case_index:
                raise NameConflictError(f"{folder_id} already holds {rec.name!r} (index {rec.case_index})")

    def _allowed_defs(self, type_id: str, secondary_ids, current: ObjectRecord | None = None):
        defs = dict(self.effective_property_defs(type_id))
        if secondary_ids is _UNSET:
            pv = current.properties.get(SECONDARY_TYPES_PROPERTY) if current else None
            secondary_ids = list(pv.value) if pv else []
        elif isinstance(secondary_ids, PropertyValue):
            secondary_ids = list(secondary_ids.value)
        for sid in secondary_ids or []:
            sdef = self._types.get(sid) if isinstance(sid, str) else None
            if sdef is not None and sdef.base_type is BaseType.SECONDARY:
                defs.update(self.effective_property_defs(sid))
        return defs

    def _check_secondary_ids(self, type_id: str, props: dict[str, PropertyValue]):
        pv = props.get(SECONDARY_TYPES_PROPERTY)
        for sid in pv.value if pv else ():
            sdef = self._types.get(sid)
            if sdef is None or sdef.base_type is not BaseType.SECONDARY:
                raise InvalidArgumentError(f"{sid!r} is not a secondary type")
        allowed = self._allowed_defs(type_id, pv)
        for pid in props:
            if pid not in allowed:
                raise UnknownPropertyError(f"property {pid!r} is not allowed on {type_id} with these secondary types")

    def _build_properties(self, type_id: str, raw: dict) -> dict[str, PropertyValue]:
        defs = self._allowed_defs(type_id, raw.get(SECONDARY_TYPES_PROPERTY, []))
        props: dict[str, PropertyValue] = {}
        for pid, value in raw.items():
            pdef = defs.get(pid)
            if pdef is None:
                raise UnknownPropertyError(f"{type_id} has no property {pid!r}")
            if value is not None:
                props[pid] = pdef.coerce(value)
        for pid, pdef in defs.items():
            if pid in props:
                continue
            if pdef.default is not None:
                props[pid] = pdef.coerce(pdef.default)
            elif pdef.required:
                raise MissingPropertyError(f"required property {pid!r} missing for {type_id}")
        self._check_secondary_ids(type_id, props)
        return props

    def _commit_update(self, rec: ObjectRecord, principal, op: str, folder_id: str | None = None):
        rec.last_modified_by = principal or self.principal
        rec.last_modification_date = max(utc_now(), rec.last_modification_date)
        self._install(rec)
        token = self._append(ChangeType.UPDATED, rec, rec.parent_ids)
        self._notify(Mutation(op, rec.copy(), folder_id=folder_id, tokens=(token,)))
        return rec.copy()

    def _delete_one(self, rec: ObjectRecord):
        snapshot = rec.copy()
        self._remove_series(rec)
        token = self._append(ChangeType.DELETED, snapshot, snapshot.parent_ids)
        self._notify(
            Mutation(
                "delete",
                snapshot,
                source_id=self._latest_id(snapshot.source_id) or snapshot.source_id,
                target_id=self._latest_id(snapshot.target_id) or snapshot.target_id,
                tokens=(token,),
            )
        )

    def _install(self, rec: ObjectRecord):
        """Put ``rec`` into the store, keeping the filing and series indexes in sync."""
        old = self._objects.get(rec.object_id)
        old_parents = old.parent_ids if old is not None else []
        for pid in old_parents:
            if pid not in rec.parent_ids:
                self._children[pid].remove(rec.object_id)
        for pid in rec.parent_ids:
            if pid not in old_parents:
                self._children[pid].append(rec.object_id)
        self._objects[rec.object_id] = rec
        if rec.is_folder:
            self._children.setdefault(rec.object_id, [])
        series = self._series.setdefault(rec.version_series_id, [])
        if rec.object_id not in series:
            series.append(rec.object_id)

    def _remove_series(self, rec: ObjectRecord):
        for oid in self._series.pop(rec.version_series_id, [rec.object_id]):
            gone = self._objects.pop(oid, None)
            if gone is None:
                continue
            for pid in gone.parent_ids:
                if oid in self._children.get(pid, ()):
                    self._children[pid].remove(oid)
            self._children.pop(oid, None)

    def _append(self, change_type: ChangeType, rec: ObjectRecord, parents) -> int:
        token = (self._tokens[-1] if self._tokens else 0) + 1
        event = ChangeEvent(
            token=token,
            change_type=change_type,
            object_id=rec.object_id,
            base_type=rec.base_type,
            name=rec.name,
            parent_ids=tuple(parents),
            source_id=rec.source_id,
            target_id=rec.target_id,
            timestamp=utc_now(),
            version_series_id=rec.version_series_id,
        )
        self._log.append(event)
        self._tokens.append(token)
        self._write_journal({"change": event.to_json(), "object": rec.to_json()})
        return token

    def _write_journal(self, entry: dict):
        self._journal.append(entry)
        if self._journal_file is not None:
            self._journal_file.write(json.dumps(entry, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n")
            self._journal_file.flush()
            if self._fsync:
                os.fsync(self._journal_file.fileno())

    def _notify(self, mutation: Mutation):
        for listener in list(self._listeners):
            try:
                listener(mutation)
            except Exception:
                logger.exception("repository listener failed on %s %s", mutation.op, mutation.record.object_id)

    def _replay(self, entries: Iterable[dict]):
        with self._lock:
            for entry in entries:
                if "type" in entry:
                    tdef = TypeDefinition.from_json(entry["type"])
                    self._types[tdef.type_id] = tdef
                    self._journal.append(entry)
                    continue
                event = ChangeEvent.from_json(entry["change"])
                rec = ObjectRecord.from_json(entry["object"])
                if event.change_type is ChangeType.DELETED and rec.is_latest_version:
                    self._remove_series(rec)
                else:
                    self._install(rec)
                if event.change_type is ChangeType.CREATED:
                    if rec.case_root_id is not None and rec.case_root_id != rec.object_id:
                        key = (rec.case_root_id, rec.name)
                        self._index_counters[key] = max(self._index_counters.get(key, 0), rec.case_index + 1)
                    if rec.object_id.startswith(OBJECT_ID_PREFIX):
                        num = rec.object_id[len(OBJECT_ID_PREFIX):]
                        if num.isdigit():
                            self._next_id = max(self._next_id, int(num) + 1)
                self._log.append(event)
                self._tokens.append(event.token)
                self._journal.append(entry)


class _Unset:
    pass


_UNSET = _Unset()
