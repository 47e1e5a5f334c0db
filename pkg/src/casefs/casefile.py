"""CaseFile navigation and modification on top of a repository.

A case is a parentless folder. Everything filed below it is a CaseFileItem.
Lookups that miss return the empty sentinels ``EMPTY_ITEM`` / ``EMPTY_ELEMENT``
instead of raising; operations on an empty or discarded item raise.

The ``repo`` argument can be the embedded ``Repository`` or a
``RemoteRepository``; only the shared read/create surface is used.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator

from casefs.errors import (
    DiscardedItemError,
    EmptyItemError,
    InvalidArgumentError,
    NotAFolderError,
    NotFoundError,
    OutsideCaseError,
)
from casefs.events import LifecycleState
from casefs.mappings import DefinitionTypeMap, PropertyTypeMap
from casefs.repo.types import BaseType, ContentStream, DataKind, ObjectRecord, PropertyValue


@dataclass(frozen=True)
class CaseFileHandle:
    case_id: str
    root_folder_object_id: str
    case_name: str


@dataclass(frozen=True)
class CaseFileItemRef:
    empty: bool = True
    object_id: str | None = None
    name: str = ""
    index: int = 0
    definition_type_uri: str = ""
    state: LifecycleState | None = None
    is_case_file: bool = False

    def to_json(self) -> dict:
        if self.empty:
            return {"empty": True}
        return {
            "empty": False,
            "objectId": self.object_id,
            "name": self.name,
            "index": self.index,
            "definitionType": self.definition_type_uri,
            "state": self.state.value if self.state else None,
            "isCaseFile": self.is_case_file,
        }


@dataclass(frozen=True)
class Element:
    empty: bool = True
    property_type_uri: str = ""
    value: PropertyValue | None = None

    def to_json(self) -> dict:
        if self.empty:
            return {"empty": True, "propertyType": self.property_type_uri or None}
        return {"empty": False, "propertyType": self.property_type_uri, **self.value.to_json()}


EMPTY_ITEM = CaseFileItemRef()
EMPTY_ELEMENT = Element()

_DOCUMENT_LIKE = (BaseType.DOCUMENT, BaseType.ITEM, BaseType.POLICY)


def create_case_file(repo, case_name: str, case_properties: dict | None = None, type_id: str = "cmis:folder", principal=None) -> CaseFileHandle:
    if not case_name:
        raise InvalidArgumentError("case name must be non-empty")
    if repo.get_type(type_id).base_type is not BaseType.FOLDER:
        raise InvalidArgumentError(f"{type_id!r} is not a folder type")
    folder = repo.create_object(type_id, case_name, case_properties or {}, principal=principal)
    return CaseFileHandle(folder.object_id, folder.object_id, folder.name)


def list_cases(repo) -> list[CaseFileHandle]:
    return [CaseFileHandle(r.object_id, r.object_id, r.name) for r in repo.list_case_roots()]


def open_case(repo, case: str) -> CaseFileHandle:
    """Find a case by root-folder id, falling back to the first case with that name."""
    cases = list_cases(repo)
    for handle in cases:
        if handle.case_id == case:
            return handle
    for handle in cases:
        if handle.case_name == case:
            return handle
    raise NotFoundError(f"no case {case!r}")


class CaseFile:
    """The seven navigation operations and three creation operations for one case."""

    def __init__(self, repo, handle: CaseFileHandle):
        self.repo = repo
        self.handle = handle

    @property
    def case_id(self) -> str:
        return self.handle.case_id

    def root_item(self) -> CaseFileItemRef:
        return self._ref(self.repo.get_object(self.handle.root_folder_object_id))

    # -- navigation ----------------------------------------------------------

    def resolve_item(self, item_name: str) -> CaseFileItemRef:
        """Any item named ``item_name``; with duplicates, the lowest index wins."""
        matches = [r for r in self._descendants() if r.name == item_name]
        if not matches:
            return EMPTY_ITEM
        return self._ref(min(matches, key=lambda r: r.case_index))

    def resolve_item_at(self, item_name: str, index: int) -> CaseFileItemRef:
        if index < 0:
            raise InvalidArgumentError("index must be non-negative")
        for rec in self._descendants():
            if rec.name == item_name and rec.case_index == index:
                return self._ref(rec)
        return EMPTY_ITEM

    def item_property(self, item: CaseFileItemRef, property_name: str) -> Element:
        rec = self._current(item)
        value = rec.properties.get(property_name)
        if value is None:
            value = _system_property(rec, property_name)
        if value is None:
            pdef = self._property_definition(rec, property_name)
            uri = PropertyTypeMap.uri_for(pdef.kind) if pdef is not None else ""
            return Element(True, uri, None)
        return Element(False, PropertyTypeMap.uri_for(value.kind), value)

    def item_child(self, item: CaseFileItemRef, child_name: str) -> CaseFileItemRef:
        rec = self._current(item)
        if not rec.is_folder:
            raise NotAFolderError(f"{rec.name!r} is not a folder")
        matches = [c for c in self.repo.get_children(rec.object_id) if c.name == child_name]
        if not matches:
            return EMPTY_ITEM
        return self._ref(min(matches, key=lambda r: r.case_index))

    def item_parent(self, item: CaseFileItemRef) -> CaseFileItemRef:
        rec = self._current(item)
        if rec.object_id == self.handle.root_folder_object_id:
            return EMPTY_ITEM
        for pid in rec.parent_ids:
            parent = self.repo.get_object(pid)
            if parent.case_root_id == self.case_id:
                return self._ref(parent)
        return EMPTY_ITEM

    def item_source(self, item: CaseFileItemRef) -> CaseFileItemRef:
        """Source of the earliest-created relationship targeting ``item``."""
        rec = self._current(item)
        for rel in self.repo.get_relationships(rec.object_id, "target"):
            return self._ref(self.repo.get_latest_version(rel.source_id))
        return EMPTY_ITEM

    def item_target(self, item: CaseFileItemRef, target_name: str) -> CaseFileItemRef:
        rec = self._current(item)
        for rel in self.repo.get_relationships(rec.object_id, "source"):
            target = self.repo.get_latest_version(rel.target_id)
            if target.name == target_name:
                return self._ref(target)
        return EMPTY_ITEM

    # -- modification --------------------------------------------------------

    def create_document_item(
        self,
        name: str,
        type_id: str = "cmis:document",
        properties: dict | None = None,
        parent_item: CaseFileItemRef | None = None,
        content: ContentStream | None = None,
        principal=None,
    ) -> CaseFileItemRef:
        self._check_base(type_id, _DOCUMENT_LIKE)
        parent = self._parent_folder(parent_item)
        rec = self.repo.create_object(type_id, name, properties or {}, parent.object_id, content, principal=principal)
        return self._ref(rec)

    def create_folder_item(
        self,
        name: str,
        type_id: str = "cmis:folder",
        properties: dict | None = None,
        parent_item: CaseFileItemRef | None = None,
        principal=None,
    ) -> CaseFileItemRef:
        self._check_base(type_id, (BaseType.FOLDER,))
        parent = self._parent_folder(parent_item)
        rec = self.repo.create_object(type_id, name, properties or {}, parent.object_id, principal=principal)
        return self._ref(rec)

    def create_relationship_item(
        self,
        name: str,
        source_item: CaseFileItemRef,
        target_item: CaseFileItemRef,
        type_id: str = "cmis:relationship",
        properties: dict | None = None,
        principal=None,
    ) -> CaseFileItemRef:
        self._check_base(type_id, (BaseType.RELATIONSHIP,))
        source, target = self._current(source_item), self._current(target_item)
        for end in (source, target):
            if end.case_root_id != self.case_id:
                raise OutsideCaseError(f"{end.name!r} is not part of case {self.handle.case_name!r}")
        rec = self.repo.create_object(
            type_id, name, properties or {}, source_id=source.object_id, target_id=target.object_id, principal=principal
        )
        return self._ref(rec)

    # -- helpers -------------------------------------------------------------

    def _descendants(self) -> Iterator[ObjectRecord]:
        """Breadth-first walk below the case root, in filing order."""
        queue = deque([self.handle.root_folder_object_id])
        seen = {self.handle.root_folder_object_id}
        while queue:
            for child in self.repo.get_children(queue.popleft()):
                if child.object_id in seen:
                    continue
                seen.add(child.object_id)
                yield child
                if child.is_folder:
                    queue.append(child.object_id)

    def _ref(self, rec: ObjectRecord) -> CaseFileItemRef:
        return CaseFileItemRef(
            empty=False,
            object_id=rec.object_id,
            name=rec.name,
            index=rec.case_index,
            definition_type_uri=DefinitionTypeMap.uri_for(rec.base_type),
            state=LifecycleState.AVAILABLE,
            is_case_file=rec.object_id == self.handle.root_folder_object_id,
        )

    def _current(self, item: CaseFileItemRef) -> ObjectRecord:
        """The latest version behind ``item``; raises for empty or discarded items."""
        if item is None or item.empty:
            raise EmptyItemError("operation on an empty CaseFileItem")
        if item.state is LifecycleState.DISCARDED:
            raise DiscardedItemError(f"{item.name!r} has been discarded")
        try:
            return self.repo.get_latest_version(item.object_id)
        except NotFoundError:
            raise DiscardedItemError(f"{item.name!r} ({item.object_id}) has been deleted") from None

    def _parent_folder(self, parent_item: CaseFileItemRef | None) -> ObjectRecord:
        if parent_item is None:
            return self.repo.get_object(self.handle.root_folder_object_id)
        parent = self._current(parent_item)
        if not parent.is_folder:
            raise NotAFolderError(f"{parent.name!r} is not a folder")
        if parent.case_root_id != self.case_id:
            raise OutsideCaseError(f"{parent.name!r} is not part of case {self.handle.case_name!r}")
        return parent

    def _check_base(self, type_id: str, allowed):
        base = self.repo.get_type(type_id).base_type
        if base not in allowed:
            raise InvalidArgumentError(f"type {type_id!r} has base {base.value}")

    def _property_definition(self, rec: ObjectRecord, property_name: str):
        try:
            return self.repo.effective_property_defs(rec.type_id).get(property_name)
        except (AttributeError, NotFoundError):
            return None


def _system_property(rec: ObjectRecord, name: str) -> PropertyValue | None:
    S, I = DataKind.STRING, DataKind.ID
    values = {
        "cmis:name": (S, rec.name),
        "cmis:objectId": (I, rec.object_id),
        "cmis:objectTypeId": (I, rec.type_id),
        "cmis:baseTypeId": (I, rec.base_type.value),
        "cmis:versionLabel": (S, rec.version_label),
        "cmis:versionSeriesId": (I, rec.version_series_id),
        "cmis:isLatestVersion": (DataKind.BOOLEAN, rec.is_latest_version),
        "cmis:createdBy": (S, rec.created_by),
        "cmis:creationDate": (DataKind.DATETIME, rec.creation_date),
        "cmis:lastModifiedBy": (S, rec.last_modified_by),
        "cmis:lastModificationDate": (DataKind.DATETIME, rec.last_modification_date),
        "index": (DataKind.INTEGER, rec.case_index),
    }
    if rec.content is not None:
        values["cmis:contentStreamLength"] = (DataKind.INTEGER, rec.content.length)
        values["cmis:contentStreamMimeType"] = (S, rec.content.mime_type)
    if rec.is_relationship:
        values["cmis:sourceId"] = (I, rec.source_id)
        values["cmis:targetId"] = (I, rec.target_id)
    if name not in values:
        return None
    kind, value = values[name]
    return PropertyValue(kind, value)
