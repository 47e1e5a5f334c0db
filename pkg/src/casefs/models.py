"""Design-time case models: declarations, a canonical JSON file format,
storage as versioned repository documents, and the CMMN 1.0 downgrade."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

from casefs.errors import ModelError, ModelFormatError, NotFoundError, UnknownUriError
from casefs.mappings import (
    DEFINITION_TYPE_PREFIX,
    DEFINITION_TYPE_URIS,
    PROPERTY_TYPE_PREFIX,
    PROPERTY_TYPE_URIS,
)
from casefs.repo.store import DESCRIPTION_PROPERTY, ROOT_FOLDER_ID
from casefs.repo.types import BaseType, ContentStream

MODEL_MIME_TYPE = "application/vnd.casefs.model+json"
MODELS_FOLDER_NAME = "CMMN Models"

CASE_FILE_EXT = frozenset({"CMISObjectId"})
ITEM_EXT = frozenset({"CMISObjectId", "index"})
DEFINITION_EXT = frozenset({"CMISTypeId"})
PROPERTY_EXT = frozenset({"CMISPropertyId"})

COMPAT_PROPERTY_TYPES = {
    PROPERTY_TYPE_PREFIX + "decimal": PROPERTY_TYPE_PREFIX + "double",
    PROPERTY_TYPE_PREFIX + "Id": PROPERTY_TYPE_PREFIX + "string",
    PROPERTY_TYPE_PREFIX + "HTML": PROPERTY_TYPE_PREFIX + "string",
}
COMPAT_DEFINITION_TYPES = {
    DEFINITION_TYPE_PREFIX + "CMISPolicy": DEFINITION_TYPE_PREFIX + "Unknown",
    DEFINITION_TYPE_PREFIX + "CMISItem": DEFINITION_TYPE_PREFIX + "Unknown",
    DEFINITION_TYPE_PREFIX + "CMISSecondary": DEFINITION_TYPE_PREFIX + "Unknown",
}

# Recorded in model metadata for embedded deployments; carried through the
# downgrade unchanged.
EMBEDDED_GENERALIZATIONS = {
    "CaseFile": "cmis:folder",
    "CaseFileItem": "cmis:object",
    "CaseFileItemDefinition": "cmis:object Type",
    "Property": "cmis:property Type",
}


@dataclass
class PropertyDecl:
    name: str
    type: str
    ext: dict = field(default_factory=dict)


@dataclass
class CaseFileItemDefinitionDecl:
    name: str
    definition_type: str
    properties: list[PropertyDecl] = field(default_factory=list)
    ext: dict = field(default_factory=dict)


@dataclass
class CaseFileItemDecl:
    name: str
    definition_ref: str
    multiplicity: str = "Unspecified"
    children: list[CaseFileItemDecl] = field(default_factory=list)
    target_refs: list[str] = field(default_factory=list)
    ext: dict = field(default_factory=dict)


@dataclass
class CaseModel:
    name: str
    definitions: list[CaseFileItemDefinitionDecl] = field(default_factory=list)
    items: list[CaseFileItemDecl] = field(default_factory=list)
    description: str = ""
    ext: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def walk_items(self):
        stack = list(reversed(self.items))
        while stack:
            item = stack.pop()
            yield item
            stack.extend(reversed(item.children))


# -- validation --------------------------------------------------------------


def validate_model(model: CaseModel) -> None:
    if not model.name:
        raise ModelError("model name must be non-empty")
    _check_ext(model.ext, CASE_FILE_EXT, "CaseFile")
    def_names = set()
    for d in model.definitions:
        if d.name in def_names:
            raise ModelError(f"duplicate definition {d.name!r}")
        def_names.add(d.name)
        if d.definition_type not in DEFINITION_TYPE_URIS:
            raise UnknownUriError(d.definition_type, f"definition {d.name!r}")
        _check_ext(d.ext, DEFINITION_EXT, f"definition {d.name!r}")
        for p in d.properties:
            if p.type not in PROPERTY_TYPE_URIS:
                raise UnknownUriError(p.type, f"property {d.name}.{p.name}")
            _check_ext(p.ext, PROPERTY_EXT, f"property {d.name}.{p.name}")

    seen_ids: set[int] = set()
    item_names: set[str] = set()

    def visit(item: CaseFileItemDecl, path: tuple[int, ...]):
        if id(item) in path:
            raise ModelError(f"item tree has a cycle at {item.name!r}")
        if id(item) in seen_ids:
            raise ModelError(f"item {item.name!r} appears twice in the tree")
        seen_ids.add(id(item))
        if item.name in item_names:
            raise ModelError(f"duplicate item {item.name!r}")
        item_names.add(item.name)
        if item.definition_ref not in def_names:
            raise ModelError(f"item {item.name!r} references undeclared definition {item.definition_ref!r}")
        _check_ext(item.ext, ITEM_EXT, f"item {item.name!r}")
        for child in item.children:
            visit(child, path + (id(item),))

    for item in model.items:
        visit(item, ())
    for item in model.walk_items():
        for ref in item.target_refs:
            if ref not in item_names:
                raise ModelError(f"item {item.name!r} targets undeclared item {ref!r}")


def _check_ext(ext: dict, allowed: frozenset, where: str):
    extra = set(ext) - allowed
    if extra:
        raise ModelError(f"{where}: unsupported extension attributes {sorted(extra)}")
    if "index" in ext and (not isinstance(ext["index"], int) or isinstance(ext["index"], bool) or ext["index"] < 0):
        raise ModelError(f"{where}: index must be a non-negative integer")
    for key in ("CMISObjectId", "CMISTypeId", "CMISPropertyId"):
        if key in ext and not isinstance(ext[key], str):
            raise ModelError(f"{where}: {key} must be a string")


# -- canonical format --------------------------------------------------------


def model_to_dict(model: CaseModel) -> dict:
    out: dict = {"name": model.name}
    if model.description:
        out["description"] = model.description
    if model.ext:
        out["ext"] = dict(model.ext)
    if model.metadata:
        out["metadata"] = copy.deepcopy(model.metadata)
    out["definitions"] = [_definition_to_dict(d) for d in model.definitions]
    out["items"] = [_item_to_dict(i) for i in model.items]
    return out


def _definition_to_dict(d: CaseFileItemDefinitionDecl) -> dict:
    out: dict = {"name": d.name, "definitionType": d.definition_type}
    if d.ext:
        out["ext"] = dict(d.ext)
    out["properties"] = []
    for p in d.properties:
        prop: dict = {"name": p.name, "type": p.type}
        if p.ext:
            prop["ext"] = dict(p.ext)
        out["properties"].append(prop)
    return out


def _item_to_dict(item: CaseFileItemDecl) -> dict:
    out: dict = {"name": item.name, "definitionRef": item.definition_ref, "multiplicity": item.multiplicity}
    if item.ext:
        out["ext"] = dict(item.ext)
    if item.target_refs:
        out["targetRefs"] = list(item.target_refs)
    if item.children:
        out["children"] = [_item_to_dict(c) for c in item.children]
    return out


def serialize_model(model: CaseModel) -> bytes:
    return (json.dumps(model_to_dict(model), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def parse_model(data: bytes | str) -> CaseModel:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ModelFormatError(f"model is not UTF-8: {exc}") from None
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"malformed model: {exc}") from None
    model = model_from_dict(raw)
    validate_model(model)
    return model


def model_from_dict(raw) -> CaseModel:
    obj = _obj(raw, "model", {"name", "definitions", "items"}, {"description", "ext", "metadata"})
    return CaseModel(
        name=_str(obj["name"], "model name"),
        description=_str(obj.get("description", ""), "description"),
        ext=_obj(obj.get("ext", {}), "CaseFile ext", set(), set(CASE_FILE_EXT)),
        metadata=_obj(obj.get("metadata", {}), "metadata", set(), None),
        definitions=[_definition_from_dict(d) for d in _list(obj["definitions"], "definitions")],
        items=[_item_from_dict(i) for i in _list(obj["items"], "items")],
    )


def _definition_from_dict(raw) -> CaseFileItemDefinitionDecl:
    obj = _obj(raw, "definition", {"name", "definitionType"}, {"properties", "ext"})
    name = _str(obj["name"], "definition name")
    uri = _str(obj["definitionType"], f"definition {name!r} type")
    if uri not in DEFINITION_TYPE_URIS:
        raise UnknownUriError(uri, f"definition {name!r}")
    props = []
    for p in _list(obj.get("properties", []), f"definition {name!r} properties"):
        pobj = _obj(p, "property", {"name", "type"}, {"ext"})
        ptype = _str(pobj["type"], "property type")
        if ptype not in PROPERTY_TYPE_URIS:
            raise UnknownUriError(ptype, f"property {name}.{pobj['name']}")
        props.append(
            PropertyDecl(
                _str(pobj["name"], "property name"),
                ptype,
                _obj(pobj.get("ext", {}), "property ext", set(), set(PROPERTY_EXT)),
            )
        )
    ext = _obj(obj.get("ext", {}), "definition ext", set(), set(DEFINITION_EXT))
    return CaseFileItemDefinitionDecl(name, uri, props, ext)


def _item_from_dict(raw) -> CaseFileItemDecl:
    obj = _obj(raw, "item", {"name", "definitionRef"}, {"multiplicity", "children", "targetRefs", "ext"})
    return CaseFileItemDecl(
        name=_str(obj["name"], "item name"),
        definition_ref=_str(obj["definitionRef"], "definitionRef"),
        multiplicity=_str(obj.get("multiplicity", "Unspecified"), "multiplicity"),
        children=[_item_from_dict(c) for c in _list(obj.get("children", []), "children")],
        target_refs=[_str(t, "targetRef") for t in _list(obj.get("targetRefs", []), "targetRefs")],
        ext=_obj(obj.get("ext", {}), "item ext", set(), set(ITEM_EXT)),
    )


def _obj(raw, what: str, required: set, optional: set | None) -> dict:
    if not isinstance(raw, dict):
        raise ModelFormatError(f"{what} must be an object")
    missing = required - set(raw)
    if missing:
        raise ModelFormatError(f"{what} is missing {sorted(missing)}")
    if optional is not None:
        extra = set(raw) - required - optional
        if extra:
            raise ModelFormatError(f"{what} has unexpected keys {sorted(extra)}")
    return raw


def _list(raw, what: str) -> list:
    if not isinstance(raw, list):
        raise ModelFormatError(f"{what} must be a list")
    return raw


def _str(raw, what: str) -> str:
    if not isinstance(raw, str):
        raise ModelFormatError(f"{what} must be a string")
    return raw


# -- CMMN 1.0 downgrade ------------------------------------------------------


def export_compat10(model: CaseModel) -> CaseModel:
    """Strip extension attributes and map extension URIs onto CMMN 1.0 ones."""
    out = copy.deepcopy(model)
    out.ext = {}
    for d in out.definitions:
        d.ext = {}
        d.definition_type = COMPAT_DEFINITION_TYPES.get(d.definition_type, d.definition_type)
        for p in d.properties:
            p.ext = {}
            p.type = COMPAT_PROPERTY_TYPES.get(p.type, p.type)
    for item in out.walk_items():
        item.ext = {}
    return out


def is_compat10(model: CaseModel) -> bool:
    return serialize_model(export_compat10(model)) == serialize_model(model)


# -- repository storage ------------------------------------------------------


def _models_folder(repo, folder_id: str | None) -> str:
    if folder_id is not None:
        return folder_id
    for child in repo.get_children(ROOT_FOLDER_ID):
        if child.is_folder and child.name == MODELS_FOLDER_NAME:
            return child.object_id
    return repo.create_object(BaseType.FOLDER.value, MODELS_FOLDER_NAME, parent_id=ROOT_FOLDER_ID).object_id


def store_model(repo, model: CaseModel, folder_id: str | None = None, principal=None) -> str:
    """Store ``model`` as a document; storing a same-named model again checks in a new version."""
    validate_model(model)
    folder = _models_folder(repo, folder_id)
    payload = serialize_model(model)
    content = ContentStream.of(payload, MODEL_MIME_TYPE)
    props = {DESCRIPTION_PROPERTY: model.description} if model.description else {}
    for child in repo.get_children(folder):
        if child.name == model.name and child.base_type is BaseType.DOCUMENT:
            patch = {DESCRIPTION_PROPERTY: model.description or None}
            return repo.checkin(child.object_id, content=content, patch=patch, principal=principal).object_id
    rec = repo.create_object(BaseType.DOCUMENT.value, model.name, props, folder, content, principal=principal)
    return rec.object_id


def load_model(repo, object_id: str) -> CaseModel:
    stream = repo.get_content_stream(object_id)
    if stream is None or stream.data is None:
        raise NotFoundError(f"object {object_id} has no model content")
    return parse_model(stream.data)
