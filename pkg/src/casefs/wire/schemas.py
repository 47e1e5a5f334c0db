"""Request/response bodies for the HTTP binding.

Property maps travel as ``{"kind", "value"}`` objects (the same encoding as
``PropertyValue.to_json``); a bare JSON value is also accepted and validated
against the type's property definition on the server.
"""

from __future__ import annotations

from datetime import datetime
from decimal import Decimal
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from casefs.repo.types import PropertyValue, format_datetime


class _Body(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class CreateObjectRequest(_Body):
    type_id: str = Field(alias="typeId")
    name: str
    properties: dict[str, Any] = Field(default_factory=dict)
    parent_id: str | None = Field(default=None, alias="parentId")
    source_id: str | None = Field(default=None, alias="sourceId")
    target_id: str | None = Field(default=None, alias="targetId")


class UpdatePropertiesRequest(_Body):
    properties: dict[str, Any]


class CheckinRequest(_Body):
    properties: dict[str, Any] = Field(default_factory=dict)


class AceBody(_Body):
    principal: str
    permissions: list[str]


class AclRequest(_Body):
    acl: list[AceBody]


class FileInRequest(_Body):
    folder_id: str = Field(alias="folderId")


class PropertyDefinitionBody(_Body):
    property_id: str = Field(alias="propertyId")
    kind: str
    cardinality: str = "single"
    required: bool = False
    default: dict | None = None


class TypeDefinitionBody(_Body):
    type_id: str = Field(alias="typeId")
    base_type: str = Field(alias="baseType")
    parent_type_id: str | None = Field(default=None, alias="parentTypeId")
    display_name: str = Field(default="", alias="displayName")
    property_defs: list[PropertyDefinitionBody] = Field(default_factory=list, alias="propertyDefs")


class RepositoryInfo(BaseModel):
    repositoryId: str
    rootFolderId: str
    latestChangeLogToken: int


class WireChange(BaseModel):
    token: int
    changeType: str
    objectId: str
    baseType: str
    name: str
    parentIds: list[str]
    sourceId: str | None = None
    targetId: str | None = None
    timestamp: str | None = None
    versionSeriesId: str | None = None


class ChangesPage(BaseModel):
    changes: list[WireChange]
    nextToken: int
    latestChangeLogToken: int


class ErrorBody(BaseModel):
    error: str
    message: str


def encode_properties(props: dict | None) -> dict:
    """Client side: turn a property map into JSON-safe wire values."""
    out = {}
    for key, value in (props or {}).items():
        out[key] = _encode_value(value)
    return out


def _encode_value(value):
    if value is None:
        return None
    if isinstance(value, PropertyValue):
        return value.to_json()
    if isinstance(value, Decimal):
        return {"kind": "decimal", "value": str(value)}
    if isinstance(value, datetime):
        return {"kind": "datetime", "value": format_datetime(value)}
    if isinstance(value, (list, tuple)):
        if value and all(isinstance(v, Decimal) for v in value):
            return {"kind": "decimal", "value": [str(v) for v in value]}
        if value and all(isinstance(v, datetime) for v in value):
            return {"kind": "datetime", "value": [format_datetime(v) for v in value]}
        return list(value)
    return value


def decode_properties(props: dict) -> dict:
    """Server side: tagged values become PropertyValues, bare values pass through."""
    out = {}
    for key, value in props.items():
        if isinstance(value, dict) and set(value) == {"kind", "value"}:
            out[key] = PropertyValue.from_json(value)
        else:
            out[key] = value
    return out
