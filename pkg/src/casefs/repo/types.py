"""Value types of the embedded repository: type definitions, property values,
stored objects and change-log entries."""

from __future__ import annotations

import base64
import copy
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Any

from casefs.errors import InvalidArgumentError, PropertyKindError


class BaseType(str, Enum):
    DOCUMENT = "cmis:document"
    FOLDER = "cmis:folder"
    RELATIONSHIP = "cmis:relationship"
    POLICY = "cmis:policy"
    ITEM = "cmis:item"
    SECONDARY = "cmis:secondary"


class DataKind(str, Enum):
    STRING = "string"
    BOOLEAN = "boolean"
    INTEGER = "integer"
    DECIMAL = "decimal"
    DATETIME = "datetime"
    URI = "uri"
    ID = "id"
    HTML = "html"


TEXT_KINDS = frozenset({DataKind.STRING, DataKind.URI, DataKind.ID, DataKind.HTML})


class Cardinality(str, Enum):
    SINGLE = "single"
    MULTI = "multi"


class ChangeType(str, Enum):
    CREATED = "CREATED"
    UPDATED = "UPDATED"
    DELETED = "DELETED"
    SECURITY = "SECURITY"


class Permission(str, Enum):
    READ = "read"
    WRITE = "write"
    ALL = "all"


def utc_now() -> datetime:
    return truncate_ms(datetime.now(timezone.utc))


def truncate_ms(dt: datetime) -> datetime:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc)
    return dt.replace(microsecond=(dt.microsecond // 1000) * 1000)


def format_datetime(dt: datetime) -> str:
    dt = truncate_ms(dt)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def parse_datetime(text: str) -> datetime:
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise InvalidArgumentError(f"not an RFC 3339 timestamp: {text!r}") from exc
    return truncate_ms(dt)


@dataclass(frozen=True)
class PropertyValue:
    """A typed property value. ``value`` is a tuple for multi-valued properties."""

    kind: DataKind
    value: Any

    @property
    def is_multi(self) -> bool:
        return isinstance(self.value, tuple)

    def to_json(self) -> dict:
        if self.is_multi:
            encoded = [_encode_scalar(self.kind, v) for v in self.value]
        else:
            encoded = _encode_scalar(self.kind, self.value)
        return {"kind": self.kind.value, "value": encoded}

    @classmethod
    def from_json(cls, data: dict) -> PropertyValue:
        try:
            kind = DataKind(data["kind"])
            raw = data["value"]
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidArgumentError(f"bad property value {data!r}") from exc
        if isinstance(raw, list):
            return cls(kind, tuple(_decode_scalar(kind, v) for v in raw))
        return cls(kind, _decode_scalar(kind, raw))


def _encode_scalar(kind: DataKind, value):
    if kind is DataKind.DECIMAL:
        return str(value)
    if kind is DataKind.DATETIME:
        return format_datetime(value)
    return value


def _decode_scalar(kind: DataKind, raw):
    if kind is DataKind.DATETIME:
        if not isinstance(raw, str):
            raise PropertyKindError(f"datetime must be an RFC 3339 string, got {raw!r}")
        return parse_datetime(raw)
    return _to_scalar(kind, raw)


def _to_scalar(kind: DataKind, raw):
    if kind in TEXT_KINDS:
        if isinstance(raw, str):
            return raw
    elif kind is DataKind.BOOLEAN:
        if isinstance(raw, bool):
            return raw
    elif kind is DataKind.INTEGER:
        if isinstance(raw, int) and not isinstance(raw, bool):
            return raw
    elif kind is DataKind.DECIMAL:
        if isinstance(raw, Decimal) and raw.is_finite():
            return raw
        if isinstance(raw, int) and not isinstance(raw, bool):
            return Decimal(raw)
        if isinstance(raw, str):
            try:
                value = Decimal(raw)
            except InvalidOperation:
                pass
            else:
                if value.is_finite():
                    return value
    elif kind is DataKind.DATETIME:
        if isinstance(raw, datetime):
            return truncate_ms(raw)
    raise PropertyKindError(f"{raw!r} is not a valid {kind.value} value")


def parse_text(kind: DataKind, text: str):
    """Parse a command-line string into a scalar of ``kind``."""
    if kind is DataKind.BOOLEAN:
        lowered = text.strip().lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise PropertyKindError(f"{text!r} is not a boolean")
    if kind is DataKind.INTEGER:
        try:
            return int(text)
        except ValueError as exc:
            raise PropertyKindError(f"{text!r} is not an integer") from exc
    if kind is DataKind.DATETIME:
        return parse_datetime(text)
    return _to_scalar(kind, text)


@dataclass(frozen=True)
class PropertyDefinition:
    property_id: str
    kind: DataKind
    cardinality: Cardinality = Cardinality.SINGLE
    required: bool = False
    default: PropertyValue | None = None

    def __post_init__(self):
        if not self.property_id:
            raise InvalidArgumentError("property id must be non-empty")
        if self.default is not None:
            self.coerce(self.default)

    @property
    def multi(self) -> bool:
        return self.cardinality is Cardinality.MULTI

    def coerce(self, raw) -> PropertyValue:
        """Validate ``raw`` (a plain value or a PropertyValue) against this definition."""
        if isinstance(raw, PropertyValue):
            if raw.kind is not self.kind:
                raise PropertyKindError(
                    f"{self.property_id}: expected {self.kind.value}, got {raw.kind.value}"
                )
            raw = list(raw.value) if raw.is_multi else raw.value
        if self.multi:
            if not isinstance(raw, (list, tuple)):
                raise PropertyKindError(f"{self.property_id} is multi-valued; expected a list")
            try:
                return PropertyValue(self.kind, tuple(_to_scalar(self.kind, v) for v in raw))
            except PropertyKindError as exc:
                raise PropertyKindError(f"{self.property_id}: {exc.message}") from None
        if isinstance(raw, (list, tuple)):
            raise PropertyKindError(f"{self.property_id} is single-valued; got a list")
        try:
            return PropertyValue(self.kind, _to_scalar(self.kind, raw))
        except PropertyKindError as exc:
            raise PropertyKindError(f"{self.property_id}: {exc.message}") from None

    def to_json(self) -> dict:
        return {
            "propertyId": self.property_id,
            "kind": self.kind.value,
            "cardinality": self.cardinality.value,
            "required": self.required,
            "default": self.default.to_json() if self.default is not None else None,
        }

    @classmethod
    def from_json(cls, data: dict) -> PropertyDefinition:
        default = data.get("default")
        return cls(
            property_id=data["propertyId"],
            kind=DataKind(data["kind"]),
            cardinality=Cardinality(data.get("cardinality", "single")),
            required=bool(data.get("required", False)),
            default=PropertyValue.from_json(default) if default else None,
        )


@dataclass(frozen=True)
class TypeDefinition:
    type_id: str
    base_type: BaseType
    parent_type_id: str | None = None
    display_name: str = ""
    property_defs: tuple[PropertyDefinition, ...] = ()

    def to_json(self) -> dict:
        return {
            "typeId": self.type_id,
            "baseType": self.base_type.value,
            "parentTypeId": self.parent_type_id,
            "displayName": self.display_name,
            "propertyDefs": [p.to_json() for p in self.property_defs],
        }

    @classmethod
    def from_json(cls, data: dict) -> TypeDefinition:
        return cls(
            type_id=data["typeId"],
            base_type=BaseType(data["baseType"]),
            parent_type_id=data.get("parentTypeId"),
            display_name=data.get("displayName", ""),
            property_defs=tuple(PropertyDefinition.from_json(p) for p in data.get("propertyDefs", [])),
        )


@dataclass(frozen=True)
class ContentStream:
    mime_type: str
    length: int
    data: bytes | None = None

    def __post_init__(self):
        if self.data is not None and len(self.data) != self.length:
            raise InvalidArgumentError("content length does not match payload size")

    @classmethod
    def of(cls, data: bytes, mime_type: str = "application/octet-stream") -> ContentStream:
        return cls(mime_type=mime_type, length=len(data), data=bytes(data))


@dataclass(frozen=True)
class Ace:
    principal: str
    permissions: frozenset

    def __post_init__(self):
        perms = frozenset(Permission(p) for p in self.permissions)
        if not perms:
            raise InvalidArgumentError(f"ACE for {self.principal!r} has no permissions")
        object.__setattr__(self, "permissions", perms)

    def to_json(self) -> dict:
        return {"principal": self.principal, "permissions": sorted(p.value for p in self.permissions)}

    @classmethod
    def from_json(cls, data: dict) -> Ace:
        return cls(data["principal"], frozenset(data.get("permissions", ())))


@dataclass
class ObjectRecord:
    object_id: str
    type_id: str
    base_type: BaseType
    name: str
    properties: dict[str, PropertyValue] = field(default_factory=dict)
    parent_ids: list[str] = field(default_factory=list)
    source_id: str | None = None
    target_id: str | None = None
    content: ContentStream | None = None
    version_series_id: str = ""
    version_label: str = "1.0"
    is_latest_version: bool = True
    case_index: int = 0
    case_root_id: str | None = None
    acl: list[Ace] = field(default_factory=list)
    created_by: str = "system"
    last_modified_by: str = "system"
    creation_date: datetime = field(default_factory=utc_now)
    last_modification_date: datetime = field(default_factory=utc_now)

    @property
    def is_folder(self) -> bool:
        return self.base_type is BaseType.FOLDER

    @property
    def is_relationship(self) -> bool:
        return self.base_type is BaseType.RELATIONSHIP

    def copy(self) -> ObjectRecord:
        return copy.deepcopy(self)

    def to_json(self, with_content: bool = True) -> dict:
        content = None
        if self.content is not None:
            content = {"mimeType": self.content.mime_type, "length": self.content.length}
            if with_content and self.content.data is not None:
                content["data"] = base64.b64encode(self.content.data).decode("ascii")
        return {
            "objectId": self.object_id,
            "typeId": self.type_id,
            "baseType": self.base_type.value,
            "name": self.name,
            "properties": {k: v.to_json() for k, v in sorted(self.properties.items())},
            "parentIds": list(self.parent_ids),
            "sourceId": self.source_id,
            "targetId": self.target_id,
            "contentStream": content,
            "versionSeriesId": self.version_series_id,
            "versionLabel": self.version_label,
            "isLatestVersion": self.is_latest_version,
            "caseIndex": self.case_index,
            "caseRootId": self.case_root_id,
            "acl": [a.to_json() for a in self.acl],
            "createdBy": self.created_by,
            "lastModifiedBy": self.last_modified_by,
            "creationDate": format_datetime(self.creation_date),
            "lastModificationDate": format_datetime(self.last_modification_date),
        }

    @classmethod
    def from_json(cls, data: dict) -> ObjectRecord:
        content = None
        if data.get("contentStream"):
            cs = data["contentStream"]
            payload = base64.b64decode(cs["data"]) if cs.get("data") is not None else None
            content = ContentStream(cs["mimeType"], int(cs["length"]), payload)
        return cls(
            object_id=data["objectId"],
            type_id=data["typeId"],
            base_type=BaseType(data["baseType"]),
            name=data["name"],
            properties={k: PropertyValue.from_json(v) for k, v in data.get("properties", {}).items()},
            parent_ids=list(data.get("parentIds", [])),
            source_id=data.get("sourceId"),
            target_id=data.get("targetId"),
            content=content,
            version_series_id=data.get("versionSeriesId", data["objectId"]),
            version_label=data.get("versionLabel", "1.0"),
            is_latest_version=bool(data.get("isLatestVersion", True)),
            case_index=int(data.get("caseIndex", 0)),
            case_root_id=data.get("caseRootId"),
            acl=[Ace.from_json(a) for a in data.get("acl", [])],
            created_by=data.get("createdBy", "system"),
            last_modified_by=data.get("lastModifiedBy", "system"),
            creation_date=parse_datetime(data["creationDate"]) if "creationDate" in data else utc_now(),
            last_modification_date=(
                parse_datetime(data["lastModificationDate"]) if "lastModificationDate" in data else utc_now()
            ),
        )


@dataclass(frozen=True)
class ChangeEvent:
    token: int
    change_type: ChangeType
    object_id: str
    base_type: BaseType
    name: str
    parent_ids: tuple[str, ...] = ()
    source_id: str | None = None
    target_id: str | None = None
    timestamp: datetime = field(default_factory=utc_now)
    # Lets consumers pair the DELETED+CREATED of a checkin exactly; None for
    # change feeds that do not report it.
    version_series_id: str | None = None

    def to_json(self) -> dict:
        return {
            "token": self.token,
            "changeType": self.change_type.value,
            "objectId": self.object_id,
            "baseType": self.base_type.value,
            "name": self.name,
            "parentIds": list(self.parent_ids),
            "sourceId": self.source_id,
            "targetId": self.target_id,
            "timestamp": format_datetime(self.timestamp),
            "versionSeriesId": self.version_series_id,
        }

    @classmethod
    def from_json(cls, data: dict) -> ChangeEvent:
        return cls(
            token=int(data["token"]),
            change_type=ChangeType(data["changeType"]),
            object_id=data["objectId"],
            base_type=BaseType(data["baseType"]),
            name=data["name"],
            parent_ids=tuple(data.get("parentIds", ())),
            source_id=data.get("sourceId"),
            target_id=data.get("targetId"),
            timestamp=parse_datetime(data["timestamp"]) if data.get("timestamp") else utc_now(),
            version_series_id=data.get("versionSeriesId"),
        )
