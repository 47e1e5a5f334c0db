"""Lookup tables between the CMMN information model and the repository model.

Three tables live here:

* ``CLASS_MAPPING``: CMMN information-model class to repository class.
* ``DEFINITION_TYPE_TABLE``: repository base type to CaseFileItemDefinition
  definition-type URI, including the three extension URIs.
* ``PROPERTY_TYPE_TABLE``: property type to CMMN property-type URI, including
  the three extension URIs.
"""

from __future__ import annotations

from typing import NamedTuple

from casefs.repo.types import BaseType, DataKind

DEFINITION_TYPE_PREFIX = "http://www.omg.org/spec/CMMN/DefinitionType/"
PROPERTY_TYPE_PREFIX = "http://www.omg.org/spec/CMMN/PropertyType/"

CLASS_MAPPING: tuple[tuple[str, str], ...] = (
    ("CaseFile", "cmis:folder"),
    ("CaseFileItem", "cmis:object"),
    ("CaseFileItemDefinition", "cmis:object Type"),
    ("Property", "cmis:property Type"),
)


class DefinitionTypeRow(NamedTuple):
    cmis_type: str | None
    cmmn_name: str | None
    uri: str
    extension: bool = False


DEFINITION_TYPE_TABLE: tuple[DefinitionTypeRow, ...] = (
    DefinitionTypeRow("cmis:folder", "CMIS Folder", DEFINITION_TYPE_PREFIX + "CMISFolder"),
    DefinitionTypeRow("cmis:document", "CMIS Document", DEFINITION_TYPE_PREFIX + "CMISDocument"),
    DefinitionTypeRow("cmis:relationship", "CMIS Relationship", DEFINITION_TYPE_PREFIX + "CMISRelationship"),
    DefinitionTypeRow(None, "XML-Schema Element", DEFINITION_TYPE_PREFIX + "XSDElement"),
    DefinitionTypeRow(None, "XML Schema Complex Type", DEFINITION_TYPE_PREFIX + "XSDComplexType"),
    DefinitionTypeRow(None, "XML Schema Simple Type", DEFINITION_TYPE_PREFIX + "XSDSimpleType"),
    DefinitionTypeRow(None, "Unknown", DEFINITION_TYPE_PREFIX + "Unknown"),
    DefinitionTypeRow(None, "Unspecified", DEFINITION_TYPE_PREFIX + "Unspecified"),
    DefinitionTypeRow("cmis:policy", None, DEFINITION_TYPE_PREFIX + "CMISPolicy", True),
    DefinitionTypeRow("cmis:item", None, DEFINITION_TYPE_PREFIX + "CMISItem", True),
    DefinitionTypeRow("cmis:secondary", None, DEFINITION_TYPE_PREFIX + "CMISSecondary", True),
)

# cmis:object is abstract and may stand for any of the concrete object URIs.
OBJECT_FAN_OUT: tuple[str, ...] = tuple(
    row.uri for row in DEFINITION_TYPE_TABLE if row.cmis_type is not None
)


class PropertyTypeRow(NamedTuple):
    type_name: str | None
    cmis_type: str | None
    uri: str
    extension: bool = False


def _p(name: str | None, cmis: str | None, suffix: str, extension: bool = False) -> PropertyTypeRow:
    return PropertyTypeRow(name, cmis, PROPERTY_TYPE_PREFIX + suffix, extension)


PROPERTY_TYPE_TABLE: tuple[PropertyTypeRow, ...] = (
    _p("string", "xsd:string", "string"),
    _p("boolean", "xsd:boolean", "boolean"),
    _p("integer", "xsd:integer", "integer"),
    _p("float", None, "float"),
    _p("double", None, "double"),
    _p("duration", None, "duration"),
    _p("dateTime", "xsd:dateTime", "dateTime"),
    _p("time", None, "time"),
    _p("date", None, "date"),
    _p("gYearMonth", None, "gYearMonth"),
    _p("gYear", None, "gYear"),
    _p("gMonthDay", None, "gMonthDay"),
    _p("gDay", None, "gDay"),
    _p("gMonth", None, "gMonth"),
    _p("hexBinary", None, "hexBinary"),
    _p("base64Binary", None, "base64Binary"),
    _p("anyURI", "xsd:anyURI", "anyURI"),
    _p("QName", None, "QName"),
    _p(None, "xsd:decimal", "decimal", True),
    _p(None, "Id", "Id", True),
    _p(None, "HTML", "HTML", True),
)

DEFINITION_TYPE_URIS = frozenset(row.uri for row in DEFINITION_TYPE_TABLE)
PROPERTY_TYPE_URIS = frozenset(row.uri for row in PROPERTY_TYPE_TABLE)

_CMIS_TYPE_OF_KIND = {
    DataKind.STRING: "xsd:string",
    DataKind.BOOLEAN: "xsd:boolean",
    DataKind.INTEGER: "xsd:integer",
    DataKind.DATETIME: "xsd:dateTime",
    DataKind.URI: "xsd:anyURI",
    DataKind.DECIMAL: "xsd:decimal",
    DataKind.ID: "Id",
    DataKind.HTML: "HTML",
}


class DefinitionTypeMap:
    """Base type <-> definition-type URI. Total over the six base types."""

    _forward = {BaseType(row.cmis_type): row.uri for row in DEFINITION_TYPE_TABLE if row.cmis_type}
    _inverse = {uri: base for base, uri in _forward.items()}

    @classmethod
    def uri_for(cls, base_type: BaseType | str) -> str:
        return cls._forward[BaseType(base_type)]

    @classmethod
    def base_type_for(cls, uri: str) -> BaseType | None:
        """None for URIs with no repository object type (XSD*, Unknown, Unspecified)."""
        if uri not in DEFINITION_TYPE_URIS:
            raise KeyError(uri)
        return cls._inverse.get(uri)

    @staticmethod
    def is_extension(uri: str) -> bool:
        return any(row.uri == uri and row.extension for row in DEFINITION_TYPE_TABLE)


class PropertyTypeMap:
    """Repository data kind <-> property-type URI. Total over the eight kinds."""

    _forward = {
        kind: next(row.uri for row in PROPERTY_TYPE_TABLE if row.cmis_type == cmis)
        for kind, cmis in _CMIS_TYPE_OF_KIND.items()
    }
    _inverse = {uri: kind for kind, uri in _forward.items()}

    @classmethod
    def uri_for(cls, kind: DataKind | str) -> str:
        return cls._forward[DataKind(kind)]

    @classmethod
    def kind_for(cls, uri: str) -> DataKind | None:
        """None for CMMN property types the repository cannot store (float, QName, ...)."""
        if uri not in PROPERTY_TYPE_URIS:
            raise KeyError(uri)
        return cls._inverse.get(uri)

    @staticmethod
    def cmis_type_for(kind: DataKind | str) -> str:
        return _CMIS_TYPE_OF_KIND[DataKind(kind)]

    @staticmethod
    def is_extension(uri: str) -> bool:
        return any(row.uri == uri and row.extension for row in PROPERTY_TYPE_TABLE)
