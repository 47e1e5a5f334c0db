from casefs.repo.store import (
    BASE_TYPE_DEFINITIONS,
    DESCRIPTION_PROPERTY,
    ROOT_FOLDER_ID,
    SECONDARY_TYPES_PROPERTY,
    Mutation,
    Repository,
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
    Permission,
    PropertyDefinition,
    PropertyValue,
    TypeDefinition,
)

__all__ = [
    "Ace",
    "BASE_TYPE_DEFINITIONS",
    "BaseType",
    "Cardinality",
    "ChangeEvent",
    "ChangeType",
    "ContentStream",
    "DESCRIPTION_PROPERTY",
    "DataKind",
    "Mutation",
    "ObjectRecord",
    "Permission",
    "PropertyDefinition",
    "PropertyValue",
    "ROOT_FOLDER_ID",
    "Repository",
    "SECONDARY_TYPES_PROPERTY",
    "TypeDefinition",
]
