"""Exception hierarchy shared by the repository, the case-file layer and the wire client.

Every error carries a stable ``code`` so it can cross the HTTP boundary and be
rebuilt as the same class on the client side.
"""


class RepositoryError(Exception):
    code = "repository-error"
    status = 500

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# -- 404 ---------------------------------------------------------------------


class NotFoundError(RepositoryError):
    code = "not-found"
    status = 404


class TypeNotFoundError(NotFoundError):
    code = "type-not-found"


# -- 409 ---------------------------------------------------------------------


class ConflictError(RepositoryError):
    code = "conflict"
    status = 409


class NotAFolderError(ConflictError):
    code = "not-a-folder"


class FolderNotEmptyError(ConflictError):
    code = "folder-not-empty"


class DuplicateTypeError(ConflictError):
    code = "duplicate-type"


class BaseTypeMismatchError(ConflictError):
    code = "base-mismatch"


class NameConflictError(ConflictError):
    code = "name-conflict"


class FilingError(ConflictError):
    """Illegal multi-filing or unfiling request."""

    code = "filing"


class VersioningError(ConflictError):
    code = "versioning"


# -- 422 ---------------------------------------------------------------------


class InvalidArgumentError(RepositoryError):
    code = "invalid-argument"
    status = 422


class UnknownPropertyError(InvalidArgumentError):
    code = "unknown-property"


class PropertyKindError(InvalidArgumentError):
    code = "kind-mismatch"


class MissingPropertyError(InvalidArgumentError):
    code = "missing-property"


class DanglingEndpointError(InvalidArgumentError):
    code = "dangling-endpoint"


class DuplicatePropertyError(InvalidArgumentError):
    code = "duplicate-property"


# -- case-file layer ---------------------------------------------------------


class CaseFileError(RepositoryError):
    code = "casefile"
    status = 409


class EmptyItemError(CaseFileError):
    code = "empty-item"


class DiscardedItemError(CaseFileError):
    code = "discarded-item"


class OutsideCaseError(CaseFileError):
    code = "outside-case"


class InvalidTransitionError(CaseFileError):
    code = "invalid-transition"


# -- models ------------------------------------------------------------------


class ModelError(InvalidArgumentError):
    code = "model"


class ModelFormatError(ModelError):
    code = "malformed-model"


class UnknownUriError(ModelError):
    code = "unknown-uri"

    def __init__(self, uri: str, where: str = ""):
        location = f" at {where}" if where else ""
        super().__init__(f"unknown URI {uri!r}{location}")
        self.uri = uri


class TransportError(RepositoryError):
    """Server unreachable or returned a 5xx; the poller retries these."""

    code = "transport"
    status = 503


def _all_subclasses(cls):
    for sub in cls.__subclasses__():
        yield sub
        yield from _all_subclasses(sub)


ERRORS_BY_CODE = {cls.code: cls for cls in [RepositoryError, *_all_subclasses(RepositoryError)]}


def error_from_code(code: str, message: str) -> RepositoryError:
    cls = ERRORS_BY_CODE.get(code, RepositoryError)
    if cls is UnknownUriError:
        err = RepositoryError.__new__(cls)
        RepositoryError.__init__(err, message)
        err.uri = ""
        return err
    return cls(message)
