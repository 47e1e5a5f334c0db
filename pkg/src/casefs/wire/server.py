"""HTTP/JSON binding over an embedded ``Repository``."""

from __future__ import annotations

import json
import logging

from fastapi import FastAPI, Header, Query, Request, Response
from fastapi.concurrency import run_in_threadpool
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from casefs.errors import InvalidArgumentError, RepositoryError
from casefs.repo.store import Repository
from casefs.repo.types import Ace, ContentStream, TypeDefinition
from casefs.wire.schemas import (
    AclRequest,
    ChangesPage,
    CheckinRequest,
    CreateObjectRequest,
    FileInRequest,
    RepositoryInfo,
    TypeDefinitionBody,
    UpdatePropertiesRequest,
    decode_properties,
)

log = logging.getLogger(__name__)

DEFAULT_MIME = "application/octet-stream"


def wire_object(rec) -> dict:
    return rec.to_json(with_content=False)


def create_app(repo: Repository) -> FastAPI:
    app = FastAPI(title="casefs repository binding")
    # handlers look the repository up per request, so it can be swapped
    app.state.repo = repo

    @app.exception_handler(RepositoryError)
    async def _repo_error(request: Request, exc: RepositoryError):
        return JSONResponse({"error": exc.code, "message": exc.message}, status_code=exc.status)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(
            {"error": InvalidArgumentError.code, "message": _describe(exc.errors())}, status_code=422
        )

    @app.get("/repo", response_model=RepositoryInfo)
    def get_repo():
        return app.state.repo.repository_info()

    # -- types ---------------------------------------------------------------

    @app.get("/types")
    def list_types():
        return [t.to_json() for t in app.state.repo.list_types()]

    @app.get("/types/{type_id:path}")
    def get_type(type_id: str):
        return app.state.repo.get_type(type_id).to_json()

    @app.post("/types", status_code=201)
    def create_type(body: TypeDefinitionBody):
        tdef = _type_from_body(body)
        return app.state.repo.get_type(app.state.repo.create_type(tdef)).to_json()

    # -- objects -------------------------------------------------------------

    @app.get("/cases")
    def list_cases():
        return [wire_object(r) for r in app.state.repo.list_case_roots()]

    @app.get("/objects")
    def list_objects(includeOldVersions: bool = False):
        return [wire_object(r) for r in app.state.repo.objects(include_old_versions=includeOldVersions)]

    @app.get("/object/{object_id}")
    def get_object(object_id: str, returnVersion: str = "this"):
        if returnVersion == "latest":
            return wire_object(app.state.repo.get_latest_version(object_id))
        if returnVersion != "this":
            raise InvalidArgumentError(f"returnVersion must be 'this' or 'latest', got {returnVersion!r}")
        return wire_object(app.state.repo.get_object(object_id))

    @app.get("/object/{object_id}/children")
    def get_children(object_id: str):
        return [wire_object(r) for r in app.state.repo.get_children(object_id)]

    @app.get("/object/{object_id}/relationships")
    def get_relationships(object_id: str, direction: str = "either"):
        return [wire_object(r) for r in app.state.repo.get_relationships(object_id, direction)]

    @app.get("/object/{object_id}/content")
    def get_content(object_id: str):
        stream = app.state.repo.get_content_stream(object_id)
        if stream is None:
            return Response(status_code=204)
        return Response(content=stream.data or b"", media_type=stream.mime_type)

    @app.put("/object/{object_id}/content")
    async def put_content(object_id: str, request: Request, x_principal: str | None = Header(None)):
        data = await request.body()
        mime = request.headers.get("content-type") or DEFAULT_MIME
        rec = await run_in_threadpool(app.state.repo.set_content_stream, object_id, ContentStream.of(data, mime), x_principal)
        return wire_object(rec)

    @app.delete("/object/{object_id}/content")
    def delete_content(object_id: str, x_principal: str | None = Header(None)):
        return wire_object(app.state.repo.set_content_stream(object_id, None, x_principal))

    @app.post("/object", status_code=201)
    async def create_object(request: Request, x_principal: str | None = Header(None)):
        raw, content = await _read_parts(request, "object")
        body = _parse(CreateObjectRequest, raw)
        rec = await run_in_threadpool(
            lambda: app.state.repo.create_object(
                body.type_id,
                body.name,
                decode_properties(body.properties),
                parent_id=body.parent_id,
                content=content,
                source_id=body.source_id,
                target_id=body.target_id,
                principal=x_principal,
            )
        )
        return wire_object(rec)

    @app.patch("/object/{object_id}")
    def update_object(object_id: str, body: UpdatePropertiesRequest, x_principal: str | None = Header(None)):
        return wire_object(app.state.repo.update_properties(object_id, decode_properties(body.properties), x_principal))

    @app.delete("/object/{object_id}", status_code=204)
    def delete_object(object_id: str, x_principal: str | None = Header(None)):
        app.state.repo.delete_object(object_id, x_principal)
        return Response(status_code=204)

    @app.post("/object/{object_id}/acl")
    def apply_acl(object_id: str, body: AclRequest, x_principal: str | None = Header(None)):
        acl = [Ace(a.principal, frozenset(a.permissions)) for a in body.acl]
        return wire_object(app.state.repo.apply_acl(object_id, acl, x_principal))

    @app.post("/object/{object_id}/checkin", status_code=201)
    async def checkin(object_id: str, request: Request, x_principal: str | None = Header(None)):
        """JSON body: properties patch only. Multipart: ``properties`` part plus raw ``content`` part.
        Any other body is taken as the new content stream."""
        ctype = request.headers.get("content-type", "")
        if ctype.startswith("multipart/form-data") or ctype.startswith("application/json") or not ctype:
            raw, content = await _read_parts(request, "properties")
            body = _parse(CheckinRequest, raw)
        else:
            body = CheckinRequest()
            content = ContentStream.of(await request.body(), ctype)
        patch = decode_properties(body.properties)
        rec = await run_in_threadpool(lambda: app.state.repo.checkin(object_id, content, patch or None, x_principal))
        return wire_object(rec)

    @app.post("/object/{object_id}/parents")
    def file_in(object_id: str, body: FileInRequest, x_principal: str | None = Header(None)):
        return wire_object(app.state.repo.file_in(object_id, body.folder_id, x_principal))

    @app.delete("/object/{object_id}/parents/{folder_id}")
    def unfile(object_id: str, folder_id: str, x_principal: str | None = Header(None)):
        return wire_object(app.state.repo.unfile(object_id, folder_id, x_principal))

    # -- change log ----------------------------------------------------------

    @app.get("/changes", response_model=ChangesPage)
    def get_changes(token: int = Query(0, ge=0), max: int = Query(100, ge=1)):
        batch, next_token = app.state.repo.get_content_changes(token, max)
        return {
            "changes": [c.to_json() for c in batch],
            "nextToken": next_token,
            "latestChangeLogToken": app.state.repo.latest_token,
        }

    return app


async def _read_parts(request: Request, json_part: str) -> tuple[object, ContentStream | None]:
    """Split a request into its JSON document and optional raw content part."""
    ctype = request.headers.get("content-type", "")
    if ctype.startswith("multipart/form-data"):
        form = await request.form()
        meta = form.get(json_part)
        if meta is None:
            raise InvalidArgumentError(f"multipart body lacks a {json_part!r} part")
        text = meta if isinstance(meta, str) else (await meta.read()).decode("utf-8")
        raw = _loads(text)
        upload = form.get("content")
        content = None
        if upload is not None and not isinstance(upload, str):
            content = ContentStream.of(await upload.read(), upload.content_type or DEFAULT_MIME)
        return raw, content
    body = await request.body()
    return (_loads(body) if body else {}), None


def _loads(text):
    try:
        return json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InvalidArgumentError(f"request body is not valid JSON: {exc}") from None


def _parse(model, raw):
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        raise InvalidArgumentError(_describe(exc.errors())) from None


def _describe(errors) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in e.get('loc', ()))}: {e.get('msg')}" for e in errors)


def _type_from_body(body: TypeDefinitionBody) -> TypeDefinition:
    try:
        return TypeDefinition.from_json(
            {
                "typeId": body.type_id,
                "baseType": body.base_type,
                "parentTypeId": body.parent_type_id,
                "displayName": body.display_name,
                "propertyDefs": [p.model_dump(by_alias=True) for p in body.property_defs],
            }
        )
    except (ValueError, KeyError) as exc:
        raise InvalidArgumentError(f"bad type definition: {exc}") from None


def serve(repo: Repository, host: str = "127.0.0.1", port: int = 8700, log_level: str = "info") -> None:
    import uvicorn

    uvicorn.run(create_app(repo), host=host, port=port, log_level=log_level)
