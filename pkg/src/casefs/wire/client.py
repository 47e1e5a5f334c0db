"""HTTP client that mirrors the ``Repository`` read/write surface."""

from __future__ import annotations

import json
from typing import Iterator

import httpx

from casefs.errors import RepositoryError, TransportError, error_from_code
from casefs.repo.store import ROOT_FOLDER_ID
from casefs.repo.types import (
    Ace,
    ChangeEvent,
    ContentStream,
    ObjectRecord,
    PropertyDefinition,
    TypeDefinition,
)
from casefs.wire.schemas import encode_properties


class RemoteRepository:
    """Talks to a ``create_app`` server.

    ``target`` is a base URL or a ready ``httpx.Client`` (a FastAPI
    ``TestClient`` works too). HTTP errors come back as the same typed
    exceptions the embedded repository raises; connection failures and 5xx
    responses raise ``TransportError``.
    """

    def __init__(self, target: str | httpx.Client, principal: str | None = None, timeout: float = 10.0):
        if isinstance(target, httpx.Client):
            self._http = target
            self._owns = False
        else:
            self._http = httpx.Client(base_url=target.rstrip("/"), timeout=timeout)
            self._owns = True
        self.principal = principal
        self._type_cache: dict[str, TypeDefinition] = {}

    def close(self):
        if self._owns:
            self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- plumbing ------------------------------------------------------------

    def _request(self, method: str, path: str, principal: str | None = None, **kwargs) -> httpx.Response:
        headers = kwargs.pop("headers", {})
        who = principal or self.principal
        if who:
            headers["X-Principal"] = who
        try:
            resp = self._http.request(method, path, headers=headers, **kwargs)
        except httpx.HTTPError as exc:
            raise TransportError(f"{method} {path}: {exc}") from exc
        if resp.status_code >= 500:
            raise TransportError(f"{method} {path}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise _error_from_response(resp)
        return resp

    def _json(self, method: str, path: str, **kwargs):
        return self._request(method, path, **kwargs).json()

    def _record(self, method: str, path: str, **kwargs) -> ObjectRecord:
        return ObjectRecord.from_json(self._json(method, path, **kwargs))

    def _records(self, path: str, **kwargs) -> list[ObjectRecord]:
        return [ObjectRecord.from_json(o) for o in self._json("GET", path, **kwargs)]

    # -- repository ----------------------------------------------------------

    @property
    def root_folder_id(self) -> str:
        return ROOT_FOLDER_ID

    @property
    def latest_token(self) -> int:
        return self.repository_info()["latestChangeLogToken"]

    def repository_info(self) -> dict:
        return self._json("GET", "/repo")

    # -- types ---------------------------------------------------------------

    def get_type(self, type_id: str) -> TypeDefinition:
        cached = self._type_cache.get(type_id)
        if cached is None:
            cached = TypeDefinition.from_json(self._json("GET", f"/types/{type_id}"))
            self._type_cache[type_id] = cached
        return cached

    def list_types(self) -> list[TypeDefinition]:
        return [TypeDefinition.from_json(t) for t in self._json("GET", "/types")]

    def create_type(self, definition: TypeDefinition) -> str:
        created = TypeDefinition.from_json(self._json("POST", "/types", json=definition.to_json()))
        self._type_cache[created.type_id] = created
        return created.type_id

    def effective_property_defs(self, type_id: str) -> dict[str, PropertyDefinition]:
        chain = []
        tdef = self.get_type(type_id)
        while tdef is not None:
            chain.append(tdef)
            tdef = self.get_type(tdef.parent_type_id) if tdef.parent_type_id else None
        defs: dict[str, PropertyDefinition] = {}
        for t in reversed(chain):
            for pdef in t.property_defs:
                defs[pdef.property_id] = pdef
        return defs

    # -- reads ---------------------------------------------------------------

    def get_object(self, object_id: str) -> ObjectRecord:
        return self._record("GET", f"/object/{object_id}")

    def get_latest_version(self, object_id: str) -> ObjectRecord:
        return self._record("GET", f"/object/{object_id}", params={"returnVersion": "latest"})

    def get_children(self, folder_id: str) -> list[ObjectRecord]:
        return self._records(f"/object/{folder_id}/children")

    def get_relationships(self, object_id: str, direction: str = "either") -> list[ObjectRecord]:
        return self._records(f"/object/{object_id}/relationships", params={"direction": direction})

    def get_content_stream(self, object_id: str) -> ContentStream | None:
        resp = self._request("GET", f"/object/{object_id}/content")
        if resp.status_code == 204:
            return None
        mime = resp.headers.get("content-type", "application/octet-stream").split(";")[0].strip()
        return ContentStream.of(resp.content, mime)

    def list_case_roots(self) -> list[ObjectRecord]:
        return self._records("/cases")

    def objects(self, include_old_versions: bool = False) -> Iterator[ObjectRecord]:
        params = {"includeOldVersions": "true" if include_old_versions else "false"}
        return iter(self._records("/objects", params=params))

    def get_content_changes(self, from_token: int = 0, max_items: int = 100) -> tuple[list[ChangeEvent], int]:
        page = self._json("GET", "/changes", params={"token": from_token, "max": max_items})
        return [ChangeEvent.from_json(c) for c in page["changes"]], page["nextToken"]

    # -- writes --------------------------------------------------------------

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
        body = {
            "typeId": type_id,
            "name": name,
            "properties": encode_properties(properties),
            "parentId": parent_id,
            "sourceId": source_id,
            "targetId": target_id,
        }
        if content is None:
            return self._record("POST", "/object", json=body, principal=principal)
        files = {
            "object": (None, json.dumps(body), "application/json"),
            "content": ("content", content.data or b"", content.mime_type),
        }
        return self._record("POST", "/object", files=files, principal=principal)

    def update_properties(self, object_id: str, patch: dict, principal: str | None = None) -> ObjectRecord:
        body = {"properties": encode_properties(patch)}
        return self._record("PATCH", f"/object/{object_id}", json=body, principal=principal)

    def set_content_stream(self, object_id: str, content: ContentStream | None, principal: str | None = None) -> ObjectRecord:
        if content is None:
            return self._record("DELETE", f"/object/{object_id}/content", principal=principal)
        return self._record(
            "PUT",
            f"/object/{object_id}/content",
            content=content.data or b"",
            headers={"Content-Type": content.mime_type},
            principal=principal,
        )

    def file_in(self, object_id: str, folder_id: str, principal: str | None = None) -> ObjectRecord:
        return self._record("POST", f"/object/{object_id}/parents", json={"folderId": folder_id}, principal=principal)

    def unfile(self, object_id: str, folder_id: str, principal: str | None = None) -> ObjectRecord:
        return self._record("DELETE", f"/object/{object_id}/parents/{folder_id}", principal=principal)

    def apply_acl(self, object_id: str, acl: list[Ace], principal: str | None = None) -> ObjectRecord:
        entries = [a.to_json() if isinstance(a, Ace) else a for a in acl]
        return self._record("POST", f"/object/{object_id}/acl", json={"acl": entries}, principal=principal)

    def delete_object(self, object_id: str, principal: str | None = None) -> None:
        self._request("DELETE", f"/object/{object_id}", principal=principal)

    def checkin(
        self,
        object_id: str,
        content: ContentStream | None = None,
        patch: dict | None = None,
        principal: str | None = None,
    ) -> ObjectRecord:
        body = {"properties": encode_properties(patch)}
        path = f"/object/{object_id}/checkin"
        if content is None:
            return self._record("POST", path, json=body, principal=principal)
        files = {
            "properties": (None, json.dumps(body), "application/json"),
            "content": ("content", content.data or b"", content.mime_type),
        }
        return self._record("POST", path, files=files, principal=principal)


def _error_from_response(resp: httpx.Response) -> RepositoryError:
    try:
        body = resp.json()
        return error_from_code(body["error"], body.get("message", ""))
    except (ValueError, KeyError, TypeError):
        return RepositoryError(f"HTTP {resp.status_code}: {resp.text[:200]}")
