"""HTTP service: JSON over HTTP/1.1, one route per library operation.

Handlers decode the request, delegate to the control plane, and encode the
result; no business logic lives here.  Library errors map onto a fixed status
and error-code table, and every response body is produced by the same canonical
JSON encoders the library itself uses.
"""

from __future__ import annotations

import json
import socket
from typing import Any, Optional

import click
import uvicorn
from fastapi import FastAPI, Request
from fastapi.responses import Response
from starlette.exceptions import HTTPException as StarletteHTTPException

from confplane.diff import render_diff_json
from confplane.errors import (
    AlreadyExists,
    BindFailure,
    ControlPlaneError,
    InvalidSchema,
    NoMatchingNodes,
    NotFound,
    StoreOpenFailure,
    ValidationFailed,
)
from confplane.model import (
    KIND_GROUP,
    KIND_STANDALONE,
    ConfigGroup,
    ConfigId,
    StandaloneConfig,
    canonical_json,
    group_document,
    parse_group_yaml,
    parse_standalone_yaml,
    standalone_document,
)
from confplane.dissemination import parse_label_query
from confplane.plane import ControlPlane

__all__ = ["create_app", "serve", "main"]

_SEGMENT_KINDS = {"configs": KIND_STANDALONE, "groups": KIND_GROUP}


class _BadRequest(ControlPlaneError):
    """Request envelope problems: unreadable JSON, missing or mistyped fields."""


def _error_code(exc: ControlPlaneError) -> tuple[int, str]:
    if isinstance(exc, (ValidationFailed, InvalidSchema)):
        return 422, "VALIDATION_FAILED"
    if isinstance(exc, NoMatchingNodes):
        return 409, "NO_MATCH"
    if isinstance(exc, AlreadyExists):
        return 409, "ALREADY_EXISTS"
    if isinstance(exc, NotFound):
        return 404, "NOT_FOUND"
    return 400, "MALFORMED_INPUT"


def _json_response(document: Any, status: int = 200) -> Response:
    return Response(
        canonical_json(document), status_code=status, media_type="application/json"
    )


def _error_response(status: int, code: str, message: str, violations=()) -> Response:
    body: dict[str, Any] = {"code": code, "message": message}
    details = [v.to_json() for v in violations]
    if details:
        body["details"] = details
    return _json_response(body, status)


async def _read_object(request: Request) -> dict[str, Any]:
    raw = await request.body()
    try:
        doc = json.loads(raw)
    except ValueError:
        raise _BadRequest("request body is not valid JSON") from None
    if not isinstance(doc, dict):
        raise _BadRequest("request body must be a JSON object")
    return doc


def _field(doc: dict[str, Any], name: str, kind: type = str) -> Any:
    value = doc.get(name)
    if not isinstance(value, kind):
        raise _BadRequest(f"body field {name!r} must be a {kind.__name__}")
    return value


def _segment_kind(segment: str) -> str:
    kind = _SEGMENT_KINDS.get(segment)
    if kind is None:
        raise NotFound(f"unknown collection {segment!r}")
    return kind


def _parse_payload(kind: str, text: str):
    if kind == KIND_STANDALONE:
        return parse_standalone_yaml(text)
    return parse_group_yaml(text)


def create_app(plane: ControlPlane) -> FastAPI:
    app = FastAPI(openapi_url=None, docs_url=None, redoc_url=None)

    @app.exception_handler(ControlPlaneError)
    async def _domain_error(_request: Request, exc: ControlPlaneError) -> Response:
        status, code = _error_code(exc)
        return _error_response(status, code, str(exc), getattr(exc, "violations", ()))

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(_request: Request, exc: StarletteHTTPException) -> Response:
        code = "NOT_FOUND" if exc.status_code == 404 else "MALFORMED_INPUT"
        return _error_response(exc.status_code, code, str(exc.detail))

    # -- configs ---------------------------------------------------------------

    def _put_config(org: str, kind: str, body: dict[str, Any]) -> Response:
        config_id = ConfigId(org, _field(body, "name"), _field(body, "version"))
        payload = _parse_payload(kind, _field(body, "yaml"))
        if kind == KIND_STANDALONE:
            config = StandaloneConfig(config_id, payload)
        else:
            config = ConfigGroup(config_id, payload)
        ref = body.get("schemaRef")
        schema_ref = None
        if ref is not None:
            if not isinstance(ref, str):
                raise _BadRequest("body field 'schemaRef' must be a string")
            schema_ref = ConfigId.parse(ref)
        record = plane.configs.put_config(config, schema_ref)
        return _json_response(record.to_json(), 201)

    @app.post("/v1/orgs/{org}/configs")
    async def put_standalone(org: str, request: Request) -> Response:
        return _put_config(org, KIND_STANDALONE, await _read_object(request))

    @app.post("/v1/orgs/{org}/groups")
    async def put_group(org: str, request: Request) -> Response:
        return _put_config(org, KIND_GROUP, await _read_object(request))

    @app.get("/v1/orgs/{org}/{collection}/{name}/timeline")
    def get_timeline(org: str, collection: str, name: str) -> Response:
        kind = _segment_kind(collection)
        return _json_response(plane.configs.timeline(org, name, kind).to_json())

    @app.get("/v1/orgs/{org}/{collection}/{name}/diff")
    def get_diff(
        org: str,
        collection: str,
        name: str,
        ref: Optional[str] = None,
        target: Optional[str] = None,
        refOrg: Optional[str] = None,
        refName: Optional[str] = None,
    ) -> Response:
        kind = _segment_kind(collection)
        if ref is None or target is None:
            raise _BadRequest("query parameters 'ref' and 'target' are required")
        ref_id = ConfigId(refOrg or org, refName or name, ref)
        target_id = ConfigId(org, name, target)
        result = plane.configs.diff_versions(ref_id, target_id, kind)
        return Response(
            render_diff_json(result, pretty=True),
            status_code=200,
            media_type="application/json",
        )

    @app.get("/v1/orgs/{org}/{collection}/{name}/{version}")
    def get_config(org: str, collection: str, name: str, version: str) -> Response:
        kind = _segment_kind(collection)
        record = plane.configs.get_config(ConfigId(org, name, version), kind)
        return _json_response(record.to_json())

    # -- schemas ---------------------------------------------------------------

    @app.post("/v1/schemas")
    async def put_schema(request: Request) -> Response:
        body = await _read_object(request)
        schema_id = ConfigId(
            _field(body, "organization"), _field(body, "name"), _field(body, "version")
        )
        record = plane.schemas.store_schema(schema_id, _field(body, "yaml"))
        return _json_response(record.to_json(), 201)

    @app.get("/v1/schemas/{org}/{name}/history")
    def schema_history(org: str, name: str) -> Response:
        records = plane.schemas.schema_history(org, name)
        return _json_response(
            {"entries": [r.to_json() for r in records], "name": name, "organization": org}
        )

    @app.get("/v1/schemas/{org}/{name}/{version}")
    def get_schema(org: str, name: str, version: str) -> Response:
        record = plane.schemas.get_schema(ConfigId(org, name, version))
        return _json_response(record.to_json())

    @app.delete("/v1/schemas/{org}/{name}/{version}")
    def delete_schema(org: str, name: str, version: str) -> Response:
        schema_id = ConfigId(org, name, version)
        plane.schemas.delete_schema(schema_id)
        return _json_response({"deleted": str(schema_id)})

    @app.post("/v1/schemas/{org}/{name}/{version}/validate")
    async def validate(org: str, name: str, version: str, request: Request) -> Response:
        body = await _read_object(request)
        kind = _field(body, "kind")
        if kind not in (KIND_STANDALONE, KIND_GROUP):
            raise _BadRequest("body field 'kind' must be 'standalone' or 'group'")
        payload = _parse_payload(kind, _field(body, "yaml"))
        document = (
            standalone_document(payload)
            if kind == KIND_STANDALONE
            else group_document(payload)
        )
        violations = plane.schemas.validate(document, ConfigId(org, name, version))
        return _json_response(
            {
                "valid": not violations,
                "violations": [v.to_json() for v in violations],
            }
        )

    # -- nodes and placements ----------------------------------------------------

    @app.post("/v1/nodes")
    async def register_node(request: Request) -> Response:
        body = await _read_object(request)
        labels = body.get("labels", {})
        if not isinstance(labels, dict):
            raise _BadRequest("body field 'labels' must be an object")
        node = plane.fleet.register_node(
            _field(body, "nodeId"), _field(body, "organization"), labels
        )
        return _json_response(node.to_json(), 201)

    @app.put("/v1/nodes/{node_id}/labels")
    async def set_labels(node_id: str, request: Request) -> Response:
        body = await _read_object(request)
        node = plane.fleet.set_labels(node_id, _field(body, "labels", dict))
        return _json_response(node.to_json())

    @app.get("/v1/nodes")
    def list_nodes(org: Optional[str] = None, query: Optional[str] = None) -> Response:
        if org is None:
            raise _BadRequest("query parameter 'org' is required")
        parsed = parse_label_query(query) if query else None
        nodes = plane.fleet.select_nodes(org, parsed)
        return _json_response({"nodes": [n.to_json() for n in nodes]})

    @app.get("/v1/nodes/{node_id}/namespaces/{namespace}/configs")
    def fetch(node_id: str, namespace: str, name: Optional[str] = None) -> Response:
        records = plane.fleet.fetch_config(node_id, namespace, name)
        return _json_response({"entries": [r.to_json() for r in records]})

    @app.post("/v1/disseminations")
    async def disseminate(request: Request) -> Response:
        body = await _read_object(request)
        kind = _field(body, "kind")
        if kind not in (KIND_STANDALONE, KIND_GROUP):
            raise _BadRequest("body field 'kind' must be 'standalone' or 'group'")
        config_id = ConfigId(
            _field(body, "org"), _field(body, "name"), _field(body, "version")
        )
        placement = plane.fleet.disseminate(
            config_id,
            kind,
            _field(body, "namespace"),
            parse_label_query(_field(body, "query")),
        )
        return _json_response(placement.to_json(), 201)

    return app


def serve(listen: str, store_path: str) -> None:
    """Run the service until interrupted; flushes the store on the way out."""
    host, _, port_text = listen.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        raise BindFailure(f"listen address must be host:port, got {listen!r}") from None
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host or "127.0.0.1", port))
    except OSError as exc:
        sock.close()
        raise BindFailure(f"cannot bind {listen!r}: {exc}") from exc
    bound_host, bound_port = sock.getsockname()[:2]

    plane = ControlPlane(store_path)
    app = create_app(plane)
    config = uvicorn.Config(app, log_level="warning", access_log=False)
    server = uvicorn.Server(config)
    print(f"listening on http://{bound_host}:{bound_port} store={store_path}", flush=True)
    try:
        server.run(sockets=[sock])
    finally:
        plane.close()


@click.command()
@click.option(
    "--listen",
    envvar="CONFPLANE_LISTEN",
    default="127.0.0.1:4600",
    show_default=True,
    help="host:port to bind",
)
@click.option(
    "--store",
    envvar="CONFPLANE_STORE",
    required=True,
    help="path of the embedded store file",
)
def main(listen: str, store: str) -> None:
    """Configuration control plane service."""
    try:
        serve(listen, store)
    except (BindFailure, StoreOpenFailure) as exc:
        raise click.ClickException(str(exc))


if __name__ == "__main__":
    main()
