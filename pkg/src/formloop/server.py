"""HTTP surface: broker endpoints plus the read/control endpoints the UI uses.

One FastAPI app wraps a running platform. The broker protocol endpoints are
callable by networked tenants; the UI consumes the dashboard payload, record
and graph reads, the manual-task inbox, and the tag/exclusion controls.
Errors carry a machine-readable {"error": <class>, "message": ...} detail.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import records as rec
from . import schema as schemas
from .analysis import EmptyStudy, build_dashboard_payload
from .broker import (
    AlreadyReserved,
    Broker,
    BrokerError,
    Capability,
    DuplicateResult,
    NotFound,
    PendingMarker,
    SchemaConflict,
    UnknownCapability,
)

_STATUS = {
    NotFound: 404,
    rec.NotFound: 404,
    UnknownCapability: 404,
    AlreadyReserved: 409,
    DuplicateResult: 409,
    SchemaConflict: 409,
    rec.DuplicateLink: 409,
    rec.DuplicateIdentifier: 409,
    rec.SelfLink: 422,
    schemas.ValidationError: 422,
    schemas.InvalidSchema: 422,
    EmptyStudy: 409,
    BrokerError: 400,
    rec.RecordsError: 400,
}

MANUAL_CAPABILITIES = (("transport", "manual"), ("electrolyte", "manual"))


def _error(exc: Exception) -> HTTPException:
    for cls, code in _STATUS.items():
        if isinstance(exc, cls):
            return HTTPException(
                status_code=code,
                detail={"error": cls.__name__, "message": str(exc)},
            )
    return HTTPException(status_code=500, detail={"error": "Internal", "message": str(exc)})


class TenantIn(BaseModel):
    name: str
    capabilities: list[dict]


class RequestIn(BaseModel):
    quantity: str
    method: str
    parameters: dict
    poster: str


class ReserveIn(BaseModel):
    tenant: str


class ResultIn(BaseModel):
    request_uuid: str
    data: dict
    actual_parameters: dict
    poster: str


class ConfirmIn(BaseModel):
    data: dict | None = None
    operator: str = "ui-operator"


class TagIn(BaseModel):
    tag: str


class ControlIn(BaseModel):
    excluded: bool | None = None
    note: str | None = None


def create_app(runtime, frontend_dist: str | Path | None = None) -> FastAPI:
    """Build the app around a StudyRuntime (or anything with its attributes)."""
    app = FastAPI(title="formloop", version="0.1.0")
    broker: Broker = runtime.broker
    store: rec.RecordStore = runtime.store
    token = getattr(runtime.config.broker, "token", None)

    def check_token(request: Request) -> None:
        if token and request.headers.get("x-tenant-token") != token:
            raise HTTPException(status_code=401, detail={"error": "Unauthorized", "message": "bad tenant token"})

    # -- broker protocol ---------------------------------------------------

    @app.post("/tenants")
    def register_tenant(body: TenantIn, request: Request):
        check_token(request)
        caps = [
            Capability(c["quantity"], c["method"], c["input_schema"], c["output_schema"])
            for c in body.capabilities
        ]
        try:
            return broker.register_tenant(body.name, caps).to_dict()
        except Exception as exc:
            raise _error(exc)

    @app.get("/capabilities")
    def list_capabilities():
        return {
            "capabilities": [
                {
                    "quantity": c.quantity,
                    "method": c.method,
                    "input_schema": c.input_schema,
                    "output_schema": c.output_schema,
                }
                for c in broker.list_capabilities()
            ]
        }

    @app.get("/capabilities/{quantity}/{method}")
    def get_capability(quantity: str, method: str):
        try:
            c = broker.get_capability(quantity, method)
        except Exception as exc:
            raise _error(exc)
        return {
            "quantity": c.quantity,
            "method": c.method,
            "input_schema": c.input_schema,
            "output_schema": c.output_schema,
        }

    @app.post("/requests")
    def post_request(body: RequestIn, request: Request):
        check_token(request)
        try:
            uuid = broker.post_request((body.quantity, body.method), body.parameters, body.poster)
        except Exception as exc:
            raise _error(exc)
        return {"request_uuid": uuid, "status": "pending"}

    @app.get("/requests/pending")
    def pending_requests(quantity: str, method: str):
        try:
            rows = broker.get_pending_requests((quantity, method))
        except Exception as exc:
            raise _error(exc)
        return {"requests": [r.to_dict() for r in rows]}

    @app.get("/requests/{request_uuid}")
    def get_request(request_uuid: str):
        try:
            return broker.get_request(request_uuid).to_dict()
        except Exception as exc:
            raise _error(exc)

    @app.post("/requests/{request_uuid}/reserve")
    def reserve(request_uuid: str, body: ReserveIn, request: Request):
        check_token(request)
        try:
            return broker.reserve_request(request_uuid, body.tenant)
        except Exception as exc:
            raise _error(exc)

    @app.post("/results")
    def post_result(body: ResultIn, request: Request):
        check_token(request)
        try:
            uuid = broker.post_result(
                body.request_uuid, body.data, body.actual_parameters, body.poster
            )
        except Exception as exc:
            raise _error(exc)
        return {"result_uuid": uuid}

    @app.get("/results/by-request/{request_uuid}")
    def get_result(request_uuid: str):
        try:
            res = broker.get_result(request_uuid)
        except Exception as exc:
            raise _error(exc)
        if isinstance(res, PendingMarker):
            return {"request_uuid": request_uuid, "status": res.status}
        return res.to_dict()

    @app.get("/events")
    def events(limit: int = 1000):
        return {"events": [e.to_dict() for e in broker.events()[-limit:]]}

    # -- records / graph -----------------------------------------------------

    @app.get("/records")
    def query_records(tag: str | None = None, identifier: str | None = None):
        try:
            if identifier:
                return {"records": [store.get_by_identifier(identifier).to_dict()]}
            if tag:
                return {"records": [r.to_dict() for r in store.query_by_tag(tag)]}
        except Exception as exc:
            raise _error(exc)
        return {"records": [r.to_dict() for r in store.all_records()]}

    @app.get("/records/{record_id}")
    def get_record(record_id: str):
        try:
            return store.get(record_id).to_dict()
        except Exception as exc:
            raise _error(exc)

    @app.get("/records/{record_id}/neighborhood")
    def neighborhood(record_id: str):
        try:
            record = store.get(record_id)
        except Exception as exc:
            raise _error(exc)
        links = store.links_of(record_id)
        nodes = {record_id: record.to_dict()}
        for link in links:
            for node_id in (link.from_id, link.to_id):
                if node_id not in nodes:
                    nodes[node_id] = store.get(node_id).to_dict()
        return {
            "record": record.to_dict(),
            "nodes": list(nodes.values()),
            "links": [
                {"from": l.from_id, "to": l.to_id, "label": l.label} for l in links
            ],
        }

    @app.post("/records/{record_id}/tags")
    def add_tag(record_id: str, body: TagIn):
        try:
            invocations = store.add_tag(record_id, body.tag)
        except Exception as exc:
            raise _error(exc)
        return {"record_id": record_id, "tag": body.tag, "hooks": [i.hook for i in invocations]}

    @app.post("/records/{record_id}/control")
    def control(record_id: str, body: ControlIn):
        """Exclusion flags and notes; the only metadata the UI may write."""
        patch: dict[str, Any] = {}
        if body.excluded is not None:
            patch["excluded"] = body.excluded
        if body.note is not None:
            try:
                notes = list(store.get(record_id).metadata.get("notes", []))
            except Exception as exc:
                raise _error(exc)
            notes.append(body.note)
            patch["notes"] = notes
        try:
            record = store.update_metadata(record_id, patch)
        except Exception as exc:
            raise _error(exc)
        return record.to_dict()

    # -- study views -----------------------------------------------------------

    @app.get("/studies")
    def studies():
        return {
            "studies": [
                r.to_dict() for r in store.all_records() if "design_parameters" in r.metadata
            ]
        }

    @app.get("/studies/{identifier}/dashboard")
    def dashboard(identifier: str):
        try:
            umbrella = store.get_by_identifier(identifier)
            state = runtime.agent.build_state(umbrella)
            return build_dashboard_payload(state)
        except Exception as exc:
            raise _error(exc)

    @app.get("/orchestrator/status")
    def orchestrator_status():
        return {
            "active": runtime.overlort.status(),
            "archived": len(runtime.overlort.archive),
            "max_parallel": runtime.overlort.max_parallel,
        }

    # -- manual-task inbox -------------------------------------------------------

    @app.get("/inbox")
    def inbox():
        cards = []
        for capability in MANUAL_CAPABILITIES:
            try:
                pending = broker.get_pending_requests(capability)
            except UnknownCapability:
                continue
            schema = broker.get_capability(*capability).output_schema
            for req in pending:
                cards.append(
                    {
                        "request_uuid": req.request_uuid,
                        "capability": list(capability),
                        "parameters": req.parameters,
                        "posted_at": req.to_dict()["posted_at"],
                        "form_schema": schema,
                    }
                )
        return {"tasks": cards}

    @app.post("/inbox/{request_uuid}/confirm")
    def confirm(request_uuid: str, body: ConfirmIn):
        try:
            req = broker.get_request(request_uuid)
            data = body.data if body.data is not None else {"confirmed": True}
            result_uuid = broker.post_result(request_uuid, data, req.parameters, body.operator)
        except Exception as exc:
            raise _error(exc)
        return {"result_uuid": result_uuid, "request_uuid": request_uuid}

    # -- static frontend ---------------------------------------------------------

    dist = Path(frontend_dist) if frontend_dist else None
    if dist and dist.exists():
        app.mount("/ui", StaticFiles(directory=dist, html=True), name="ui")

        @app.get("/")
        def root():
            return FileResponse(dist / "index.html")

    return app
