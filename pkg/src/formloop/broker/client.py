"""Client interfaces to the broker.

Tenants talk to the broker through this interface only, so the same tenant
code runs in-process (deterministic test mode) or against a networked broker.
"""

from __future__ import annotations

from datetime import datetime
from typing import Protocol

import httpx

from .model import Capability, PendingMarker, RequestEnvelope, ResultEnvelope
from .service import (
    AlreadyReserved,
    Broker,
    DuplicateResult,
    NotFound,
    UnknownCapability,
)
from .. import schema as schemas


class BrokerClient(Protocol):
    def register_tenant(self, name: str, capabilities: list[Capability]) -> str: ...

    def post_request(self, capability: tuple[str, str], parameters: dict, poster: str) -> str: ...

    def get_pending_requests(self, capability: tuple[str, str]) -> list[RequestEnvelope]: ...

    def reserve_request(self, request_uuid: str, tenant: str) -> bool: ...

    def post_result(self, request_uuid: str, data: dict, actual_parameters: dict, poster: str) -> str: ...

    def get_result(self, request_uuid: str) -> ResultEnvelope | PendingMarker: ...


class LocalBrokerClient:
    """Direct in-process calls against a Broker instance."""

    def __init__(self, broker: Broker):
        self.broker = broker

    def register_tenant(self, name: str, capabilities: list[Capability]) -> str:
        return self.broker.register_tenant(name, capabilities).tenant_uuid

    def post_request(self, capability, parameters, poster) -> str:
        return self.broker.post_request(capability, parameters, poster)

    def get_pending_requests(self, capability) -> list[RequestEnvelope]:
        return self.broker.get_pending_requests(capability)

    def reserve_request(self, request_uuid: str, tenant: str) -> bool:
        try:
            self.broker.reserve_request(request_uuid, tenant)
            return True
        except AlreadyReserved:
            return False

    def post_result(self, request_uuid, data, actual_parameters, poster) -> str:
        return self.broker.post_result(request_uuid, data, actual_parameters, poster)

    def get_result(self, request_uuid: str):
        return self.broker.get_result(request_uuid)


class HttpBrokerClient:
    """Same interface over the HTTP API."""

    def __init__(self, base_url: str, token: str | None = None, timeout: float = 10.0):
        headers = {"x-tenant-token": token} if token else {}
        self._http = httpx.Client(base_url=base_url, headers=headers, timeout=timeout)

    def register_tenant(self, name: str, capabilities: list[Capability]) -> str:
        payload = {
            "name": name,
            "capabilities": [
                {
                    "quantity": c.quantity,
                    "method": c.method,
                    "input_schema": c.input_schema,
                    "output_schema": c.output_schema,
                }
                for c in capabilities
            ],
        }
        resp = self._http.post("/tenants", json=payload)
        _raise_for_error(resp)
        return resp.json()["tenant_uuid"]

    def post_request(self, capability, parameters, poster) -> str:
        resp = self._http.post(
            "/requests",
            json={
                "quantity": capability[0],
                "method": capability[1],
                "parameters": parameters,
                "poster": poster,
            },
        )
        _raise_for_error(resp)
        return resp.json()["request_uuid"]

    def get_pending_requests(self, capability) -> list[RequestEnvelope]:
        resp = self._http.get(
            "/requests/pending",
            params={"quantity": capability[0], "method": capability[1]},
        )
        _raise_for_error(resp)
        return [_request_from_json(r) for r in resp.json()["requests"]]

    def reserve_request(self, request_uuid: str, tenant: str) -> bool:
        resp = self._http.post(f"/requests/{request_uuid}/reserve", json={"tenant": tenant})
        if resp.status_code == 409:
            return False
        _raise_for_error(resp)
        return True

    def post_result(self, request_uuid, data, actual_parameters, poster) -> str:
        resp = self._http.post(
            "/results",
            json={
                "request_uuid": request_uuid,
                "data": data,
                "actual_parameters": actual_parameters,
                "poster": poster,
            },
        )
        _raise_for_error(resp)
        return resp.json()["result_uuid"]

    def get_result(self, request_uuid: str):
        resp = self._http.get(f"/results/by-request/{request_uuid}")
        _raise_for_error(resp)
        body = resp.json()
        if body.get("status") in ("pending", "reserved"):
            return PendingMarker(request_uuid, body["status"])
        return _result_from_json(body)


_ERROR_CLASSES = {
    "UnknownCapability": UnknownCapability,
    "ValidationError": schemas.ValidationError,
    "InvalidSchema": schemas.InvalidSchema,
    "NotFound": NotFound,
    "AlreadyReserved": AlreadyReserved,
    "DuplicateResult": DuplicateResult,
}


def _raise_for_error(resp: httpx.Response) -> None:
    if resp.status_code < 400:
        return
    try:
        detail = resp.json().get("detail", {})
    except ValueError:
        detail = {}
    if isinstance(detail, dict) and "error" in detail:
        cls = _ERROR_CLASSES.get(detail["error"], Exception)
        raise cls(detail.get("message", resp.text))
    resp.raise_for_status()


def _request_from_json(doc: dict) -> RequestEnvelope:
    return RequestEnvelope(
        request_uuid=doc["request_uuid"],
        quantity=doc["capability"][0],
        method=doc["capability"][1],
        parameters=doc["parameters"],
        status=doc["status"],
        posted_at=datetime.fromisoformat(doc["posted_at"]),
        posted_by=doc["posted_by"],
        reserved_by=doc.get("reserved_by"),
    )


def _result_from_json(doc: dict) -> ResultEnvelope:
    return ResultEnvelope(
        result_uuid=doc["result_uuid"],
        request_uuid=doc["request_uuid"],
        data=doc["data"],
        requested_parameters=doc["requested_parameters"],
        actual_parameters=doc["actual_parameters"],
        posted_at=datetime.fromisoformat(doc["posted_at"]),
        posted_by=doc["posted_by"],
    )
