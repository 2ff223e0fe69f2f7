"""The coordination service: tenant registry, typed requests, results.

Tenants register capabilities (a quantity/method pair plus input and output
schemas), poll for pending requests that match them, reserve one, and post a
result that resolves it. Every payload is validated against the registered
schema and rejected if it does not comply. The request lifecycle is strictly
forward: pending -> reserved -> resolved.

Known limitation: requests cannot be cancelled and never expire; a request
nobody serves stays pending forever.
"""

from __future__ import annotations

import copy
import threading
from typing import Iterable

from .. import schema as schemas
from ..clock import RandomIds, WallClock
from .model import (
    ALLOWED_TRANSITIONS,
    PENDING,
    RESERVED,
    RESOLVED,
    Capability,
    Event,
    PendingMarker,
    RequestEnvelope,
    ResultEnvelope,
    TenantRegistration,
)
from .storage import MemoryStore


class BrokerError(Exception):
    pass


class SchemaConflict(BrokerError):
    pass


class UnknownCapability(BrokerError):
    pass


class NotFound(BrokerError):
    pass


class AlreadyReserved(BrokerError):
    """Lost a reservation race; re-poll for other pending work."""


class DuplicateResult(BrokerError):
    pass


class Broker:
    """Core service; every public method is callable in-process or via HTTP.

    All state mutations happen under one lock, so reservation is an atomic
    compare-and-set on the request status.
    """

    def __init__(self, store=None, clock=None, ids=None, poll_limit: int | None = None):
        self.store = store if store is not None else MemoryStore()
        self.clock = clock if clock is not None else WallClock()
        self.ids = ids if ids is not None else RandomIds()
        self.poll_limit = poll_limit
        self._lock = threading.RLock()

    # -- registry ---------------------------------------------------------

    def register_tenant(self, name: str, capabilities: Iterable[Capability]) -> TenantRegistration:
        caps = list(capabilities)
        if not caps:
            raise BrokerError("a tenant must provide at least one capability")
        for cap in caps:
            schemas.check_schema(cap.input_schema)
            schemas.check_schema(cap.output_schema)
        with self._lock:
            for cap in caps:
                existing = self.store.get_capability(cap.key)
                if existing is not None and (
                    existing.input_schema != cap.input_schema
                    or existing.output_schema != cap.output_schema
                ):
                    raise SchemaConflict(
                        f"capability {cap.key} already registered with different schemas"
                    )
            registration = TenantRegistration(
                tenant_uuid=self.ids.new(),
                name=name,
                capabilities=[cap.key for cap in caps],
                registered_at=self.clock.now(),
            )
            for cap in caps:
                self.store.put_capability(cap)
            self.store.put_tenant(registration)
            self._log("tenant_registered", registration.to_dict())
            return registration

    def list_capabilities(self) -> list[Capability]:
        with self._lock:
            return self.store.list_capabilities()

    def get_capability(self, quantity: str, method: str) -> Capability:
        cap = self.store.get_capability((quantity, method))
        if cap is None:
            raise UnknownCapability(f"no capability registered for ({quantity}, {method})")
        return cap

    # -- requests ---------------------------------------------------------

    def post_request(self, capability: tuple[str, str], parameters: dict, poster: str) -> str:
        with self._lock:
            cap = self.get_capability(*capability)
            schemas.validate(parameters, cap.input_schema)
            request = RequestEnvelope(
                request_uuid=self.ids.new(),
                quantity=cap.quantity,
                method=cap.method,
                parameters=copy.deepcopy(parameters),
                status=PENDING,
                posted_at=self.clock.now(),
                posted_by=poster,
                seq=self.store.next_seq(),
            )
            self.store.put_request(request)
            self._log("request_posted", request.to_dict(), seq=request.seq)
            return request.request_uuid

    def get_request(self, request_uuid: str) -> RequestEnvelope:
        with self._lock:
            request = self.store.get_request(request_uuid)
            if request is None:
                raise NotFound(f"request {request_uuid} does not exist")
            return request

    def get_pending_requests(self, capability: tuple[str, str], limit: int | None = None) -> list[RequestEnvelope]:
        with self._lock:
            self.get_capability(*capability)
            return self.store.pending_requests(capability, limit or self.poll_limit)

    def reserve_request(self, request_uuid: str, tenant: str) -> dict:
        with self._lock:
            request = self.store.get_request(request_uuid)
            if request is None:
                raise NotFound(f"request {request_uuid} does not exist")
            if request.status != PENDING:
                raise AlreadyReserved(
                    f"request {request_uuid} is {request.status}, not pending"
                )
            self._transition(request, RESERVED)
            request.reserved_by = tenant
            self.store.put_request(request)
            self._log(
                "request_reserved",
                {"request_uuid": request_uuid, "tenant": tenant},
            )
            return {"request_uuid": request_uuid, "reserved_by": tenant}

    # -- results ----------------------------------------------------------

    def post_result(
        self,
        request_uuid: str,
        data: dict,
        actual_parameters: dict,
        poster: str,
    ) -> str:
        with self._lock:
            request = self.store.get_request(request_uuid)
            if request is None:
                raise NotFound(f"request {request_uuid} does not exist")
            if self.store.get_result_for(request_uuid) is not None:
                raise DuplicateResult(f"request {request_uuid} already has a result")
            if request.status not in (PENDING, RESERVED):
                raise DuplicateResult(
                    f"request {request_uuid} is already {request.status}"
                )
            cap = self.get_capability(request.quantity, request.method)
            schemas.validate(data, cap.output_schema)
            result = ResultEnvelope(
                result_uuid=self.ids.new(),
                request_uuid=request_uuid,
                data=copy.deepcopy(data),
                requested_parameters=copy.deepcopy(request.parameters),
                actual_parameters=copy.deepcopy(actual_parameters),
                posted_at=self.clock.now(),
                posted_by=poster,
            )
            self.store.put_result(result)
            self._transition(request, RESOLVED)
            self.store.put_request(request)
            self._log("result_posted", result.to_dict())
            return result.result_uuid

    def get_result(self, request_uuid: str) -> ResultEnvelope | PendingMarker:
        with self._lock:
            request = self.store.get_request(request_uuid)
            if request is None:
                raise NotFound(f"request {request_uuid} does not exist")
            result = self.store.get_result_for(request_uuid)
            if result is None:
                return PendingMarker(request_uuid, request.status)
            return result

    # -- audit ------------------------------------------------------------

    def events(self) -> list[Event]:
        with self._lock:
            return self.store.all_events()

    def all_requests(self) -> list[RequestEnvelope]:
        with self._lock:
            return self.store.all_requests()

    def all_results(self) -> list[ResultEnvelope]:
        with self._lock:
            return self.store.all_results()

    def _transition(self, request: RequestEnvelope, new_status: str) -> None:
        if (request.status, new_status) not in ALLOWED_TRANSITIONS:
            raise BrokerError(
                f"illegal status transition {request.status} -> {new_status}"
            )
        request.status = new_status

    def _log(self, kind: str, payload: dict, seq: int | None = None) -> None:
        event = Event(
            seq=seq if seq is not None else self.store.next_seq(),
            at=self.clock.now(),
            kind=kind,
            payload=payload,
        )
        self.store.append_event(event)
