"""Protocol objects for the request/result broker.

Capabilities pair a quantity label with a method and carry the input/output
schemas that every request and result is validated against. All envelope
metadata (UUIDs, timestamps, statuses) is server-assigned.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any

from ..clock import isoformat_ms

PENDING = "pending"
RESERVED = "reserved"
RESOLVED = "resolved"

STATUSES = (PENDING, RESERVED, RESOLVED)

# forward-only lifecycle; post_result may skip RESERVED
ALLOWED_TRANSITIONS = {
    (PENDING, RESERVED),
    (PENDING, RESOLVED),
    (RESERVED, RESOLVED),
}


@dataclass(frozen=True)
class Capability:
    quantity: str
    method: str
    input_schema: dict
    output_schema: dict

    @property
    def key(self) -> tuple[str, str]:
        return (self.quantity, self.method)


@dataclass
class TenantRegistration:
    tenant_uuid: str
    name: str
    capabilities: list[tuple[str, str]]
    registered_at: datetime

    def to_dict(self) -> dict:
        return {
            "tenant_uuid": self.tenant_uuid,
            "name": self.name,
            "capabilities": [list(c) for c in self.capabilities],
            "registered_at": isoformat_ms(self.registered_at),
        }


@dataclass
class RequestEnvelope:
    request_uuid: str
    quantity: str
    method: str
    parameters: dict
    status: str
    posted_at: datetime
    posted_by: str
    seq: int = 0
    reserved_by: str | None = None

    def to_dict(self) -> dict:
        return {
            "request_uuid": self.request_uuid,
            "capability": [self.quantity, self.method],
            "parameters": copy.deepcopy(self.parameters),
            "status": self.status,
            "posted_at": isoformat_ms(self.posted_at),
            "posted_by": self.posted_by,
            "reserved_by": self.reserved_by,
        }


@dataclass
class ResultEnvelope:
    result_uuid: str
    request_uuid: str
    data: dict
    requested_parameters: dict
    actual_parameters: dict
    posted_at: datetime
    posted_by: str

    def to_dict(self) -> dict:
        return {
            "result_uuid": self.result_uuid,
            "request_uuid": self.request_uuid,
            "data": copy.deepcopy(self.data),
            "requested_parameters": copy.deepcopy(self.requested_parameters),
            "actual_parameters": copy.deepcopy(self.actual_parameters),
            "posted_at": isoformat_ms(self.posted_at),
            "posted_by": self.posted_by,
        }


@dataclass
class Event:
    """Append-only audit log entry; the replay path rebuilds state from these."""

    seq: int
    at: datetime
    kind: str
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "at": isoformat_ms(self.at),
            "kind": self.kind,
            "payload": copy.deepcopy(self.payload),
        }


class PendingMarker:
    """Explicit not-yet-available marker returned by get_result."""

    __slots__ = ("request_uuid", "status")

    def __init__(self, request_uuid: str, status: str):
        self.request_uuid = request_uuid
        self.status = status

    def __repr__(self) -> str:  # pragma: no cover
        return f"PendingMarker({self.request_uuid!r}, {self.status!r})"


def deep_equal(a: Any, b: Any) -> bool:
    return a == b
