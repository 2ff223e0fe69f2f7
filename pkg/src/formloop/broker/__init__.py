from .model import (
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
from .service import (
    AlreadyReserved,
    Broker,
    BrokerError,
    DuplicateResult,
    NotFound,
    SchemaConflict,
    UnknownCapability,
)
from .storage import MemoryStore, SqliteStore
from .client import BrokerClient, HttpBrokerClient, LocalBrokerClient

__all__ = [
    "PENDING",
    "RESERVED",
    "RESOLVED",
    "AlreadyReserved",
    "Broker",
    "BrokerClient",
    "BrokerError",
    "Capability",
    "DuplicateResult",
    "Event",
    "HttpBrokerClient",
    "LocalBrokerClient",
    "MemoryStore",
    "NotFound",
    "PendingMarker",
    "RequestEnvelope",
    "ResultEnvelope",
    "SchemaConflict",
    "SqliteStore",
    "TenantRegistration",
    "UnknownCapability",
]
