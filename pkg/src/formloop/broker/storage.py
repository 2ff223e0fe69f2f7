"""Storage backends for the broker.

Two interchangeable backends: an in-memory store (test default, also used by
the deterministic in-process runtime) and a sqlite-backed store. Rows are
keyed by UUID; envelopes are serialized as JSON documents next to the columns
the broker filters on.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from datetime import datetime

from .model import Capability, Event, RequestEnvelope, ResultEnvelope, TenantRegistration


class MemoryStore:
    """Dict-backed store; shares the Broker's lock, no internal locking."""

    def __init__(self):
        self.capabilities: dict[tuple[str, str], Capability] = {}
        self.tenants: dict[str, TenantRegistration] = {}
        self.requests: dict[str, RequestEnvelope] = {}
        self.results: dict[str, ResultEnvelope] = {}
        self.result_by_request: dict[str, str] = {}
        self.events: list[Event] = []
        self._seq = 0

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def put_capability(self, cap: Capability) -> None:
        self.capabilities[cap.key] = cap

    def get_capability(self, key: tuple[str, str]) -> Capability | None:
        return self.capabilities.get(key)

    def list_capabilities(self) -> list[Capability]:
        return [self.capabilities[k] for k in sorted(self.capabilities)]

    def put_tenant(self, reg: TenantRegistration) -> None:
        self.tenants[reg.tenant_uuid] = reg

    def list_tenants(self) -> list[TenantRegistration]:
        return list(self.tenants.values())

    def put_request(self, req: RequestEnvelope) -> None:
        self.requests[req.request_uuid] = req

    def get_request(self, request_uuid: str) -> RequestEnvelope | None:
        return self.requests.get(request_uuid)

    def pending_requests(self, key: tuple[str, str], limit: int | None = None) -> list[RequestEnvelope]:
        rows = [
            r
            for r in self.requests.values()
            if (r.quantity, r.method) == key and r.status == "pending"
        ]
        rows.sort(key=lambda r: (r.posted_at, r.seq))
        return rows[:limit] if limit else rows

    def all_requests(self) -> list[RequestEnvelope]:
        rows = list(self.requests.values())
        rows.sort(key=lambda r: (r.posted_at, r.seq))
        return rows

    def put_result(self, res: ResultEnvelope) -> None:
        self.results[res.result_uuid] = res
        self.result_by_request[res.request_uuid] = res.result_uuid

    def get_result_for(self, request_uuid: str) -> ResultEnvelope | None:
        rid = self.result_by_request.get(request_uuid)
        return self.results.get(rid) if rid else None

    def all_results(self) -> list[ResultEnvelope]:
        return sorted(self.results.values(), key=lambda r: r.posted_at)

    def append_event(self, event: Event) -> None:
        self.events.append(event)

    def all_events(self) -> list[Event]:
        return list(self.events)


class SqliteStore:
    """sqlite3-backed store with the same interface as MemoryStore."""

    def __init__(self, path: str = ":memory:"):
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._lock = threading.RLock()
        self._conn.execute("PRAGMA journal_mode=WAL") if path != ":memory:" else None
        self._create_tables()

    def _create_tables(self) -> None:
        with self._lock, self._conn as conn:
            conn.executescript(
                """
                CREATE TABLE IF NOT EXISTS capabilities (
                    quantity TEXT, method TEXT, input_schema TEXT, output_schema TEXT,
                    PRIMARY KEY (quantity, method));
                CREATE TABLE IF NOT EXISTS tenants (
                    tenant_uuid TEXT PRIMARY KEY, name TEXT, capabilities TEXT,
                    registered_at TEXT);
                CREATE TABLE IF NOT EXISTS requests (
                    request_uuid TEXT PRIMARY KEY, quantity TEXT, method TEXT,
                    parameters TEXT, status TEXT, posted_at TEXT, posted_by TEXT,
                    seq INTEGER, reserved_by TEXT);
                CREATE TABLE IF NOT EXISTS results (
                    result_uuid TEXT PRIMARY KEY, request_uuid TEXT UNIQUE,
                    data TEXT, requested_parameters TEXT, actual_parameters TEXT,
                    posted_at TEXT, posted_by TEXT);
                CREATE TABLE IF NOT EXISTS events (
                    seq INTEGER PRIMARY KEY, at TEXT, kind TEXT, payload TEXT);
                """
            )

    def next_seq(self) -> int:
        with self._lock:
            row = self._conn.execute("SELECT COALESCE(MAX(seq), 0) FROM events").fetchone()
            return int(row[0]) + 1

    def put_capability(self, cap: Capability) -> None:
        with self._lock, self._conn as conn:
            conn.execute(
                "INSERT OR REPLACE INTO capabilities VALUES (?,?,?,?)",
                (cap.quantity, cap.method, json.dumps(cap.input_schema), json.dumps(cap.output_schema)),
            )

    def get_capability(self, key: tuple[str, str]) -> Capability | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT quantity, method, input_schema, output_schema FROM capabilities "
                "WHERE quantity=? AND method=?",
                key,
            ).fetchone()
        if row is None:
            return None
        return Capability(row[0], row[1], json.loads(row[2]), json.loads(row[3]))

    def list_capabilities(self) -> list[Capability]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT quantity, method, input_schema, output_schema FROM capabilities "
                "ORDER BY quantity, method"
            ).fetchall()
        return [Capability(r[0], r[1], json.loads(r[2]), json.loads(r[3])) for r in rows]

    def put_tenant(self, reg: TenantRegistration) -> None:
        with self._lock, self._conn as conn:
            conn.execute(
                "INSERT OR REPLACE INTO tenants VALUES (?,?,?,?)",
                (
                    reg.tenant_uuid,
                    reg.name,
                    json.dumps([list(c) for c in reg.capabilities]),
                    reg.registered_at.isoformat(),
                ),
            )

    def list_tenants(self) -> list[TenantRegistration]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT tenant_uuid, name, capabilities, registered_at FROM tenants"
            ).fetchall()
        return [
            TenantRegistration(
                r[0], r[1], [tuple(c) for c in json.loads(r[2])], datetime.fromisoformat(r[3])
            )
            for r in rows
        ]

    def put_request(self, req: RequestEnvelope) -> None:
        with self._lock, self._conn as conn:
            conn.execute(
                "INSERT OR REPLACE INTO requests VALUES (?,?,?,?,?,?,?,?,?)",
                (
                    req.request_uuid,
                    req.quantity,
                    req.method,
                    json.dumps(req.parameters),
                    req.status,
                    req.posted_at.isoformat(),
                    req.posted_by,
                    req.seq,
                    req.reserved_by,
                ),
            )

    @staticmethod
    def _request_from_row(row) -> RequestEnvelope:
        return RequestEnvelope(
            request_uuid=row[0],
            quantity=row[1],
            method=row[2],
            parameters=json.loads(row[3]),
            status=row[4],
            posted_at=datetime.fromisoformat(row[5]),
            posted_by=row[6],
            seq=row[7],
            reserved_by=row[8],
        )

    def get_request(self, request_uuid: str) -> RequestEnvelope | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM requests WHERE request_uuid=?", (request_uuid,)
            ).fetchone()
        return self._request_from_row(row) if row else None

    def pending_requests(self, key: tuple[str, str], limit: int | None = None) -> list[RequestEnvelope]:
        sql = (
            "SELECT * FROM requests WHERE quantity=? AND method=? AND status='pending' "
            "ORDER BY posted_at, seq"
        )
        if limit:
            sql += f" LIMIT {int(limit)}"
        with self._lock:
            rows = self._conn.execute(sql, key).fetchall()
        return [self._request_from_row(r) for r in rows]

    def all_requests(self) -> list[RequestEnvelope]:
        with self._lock:
            rows = self._conn.execute("SELECT * FROM requests ORDER BY posted_at, seq").fetchall()
        return [self._request_from_row(r) for r in rows]

    def put_result(self, res: ResultEnvelope) -> None:
        with self._lock, self._conn as conn:
            conn.execute(
                "INSERT OR REPLACE INTO results VALUES (?,?,?,?,?,?,?)",
                (
                    res.result_uuid,
                    res.request_uuid,
                    json.dumps(res.data),
                    json.dumps(res.requested_parameters),
                    json.dumps(res.actual_parameters),
                    res.posted_at.isoformat(),
                    res.posted_by,
                ),
            )

    @staticmethod
    def _result_from_row(row) -> ResultEnvelope:
        return ResultEnvelope(
            result_uuid=row[0],
            request_uuid=row[1],
            data=json.loads(row[2]),
            requested_parameters=json.loads(row[3]),
            actual_parameters=json.loads(row[4]),
            posted_at=datetime.fromisoformat(row[5]),
            posted_by=row[6],
        )

    def get_result_for(self, request_uuid: str) -> ResultEnvelope | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM results WHERE request_uuid=?", (request_uuid,)
            ).fetchone()
        return self._result_from_row(row) if row else None

    def all_results(self) -> list[ResultEnvelope]:
        with self._lock:
            rows = self._conn.execute("SELECT * FROM results ORDER BY posted_at").fetchall()
        return [self._result_from_row(r) for r in rows]

    def append_event(self, event: Event) -> None:
        with self._lock, self._conn as conn:
            conn.execute(
                "INSERT INTO events VALUES (?,?,?,?)",
                (event.seq, event.at.isoformat(), event.kind, json.dumps(event.payload)),
            )

    def all_events(self) -> list[Event]:
        with self._lock:
            rows = self._conn.execute("SELECT * FROM events ORDER BY seq").fetchall()
        return [
            Event(seq=r[0], at=datetime.fromisoformat(r[1]), kind=r[2], payload=json.loads(r[3]))
            for r in rows
        ]
