"""Record store: structured metadata, labeled links, tag-triggered hooks.

Records hold key-value metadata and a tag set; labeled links between records
form the knowledge graph that the optimization study hangs off (trials link
to their umbrella, the umbrella links to the base workflow blueprint, and so
on). Tags beginning with "!" are reserved state/control tags; plugins
subscribe to exact tag strings and are invoked whenever a tag transitions
from absent to present on a record.

State tags are additive history: a completed trial keeps its running tag, and
the current state is the highest-precedence tag present.

Record deletion is unsupported, which is what keeps link endpoints from ever
dangling. Collections are plain records whose members hang off "collects"
links rather than a separate entity.
"""

from __future__ import annotations

import copy
import json
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Callable

from . import schema as schemas
from .clock import RandomIds, WallClock, isoformat_ms

# Reserved control tags. Hooks subscribe by exact string.
TAG_UMBRELLA_ACTIVE = "!kadiaigent-al-umbrella-active"
TAG_TRIAL_RUNNING = "!kadiaigent-al-trial-running"
TAG_TRIAL_COMPLETED = "!kadiaigent-al-trial-completed"
TAG_TO_BROKER = "!to-finales"
TAG_REQUEST_RUNNING = "!finales-request-running"
TAG_REQUEST_COMPLETED = "!finales-request-completed"

LINK_TRIAL_FOR = "!kadiaigent-al-trial-for"
LINK_BASE_WORKFLOW_FOR = "!finales-baseworkflow-for"
LINK_REQUEST_FOR = "!finales-request-for"
LINK_RESULT_FOR = "result-for"
LINK_COLLECTS = "collects"

# Highest precedence wins when reading a record's current state.
STATE_TAG_PRECEDENCE = (TAG_TRIAL_COMPLETED, TAG_TRIAL_RUNNING)

_PLACEHOLDER = re.compile(r"\{([a-zA-Z_][a-zA-Z0-9_]*)\}")

_PLACEHOLDER_TYPES = {
    "number": (int, float),
    "integer": (int,),
    "string": (str,),
    "boolean": (bool,),
}


class RecordsError(Exception):
    pass


class NotFound(RecordsError):
    pass


class DuplicateIdentifier(RecordsError):
    pass


class DuplicateLink(RecordsError):
    pass


class SelfLink(RecordsError):
    pass


class UnboundPlaceholder(RecordsError):
    def __init__(self, name: str):
        super().__init__(f"no binding for placeholder '{name}'")
        self.name = name


class TypeMismatch(RecordsError):
    def __init__(self, name: str, expected: str, value: Any):
        super().__init__(
            f"binding for '{name}' must be {expected}, got {value!r}"
        )
        self.name = name


@dataclass
class Record:
    record_id: str
    identifier: str
    title: str
    metadata: dict
    tags: set[str]
    created_at: datetime
    updated_at: datetime

    def current_state(self) -> str | None:
        for tag in STATE_TAG_PRECEDENCE:
            if tag in self.tags:
                return tag
        return None

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "identifier": self.identifier,
            "title": self.title,
            "metadata": copy.deepcopy(self.metadata),
            "tags": sorted(self.tags),
            "created_at": isoformat_ms(self.created_at),
            "updated_at": isoformat_ms(self.updated_at),
        }


@dataclass(frozen=True)
class RecordLink:
    from_id: str
    to_id: str
    label: str


@dataclass
class Template:
    template_id: str
    metadata_schema: dict

    def defaults(self) -> dict:
        out = {}
        for key, prop in self.metadata_schema.get("properties", {}).items():
            if isinstance(prop, dict) and "default" in prop:
                out[key] = copy.deepcopy(prop["default"])
        return out


@dataclass(frozen=True)
class TagEvent:
    record_id: str
    tag: str
    added_at: datetime


@dataclass
class HookInvocation:
    hook: str
    event: TagEvent


@dataclass
class _Hook:
    name: str
    tag: str
    fn: Callable[[TagEvent], None]


def slugify(title: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", title.lower()).strip("-")
    return slug or "record"


class RecordStore:
    """In-memory record/link/tag store with hook dispatch.

    Dispatch is queue-based: tag additions enqueue events, and either run the
    hooks immediately (`defer_dispatch=False`, the default) or leave them for
    an explicit `drain()` (the runtime tick loop uses this to serialize hook
    side effects). Delivery is at-least-once; hooks are expected to be
    idempotent. Events are created exactly once per absent->present tag
    transition, which is the bookkeeping that keeps idempotence cheap.
    """

    def __init__(self, clock=None, ids=None, defer_dispatch: bool = False):
        self.clock = clock if clock is not None else WallClock()
        self.ids = ids if ids is not None else RandomIds()
        self.defer_dispatch = defer_dispatch
        self._records: dict[str, Record] = {}
        self._by_identifier: dict[str, str] = {}
        self._links: list[RecordLink] = []
        self._link_keys: set[tuple[str, str, str]] = set()
        self._hooks: list[_Hook] = []
        self._queue: list[TagEvent] = []
        self._tag_events: list[TagEvent] = []
        self._lock = threading.RLock()

    # -- records ----------------------------------------------------------

    def create_record(
        self,
        title: str,
        metadata: dict | None = None,
        template: Template | None = None,
        identifier: str | None = None,
    ) -> Record:
        metadata = copy.deepcopy(metadata or {})
        if template is not None:
            merged = template.defaults()
            merged.update(metadata)
            metadata = merged
            schemas.validate(metadata, template.metadata_schema)
        with self._lock:
            ident = identifier or self._fresh_identifier(slugify(title))
            if ident in self._by_identifier:
                raise DuplicateIdentifier(f"identifier '{ident}' already in use")
            now = self.clock.now()
            record = Record(
                record_id=self.ids.new(),
                identifier=ident,
                title=title,
                metadata=metadata,
                tags=set(),
                created_at=now,
                updated_at=now,
            )
            self._records[record.record_id] = record
            self._by_identifier[ident] = record.record_id
            return record

    def _fresh_identifier(self, base: str) -> str:
        if base not in self._by_identifier:
            return base
        n = 2
        while f"{base}-{n}" in self._by_identifier:
            n += 1
        return f"{base}-{n}"

    def get(self, record_id: str) -> Record:
        record = self._records.get(record_id)
        if record is None:
            raise NotFound(f"record {record_id} does not exist")
        return record

    def get_by_identifier(self, identifier: str) -> Record:
        record_id = self._by_identifier.get(identifier)
        if record_id is None:
            raise NotFound(f"no record with identifier '{identifier}'")
        return self._records[record_id]

    def update_metadata(self, record_id: str, patch: dict) -> Record:
        with self._lock:
            record = self.get(record_id)
            record.metadata.update(copy.deepcopy(patch))
            record.updated_at = self.clock.now()
            return record

    def all_records(self) -> list[Record]:
        return sorted(self._records.values(), key=lambda r: r.record_id)

    # -- tags and hooks ----------------------------------------------------

    def subscribe(self, tag: str, fn: Callable[[TagEvent], None], name: str | None = None) -> None:
        self._hooks.append(_Hook(name=name or getattr(fn, "__name__", "hook"), tag=tag, fn=fn))

    def add_tag(self, record_id: str, tag: str) -> list[HookInvocation]:
        with self._lock:
            record = self.get(record_id)
            if tag in record.tags:
                return []
            record.tags.add(tag)
            record.updated_at = self.clock.now()
            event = TagEvent(record_id=record_id, tag=tag, added_at=record.updated_at)
            self._tag_events.append(event)
            self._queue.append(event)
        if self.defer_dispatch:
            return [
                HookInvocation(hook=h.name, event=event)
                for h in self._hooks
                if h.tag == tag
            ]
        return self.drain()

    def drain(self) -> list[HookInvocation]:
        """Deliver queued tag events to their subscribed hooks (FIFO)."""
        invocations: list[HookInvocation] = []
        while True:
            with self._lock:
                if not self._queue:
                    return invocations
                event = self._queue.pop(0)
            for hook in list(self._hooks):
                if hook.tag == event.tag:
                    hook.fn(event)
                    invocations.append(HookInvocation(hook=hook.name, event=event))

    def query_by_tag(self, tag: str) -> list[Record]:
        return sorted(
            (r for r in self._records.values() if tag in r.tags),
            key=lambda r: r.record_id,
        )

    def tag_events(self) -> list[TagEvent]:
        return list(self._tag_events)

    # -- links and graph ----------------------------------------------------

    def add_link(self, from_id: str, to_id: str, label: str) -> RecordLink:
        with self._lock:
            self.get(from_id)
            self.get(to_id)
            if from_id == to_id:
                raise SelfLink(f"record {from_id} cannot link to itself")
            key = (from_id, to_id, label)
            if key in self._link_keys:
                raise DuplicateLink(f"link {key} already exists")
            link = RecordLink(from_id, to_id, label)
            self._links.append(link)
            self._link_keys.add(key)
            return link

    def links_of(self, record_id: str) -> list[RecordLink]:
        return [l for l in self._links if record_id in (l.from_id, l.to_id)]

    def neighbors(self, record_id: str, label: str, direction: str = "out") -> list[Record]:
        if direction not in ("out", "in"):
            raise ValueError(f"direction must be 'out' or 'in', got {direction!r}")
        hits = []
        for link in self._links:
            if link.label != label:
                continue
            if direction == "out" and link.from_id == record_id:
                hits.append(self._records[link.to_id])
            elif direction == "in" and link.to_id == record_id:
                hits.append(self._records[link.from_id])
        return sorted(hits, key=lambda r: r.record_id)

    def trace(self, start: str, path: list[tuple[str, str]]) -> list[Record]:
        """Follow an exact labeled path of (label, direction) hops from `start`.

        Returns all records reachable over the full path, sorted by record_id;
        an unknown label simply yields no hits.
        """
        self.get(start)
        frontier = {start}
        for label, direction in path:
            next_frontier: set[str] = set()
            for record_id in frontier:
                for rec in self.neighbors(record_id, label, direction):
                    next_frontier.add(rec.record_id)
            frontier = next_frontier
            if not frontier:
                return []
        return sorted((self._records[r] for r in frontier), key=lambda r: r.record_id)

    def find_by_metadata(self, key: str, value: Any) -> list[Record]:
        """UUID-search fallback for result discovery (poll mode)."""
        return sorted(
            (r for r in self._records.values() if r.metadata.get(key) == value),
            key=lambda r: r.record_id,
        )

    # -- interchange ---------------------------------------------------------

    def export_record(self, record_id: str) -> str:
        return json.dumps(self.get(record_id).to_dict(), indent=2, sort_keys=True)

    def import_record(self, doc: str) -> Record:
        data = json.loads(doc)
        record = self.create_record(
            title=data["title"],
            metadata=data["metadata"],
            identifier=data["identifier"],
        )
        for tag in data.get("tags", []):
            self.add_tag(record.record_id, tag)
        return record


def fill_blueprint(base_workflow: Record, bindings: dict[str, Any]) -> dict:
    """Substitute placeholders in a blueprint record's workflow document.

    The blueprint metadata holds a `document` with `{name}` placeholders in
    its leaf strings and a `placeholders` map declaring each name's type.
    A leaf that is exactly one placeholder is replaced by the typed value;
    placeholders embedded in longer strings are substituted textually.
    """
    declared: dict[str, str] = base_workflow.metadata.get("placeholders", {})
    document = base_workflow.metadata.get("document", {})

    def check(name: str) -> Any:
        if name not in bindings:
            raise UnboundPlaceholder(name)
        value = bindings[name]
        expected = declared.get(name)
        if expected is not None:
            allowed = _PLACEHOLDER_TYPES.get(expected, (object,))
            if isinstance(value, bool) and expected != "boolean":
                raise TypeMismatch(name, expected, value)
            if not isinstance(value, allowed):
                raise TypeMismatch(name, expected, value)
            if expected == "integer" and isinstance(value, float):
                raise TypeMismatch(name, expected, value)
        return value

    def substitute(node: Any) -> Any:
        if isinstance(node, dict):
            return {k: substitute(v) for k, v in node.items()}
        if isinstance(node, list):
            return [substitute(v) for v in node]
        if isinstance(node, str):
            whole = _PLACEHOLDER.fullmatch(node)
            if whole:
                return check(whole.group(1))
            return _PLACEHOLDER.sub(lambda m: str(check(m.group(1))), node)
        return node

    return substitute(copy.deepcopy(document))
