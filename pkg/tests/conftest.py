import numpy as np
import pytest

from formloop import reference_campaign_path
from formloop.broker import Broker, LocalBrokerClient, MemoryStore
from formloop.clock import SeededIds, SimClock, component_seed
from formloop.optimizer import load_warmstart_table
from formloop.records import RecordStore


@pytest.fixture
def broker():
    return Broker(store=MemoryStore(), clock=SimClock(), ids=SeededIds(component_seed(0, "test-broker")))


@pytest.fixture
def client(broker):
    return LocalBrokerClient(broker)


@pytest.fixture
def store():
    return RecordStore(clock=SimClock(), ids=SeededIds(component_seed(0, "test-records")))


@pytest.fixture(scope="session")
def campaign_table():
    """The measured reference campaign, batches 0-17 (17 flagged excluded)."""
    return load_warmstart_table(reference_campaign_path())


@pytest.fixture(scope="session")
def campaign_16(campaign_table):
    """Batches 0-16 only."""
    return [s for s in campaign_table if s.batch_index <= 16]


def brute_force_front(Y, directions=None):
    """Pure-python O(n^2) pairwise dominance filter (the test oracle)."""
    from formloop.optimizer import dominates

    n = len(Y)
    keep = []
    for i in range(n):
        if not any(
            j != i and dominates(Y[j], Y[i], directions) for j in range(n)
        ):
            keep.append(i)
    return keep


def validate_structural(payload, schema) -> bool:
    """Independent structural-schema oracle (subset used by our capabilities).

    Deliberately hand-rolled and library-free so the production validator is
    checked against a second route.
    """
    def check(value, sch) -> bool:
        if not isinstance(sch, dict):
            return True
        if "enum" in sch and value not in sch["enum"]:
            return False
        t = sch.get("type")
        if t is not None and not _type_ok(value, t):
            return False
        if isinstance(value, dict):
            for name in sch.get("required", []):
                if name not in value:
                    return False
            props = sch.get("properties", {})
            for name, sub in props.items():
                if name in value and not check(value[name], sub):
                    return False
            extra = sch.get("additionalProperties", True)
            if extra is False and any(name not in props for name in value):
                return False
            if isinstance(extra, dict):
                for name, sub_value in value.items():
                    if name not in props and not check(sub_value, extra):
                        return False
            if "minProperties" in sch and len(value) < sch["minProperties"]:
                return False
        if isinstance(value, list):
            items = sch.get("items")
            if items is not None and not all(check(v, items) for v in value):
                return False
            if "minItems" in sch and len(value) < sch["minItems"]:
                return False
            if "maxItems" in sch and len(value) > sch["maxItems"]:
                return False
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            if "minimum" in sch and value < sch["minimum"]:
                return False
            if "maximum" in sch and value > sch["maximum"]:
                return False
        return True

    def _type_ok(value, t) -> bool:
        if isinstance(t, list):
            return any(_type_ok(value, x) for x in t)
        if t == "object":
            return isinstance(value, dict)
        if t == "array":
            return isinstance(value, list)
        if t == "string":
            return isinstance(value, str)
        if t == "integer":
            return isinstance(value, int) and not isinstance(value, bool)
        if t == "number":
            return isinstance(value, (int, float)) and not isinstance(value, bool)
        if t == "boolean":
            return isinstance(value, bool)
        if t == "null":
            return value is None
        return True

    return check(payload, schema)


def mc_hypervolume(points_min, ref, n_samples, rng):
    """Monte-Carlo Lebesgue estimate of the dominated volume (min-min)."""
    points = np.asarray(points_min, dtype=float)
    ref = np.asarray(ref, dtype=float)
    lo = points.min(axis=0)
    box = np.prod(ref - lo)
    draws = rng.uniform(lo, ref, size=(n_samples, 2))
    dominated = np.zeros(n_samples, dtype=bool)
    for p in points:
        dominated |= np.all(draws >= p, axis=1)
    frac = dominated.mean()
    estimate = frac * box
    se = box * np.sqrt(max(frac * (1 - frac), 1e-12) / n_samples)
    return estimate, se
