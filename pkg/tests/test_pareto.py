import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formloop.optimizer import (
    DimensionMismatch,
    EmptyInput,
    dominates,
    non_dominated_indices,
    pareto_front,
    reference_point,
)
from tests.conftest import brute_force_front

DIRS = ("min", "max")


# -- dominance over measured table rows (formation time min, EOL max) --------


def test_batch0_dominates_batch4():
    assert dominates((1.74, 110.75), (2.89, 110.25), DIRS)


def test_no_self_domination():
    y = (1.74, 110.75)
    assert not dominates(y, y, DIRS)


def test_batches_15_and_0_incomparable():
    assert not dominates((2.46, 120.33), (1.74, 110.75), DIRS)
    assert not dominates((1.74, 110.75), (2.46, 120.33), DIRS)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        dominates((1.0, 2.0), (1.0,))


# -- strict partial order properties ------------------------------------------


@st.composite
def objective_vectors(draw, m=3):
    return tuple(
        draw(st.floats(-100, 100, allow_nan=False, allow_infinity=False)) for _ in range(m)
    )


@given(objective_vectors())
def test_irreflexive(y):
    assert not dominates(y, y)


@given(objective_vectors(), objective_vectors())
def test_asymmetric(a, b):
    if dominates(a, b):
        assert not dominates(b, a)


@settings(max_examples=200)
@given(objective_vectors(), objective_vectors(), objective_vectors())
def test_transitive(a, b, c):
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


# -- front extraction ----------------------------------------------------------


def test_front_matches_brute_force_on_random_sets():
    rng = np.random.default_rng(2024)
    for _ in range(60):
        n = int(rng.integers(1, 60))
        m = int(rng.integers(2, 5))
        Y = rng.integers(0, 8, size=(n, m)).astype(float)  # ties likely
        assert non_dominated_indices(Y) == brute_force_front(Y)


def test_front_empty_input():
    with pytest.raises(EmptyInput):
        non_dominated_indices(np.empty((0, 2)))


def test_duplicates_of_nondominated_point_all_kept():
    Y = np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]])
    assert non_dominated_indices(Y) == [0, 1]


def test_table_front_is_0_15_16(campaign_16):
    front = pareto_front(campaign_16)
    assert sorted(s.batch_index for s in _front_samples(front, campaign_16)) == [0, 15, 16]


def test_table_front_with_batch_17_included(campaign_table):
    samples = [s for s in campaign_table]
    for s in samples:
        s = s  # excluded flag lives on batch 17
    included = []
    for s in samples:
        if s.batch_index == 17:
            from dataclasses import replace

            included.append(replace(s, excluded=False))
        else:
            included.append(s)
    front = pareto_front(included)
    assert sorted(included[i].batch_index for i in front.indices) == [0, 15, 16, 17]


def test_excluded_batch_17_not_on_front(campaign_table):
    front = pareto_front(campaign_table)
    assert sorted(campaign_table[i].batch_index for i in front.indices) == [0, 15, 16]


def test_single_sample_front(campaign_16):
    front = pareto_front(campaign_16[:1])
    assert front.indices == [0]


def test_front_empty_after_exclusion(campaign_16):
    from dataclasses import replace

    with pytest.raises(EmptyInput):
        pareto_front([replace(s, excluded=True) for s in campaign_16])


def test_direction_flip_leaves_membership_unchanged():
    rng = np.random.default_rng(5)
    Y = rng.uniform(size=(40, 2))
    base = non_dominated_indices(Y, ("min", "max"))
    flipped = Y.copy()
    flipped[:, 1] = -flipped[:, 1]
    assert non_dominated_indices(flipped, ("min", "min")) == base


def test_reference_point_is_strictly_dominated():
    rng = np.random.default_rng(8)
    Y = rng.uniform(size=(20, 2))
    r = reference_point(Y)  # min-convention
    assert np.all(Y < r[None, :])


def _front_samples(front, samples):
    return [samples[i] for i in front.indices]
