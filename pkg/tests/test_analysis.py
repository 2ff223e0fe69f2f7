import math

import numpy as np
import pytest

from formloop.analysis import (
    AllCensored,
    AnalysisError,
    CensoredAt,
    EmptyStudy,
    EmptyTrace,
    aggregate_batch,
    build_dashboard_payload,
    extract_eol,
    extract_formation_time,
    mean_and_se,
)
from formloop.labsim import CyclingTrace
from formloop.optimizer import (
    ObjectiveSample,
    SearchSpace,
    StudyState,
    dump_results_table,
    load_warmstart_table,
    pareto_front,
)


def trace_from_discharge(capacities, formation=((1.0, 0.97, 0.5),)):
    return CyclingTrace(
        formation=[tuple(f) for f in formation],
        aging=[(c / 0.97, c) for c in capacities],
    )


# -- EOL extraction -----------------------------------------------------------


def test_eol_crosses_threshold_at_cycle_3():
    assert extract_eol(trace_from_discharge([1.0, 0.95, 0.85, 0.79])) == 3


def test_eol_censored_when_trace_ends_above_threshold():
    out = extract_eol(trace_from_discharge([1.0, 0.95, 0.9, 0.85]))
    assert out == CensoredAt(4)


def test_eol_exact_boundary_is_inclusive():
    # 0.8 exactly counts as alive; EOL is the last >= cycle
    assert extract_eol(trace_from_discharge([1.0, 0.8, 0.79])) == 2


def test_eol_empty_and_degenerate_traces():
    with pytest.raises(EmptyTrace):
        extract_eol(CyclingTrace(formation=[], aging=[]))
    with pytest.raises(EmptyTrace):
        extract_eol(trace_from_discharge([0.0, 0.0]))


def test_formation_time_sums_cycle_durations():
    trace = trace_from_discharge([1.0, 0.7], formation=[(1, 0.97, 0.5), (1, 0.97, 0.75)])
    assert extract_formation_time(trace) == pytest.approx(1.25)
    with pytest.raises(EmptyTrace):
        extract_formation_time(CyclingTrace(formation=[], aging=[(1, 1)]))


# -- aggregation ----------------------------------------------------------------


def test_four_equal_values():
    score = aggregate_batch([(2.0, 100), (2.0, 100), (2.0, 100), (2.0, 100)])
    assert score.eol_mean == 100
    assert score.eol_se == 0.0
    assert score.formation_time_se == 0.0


def test_hand_computed_statistics():
    """{100,110,120,113}: mean 110.75, SE = sample SD / sqrt(4) = 4.1508."""
    values = [100.0, 110.0, 120.0, 113.0]
    mean, se = mean_and_se(values)
    assert mean == pytest.approx(110.75)
    hand_sd = math.sqrt(sum((v - 110.75) ** 2 for v in values) / 3)
    assert se == pytest.approx(hand_sd / 2.0)
    assert se == pytest.approx(4.150803, abs=1e-6)
    score = aggregate_batch([(1.0, v) for v in values])
    assert score.eol_mean == pytest.approx(110.75)
    assert score.eol_se == pytest.approx(4.150803, abs=1e-6)


def test_censored_cell_excluded_with_anomaly_note():
    score = aggregate_batch([(1.0, 100), (1.0, 110), (1.0, 120), (1.0, CensoredAt(200))])
    assert score.n_valid == 3
    assert score.eol_mean == pytest.approx(110.0)
    assert any("censored" in note for note in score.anomalies)
    # formation time still uses all four cells
    assert score.formation_time_mean == pytest.approx(1.0)


def test_all_censored_raises():
    with pytest.raises(AllCensored):
        aggregate_batch([(1.0, CensoredAt(5)), (1.0, CensoredAt(6))])


def test_single_cell_batch_notes_anomaly():
    score = aggregate_batch([(1.5, 90)])
    assert score.eol_se == 0.0
    assert "single-cell batch" in score.anomalies


def test_empty_batch_rejected():
    with pytest.raises(AnalysisError):
        aggregate_batch([])


def test_aggregation_idempotent_from_per_cell_values():
    cells = [(1.0, 95), (1.1, 105), (0.9, 99), (1.05, 101)]
    once = aggregate_batch(cells)
    again = aggregate_batch(once.per_cell)
    assert once.formation_time_mean == again.formation_time_mean
    assert once.formation_time_se == again.formation_time_se
    assert once.eol_mean == again.eol_mean
    assert once.eol_se == again.eol_se


# -- results table round trip -----------------------------------------------------


def test_results_table_round_trip(tmp_path, campaign_table):
    text = dump_results_table(campaign_table)
    path = tmp_path / "table.csv"
    path.write_text(text)
    loaded = load_warmstart_table(path)
    assert len(loaded) == len(campaign_table)
    for a, b in zip(loaded, campaign_table):
        assert a.batch_index == b.batch_index
        assert a.config == b.config
        assert a.eol_mean == pytest.approx(b.eol_mean)
        assert a.excluded == b.excluded


# -- dashboard payload -------------------------------------------------------------


def state_from(samples):
    state = StudyState(search_space=SearchSpace(), seed=3)
    for s in samples:
        state.add_sample(s)
    return state


def test_payload_structure_and_pareto_flags(campaign_16):
    state = state_from(campaign_16)
    payload = build_dashboard_payload(state)
    assert payload["version"] == 1
    assert {o["name"] for o in payload["objectives"]} == {"formation_time_h", "eol_cycles"}
    flagged = sorted(p["batch"] for p in payload["points"] if p["pareto"])
    assert flagged == [0, 15, 16]
    front = pareto_front(campaign_16)
    assert sorted(campaign_16[i].batch_index for i in front.indices) == flagged
    assert len(payload["contours"]) == 6  # 2 objectives x 3 parameter pairs
    for panel in payload["contours"]:
        assert len(panel["mean"]) == 50
        assert len(panel["mean"][0]) == 50
    trace = payload["hypervolume_trace"]
    values = [t["hypervolume"] for t in trace]
    assert values == sorted(values)
    assert len(payload["marginals"]) == 2


def test_payload_excluded_point_flagged(campaign_table):
    state = state_from(campaign_table)
    payload = build_dashboard_payload(state)
    excluded = [p for p in payload["points"] if p["excluded"]]
    assert [p["batch"] for p in excluded] == [17]
    assert not excluded[0]["pareto"]


def test_payload_empty_study_rejected():
    with pytest.raises(EmptyStudy):
        build_dashboard_payload(StudyState(search_space=SearchSpace()))


def test_hypervolume_trace_monotone_under_frozen_reference(campaign_16):
    state = state_from(campaign_16)
    payload = build_dashboard_payload(state)
    hv = [t["hypervolume"] for t in payload["hypervolume_trace"]]
    assert all(b >= a - 1e-9 for a, b in zip(hv, hv[1:]))
