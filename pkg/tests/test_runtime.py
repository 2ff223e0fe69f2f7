import json

import numpy as np
import pytest

import formloop
from formloop import records as rec
from formloop.broker import LocalBrokerClient
from formloop.config import StudyConfig
from formloop.optimizer import dump_results_table
from formloop.orchestrator import Overlort
from formloop.runtime import (
    StudyRuntime,
    audit_workflow_sequencing,
    replay_request_statuses,
    run_synthetic_campaign,
)


def small_config(**overrides):
    base = dict(seed=13, max_batches=3, batch_size=2, n_cells=3, mc_samples=128)
    base.update(overrides)
    return StudyConfig(**base)


@pytest.fixture(scope="module")
def finished_runtime():
    runtime = StudyRuntime(small_config())
    runtime.setup_records()
    outcome = runtime.run()
    return runtime, outcome


def test_loop_completes_budget(finished_runtime):
    runtime, outcome = finished_runtime
    assert outcome.stopped_reason == "budget-exhausted"
    assert len(outcome.samples) == 3
    assert outcome.n_failed_workflows == 0
    assert all(s.n_replicates == 3 for s in outcome.samples)


def test_trial_records_carry_full_lifecycle(finished_runtime):
    runtime, _ = finished_runtime
    trials = runtime.suggested_trials()
    assert len(trials) == 3
    for trial in trials:
        assert rec.TAG_TRIAL_RUNNING in trial.tags
        assert rec.TAG_TRIAL_COMPLETED in trial.tags
        assert trial.current_state() == rec.TAG_TRIAL_COMPLETED
        assert "objectives" in trial.metadata
        assert "actual_config" in trial.metadata
        # workflow record linked via the request label, tagged completed
        workflows = runtime.store.neighbors(trial.record_id, rec.LINK_REQUEST_FOR, "in")
        assert len(workflows) == 1
        assert rec.TAG_REQUEST_COMPLETED in workflows[0].tags


def test_result_records_created_per_sub_result(finished_runtime):
    runtime, _ = finished_runtime
    trials = runtime.suggested_trials()
    workflow = runtime.store.neighbors(trials[0].record_id, rec.LINK_REQUEST_FOR, "in")[0]
    results = runtime.store.neighbors(workflow.record_id, rec.LINK_RESULT_FOR, "in")
    # 5 single-result steps + n_cells cycling results
    assert len(results) == 5 + 3


def test_protocol_audits_pass(finished_runtime):
    runtime, _ = finished_runtime
    statuses = replay_request_statuses(runtime.broker.events())
    live = {r.request_uuid: r.status for r in runtime.broker.all_requests()}
    assert statuses == live
    assert audit_workflow_sequencing(runtime.broker) == 3


def test_cycling_fanout_conservation(finished_runtime):
    runtime, _ = finished_runtime
    for wf in runtime.overlort.archive.values():
        if wf.get("phase") != "done":
            continue
        assert len(wf["aggregate"]["sub_results"]["cycling"]) == 3


def test_exports_and_figures(tmp_path, finished_runtime):
    runtime, _ = finished_runtime
    artifacts = runtime.export(tmp_path, render=True)
    assert (tmp_path / "results.csv").exists()
    assert (tmp_path / "dashboard_payload.json").exists()
    assert (tmp_path / "events.jsonl").exists()
    payload = json.loads((tmp_path / "dashboard_payload.json").read_text())
    assert payload["version"] == 1
    pngs = list(tmp_path.glob("*.png"))
    assert len(pngs) >= 3  # scatter, contours x2, hv trace
    for line in (tmp_path / "events.jsonl").read_text().splitlines():
        json.loads(line)


def test_end_to_end_determinism():
    tables = []
    for _ in range(2):
        runtime = StudyRuntime(small_config(seed=29))
        runtime.setup_records()
        outcome = runtime.run()
        tables.append(dump_results_table(outcome.samples).encode())
    assert tables[0] == tables[1]


def test_crash_replay_mid_study():
    runtime = StudyRuntime(small_config(seed=17))
    runtime.setup_records()
    runtime.activate()
    for _ in range(4):
        runtime.tick()
    live = {k: v.snapshot() for k, v in runtime.overlort.queue.items()}
    assert live  # something must be in flight for the check to bite
    fresh = Overlort(
        LocalBrokerClient(runtime.broker),
        max_parallel=runtime.config.max_parallel_workflows,
    )
    fresh.tenant_uuid = runtime.overlort.tenant_uuid
    fresh.rebuild(runtime.broker)
    assert {k: v.snapshot() for k, v in fresh.queue.items()} == live


def test_warm_start_goes_model_based_immediately():
    cfg = small_config(
        seed=3,
        max_batches=1,
        batch_size=1,
        warm_start=str(formloop.reference_campaign_path()),
    )
    runtime = StudyRuntime(cfg)
    runtime.setup_records()
    outcome = runtime.run()
    prior = [s for s in outcome.samples if s.source == "prior"]
    new = [s for s in outcome.samples if s.batch_index >= 18]
    assert len(prior) == 18
    assert len(new) == 1
    assert runtime.agent.diagnostics  # model-based path emitted diagnostics
    # reference point frozen on the umbrella record for replay safety
    umbrella = runtime.store.get(runtime.umbrella.record_id)
    assert umbrella.metadata.get("reference_point") is not None


def test_transport_without_confirmation_stalls():
    cfg = small_config(seed=19, auto_confirm_transport=False, max_batches=1, batch_size=1)
    runtime = StudyRuntime(cfg)
    runtime.setup_records()
    outcome = runtime.run()
    assert outcome.stopped_reason == "stalled"
    assert runtime.running_trials()
    # the pending transport request is visible as a manual task
    pending = runtime.broker.get_pending_requests(("transport", "manual"))
    assert len(pending) == 1


def test_synthetic_campaign_reproducible():
    a = run_synthetic_campaign(5, "bo", iterations=2, q=2, n_cells=2)
    b = run_synthetic_campaign(5, "bo", iterations=2, q=2, n_cells=2)
    assert dump_results_table(a.completed) == dump_results_table(b.completed)
    with pytest.raises(ValueError):
        run_synthetic_campaign(0, "annealing")
