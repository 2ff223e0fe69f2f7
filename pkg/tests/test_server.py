import pytest
from fastapi.testclient import TestClient

import formloop
from formloop.config import StudyConfig
from formloop.runtime import StudyRuntime
from formloop.server import create_app


@pytest.fixture()
def served():
    cfg = StudyConfig(
        seed=41,
        max_batches=1,
        batch_size=1,
        n_cells=2,
        auto_confirm_transport=False,
        warm_start=str(formloop.reference_campaign_path()),
    )
    runtime = StudyRuntime(cfg)
    runtime.setup_records()
    runtime.activate()
    # advance until the transport step is pending on the broker
    for _ in range(20):
        runtime.tick()
        if runtime.broker.get_pending_requests(("transport", "manual")):
            break
    app = create_app(runtime)
    return runtime, TestClient(app)


def test_capability_listing_with_schemas(served):
    _, http = served
    caps = http.get("/capabilities").json()["capabilities"]
    keys = {(c["quantity"], c["method"]) for c in caps}
    assert ("cycling", "arbin_sim") in keys
    assert ("workflow", "overlort") in keys
    assert ("upload", "records_bridge") in keys
    one = http.get("/capabilities/cycling/arbin_sim").json()
    assert "required" in one["input_schema"]
    assert http.get("/capabilities/nope/nothing").status_code == 404


def test_broker_protocol_over_http(served):
    runtime, http = served
    reg = http.post(
        "/tenants",
        json={
            "name": "probe",
            "capabilities": [
                {
                    "quantity": "probe",
                    "method": "noop",
                    "input_schema": {"type": "object", "required": ["x"]},
                    "output_schema": {"type": "object"},
                }
            ],
        },
    ).json()
    assert reg["tenant_uuid"]
    bad = http.post(
        "/requests",
        json={"quantity": "probe", "method": "noop", "parameters": {}, "poster": reg["tenant_uuid"]},
    )
    assert bad.status_code == 422
    assert bad.json()["detail"]["error"] == "ValidationError"
    ok = http.post(
        "/requests",
        json={"quantity": "probe", "method": "noop", "parameters": {"x": 1}, "poster": reg["tenant_uuid"]},
    ).json()
    uuid = ok["request_uuid"]
    pending = http.get("/requests/pending", params={"quantity": "probe", "method": "noop"}).json()
    assert [r["request_uuid"] for r in pending["requests"]] == [uuid]
    assert http.post(f"/requests/{uuid}/reserve", json={"tenant": "a"}).status_code == 200
    assert http.post(f"/requests/{uuid}/reserve", json={"tenant": "b"}).status_code == 409
    marker = http.get(f"/results/by-request/{uuid}").json()
    assert marker["status"] == "reserved"
    posted = http.post(
        "/results",
        json={"request_uuid": uuid, "data": {"y": 2}, "actual_parameters": {"x": 1}, "poster": "a"},
    )
    assert posted.status_code == 200
    result = http.get(f"/results/by-request/{uuid}").json()
    assert result["data"] == {"y": 2}
    assert result["requested_parameters"] == {"x": 1}
    events = http.get("/events").json()["events"]
    assert any(e["kind"] == "result_posted" for e in events)


def test_dashboard_endpoint_serves_payload(served):
    runtime, http = served
    identifier = runtime.umbrella.identifier
    payload = http.get(f"/studies/{identifier}/dashboard").json()
    assert payload["version"] == 1
    flagged = sorted(p["batch"] for p in payload["points"] if p["pareto"])
    assert flagged == [0, 15, 16]
    assert http.get("/studies/ghost/dashboard").status_code == 404


def test_record_and_graph_reads(served):
    runtime, http = served
    umbrella_id = runtime.umbrella.record_id
    record = http.get(f"/records/{umbrella_id}").json()
    assert record["identifier"] == runtime.umbrella.identifier
    hood = http.get(f"/records/{umbrella_id}/neighborhood").json()
    assert len(hood["nodes"]) > 1
    assert any(l["label"] == "!kadiaigent-al-trial-for" for l in hood["links"])
    by_tag = http.get("/records", params={"tag": "!kadiaigent-al-umbrella-active"}).json()
    assert [r["record_id"] for r in by_tag["records"]] == [umbrella_id]


def test_tag_write_and_control(served):
    runtime, http = served
    trial = runtime.suggested_trials()[0]
    out = http.post(f"/records/{trial.record_id}/tags", json={"tag": "operator-flag"}).json()
    assert out["hooks"] == []
    excluded = http.post(
        f"/records/{trial.record_id}/control",
        json={"excluded": True, "note": "suspicious spread"},
    ).json()
    assert excluded["metadata"]["excluded"] is True
    assert excluded["metadata"]["notes"] == ["suspicious spread"]


def test_inbox_confirm_roundtrip_and_conflict(served):
    runtime, http = served
    tasks = http.get("/inbox").json()["tasks"]
    transport = [t for t in tasks if t["capability"] == ["transport", "manual"]]
    assert len(transport) == 1
    uuid = transport[0]["request_uuid"]
    assert transport[0]["form_schema"]["required"] == ["confirmed"]

    first = http.post(f"/inbox/{uuid}/confirm", json={})
    assert first.status_code == 200
    # the request resolved on the broker
    assert runtime.broker.get_request(uuid).status == "resolved"
    # racing second confirmation surfaces the conflict verbatim
    second = http.post(f"/inbox/{uuid}/confirm", json={})
    assert second.status_code == 409
    assert second.json()["detail"]["error"] == "DuplicateResult"
    # the task disappears from the inbox on the next poll
    remaining = http.get("/inbox").json()["tasks"]
    assert uuid not in [t["request_uuid"] for t in remaining]


def test_orchestrator_status_endpoint(served):
    runtime, http = served
    status = http.get("/orchestrator/status").json()
    assert status["max_parallel"] == runtime.config.max_parallel_workflows
    assert isinstance(status["active"], list)
    for wf in status["active"]:
        assert wf["phase"] in ("queued", "running", "assembling")


def test_static_tenant_token_guards_mutations():
    cfg = StudyConfig(seed=2, max_batches=1, batch_size=1, n_cells=2)
    cfg.broker.token = "hunter2"
    runtime = StudyRuntime(cfg)
    runtime.setup_records()
    http = TestClient(create_app(runtime))
    body = {
        "quantity": "workflow",
        "method": "overlort",
        "parameters": {"config": {"c_rate_charge": 1.0, "c_rate_discharge": 1.0, "repetitions": 2},
                        "n_cells": 2, "batch_seed": 1},
        "poster": "probe",
    }
    denied = http.post("/requests", json=body)
    assert denied.status_code == 401
    allowed = http.post("/requests", json=body, headers={"x-tenant-token": "hunter2"})
    assert allowed.status_code == 200
    # reads stay open
    assert http.get("/capabilities").status_code == 200
