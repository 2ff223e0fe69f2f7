"""Glue between the record store and the broker.

Outbound: a trial record tagged for submission is turned into a workflow
request. The bridge traces the knowledge graph (trial -> umbrella -> base
workflow blueprint), fills the blueprint's placeholders with the trial's
configuration, posts the request, and materializes a workflow-request record
carrying the broker request UUID.

Inbound: the bridge serves upload requests posted by the workflow manager
once a batch finishes. It harvests the cycling results, scores the batch
(mean +/- SE of formation time and cycle life, actual parameters
reconciled), writes everything back onto the trial record, and flips the
state tags, which is what re-triggers the optimizer.

Result discovery uses the request-UUID metadata search; the tag-hook path is
the default trigger and the search doubles as the fallback poll mode.
"""

from __future__ import annotations

import logging

from . import records as rec
from .analysis import AllCensored, score_from_results
from .broker import Capability
from .clock import stable_int
from .orchestrator import WORKFLOW_CAP

logger = logging.getLogger(__name__)

UPLOAD_CAP = Capability(
    "upload",
    "records_bridge",
    {
        "type": "object",
        "required": ["workflow_request_uuid", "aggregate"],
        "properties": {
            "workflow_request_uuid": {"type": "string"},
            "aggregate": {"type": "object"},
        },
        "additionalProperties": True,
    },
    {
        "type": "object",
        "required": ["uploaded"],
        "properties": {
            "uploaded": {"type": "boolean"},
            "records": {"type": "array", "items": {"type": "string"}},
        },
        "additionalProperties": True,
    },
)


def base_workflow_blueprint() -> dict:
    """Default blueprint metadata for the standard cell-formation workflow."""
    return {
        "placeholders": {
            "c_rate_charge": "number",
            "c_rate_discharge": "number",
            "repetitions": "integer",
            "n_cells": "integer",
            "batch_seed": "integer",
            "trial_ref": "string",
        },
        "document": {
            "config": {
                "c_rate_charge": "{c_rate_charge}",
                "c_rate_discharge": "{c_rate_discharge}",
                "repetitions": "{repetitions}",
            },
            "n_cells": "{n_cells}",
            "batch_seed": "{batch_seed}",
            "trial_ref": "{trial_ref}",
        },
    }


class WorkflowBridge:
    """Tenant bridging records and broker in both directions."""

    name = "records-bridge"
    capabilities = [UPLOAD_CAP]

    def __init__(self, store: rec.RecordStore, client):
        self.store = store
        self.client = client
        self.tenant_uuid: str | None = None

    def register(self) -> str:
        self.tenant_uuid = self.client.register_tenant(self.name, self.capabilities)
        return self.tenant_uuid

    def register_hooks(self) -> None:
        self.store.subscribe(rec.TAG_TO_BROKER, self._on_to_broker, name="bridge-submit")

    def _on_to_broker(self, event: rec.TagEvent) -> None:
        try:
            self.submit_trial(self.store.get(event.record_id))
        except Exception:
            logger.exception("workflow submission failed for %s", event.record_id)

    # -- outbound -----------------------------------------------------------

    def submit_trial(self, trial: rec.Record) -> rec.Record:
        """Turn a trial record into a workflow request (idempotent)."""
        existing = trial.metadata.get("workflow_request_uuid")
        if existing:
            hits = self.store.find_by_metadata("request_uuid", existing)
            if hits:
                return hits[0]
        umbrella = self.store.neighbors(trial.record_id, rec.LINK_TRIAL_FOR, "out")[0]
        bases = self.store.neighbors(umbrella.record_id, rec.LINK_BASE_WORKFLOW_FOR, "in")
        if not bases:
            raise rec.RecordsError(
                f"umbrella {umbrella.identifier} has no linked base workflow record"
            )
        config = trial.metadata["config"]
        batch_index = int(trial.metadata.get("batch_index", 0))
        bindings = {
            "c_rate_charge": float(config["c_rate_charge"]),
            "c_rate_discharge": float(config["c_rate_discharge"]),
            "repetitions": int(config["repetitions"]),
            "n_cells": int(trial.metadata.get("n_cells", 4)),
            "batch_seed": stable_int(int(umbrella.metadata.get("seed", 0)), "batch", batch_index),
            "trial_ref": trial.record_id,
        }
        instructions = rec.fill_blueprint(bases[0], bindings)
        request_uuid = self.client.post_request(WORKFLOW_CAP.key, instructions, self.tenant_uuid)
        workflow_record = self.store.create_record(
            title=f"Workflow request for {trial.title}",
            metadata={
                "request_uuid": request_uuid,
                "instructions": instructions,
                "trial": trial.record_id,
            },
            identifier=f"{trial.identifier}-workflow",
        )
        self.store.add_link(workflow_record.record_id, trial.record_id, rec.LINK_REQUEST_FOR)
        self.store.update_metadata(trial.record_id, {"workflow_request_uuid": request_uuid})
        self.store.add_tag(workflow_record.record_id, rec.TAG_REQUEST_RUNNING)
        return workflow_record

    # -- inbound ------------------------------------------------------------

    def tick(self) -> list[str]:
        handled = []
        for request in self.client.get_pending_requests(UPLOAD_CAP.key):
            if not self.client.reserve_request(request.request_uuid, self.tenant_uuid):
                continue
            self.handle_upload(request)
            handled.append(request.request_uuid)
        return handled

    def handle_upload(self, request) -> None:
        params = request.parameters
        workflow_uuid = params["workflow_request_uuid"]
        aggregate = params["aggregate"]
        hits = self.store.find_by_metadata("request_uuid", workflow_uuid)
        if not hits:
            logger.warning("no workflow record for request %s; storing orphan", workflow_uuid)
        created: list[str] = []
        workflow_record = hits[0] if hits else None

        if workflow_record is not None:
            for step, entries in sorted(aggregate.get("sub_results", {}).items()):
                for i, entry in enumerate(entries):
                    result_record = self.store.create_record(
                        title=f"{step} result {i} for workflow {workflow_uuid[:8]}",
                        metadata={
                            "step": step,
                            "request_uuid": entry["request_uuid"],
                            "result_uuid": entry["result_uuid"],
                            "workflow_request_uuid": workflow_uuid,
                        },
                        identifier=f"{workflow_record.identifier}-{step}-{i}",
                    )
                    self.store.add_link(
                        result_record.record_id, workflow_record.record_id, rec.LINK_RESULT_FOR
                    )
                    created.append(result_record.record_id)

        trial = None
        if workflow_record is not None:
            trials = self.store.neighbors(workflow_record.record_id, rec.LINK_REQUEST_FOR, "out")
            trial = trials[0] if trials else None

        if trial is not None:
            self._score_and_update(trial, aggregate)
            if workflow_record is not None:
                self.store.add_tag(workflow_record.record_id, rec.TAG_REQUEST_COMPLETED)
            self.store.add_tag(trial.record_id, rec.TAG_TRIAL_COMPLETED)

        self.client.post_result(
            request.request_uuid,
            {"uploaded": True, "records": created},
            request.parameters,
            self.tenant_uuid,
        )

    def _score_and_update(self, trial: rec.Record, aggregate: dict) -> None:
        cycling = aggregate.get("sub_results", {}).get("cycling", [])
        envelopes = []
        for entry in cycling:
            res = self.client.get_result(entry["request_uuid"])
            envelopes.append(
                {"data": res.data, "actual_parameters": res.actual_parameters}
            )
        try:
            score = score_from_results(trial.record_id, envelopes)
        except AllCensored:
            self.store.update_metadata(
                trial.record_id,
                {
                    "excluded": True,
                    "anomalies": ["all cells censored; no EOL value"],
                },
            )
            return
        patch = {
            "objectives": {
                "formation_time_h": {
                    "mean": score.formation_time_mean,
                    "se": score.formation_time_se,
                },
                "eol_cycles": {"mean": score.eol_mean, "se": score.eol_se},
            },
            "n_replicates": score.n_valid,
            "anomalies": score.anomalies,
        }
        if score.actual_config is not None:
            patch["actual_config"] = score.actual_config.as_dict()
        self.store.update_metadata(trial.record_id, patch)
