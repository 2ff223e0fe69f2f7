"""Workflow manager: decomposes workflow requests into sequenced sub-requests.

A workflow request carries a parameter configuration and a replicate count.
The manager walks the canonical step order (channel reservation, electrolyte
formulation, cell assembly, transport, cycling, data export), posting each
step's sub-request only after the previous step's results have arrived; the
cycling step fans out to one sub-request per cell. Once every result is in,
the aggregate is posted as the workflow request's result together with a
request to upload the data to the record store.

The internal queue is a cache: everything needed to rebuild it lives in the
broker's persisted requests and results (each sub-request carries its
workflow uuid and step name), so a crashed manager reconstructs its state by
replay.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .broker import Capability, PendingMarker, RequestEnvelope
from .clock import stable_int

logger = logging.getLogger(__name__)

QUEUED = "queued"
RUNNING = "running"
ASSEMBLING = "assembling"
DONE = "done"
FAILED = "failed"

STEP_CAPABILITIES: dict[str, tuple[str, str]] = {
    "channel_reservation": ("channel", "service"),
    "electrolyte": ("electrolyte", "manual"),
    "assembly": ("assembly", "autobass_sim"),
    "transport": ("transport", "manual"),
    "cycling": ("cycling", "arbin_sim"),
    "data_export": ("data_export", "arbin_sim"),
}

DEFAULT_STEPS = (
    "channel_reservation",
    "electrolyte",
    "assembly",
    "transport",
    "cycling",
    "data_export",
)

_CONFIG_SCHEMA = {
    "type": "object",
    "required": ["c_rate_charge", "c_rate_discharge", "repetitions"],
    "properties": {
        "c_rate_charge": {"type": "number", "minimum": 0.0, "maximum": 10.0},
        "c_rate_discharge": {"type": "number", "minimum": 0.0, "maximum": 10.0},
        "repetitions": {"type": "integer", "minimum": 1},
    },
}

WORKFLOW_CAP = Capability(
    "workflow",
    "overlort",
    {
        "type": "object",
        "required": ["config", "n_cells", "batch_seed"],
        "properties": {
            "config": _CONFIG_SCHEMA,
            "n_cells": {"type": "integer", "minimum": 1},
            "batch_seed": {"type": "integer"},
            "steps": {"type": "array", "items": {"enum": list(STEP_CAPABILITIES)}},
            "trial_ref": {"type": "string"},
        },
        "additionalProperties": True,
    },
    {
        "type": "object",
        "required": ["workflow_request_uuid", "sub_results"],
        "properties": {
            "workflow_request_uuid": {"type": "string"},
            "sub_results": {"type": "object"},
        },
        "additionalProperties": True,
    },
)


class OrchestratorError(Exception):
    pass


class CapacityExceeded(OrchestratorError):
    """All parallel batch slots are occupied; the requester must wait."""


class MissingResult(OrchestratorError):
    pass


class SubRequestFailed(OrchestratorError):
    def __init__(self, step: str, message: str):
        super().__init__(f"step '{step}' failed: {message}")
        self.step = step


@dataclass
class WorkflowSpec:
    workflow_uuid: str
    config: dict
    n_cells: int
    batch_seed: int
    steps: tuple[str, ...] = DEFAULT_STEPS
    trial_ref: str = ""

    def __post_init__(self):
        if not self.steps:
            raise OrchestratorError("a workflow needs at least one step")
        if self.n_cells < 1:
            raise OrchestratorError("n_cells must be at least 1")
        unknown = [s for s in self.steps if s not in STEP_CAPABILITIES]
        if unknown:
            raise OrchestratorError(f"unknown steps: {unknown}")

    @classmethod
    def from_request(cls, request: RequestEnvelope) -> "WorkflowSpec":
        p = request.parameters
        return cls(
            workflow_uuid=request.request_uuid,
            config=dict(p["config"]),
            n_cells=int(p["n_cells"]),
            batch_seed=int(p["batch_seed"]),
            steps=tuple(p.get("steps") or DEFAULT_STEPS),
            trial_ref=p.get("trial_ref", ""),
        )


@dataclass
class WorkflowState:
    spec: WorkflowSpec
    step_index: int = 0
    outstanding: list[str] = field(default_factory=list)
    collected: dict[str, list[str]] = field(default_factory=dict)
    request_map: dict[str, list[str]] = field(default_factory=dict)
    phase: str = QUEUED
    context: dict = field(default_factory=dict)
    error: str | None = None
    idle_ticks: int = 0
    timeout_warned: bool = False

    @property
    def workflow_uuid(self) -> str:
        return self.spec.workflow_uuid

    def summary(self) -> dict:
        return {
            "workflow_uuid": self.workflow_uuid,
            "phase": self.phase,
            "step_index": self.step_index,
            "step": (
                self.spec.steps[self.step_index]
                if self.step_index < len(self.spec.steps)
                else None
            ),
            "outstanding": list(self.outstanding),
            "trial_ref": self.spec.trial_ref,
            "error": self.error,
        }

    def snapshot(self) -> dict:
        """Replay-stable view: everything reconstructible from the broker."""
        return {
            "spec": {
                "workflow_uuid": self.spec.workflow_uuid,
                "config": dict(self.spec.config),
                "n_cells": self.spec.n_cells,
                "batch_seed": self.spec.batch_seed,
                "steps": list(self.spec.steps),
                "trial_ref": self.spec.trial_ref,
            },
            "phase": self.phase,
            "step_index": self.step_index,
            "outstanding": sorted(self.outstanding),
            "collected": {k: sorted(v) for k, v in self.collected.items()},
            "request_map": {k: sorted(v) for k, v in self.request_map.items()},
            "context": dict(self.context),
            "error": self.error,
        }


class Overlort:
    """The workflow-management tenant."""

    name = "overlort"
    capabilities = [WORKFLOW_CAP]

    def __init__(self, client, max_parallel: int = 3, soft_timeout_ticks: int | None = None):
        self.client = client
        self.max_parallel = max_parallel
        self.soft_timeout_ticks = soft_timeout_ticks
        self.tenant_uuid: str | None = None
        self.queue: dict[str, WorkflowState] = {}
        self.archive: dict[str, dict] = {}  # workflow uuid -> final summary

    def register(self) -> str:
        self.tenant_uuid = self.client.register_tenant(self.name, self.capabilities)
        return self.tenant_uuid

    # -- intake -------------------------------------------------------------

    def active_count(self) -> int:
        return len(self.queue)

    def accept_workflow(self, spec: WorkflowSpec) -> dict:
        if self.active_count() >= self.max_parallel:
            raise CapacityExceeded(
                f"{self.active_count()} workflows active; cap is {self.max_parallel}"
            )
        if spec.workflow_uuid in self.queue or spec.workflow_uuid in self.archive:
            return {"workflow_uuid": spec.workflow_uuid, "accepted": False}
        self.queue[spec.workflow_uuid] = WorkflowState(spec=spec)
        return {"workflow_uuid": spec.workflow_uuid, "accepted": True}

    def poll_new(self) -> list[str]:
        """Pull pending workflow requests while parallel capacity remains."""
        accepted = []
        if self.active_count() >= self.max_parallel:
            return accepted
        for request in self.client.get_pending_requests(WORKFLOW_CAP.key):
            if self.active_count() >= self.max_parallel:
                break  # excess requests stay pending on the broker
            if not self.client.reserve_request(request.request_uuid, self.tenant_uuid):
                continue
            self.accept_workflow(WorkflowSpec.from_request(request))
            accepted.append(request.request_uuid)
        return accepted

    # -- drive --------------------------------------------------------------

    def step(self, now=None) -> list[dict]:
        """Advance every active workflow by at most one step; idempotent."""
        actions: list[dict] = []
        for wf in list(self.queue.values()):
            try:
                actions.extend(self._advance(wf))
            except SubRequestFailed as exc:
                wf.phase = FAILED
                wf.error = str(exc)
                logger.error("workflow %s failed: %s", wf.workflow_uuid, exc)
                self.archive[wf.workflow_uuid] = wf.summary()
                del self.queue[wf.workflow_uuid]  # capacity released
                actions.append({"action": "failed", "workflow": wf.workflow_uuid, "step": exc.step})
        return actions

    def _advance(self, wf: WorkflowState) -> list[dict]:
        actions: list[dict] = []
        if wf.phase == QUEUED:
            wf.phase = RUNNING
            actions.extend(self._post_step(wf))
            return actions
        if wf.phase == RUNNING:
            arrived = self._collect(wf)
            if not arrived:
                self._maybe_warn_timeout(wf)
                return actions
            wf.idle_ticks = 0
            step_name = wf.spec.steps[wf.step_index]
            wf.step_index += 1
            if wf.step_index < len(wf.spec.steps):
                actions.extend(self._post_step(wf))
            else:
                wf.phase = ASSEMBLING
                actions.append({"action": "collected", "workflow": wf.workflow_uuid, "step": step_name})
        if wf.phase == ASSEMBLING:
            aggregate, upload_uuid = self.assemble_final_result(wf)
            actions.append(
                {
                    "action": "assembled",
                    "workflow": wf.workflow_uuid,
                    "upload_request": upload_uuid,
                    "sub_results": sum(len(v) for v in aggregate["sub_results"].values()),
                }
            )
        return actions

    def _post_step(self, wf: WorkflowState) -> list[dict]:
        step_name = wf.spec.steps[wf.step_index]
        capability = STEP_CAPABILITIES[step_name]
        uuids = []
        for params in self._step_params(wf, step_name):
            uuids.append(self.client.post_request(capability, params, self.tenant_uuid))
        wf.outstanding = uuids
        wf.request_map[step_name] = list(uuids)
        return [
            {"action": "posted", "workflow": wf.workflow_uuid, "step": step_name, "request": u}
            for u in uuids
        ]

    def _step_params(self, wf: WorkflowState, step_name: str) -> list[dict]:
        base = {"workflow_uuid": wf.workflow_uuid, "step": step_name}
        spec = wf.spec
        if step_name == "channel_reservation":
            return [{**base, "n_channels": spec.n_cells}]
        if step_name == "electrolyte":
            return [{**base, "volume_ml": 2.7}]
        if step_name == "assembly":
            return [
                {
                    **base,
                    "n_cells": spec.n_cells,
                    "electrolyte_batch": wf.context.get("electrolyte_batch", ""),
                }
            ]
        if step_name == "transport":
            return [
                {
                    **base,
                    "cell_ids": wf.context.get("cells", []),
                    "channel_ids": wf.context.get("channel_ids", []),
                }
            ]
        if step_name == "cycling":
            cells = wf.context.get("cells") or [f"cell-{i}" for i in range(spec.n_cells)]
            channels = wf.context.get("channel_ids") or [""] * len(cells)
            return [
                {
                    **base,
                    "cell_id": cell,
                    "channel_id": channels[i % len(channels)],
                    "c_rate_charge": float(spec.config["c_rate_charge"]),
                    "c_rate_discharge": float(spec.config["c_rate_discharge"]),
                    "repetitions": int(spec.config["repetitions"]),
                    "cell_seed": stable_int(spec.batch_seed, "cell", i),
                    "batch_seed": spec.batch_seed,
                }
                for i, cell in enumerate(cells)
            ]
        if step_name == "data_export":
            return [
                {**base, "cycling_result_uuids": wf.collected.get("cycling", [])}
            ]
        raise OrchestratorError(f"unknown step '{step_name}'")

    def _collect(self, wf: WorkflowState) -> bool:
        """True once every outstanding sub-request of the current step resolved."""
        step_name = wf.spec.steps[wf.step_index]
        results = []
        for request_uuid in wf.outstanding:
            res = self.client.get_result(request_uuid)
            if isinstance(res, PendingMarker):
                return False
            results.append(res)
        for res in results:
            error = res.data.get("error") if isinstance(res.data, dict) else None
            if error:
                raise SubRequestFailed(step_name, str(error))
        wf.collected[step_name] = [r.result_uuid for r in results]
        self._update_context(wf, step_name, results)
        wf.outstanding = []
        return True

    @staticmethod
    def _update_context(wf: WorkflowState, step_name: str, results) -> None:
        if step_name == "channel_reservation":
            wf.context["channel_ids"] = list(results[0].data["channel_ids"])
        elif step_name == "electrolyte":
            wf.context["electrolyte_batch"] = results[0].data["batch_id"]
        elif step_name == "assembly":
            wf.context["cells"] = list(results[0].data["cells"])

    def _maybe_warn_timeout(self, wf: WorkflowState) -> None:
        wf.idle_ticks += 1
        if (
            self.soft_timeout_ticks is not None
            and not wf.timeout_warned
            and wf.idle_ticks > self.soft_timeout_ticks
        ):
            wf.timeout_warned = True
            step = wf.spec.steps[wf.step_index]
            logger.warning(
                "workflow %s stuck on step '%s' for %d ticks (no automatic failure)",
                wf.workflow_uuid,
                step,
                wf.idle_ticks,
            )

    # -- completion -----------------------------------------------------------

    def assemble_final_result(self, wf: WorkflowState) -> tuple[dict, str]:
        """Post the aggregate result plus the upload request; idempotent."""
        if wf.workflow_uuid in self.archive:
            arch = self.archive[wf.workflow_uuid]
            return arch["aggregate"], arch["upload_request"]
        if wf.phase != ASSEMBLING:
            raise OrchestratorError(f"workflow {wf.workflow_uuid} is not assembling")
        missing = [s for s in wf.spec.steps if not wf.collected.get(s)]
        if missing:
            raise MissingResult(f"steps without results: {missing}")
        aggregate = {
            "workflow_request_uuid": wf.workflow_uuid,
            "config": dict(wf.spec.config),
            "n_cells": wf.spec.n_cells,
            "trial_ref": wf.spec.trial_ref,
            "cells": wf.context.get("cells", []),
            "sub_results": {
                step: [
                    {"request_uuid": rq, "result_uuid": rs}
                    for rq, rs in zip(wf.request_map[step], wf.collected[step])
                ]
                for step in wf.spec.steps
            },
        }
        self.client.post_result(wf.workflow_uuid, aggregate, {"completed_steps": list(wf.spec.steps)}, self.tenant_uuid)
        upload_uuid = self.client.post_request(
            ("upload", "records_bridge"),
            {"workflow_request_uuid": wf.workflow_uuid, "aggregate": aggregate},
            self.tenant_uuid,
        )
        wf.phase = DONE
        summary = wf.summary()
        summary["aggregate"] = aggregate
        summary["upload_request"] = upload_uuid
        self.archive[wf.workflow_uuid] = summary
        del self.queue[wf.workflow_uuid]
        return aggregate, upload_uuid

    # -- observability ---------------------------------------------------------

    def status(self) -> list[dict]:
        active = [wf.summary() for wf in self.queue.values()]
        return active

    def rebuild(self, broker) -> None:
        """Reconstruct the queue purely from the broker's persisted state.

        The in-memory queue is a cache; this is the crash-recovery path and
        the subject of the replay invariant.
        """
        self.queue.clear()
        self.archive.clear()
        requests = broker.all_requests()
        sub_requests: dict[str, list[RequestEnvelope]] = {}
        for req in requests:
            wf_uuid = req.parameters.get("workflow_uuid")
            if wf_uuid and req.parameters.get("step"):
                sub_requests.setdefault(wf_uuid, []).append(req)
        for req in requests:
            if (req.quantity, req.method) != WORKFLOW_CAP.key:
                continue
            if req.status == "pending" or req.reserved_by != self.tenant_uuid:
                if req.status != "resolved":
                    continue
            wf = WorkflowState(spec=WorkflowSpec.from_request(req))
            if req.status == "resolved":
                res = broker.get_result(req.request_uuid)
                wf.phase = DONE
                summary = wf.summary()
                summary["aggregate"] = res.data
                summary["upload_request"] = self._find_upload_request(requests, req.request_uuid)
                self.archive[req.request_uuid] = summary
                continue
            self._replay_steps(wf, sub_requests.get(req.request_uuid, []))
            if wf.phase == FAILED:
                self.archive[req.request_uuid] = wf.summary()
            else:
                self.queue[req.request_uuid] = wf
        return None

    @staticmethod
    def _find_upload_request(requests, workflow_uuid: str) -> str | None:
        for req in requests:
            if (req.quantity, req.method) == ("upload", "records_bridge") and req.parameters.get(
                "workflow_uuid", req.parameters.get("workflow_request_uuid")
            ) == workflow_uuid:
                return req.request_uuid
        return None

    def _replay_steps(self, wf: WorkflowState, subs: list[RequestEnvelope]) -> None:
        """Reproduce the live cache shape from persisted sub-requests.

        Between ticks a live workflow is always either freshly queued or
        running step k with that step's full posted set outstanding
        (collection and the next post happen inside one step() call). So a
        step counts as collected only if the *next* step's sub-requests were
        already posted; the latest posted step is the current one, resolved
        or not. A crash strictly inside a fan-out posting loop can persist a
        partial set; that workflow resumes with the partial fan-out (and the
        fan-out conservation audit will flag it).
        """
        by_step: dict[str, list[RequestEnvelope]] = {}
        for req in subs:
            by_step.setdefault(req.parameters["step"], []).append(req)
        if not by_step:
            wf.phase = QUEUED
            wf.step_index = 0
            return
        posted_steps = [s for s in wf.spec.steps if s in by_step]
        current = posted_steps[-1]
        wf.phase = RUNNING
        for index, step_name in enumerate(wf.spec.steps):
            posted = by_step.get(step_name)
            if not posted:
                break
            posted.sort(key=lambda r: (r.posted_at, r.seq))
            wf.step_index = index
            wf.request_map[step_name] = [r.request_uuid for r in posted]
            results = []
            for req in posted:
                res = self.client.get_result(req.request_uuid)
                if isinstance(res, PendingMarker):
                    results.append(None)
                    continue
                error = res.data.get("error") if isinstance(res.data, dict) else None
                if error:
                    wf.phase = FAILED
                    wf.error = f"step '{step_name}' failed: {error}"
                    return
                results.append(res)
            if step_name == current:
                wf.outstanding = [r.request_uuid for r in posted]
                return
            # an interior step: the next post proves the live manager collected it
            wf.collected[step_name] = [r.result_uuid for r in results]
            self._update_context(wf, step_name, results)
