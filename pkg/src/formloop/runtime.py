"""In-process closed-loop runtime, replay audits, and the synthetic campaign.

The runtime wires broker, record store, optimizer plugin, bridge, workflow
manager, and the simulated lab tenants into one deterministic tick loop:
simulated clock, seeded UUIDs, round-robin component ticks. Two runs with
the same config and seed produce byte-identical results tables.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import records as rec
from .analysis import CensoredAt, aggregate_batch, build_dashboard_payload, extract_eol, extract_formation_time
from .bridge import WorkflowBridge, base_workflow_blueprint
from .broker import Broker, Capability, LocalBrokerClient, MemoryStore, SqliteStore
from .clock import RandomIds, SeededIds, SimClock, WallClock, component_seed, stable_int
from .config import StudyConfig
from .labsim import SimParams, standard_lab_tenants
from .labsim.cells import CellInstance, simulate_cell
from .optimizer import (
    ObjectiveSample,
    SearchSpace,
    StudyState,
    dump_results_table,
    pareto_front,
    suggest_batch,
)
from .optimizer.pareto import dominated_hypervolume
from .broker.model import PendingMarker
from .optimizer.agent import ActiveLearningAgent, umbrella_template_schema
from .optimizer.study import GenerationSettings, load_warmstart_table
from .orchestrator import DEFAULT_STEPS, Overlort

logger = logging.getLogger(__name__)

OPTIMIZER_CAP = Capability(
    "optimization",
    "kadiaigent",
    {"type": "object"},
    {"type": "object"},
)


@dataclass
class RunOutcome:
    samples: list[ObjectiveSample]
    stopped_reason: str
    ticks: int
    n_failed_workflows: int
    diagnostics: list[dict] = field(default_factory=list)


class StudyRuntime:
    """Everything needed to run one study in a single process."""

    def __init__(self, config: StudyConfig, deterministic: bool = True):
        self.config = config.validate()
        self.deterministic = deterministic
        self.clock = SimClock() if deterministic else WallClock()
        self._ids = {}

        def ids(name: str):
            if not deterministic:
                return RandomIds()
            if name not in self._ids:
                self._ids[name] = SeededIds(component_seed(config.seed, f"ids-{name}"))
            return self._ids[name]

        storage = config.broker.storage
        if storage in (":memory:", "memory", "", None):
            store = MemoryStore()
        else:
            store = SqliteStore(storage)
        self.broker = Broker(
            store=store, clock=self.clock, ids=ids("broker"), poll_limit=config.broker.poll_limit
        )
        self.client = LocalBrokerClient(self.broker)
        self.store = rec.RecordStore(clock=self.clock, ids=ids("records"), defer_dispatch=True)
        self.agent = ActiveLearningAgent(self.store)
        self.bridge = WorkflowBridge(self.store, LocalBrokerClient(self.broker))
        self.overlort = Overlort(
            LocalBrokerClient(self.broker),
            max_parallel=config.max_parallel_workflows,
            soft_timeout_ticks=config.soft_timeout_ticks,
        )
        self.tenants = standard_lab_tenants(
            lambda: LocalBrokerClient(self.broker),
            ids,
            params=config.simulator,
            auto_confirm_transport=config.auto_confirm_transport,
            electrolyte_delay=config.delays.electrolyte,
            assembly_delay=config.delays.assembly,
        )
        self.bridge.register()
        self.overlort.register()
        self.optimizer_tenant_uuid = self.broker.register_tenant(
            "kadiaigent", [OPTIMIZER_CAP]
        ).tenant_uuid
        self.umbrella: rec.Record | None = None
        self._tick_count = 0

    # -- study setup ----------------------------------------------------------

    def setup_records(self) -> rec.Record:
        """Create the campaign/study/umbrella/base-workflow record hierarchy."""
        cfg = self.config
        campaign = self.store.create_record(
            title="Auto campaign", metadata={"kind": "campaign"}, identifier="campaign"
        )
        study = self.store.create_record(
            title=cfg.name, metadata={"kind": "study"}, identifier=f"{rec.slugify(cfg.name)}-study"
        )
        self.store.add_link(campaign.record_id, study.record_id, rec.LINK_COLLECTS)
        template = rec.Template(template_id="umbrella", metadata_schema=umbrella_template_schema())
        umbrella = self.store.create_record(
            title=f"{cfg.name} umbrella",
            metadata={
                "design_parameters": {k: list(v) for k, v in cfg.search_space.items()},
                "objectives": list(cfg.objectives),
                "generation": {
                    "n_initial": cfg.generation.n_initial,
                    "min_model_points": cfg.generation.min_model_points,
                    "batch_size": cfg.batch_size,
                    "mc_samples": cfg.mc_samples,
                    "max_batches": cfg.max_batches,
                },
                "seed": cfg.seed,
                "n_cells": cfg.n_cells,
            },
            template=template,
            identifier=rec.slugify(cfg.name),
        )
        self.store.add_link(study.record_id, umbrella.record_id, rec.LINK_COLLECTS)
        base = self.store.create_record(
            title="Cell formation workflow blueprint",
            metadata=base_workflow_blueprint(),
            identifier=f"{umbrella.identifier}-base-workflow",
        )
        self.store.add_link(base.record_id, umbrella.record_id, rec.LINK_BASE_WORKFLOW_FOR)
        if cfg.warm_start:
            self.load_warm_start(umbrella, cfg.warm_start)
        self.store.drain()  # flush queued events before hooks subscribe
        self.agent.register_hooks()
        self.bridge.register_hooks()
        self.umbrella = umbrella
        return umbrella

    def load_warm_start(self, umbrella: rec.Record, path) -> list[rec.Record]:
        """Materialize prior batches as completed trial records."""
        out = []
        for sample in load_warmstart_table(path):
            trial = self.store.create_record(
                title=f"Prior batch {sample.batch_index}",
                metadata={
                    "config": sample.config.as_dict(),
                    "batch_index": sample.batch_index,
                    "source": "prior",
                    "n_cells": self.config.n_cells,
                    "n_replicates": sample.n_replicates,
                    "excluded": sample.excluded,
                    "objectives": {
                        "formation_time_h": {
                            "mean": sample.formation_time_mean,
                            "se": sample.formation_time_se,
                        },
                        "eol_cycles": {"mean": sample.eol_mean, "se": sample.eol_se},
                    },
                },
                identifier=f"{umbrella.identifier}-prior-{sample.batch_index}",
            )
            self.store.add_link(trial.record_id, umbrella.record_id, rec.LINK_TRIAL_FOR)
            self.store.add_tag(trial.record_id, rec.TAG_TRIAL_COMPLETED)
            out.append(trial)
        return out

    def activate(self) -> None:
        if self.umbrella is None:
            self.setup_records()
        self.store.add_tag(self.umbrella.record_id, rec.TAG_UMBRELLA_ACTIVE)

    # -- loop -----------------------------------------------------------------

    def tick(self) -> int:
        """One deterministic round-robin pass; returns an activity count."""
        self._tick_count += 1
        activity = len(self.store.drain())
        activity += len(self.overlort.poll_new())
        activity += len(self.overlort.step())
        for name in sorted(self.tenants):
            activity += len(self.tenants[name].tick())
        activity += len(self.bridge.tick())
        activity += len(self.store.drain())
        return activity

    def running_trials(self) -> list[rec.Record]:
        return [
            t
            for t in self.agent.trials_of(self.umbrella.record_id)
            if t.current_state() == rec.TAG_TRIAL_RUNNING
        ]

    def suggested_trials(self) -> list[rec.Record]:
        return [
            t
            for t in self.agent.trials_of(self.umbrella.record_id)
            if t.metadata.get("source") == "suggested"
        ]

    def study_state(self) -> StudyState:
        return self.agent.build_state(self.store.get(self.umbrella.record_id))

    def freeze_budget(self) -> None:
        """Stop creating new trials; in-flight work still completes."""
        created = len(self.suggested_trials())
        gen = dict(self.store.get(self.umbrella.record_id).metadata["generation"])
        gen["max_batches"] = created
        self.store.update_metadata(self.umbrella.record_id, {"generation": gen})

    def _stagnated(self) -> bool:
        patience = self.config.stopping.hv_patience
        if not patience:
            return False
        state = self.study_state()
        usable = sorted(state.non_excluded(), key=lambda s: s.batch_index)
        if len(usable) < patience + 1:
            return False
        ref = state.freeze_reference()
        directions = state.directions()
        signs = np.array([1.0 if d == "min" else -1.0 for d in directions])
        ref_native = ref * signs
        Y = state.objective_matrix(usable)
        hv_now = dominated_hypervolume(Y, ref_native, directions)
        hv_then = dominated_hypervolume(Y[:-patience], ref_native, directions)
        if hv_then <= 0:
            return False
        return (hv_now - hv_then) / hv_then < self.config.stopping.hv_rel_tolerance

    def run(self) -> RunOutcome:
        if self.umbrella is None:
            self.setup_records()
        if rec.TAG_UMBRELLA_ACTIVE not in self.store.get(self.umbrella.record_id).tags:
            self.activate()
        started = time.monotonic()
        reason = "budget-exhausted"
        idle_streak = 0
        while self._tick_count < self.config.max_ticks:
            activity = self.tick()
            wall = self.config.stopping.max_wall_clock_s
            if wall is not None and time.monotonic() - started > wall:
                self.freeze_budget()
                reason = "wall-clock"
            elif self._stagnated():
                self.freeze_budget()
                reason = "hypervolume-stagnation"
            if activity == 0:
                idle_streak += 1
            else:
                idle_streak = 0
            if idle_streak >= 3:
                if self.running_trials():
                    reason = "stalled"
                    logger.warning(
                        "loop idle with %d trials still running (manual step awaiting confirmation?)",
                        len(self.running_trials()),
                    )
                break
        else:
            reason = "tick-limit"
        state = self.study_state()
        n_failed = sum(
            1 for s in self.overlort.archive.values() if s.get("phase") == "failed"
        )
        return RunOutcome(
            samples=sorted(state.completed, key=lambda s: s.batch_index),
            stopped_reason=reason,
            ticks=self._tick_count,
            n_failed_workflows=n_failed,
            diagnostics=list(self.agent.diagnostics),
        )

    # -- artifacts --------------------------------------------------------------

    def export(self, outdir: str | Path, render: bool = True) -> dict[str, Path]:
        from .report import render_report  # matplotlib import deferred

        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        state = self.study_state()
        artifacts: dict[str, Path] = {}

        results = outdir / "results.csv"
        results.write_text(dump_results_table(state.completed))
        artifacts["results"] = results

        if state.non_excluded():
            front = pareto_front(state.completed)
            front_samples = [state.completed[i] for i in front.indices]
            pareto_path = outdir / "pareto.csv"
            pareto_path.write_text(dump_results_table(front_samples))
            artifacts["pareto"] = pareto_path

        payload = build_dashboard_payload(state)
        payload_path = outdir / "dashboard_payload.json"
        payload_path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        artifacts["payload"] = payload_path

        events_path = outdir / "events.jsonl"
        with events_path.open("w") as fh:
            for event in self.broker.events():
                fh.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")
        artifacts["events"] = events_path

        if self.agent.diagnostics:
            diag_path = outdir / "diagnostics.jsonl"
            with diag_path.open("w") as fh:
                for entry in self.agent.diagnostics:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")
            artifacts["diagnostics"] = diag_path

        if render:
            for figure_path in render_report(payload, outdir):
                artifacts[figure_path.stem] = figure_path
        return artifacts


# -- synthetic campaign (optimizer <-> simulator, no protocol overhead) --------


def measure_config(space, params: SimParams, config, n_cells: int, seed: int, batch_index: int) -> ObjectiveSample:
    """Ground-truth evaluation of one configuration with replicate cells."""
    cells = []
    for i in range(n_cells):
        cell = CellInstance(
            cell_id=f"b{batch_index}c{i}",
            config=config,
            seed=stable_int(seed, "cell", batch_index, i),
            nominal_capacity=params.nominal_capacity_mah,
            rate_reference_capacity=params.rate_reference_capacity_mah,
        )
        trace = simulate_cell(cell, params)
        cells.append((extract_formation_time(trace), extract_eol(trace)))
    score = aggregate_batch(cells, trial_ref=f"batch-{batch_index}")
    return ObjectiveSample(
        config=config,
        formation_time_mean=score.formation_time_mean,
        formation_time_se=score.formation_time_se,
        eol_mean=score.eol_mean,
        eol_se=score.eol_se,
        n_replicates=score.n_valid,
        batch_index=batch_index,
    )


def run_synthetic_campaign(
    seed: int,
    strategy: str = "bo",
    iterations: int = 10,
    q: int = 3,
    n_cells: int = 4,
    params: SimParams | None = None,
    mc_samples: int = 128,
    n_restarts: int = 4,
    n_screen: int = 96,
) -> StudyState:
    """Closed loop against the simulator without the protocol stack.

    `strategy` is "bo" (model-based after the first batch) or "random"
    (uniform draws throughout, equal budget).
    """
    if strategy not in ("bo", "random"):
        raise ValueError(f"unknown strategy '{strategy}'")
    params = params or SimParams()
    space = SearchSpace()
    state = StudyState(
        search_space=space,
        batch_size=q,
        mc_samples=mc_samples,
        seed=seed,
        generation=GenerationSettings(n_initial=q, min_model_points=2),
    )
    rng = np.random.default_rng(component_seed(seed, f"campaign-{strategy}"))
    batch_index = 0
    for _ in range(iterations):
        if strategy == "random":
            configs = space.sample_configs(q, rng)
        else:
            configs = suggest_batch(state, q=q, n_restarts=n_restarts, n_screen=n_screen)
        for config in configs:
            state.add_sample(
                measure_config(space, params, config, n_cells, seed, batch_index)
            )
            batch_index += 1
        state.freeze_reference()
    return state


def hypervolume_trace(state: StudyState, ref_min=None) -> list[float]:
    """Dominated hypervolume after each completed batch (fixed reference)."""
    usable = sorted(state.non_excluded(), key=lambda s: s.batch_index)
    ref = ref_min if ref_min is not None else state.freeze_reference()
    directions = state.directions()
    signs = np.array([1.0 if d == "min" else -1.0 for d in directions])
    ref_native = np.asarray(ref) * signs
    Y = state.objective_matrix(usable)
    return [
        dominated_hypervolume(Y[: i + 1], ref_native, directions)
        for i in range(len(usable))
    ]


def final_hypervolume(state: StudyState, ref_min) -> float:
    directions = state.directions()
    signs = np.array([1.0 if d == "min" else -1.0 for d in directions])
    ref_native = np.asarray(ref_min) * signs
    return dominated_hypervolume(state.objective_matrix(), ref_native, directions)


def paired_reference(states: list[StudyState]) -> np.ndarray:
    """Common reference over several runs: worst observation + 10% of range."""
    from .optimizer.pareto import reference_point

    Y = np.vstack([s.objective_matrix() for s in states])
    return reference_point(Y, states[0].directions())


# -- audits ---------------------------------------------------------------------

_TRANSITIONS = {"pending": 0, "reserved": 1, "resolved": 2}


def replay_request_statuses(events) -> dict[str, str]:
    """Rebuild request statuses from the event log, rejecting any backward move."""
    status: dict[str, str] = {}
    for event in events:
        kind = event.kind if hasattr(event, "kind") else event["kind"]
        payload = event.payload if hasattr(event, "payload") else event["payload"]
        if kind == "request_posted":
            uuid = payload["request_uuid"]
            if uuid in status:
                raise AssertionError(f"request {uuid} posted twice")
            status[uuid] = "pending"
        elif kind == "request_reserved":
            uuid = payload["request_uuid"]
            _step(status, uuid, "reserved")
        elif kind == "result_posted":
            uuid = payload["request_uuid"]
            _step(status, uuid, "resolved")
    return status


def _step(status: dict, uuid: str, new: str) -> None:
    old = status.get(uuid)
    if old is None:
        raise AssertionError(f"transition for unknown request {uuid}")
    if _TRANSITIONS[new] <= _TRANSITIONS[old]:
        raise AssertionError(f"backward transition {old} -> {new} on {uuid}")
    status[uuid] = new


def audit_workflow_sequencing(broker: Broker) -> int:
    """Check posted_at(step k+1 sub-request) > posted_at(step k result).

    Returns the number of workflows audited; raises on any violation.
    """
    requests = broker.all_requests()
    checked = 0
    for wf_req in requests:
        if (wf_req.quantity, wf_req.method) != ("workflow", "overlort"):
            continue
        subs = [
            r
            for r in requests
            if r.parameters.get("workflow_uuid") == wf_req.request_uuid
            and r.parameters.get("step")
        ]
        if not subs:
            continue
        steps = list(wf_req.parameters.get("steps") or DEFAULT_STEPS)
        by_step = {}
        for r in subs:
            by_step.setdefault(r.parameters["step"], []).append(r)
        previous_result_time = None
        for step in steps:
            posted = by_step.get(step)
            if not posted:
                break
            first_post = min(r.posted_at for r in posted)
            if previous_result_time is not None and first_post <= previous_result_time:
                raise AssertionError(
                    f"workflow {wf_req.request_uuid}: step '{step}' posted at {first_post} "
                    f"before the previous step resolved at {previous_result_time}"
                )
            results = [broker.get_result(r.request_uuid) for r in posted]
            if any(isinstance(res, PendingMarker) for res in results):
                break  # step still open
            previous_result_time = max(res.posted_at for res in results)
        checked += 1
    return checked
