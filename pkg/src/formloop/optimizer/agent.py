"""Active-learning plugin: reacts to record tags and manages trial records.

Two events drive an iteration: an umbrella record being activated, or a
trial linked to an active umbrella being marked completed. Either way the
agent harvests every completed trial of the umbrella, refits the surrogate
models, and creates up to (parallel capacity) new trial records, each tagged
as running and flagged for submission to the broker bridge.

The record store is the source of truth; the agent keeps no state it cannot
rebuild from the umbrella's neighborhood, so at-least-once hook delivery is
safe (re-delivery finds the capacity already occupied and creates nothing).
"""

from __future__ import annotations

import json
import logging

import numpy as np

from .. import records as rec
from .acquisition import suggest_batch
from .pareto import EmptyInput, dominated_hypervolume, pareto_front
from .spaces import ParameterConfiguration, SearchSpace
from .study import GenerationSettings, ObjectiveSample, StudyState, fit_objective_models

logger = logging.getLogger(__name__)


class UmbrellaInactive(Exception):
    pass


def umbrella_template_schema() -> dict:
    """Metadata schema for umbrella records defining an optimization study."""
    return {
        "type": "object",
        "required": ["design_parameters", "objectives", "generation", "seed"],
        "properties": {
            "design_parameters": {
                "type": "object",
                "minProperties": 1,
                "additionalProperties": {
                    "type": "array", "minItems": 2, "maxItems": 2,
                    "items": {"type": "number"},
                },
            },
            "objectives": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["name", "direction"],
                    "properties": {
                        "name": {"type": "string"},
                        "direction": {"enum": ["min", "max"]},
                    },
                },
            },
            "generation": {
                "type": "object",
                "properties": {
                    "n_initial": {"type": "integer", "minimum": 0, "default": 3},
                    "min_model_points": {"type": "integer", "minimum": 2, "default": 2},
                    "batch_size": {"type": "integer", "minimum": 1, "default": 3},
                    "mc_samples": {"type": "integer", "minimum": 64, "default": 128},
                    "max_batches": {"type": "integer", "minimum": 1, "default": 6},
                },
            },
            "seed": {"type": "integer"},
            "n_cells": {"type": "integer", "minimum": 1, "default": 4},
            "constraints": {"type": "array"},
        },
    }


class ActiveLearningAgent:
    """Optimizer plugin bound to a record store."""

    def __init__(self, store: rec.RecordStore, diagnostics_path=None):
        self.store = store
        self.diagnostics: list[dict] = []
        self.diagnostics_path = diagnostics_path
        self._scratch_models = None

    def register_hooks(self) -> None:
        self.store.subscribe(rec.TAG_UMBRELLA_ACTIVE, self._on_umbrella_event, name="optimizer-umbrella")
        self.store.subscribe(rec.TAG_TRIAL_COMPLETED, self._on_trial_event, name="optimizer-trial")

    # -- hook entry points (idempotent, never raise into the dispatcher) ----

    def _on_umbrella_event(self, event: rec.TagEvent) -> None:
        try:
            self.start_study(event.record_id)
        except Exception:
            logger.exception("umbrella activation handling failed for %s", event.record_id)

    def _on_trial_event(self, event: rec.TagEvent) -> None:
        try:
            self.on_trial_completed(self.store.get(event.record_id))
        except UmbrellaInactive:
            logger.warning("completed trial %s has no active umbrella", event.record_id)
        except Exception:
            logger.exception("trial completion handling failed for %s", event.record_id)

    # -- operations ---------------------------------------------------------

    def start_study(self, umbrella_id: str) -> list[rec.Record]:
        umbrella = self.store.get(umbrella_id)
        if rec.TAG_UMBRELLA_ACTIVE not in umbrella.tags:
            raise UmbrellaInactive(f"umbrella {umbrella_id} is not active")
        if umbrella.metadata.get("constraints"):
            logger.warning(
                "umbrella %s declares output constraints; they are stored but not enforced",
                umbrella.identifier,
            )
        return self._iterate(umbrella)

    def on_trial_completed(self, trial: rec.Record) -> list[rec.Record]:
        if rec.TAG_TRIAL_COMPLETED not in trial.tags:
            raise ValueError(f"trial {trial.identifier} is not marked completed")
        umbrellas = self.store.neighbors(trial.record_id, rec.LINK_TRIAL_FOR, "out")
        active = [u for u in umbrellas if rec.TAG_UMBRELLA_ACTIVE in u.tags]
        if not active:
            raise UmbrellaInactive(
                f"trial {trial.identifier} is not linked to an active umbrella"
            )
        return self._iterate(active[0])

    # -- internals ----------------------------------------------------------

    def _iterate(self, umbrella: rec.Record) -> list[rec.Record]:
        state = self.build_state(umbrella)
        trials = self.trials_of(umbrella.record_id)
        running = [t for t in trials if self._is_running(t)]
        created = [t for t in trials if t.metadata.get("source") == "suggested"]
        gen = umbrella.metadata.get("generation", {})
        batch_size = int(gen.get("batch_size", 3))
        max_batches = int(gen.get("max_batches", 6))

        self._scratch_models = None
        if len(state.non_excluded()) >= state.generation.min_model_points:
            self._emit_diagnostics(umbrella, state)

        capacity = batch_size - len(running)
        budget = max_batches - len(created)
        n_new = max(0, min(capacity, budget))
        if n_new == 0:
            return []

        fitted = None
        if self._scratch_models is not None:
            space = state.search_space
            U = np.asarray(
                [space.unit_from_config(s.config) for s in state.non_excluded()]
            )
            fitted = (self._scratch_models, U)
        configs = suggest_batch(state, q=n_new, fitted=fitted)
        next_index = 1 + max(
            (int(t.metadata.get("batch_index", -1)) for t in trials), default=-1
        )
        out = []
        for i, config in enumerate(configs):
            out.append(self.create_trial(umbrella, config, next_index + i))
        return out

    def build_state(self, umbrella: rec.Record) -> StudyState:
        meta = umbrella.metadata
        space = SearchSpace(
            {k: tuple(v) for k, v in meta["design_parameters"].items()}
        )
        gen = meta.get("generation", {})
        state = StudyState(
            search_space=space,
            objectives=tuple(
                (o["name"], o["direction"]) for o in meta["objectives"]
            ),
            batch_size=int(gen.get("batch_size", 3)),
            mc_samples=int(gen.get("mc_samples", 128)),
            seed=int(meta.get("seed", 0)),
            generation=GenerationSettings(
                n_initial=int(gen.get("n_initial", 3)),
                min_model_points=int(gen.get("min_model_points", 2)),
            ),
        )
        for trial in self.trials_of(umbrella.record_id):
            sample = self._sample_from_trial(trial)
            if sample is not None:
                state.add_sample(sample)
        if meta.get("reference_point") is not None:
            state.reference_point_min = np.asarray(meta["reference_point"], dtype=float)
        elif state.non_excluded():
            # freeze once the initial data are in, and persist on the record
            ref = state.freeze_reference()
            self.store.update_metadata(
                umbrella.record_id, {"reference_point": [float(v) for v in ref]}
            )
        return state

    def trials_of(self, umbrella_id: str) -> list[rec.Record]:
        trials = self.store.neighbors(umbrella_id, rec.LINK_TRIAL_FOR, "in")
        return sorted(trials, key=lambda t: (int(t.metadata.get("batch_index", 0)), t.record_id))

    @staticmethod
    def _is_running(trial: rec.Record) -> bool:
        return trial.current_state() == rec.TAG_TRIAL_RUNNING

    @staticmethod
    def _sample_from_trial(trial: rec.Record) -> ObjectiveSample | None:
        if rec.TAG_TRIAL_COMPLETED not in trial.tags:
            return None
        objectives = trial.metadata.get("objectives")
        if not objectives:
            return None
        config_doc = trial.metadata.get("actual_config") or trial.metadata["config"]
        ft = objectives["formation_time_h"]
        eol = objectives["eol_cycles"]
        return ObjectiveSample(
            config=ParameterConfiguration.from_dict(config_doc),
            formation_time_mean=float(ft["mean"]),
            formation_time_se=float(ft["se"]),
            eol_mean=float(eol["mean"]),
            eol_se=float(eol["se"]),
            n_replicates=int(trial.metadata.get("n_replicates", 4)),
            excluded=bool(trial.metadata.get("excluded", False)),
            batch_index=int(trial.metadata.get("batch_index", -1)),
            source=trial.metadata.get("source", "measurement"),
        )

    def create_trial(
        self, umbrella: rec.Record, config: ParameterConfiguration, batch_index: int
    ) -> rec.Record:
        study_slug = umbrella.identifier
        trial = self.store.create_record(
            title=f"Trial {batch_index} of {umbrella.title}",
            metadata={
                "config": config.as_dict(),
                "batch_index": batch_index,
                "source": "suggested",
                "n_cells": int(umbrella.metadata.get("n_cells", 4)),
                "umbrella": umbrella.record_id,
            },
            identifier=f"{study_slug}-trial-{batch_index}",
        )
        self.store.add_link(trial.record_id, umbrella.record_id, rec.LINK_TRIAL_FOR)
        self.store.add_tag(trial.record_id, rec.TAG_TRIAL_RUNNING)
        self.store.add_tag(trial.record_id, rec.TAG_TO_BROKER)
        return trial

    def _emit_diagnostics(self, umbrella: rec.Record, state: StudyState) -> None:
        try:
            models, _ = fit_objective_models(state)
            ref = state.freeze_reference()
            signs = np.array([1.0 if d == "min" else -1.0 for d in state.directions()])
            hv = dominated_hypervolume(
                state.objective_matrix(), ref * signs, state.directions()
            )
        except EmptyInput:
            return
        entry = {
            "umbrella": umbrella.identifier,
            "iteration": len(state.non_excluded()),
            "hypervolume": hv,
            "hyperparameters": {
                m.name: {
                    "lengthscales": [float(v) for v in m.gp.lengthscales],
                    "signal_variance": float(m.gp.signal_variance),
                }
                for m in models
            },
        }
        self.diagnostics.append(entry)
        self._scratch_models = models
        if self.diagnostics_path is not None:
            with open(self.diagnostics_path, "a") as fh:
                fh.write(json.dumps(entry) + "\n")
