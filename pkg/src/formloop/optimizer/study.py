"""Study bookkeeping and per-objective surrogate models.

A study tracks completed batches as ObjectiveSamples (per-objective mean and
standard error over the replicate cells). Two independent GPs are fitted,
one per objective, on unit-cube inputs and z-scored targets; maximized
objectives are negated internally so the whole pipeline minimizes. Each
point's observation-noise variance is its squared standard error,
standardized along with the targets.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from ..clock import component_seed
from .gp import (
    GPModel,
    fit_gp,
    gp_posterior_batch,
    gp_posterior_cov,
    gp_posterior_cross,
    with_observations,
)
from .pareto import reference_point
from .spaces import ParameterConfiguration, SearchSpace

OBJECTIVES = (("formation_time_h", "min"), ("eol_cycles", "max"))


class StudyError(Exception):
    pass


@dataclass
class ObjectiveSample:
    """Aggregated outcome of one batch of replicate cells."""

    config: ParameterConfiguration
    formation_time_mean: float
    formation_time_se: float
    eol_mean: float
    eol_se: float
    n_replicates: int = 4
    excluded: bool = False
    batch_index: int = -1
    source: str = "measurement"

    def objective_values(self) -> tuple[float, float]:
        return (self.formation_time_mean, self.eol_mean)

    def objective_errors(self) -> tuple[float, float]:
        return (self.formation_time_se, self.eol_se)


@dataclass
class GenerationSettings:
    """Multiphase generation strategy knobs."""

    n_initial: int = 3          # random trials when no usable data exist
    min_model_points: int = 2   # completed samples needed to go model-based


@dataclass
class StudyState:
    search_space: SearchSpace
    objectives: tuple = OBJECTIVES
    completed: list[ObjectiveSample] = field(default_factory=list)
    batch_size: int = 3
    mc_samples: int = 128
    seed: int = 0
    generation: GenerationSettings = field(default_factory=GenerationSettings)
    reference_point_min: np.ndarray | None = None  # frozen, min convention

    def non_excluded(self) -> list[ObjectiveSample]:
        return [s for s in self.completed if not s.excluded]

    @property
    def phase(self) -> str:
        if len(self.non_excluded()) >= self.generation.min_model_points:
            return "model-based"
        return "warm-start"

    def directions(self) -> tuple[str, ...]:
        return tuple(d for _, d in self.objectives)

    def objective_matrix(self, samples=None) -> np.ndarray:
        rows = self.non_excluded() if samples is None else samples
        return np.asarray([s.objective_values() for s in rows], dtype=float)

    def objective_matrix_min(self, samples=None) -> np.ndarray:
        Y = self.objective_matrix(samples)
        signs = np.array([1.0 if d == "min" else -1.0 for d in self.directions()])
        return Y * signs

    def add_sample(self, sample: ObjectiveSample) -> None:
        self.search_space.validate(sample.config)
        self.completed.append(sample)

    def freeze_reference(self) -> np.ndarray:
        """Fix the hypervolume reference point from the data seen so far.

        Called once after the initial (warm-start) samples are ingested so
        hypervolume stays comparable across iterations.
        """
        if self.reference_point_min is None:
            rows = self.non_excluded()
            if not rows:
                raise StudyError("cannot freeze a reference point with no samples")
            self.reference_point_min = reference_point(
                self.objective_matrix(rows), self.directions()
            )
        return self.reference_point_min


@dataclass
class ObjectiveModel:
    """GP over one objective plus the affine maps into model space."""

    name: str
    direction: str
    gp: GPModel
    y_shift: float
    y_scale: float

    def sign(self) -> float:
        return 1.0 if self.direction == "min" else -1.0

    def predict_min(self, U) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean/variance in minimization-convention native units."""
        mean_z, var_z = gp_posterior_batch(self.gp, U)
        return mean_z * self.y_scale + self.y_shift, var_z * self.y_scale**2

    def posterior_cov_min(self, U) -> tuple[np.ndarray, np.ndarray]:
        mean_z, cov_z = gp_posterior_cov(self.gp, U)
        return mean_z * self.y_scale + self.y_shift, cov_z * self.y_scale**2

    def cross_cov_min(self, A, B) -> np.ndarray:
        return gp_posterior_cross(self.gp, A, B) * self.y_scale**2

    def fantasize(self, u, fantasy_noise: float = 1e-10) -> "ObjectiveModel":
        """Condition on the posterior mean at `u` (a noiseless fantasy)."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        mean_z, _ = gp_posterior_batch(self.gp, u)
        gp = with_observations(self.gp, u, mean_z, np.full(len(u), fantasy_noise))
        return replace(self, gp=gp)


def fit_objective_models(
    state: StudyState, n_restarts: int = 8
) -> tuple[list[ObjectiveModel], np.ndarray]:
    """Fit one GP per objective on the non-excluded completed samples.

    Returns the models plus the unit-cube input matrix they share.
    """
    rows = state.non_excluded()
    if len(rows) < 2:
        raise StudyError(f"need at least 2 samples to fit models, got {len(rows)}")
    space = state.search_space
    U = np.asarray([space.unit_from_config(s.config) for s in rows])
    models = []
    for j, (name, direction) in enumerate(state.objectives):
        sign = 1.0 if direction == "min" else -1.0
        y = np.asarray([s.objective_values()[j] for s in rows]) * sign
        se = np.asarray([s.objective_errors()[j] for s in rows])
        shift = float(y.mean())
        scale = float(y.std())
        if scale <= 0:
            scale = 1.0
        z = (y - shift) / scale
        noise_z = (se / scale) ** 2
        rng = np.random.default_rng(component_seed(state.seed, f"fit-{name}-{len(rows)}"))
        gp = fit_gp(list(zip(U, z, noise_z)), seed=rng, n_restarts=n_restarts)
        models.append(
            ObjectiveModel(name=name, direction=direction, gp=gp, y_shift=shift, y_scale=scale)
        )
    return models, U


# -- warm-start table ------------------------------------------------------

WARMSTART_COLUMNS = (
    "batch",
    "c_rate_charge",
    "c_rate_discharge",
    "repetitions",
    "formation_time_h",
    "formation_time_se_h",
    "eol_cycles",
    "eol_se_cycles",
)


def load_warmstart_table(path) -> list[ObjectiveSample]:
    """Read prior batches from a delimited-text table.

    Expects the results-table column layout (see WARMSTART_COLUMNS), plus
    optional `n_replicates` and `excluded` columns.
    """
    samples: list[ObjectiveSample] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in WARMSTART_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise StudyError(f"warm-start table missing columns: {missing}")
        for row in reader:
            samples.append(
                ObjectiveSample(
                    config=ParameterConfiguration(
                        c_rate_charge=float(row["c_rate_charge"]),
                        c_rate_discharge=float(row["c_rate_discharge"]),
                        repetitions=int(float(row["repetitions"])),
                    ),
                    formation_time_mean=float(row["formation_time_h"]),
                    formation_time_se=float(row["formation_time_se_h"]),
                    eol_mean=float(row["eol_cycles"]),
                    eol_se=float(row["eol_se_cycles"]),
                    n_replicates=int(float(row.get("n_replicates") or 4)),
                    excluded=_parse_flag(row.get("excluded")),
                    batch_index=int(float(row["batch"])),
                    source="warm-start",
                )
            )
    if not samples:
        raise StudyError("warm-start table is empty")
    return samples


def _parse_flag(value) -> bool:
    if value is None or value == "":
        return False
    return str(value).strip().lower() in ("1", "true", "yes")


def dump_results_table(samples: list[ObjectiveSample]) -> str:
    """Results-table layout as delimited text (stable float formatting)."""
    lines = [",".join(WARMSTART_COLUMNS + ("n_replicates", "excluded"))]
    for s in sorted(samples, key=lambda s: s.batch_index):
        lines.append(
            ",".join(
                [
                    str(s.batch_index),
                    f"{s.config.c_rate_charge:.6f}",
                    f"{s.config.c_rate_discharge:.6f}",
                    str(s.config.repetitions),
                    f"{s.formation_time_mean:.6f}",
                    f"{s.formation_time_se:.6f}",
                    f"{s.eol_mean:.6f}",
                    f"{s.eol_se:.6f}",
                    str(s.n_replicates),
                    "1" if s.excluded else "0",
                ]
            )
        )
    return "\n".join(lines) + "\n"
