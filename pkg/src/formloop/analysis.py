"""Result scoring and dashboard payloads.

Cycle life is read off a trace as the last aging cycle whose discharge
capacity is still at or above 80% of the first post-formation cycle; traces
that end above the threshold are censored (a lower bound, not a value).
Batches aggregate replicate cells into mean +/- standard error, with the
sample standard deviation (n-1) over sqrt(n) as the SE convention.

The dashboard payload is a self-describing versioned document: objective
scatter with Pareto flags, per-objective marginal histograms split
Pareto/dominated, GP posterior-mean contour grids for every parameter pair,
and the hypervolume trace. The UI renders it verbatim and never recomputes
Pareto membership client-side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .labsim.cells import CyclingTrace
from .optimizer.pareto import EmptyInput, dominated_hypervolume, pareto_front
from .optimizer.spaces import ParameterConfiguration
from .optimizer.study import (
    ObjectiveSample,
    StudyState,
    fit_objective_models,
)

PAYLOAD_VERSION = 1

EOL_THRESHOLD_FRACTION = 0.8


class AnalysisError(Exception):
    pass


class EmptyTrace(AnalysisError):
    pass


class AllCensored(AnalysisError):
    pass


class EmptyStudy(AnalysisError):
    pass


@dataclass(frozen=True)
class CensoredAt:
    """Trace discontinued above the threshold: EOL is at least this cycle."""

    cycle: int


@dataclass
class BatchScore:
    trial_ref: str
    per_cell: list[tuple[float, object]]  # (formation hours, eol or CensoredAt)
    formation_time_mean: float
    formation_time_se: float
    eol_mean: float
    eol_se: float
    n_valid: int
    actual_config: ParameterConfiguration | None = None
    anomalies: list[str] = field(default_factory=list)


def extract_eol(trace: CyclingTrace) -> int | CensoredAt:
    """Cycle index (1-based from the first post-formation cycle) at 80%."""
    if not trace.aging:
        raise EmptyTrace("trace has no aging segment")
    first = trace.aging[0][1]
    if first <= 0:
        raise EmptyTrace("first post-formation discharge capacity is zero")
    threshold = EOL_THRESHOLD_FRACTION * first
    last_above = max(
        (k for k, (_, d) in enumerate(trace.aging, start=1) if d >= threshold),
    )
    if last_above == len(trace.aging):
        return CensoredAt(last_above)
    return last_above


def extract_formation_time(trace: CyclingTrace) -> float:
    """Total formation duration in hours."""
    if not trace.formation:
        raise EmptyTrace("trace has no formation segment")
    return float(sum(c[2] for c in trace.formation))


def mean_and_se(values: list[float]) -> tuple[float, float]:
    """Mean and standard error (sample SD over sqrt(n)); SE is 0 for n=1."""
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var) / math.sqrt(n)


def aggregate_batch(
    cells: list[tuple[float, object]],
    trial_ref: str = "",
    actual_config: ParameterConfiguration | None = None,
) -> BatchScore:
    """Aggregate per-cell (formation time, eol) pairs into a batch score.

    Censored cells are excluded from the EOL statistics with an anomaly note;
    if every cell is censored there is no EOL value to report at all.
    """
    if not cells:
        raise AnalysisError("cannot aggregate an empty batch")
    anomalies = []
    ft_values = [float(ft) for ft, _ in cells]
    eol_values = [float(e) for _, e in cells if not isinstance(e, CensoredAt)]
    n_censored = sum(1 for _, e in cells if isinstance(e, CensoredAt))
    if n_censored:
        anomalies.append(f"{n_censored} censored cell(s) excluded from EOL statistics")
    if not eol_values:
        raise AllCensored("all cells censored; EOL unavailable")
    if len(cells) == 1:
        anomalies.append("single-cell batch")
    ft_mean, ft_se = mean_and_se(ft_values)
    eol_mean, eol_se = mean_and_se(eol_values)
    return BatchScore(
        trial_ref=trial_ref,
        per_cell=list(cells),
        formation_time_mean=ft_mean,
        formation_time_se=ft_se,
        eol_mean=eol_mean,
        eol_se=eol_se,
        n_valid=len(eol_values),
        actual_config=actual_config,
        anomalies=anomalies,
    )


def score_from_results(
    trial_ref: str,
    cell_results: list[dict],
) -> BatchScore:
    """Score a batch straight from broker cycling results.

    Each result document must carry `data.trace` plus the actual parameters
    used; the actual (not requested) design point is what the models see.
    """
    cells = []
    configs = []
    for res in cell_results:
        trace = CyclingTrace.from_doc(res["data"]["trace"])
        cells.append((extract_formation_time(trace), extract_eol(trace)))
        actual = res["actual_parameters"]
        configs.append(
            ParameterConfiguration(
                c_rate_charge=float(actual["c_rate_charge"]),
                c_rate_discharge=float(actual["c_rate_discharge"]),
                repetitions=int(actual["repetitions"]),
            )
        )
    actual_config = None
    if configs:
        actual_config = ParameterConfiguration(
            c_rate_charge=float(np.mean([c.c_rate_charge for c in configs])),
            c_rate_discharge=float(np.mean([c.c_rate_discharge for c in configs])),
            repetitions=int(round(float(np.mean([c.repetitions for c in configs])))),
        )
    return aggregate_batch(cells, trial_ref=trial_ref, actual_config=actual_config)


# -- dashboard payload -------------------------------------------------------


def build_dashboard_payload(
    state: StudyState,
    fitted=None,
    contour_resolution: int = 50,
    histogram_bins: int = 10,
) -> dict:
    """Assemble the versioned plot document the UI consumes."""
    if not state.completed:
        raise EmptyStudy("no completed samples to visualize")
    usable = state.non_excluded()
    front_indices: set[int] = set()
    reference = None
    if usable:
        front = pareto_front(state.completed)
        front_indices = set(front.indices)
        ref_min = state.freeze_reference()
        signs = np.array([1.0 if d == "min" else -1.0 for d in state.directions()])
        reference = [float(v) for v in ref_min * signs]

    points = []
    for i, s in enumerate(state.completed):
        points.append(
            {
                "batch": s.batch_index,
                "config": s.config.as_dict(),
                "formation_time_h": s.formation_time_mean,
                "formation_time_se_h": s.formation_time_se,
                "eol_cycles": s.eol_mean,
                "eol_se_cycles": s.eol_se,
                "n_replicates": s.n_replicates,
                "excluded": s.excluded,
                "pareto": i in front_indices,
            }
        )

    payload = {
        "version": PAYLOAD_VERSION,
        "objectives": [
            {"name": name, "direction": direction}
            for name, direction in state.objectives
        ],
        "reference_point": reference,
        "points": points,
        "marginals": _marginals(state, front_indices, histogram_bins),
        "hypervolume_trace": _hypervolume_trace(state),
        "contours": [],
    }

    if len(usable) >= state.generation.min_model_points:
        models = fitted
        if models is None:
            models, _ = fit_objective_models(state)
        payload["contours"] = _contours(state, models, contour_resolution)
    return payload


def _marginals(state: StudyState, front_indices: set[int], bins: int) -> list[dict]:
    out = []
    Y = np.asarray([s.objective_values() for s in state.completed], dtype=float)
    for j, (name, _) in enumerate(state.objectives):
        values = Y[:, j]
        edges = np.histogram_bin_edges(values, bins=bins)
        pareto_vals = [
            float(values[i]) for i in range(len(values)) if i in front_indices
        ]
        dominated_vals = [
            float(values[i])
            for i in range(len(values))
            if i not in front_indices and not state.completed[i].excluded
        ]
        out.append(
            {
                "objective": name,
                "edges": [float(e) for e in edges],
                "pareto_counts": np.histogram(pareto_vals, bins=edges)[0].tolist(),
                "dominated_counts": np.histogram(dominated_vals, bins=edges)[0].tolist(),
            }
        )
    return out


def _hypervolume_trace(state: StudyState) -> list[dict]:
    usable = sorted(state.non_excluded(), key=lambda s: s.batch_index)
    if not usable:
        return []
    ref_min = state.freeze_reference()
    directions = state.directions()
    signs = np.array([1.0 if d == "min" else -1.0 for d in directions])
    ref_native = ref_min * signs
    Y = state.objective_matrix(usable)
    return [
        {
            "iteration": i,
            "batch": usable[i - 1].batch_index,
            "hypervolume": dominated_hypervolume(Y[:i], ref_native, directions),
        }
        for i in range(1, len(usable) + 1)
    ]


def _contours(state: StudyState, models, resolution: int) -> list[dict]:
    space = state.search_space
    names = space.names
    usable = state.non_excluded()
    grids = []
    axis = np.linspace(0.0, 1.0, resolution)
    for model in models:
        # incumbent: sample with the best mean value of this objective
        sign = model.sign()
        best = min(usable, key=lambda s: sign * dict(
            zip([n for n, _ in state.objectives], s.objective_values())
        )[model.name])
        u_best = space.unit_from_config(best.config)
        for a in range(len(names)):
            for b in range(a + 1, len(names)):
                UA, UB = np.meshgrid(axis, axis, indexing="ij")
                U = np.tile(u_best, (resolution * resolution, 1))
                U[:, a] = UA.ravel()
                U[:, b] = UB.ravel()
                mean_min, _ = model.predict_min(U)
                values = sign * mean_min  # back to native direction
                grids.append(
                    {
                        "objective": model.name,
                        "x": names[a],
                        "y": names[b],
                        "fixed": {
                            names[c]: float(space.denormalize(u_best)[c])
                            for c in range(len(names))
                            if c not in (a, b)
                        },
                        "x_values": [float(v) for v in space.lower[a] + axis * (space.upper[a] - space.lower[a])],
                        "y_values": [float(v) for v in space.lower[b] + axis * (space.upper[b] - space.lower[b])],
                        "mean": values.reshape(resolution, resolution).tolist(),
                    }
                )
    return grids
