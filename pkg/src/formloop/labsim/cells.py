"""Parametric coin-cell simulator: synthetic but physically plausible.

The simulator is the ground truth the closed loop optimizes against. Cycle
life peaks in a smooth log-rate bump around 1.6 C (charge and discharge)
with a mild repetition interaction peaking near 5 cycles; per-cell noise is
heteroskedastic, growing with log-distance from the rate optimum. Formation
time per cycle follows kappa * (1/c_charge + 1/c_discharge) with kappa the
attained capacity fraction relative to the rate-reference capacity, so
measured times undercut the naive 1/C estimate at high rates.

Fidelity is deliberately loose: the surface echoes the measured trends, it
does not reproduce the measured values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..clock import component_seed
from ..optimizer.spaces import ParameterConfiguration


@dataclass
class SimParams:
    """Simulator constants; all exposed through the study config file."""

    nominal_capacity_mah: float = 1.49
    # C-rates are referenced to this capacity when converting to currents,
    # not to the nominal capacity; the two differ on purpose.
    rate_reference_capacity_mah: float = 1.0
    rate_half_c: float = 2.2          # rate-capability knee
    rate_exponent: float = 1.6
    formation_time_noise: float = 0.03
    formation_efficiency: float = 0.97
    eol_base: float = 55.0
    eol_amplitude: float = 62.0
    eol_rate_center_c: float = 1.6
    eol_rate_width: float = 0.55      # in log-rate units
    eol_reps_center: float = 5.0
    eol_reps_width: float = 2.0
    eol_reps_gain: float = 0.15
    eol_noise_base: float = 2.0
    eol_noise_rate_gain: float = 5.0  # per unit log-distance from the optimum
    aging_capacity_jitter: float = 0.002
    aging_rate_c: float = 0.2
    max_cycles: int = 1500
    anomaly_rate: float = 0.0         # probability of a freak high-EOL batch
    anomaly_gain: tuple[float, float] = (6.0, 9.0)


@dataclass
class CellInstance:
    cell_id: str
    config: ParameterConfiguration
    seed: int
    nominal_capacity: float = 1.49
    rate_reference_capacity: float = 1.0


@dataclass
class CyclingTrace:
    """Per-cycle capacities; formation cycles also carry durations."""

    formation: list[tuple[float, float, float]]  # (charge mAh, discharge mAh, hours)
    aging: list[tuple[float, float]]             # (charge mAh, discharge mAh)
    protocol: dict = field(default_factory=dict)
    # simulator-side bookkeeping, used for self-consistency checks only
    internal_eol: int | None = None
    censored_at: int | None = None

    def to_doc(self) -> dict:
        return {
            "formation": [list(c) for c in self.formation],
            "aging": [list(c) for c in self.aging],
            "protocol": dict(self.protocol),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "CyclingTrace":
        return cls(
            formation=[tuple(c) for c in doc["formation"]],
            aging=[tuple(c) for c in doc["aging"]],
            protocol=dict(doc.get("protocol", {})),
        )


def rate_capability(c_rate: float, params: SimParams) -> float:
    """Fraction of nominal capacity attained at a given C-rate."""
    return 1.0 / (1.0 + (c_rate / params.rate_half_c) ** params.rate_exponent)


def formation_cycle_hours(config: ParameterConfiguration, params: SimParams) -> float:
    """Noise-free duration of one formation cycle."""
    kappa = (
        params.nominal_capacity_mah
        * rate_capability(max(config.c_rate_charge, config.c_rate_discharge), params)
        / params.rate_reference_capacity_mah
    )
    return kappa * (1.0 / config.c_rate_charge + 1.0 / config.c_rate_discharge)


def formation_time_mean(config: ParameterConfiguration, params: SimParams) -> float:
    return config.repetitions * formation_cycle_hours(config, params)


def eol_mean(config: ParameterConfiguration, params: SimParams) -> float:
    """Noise-free cycle life of the ground-truth surface."""
    lc = math.log(config.c_rate_charge / params.eol_rate_center_c)
    ld = math.log(config.c_rate_discharge / params.eol_rate_center_c)
    rate_bump = math.exp(-(lc**2 + ld**2) / (2.0 * params.eol_rate_width**2))
    reps_bump = (1.0 - params.eol_reps_gain) + params.eol_reps_gain * math.exp(
        -((config.repetitions - params.eol_reps_center) ** 2)
        / (2.0 * params.eol_reps_width**2)
    )
    return params.eol_base + params.eol_amplitude * rate_bump * reps_bump


def eol_noise_sd(config: ParameterConfiguration, params: SimParams) -> float:
    lc = math.log(config.c_rate_charge / params.eol_rate_center_c)
    ld = math.log(config.c_rate_discharge / params.eol_rate_center_c)
    return params.eol_noise_base + params.eol_noise_rate_gain * math.sqrt(lc**2 + ld**2)


def batch_anomaly_factor(batch_seed: int, params: SimParams) -> float:
    """Shared per-batch multiplier implementing the freak high-EOL mode."""
    if params.anomaly_rate <= 0:
        return 1.0
    rng = np.random.default_rng(component_seed(batch_seed, "anomaly"))
    if rng.uniform() < params.anomaly_rate:
        return float(rng.uniform(*params.anomaly_gain))
    return 1.0


def simulate_cell(
    cell: CellInstance, params: SimParams | None = None, eol_factor: float = 1.0
) -> CyclingTrace:
    """Generate the full cycling trace of one cell (deterministic per seed)."""
    params = params or SimParams()
    config = cell.config
    rng = np.random.default_rng(component_seed(cell.seed, f"cell-{cell.cell_id}"))

    q_att = cell.nominal_capacity * rate_capability(
        max(config.c_rate_charge, config.c_rate_discharge), params
    )
    base_hours = formation_cycle_hours(config, params)
    formation = []
    for _ in range(config.repetitions):
        hours = base_hours * math.exp(rng.normal(0.0, params.formation_time_noise))
        charge = q_att * math.exp(rng.normal(0.0, 0.01))
        discharge = charge * params.formation_efficiency
        formation.append((charge, discharge, hours))

    target = rng.normal(eol_mean(config, params), eol_noise_sd(config, params))
    target = max(5.0, target * eol_factor)

    q1 = cell.nominal_capacity * rate_capability(params.aging_rate_c, params)
    q1 *= math.exp(rng.normal(0.0, 0.01))
    fade_per_cycle = 0.2 * q1 / target
    aging = []
    capacity = q1
    internal_eol = None
    censored_at = None
    for k in range(1, params.max_cycles + 1):
        jitter = rng.normal(0.0, params.aging_capacity_jitter * q1)
        discharge = max(capacity + jitter, 0.0)
        aging.append((discharge / params.formation_efficiency, discharge))
        capacity -= fade_per_cycle
        if k >= 2 and discharge < 0.8 * aging[0][1]:
            break
    # bookkeeping: same 80%-of-first-cycle rule the analysis module applies
    threshold = 0.8 * aging[0][1]
    below = [k for k, (_, d) in enumerate(aging, start=1) if d < threshold]
    if below:
        internal_eol = below[0] - 1
    else:
        censored_at = len(aging)

    return CyclingTrace(
        formation=formation,
        aging=aging,
        protocol={
            "c_rate_charge": config.c_rate_charge,
            "c_rate_discharge": config.c_rate_discharge,
            "repetitions": config.repetitions,
            "aging_rate_c": params.aging_rate_c,
        },
        internal_eol=internal_eol,
        censored_at=censored_at,
    )
