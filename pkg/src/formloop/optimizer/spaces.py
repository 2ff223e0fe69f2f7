"""Design space: parameter configurations and unit-cube normalization.

The study's design space is three-dimensional: charge and discharge C-rates
for the formation protocol plus the number of formation-cycle repetitions.
Repetitions are integral in the lab but are treated as continuous while
modeling; rounding happens once, at suggestion time (.5 rounds up).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_BOUNDS = {
    "c_rate_charge": (0.025, 2.0),
    "c_rate_discharge": (0.025, 2.0),
    "repetitions": (1, 6),
}

INTEGER_DIMENSIONS = ("repetitions",)


class SpaceError(Exception):
    pass


@dataclass(frozen=True)
class ParameterConfiguration:
    """One point in the design space."""

    c_rate_charge: float
    c_rate_discharge: float
    repetitions: int

    def as_dict(self) -> dict:
        return {
            "c_rate_charge": self.c_rate_charge,
            "c_rate_discharge": self.c_rate_discharge,
            "repetitions": self.repetitions,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ParameterConfiguration":
        return cls(
            c_rate_charge=float(doc["c_rate_charge"]),
            c_rate_discharge=float(doc["c_rate_discharge"]),
            repetitions=int(doc["repetitions"]),
        )


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


class SearchSpace:
    """Axis-aligned box with an affine map to the unit cube."""

    def __init__(self, bounds: dict[str, tuple[float, float]] | None = None):
        self.bounds = dict(bounds or DEFAULT_BOUNDS)
        self.names = list(self.bounds)
        lo, hi = zip(*(self.bounds[n] for n in self.names))
        self.lower = np.asarray(lo, dtype=float)
        self.upper = np.asarray(hi, dtype=float)
        if np.any(self.upper <= self.lower):
            raise SpaceError("upper bounds must exceed lower bounds")

    @property
    def dim(self) -> int:
        return len(self.names)

    def contains(self, config: ParameterConfiguration) -> bool:
        x = self.vector(config)
        return bool(np.all(x >= self.lower - 1e-12) and np.all(x <= self.upper + 1e-12))

    def validate(self, config: ParameterConfiguration) -> None:
        if not self.contains(config):
            raise SpaceError(f"{config} outside search-space bounds {self.bounds}")

    def vector(self, config: ParameterConfiguration) -> np.ndarray:
        doc = config.as_dict()
        return np.asarray([float(doc[n]) for n in self.names], dtype=float)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower)

    def denormalize(self, u: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * (self.upper - self.lower)

    def config_from_unit(self, u: np.ndarray) -> ParameterConfiguration:
        """Map a unit-cube point to a feasible configuration (integer dims rounded)."""
        x = self.denormalize(np.clip(u, 0.0, 1.0))
        doc = {}
        for i, name in enumerate(self.names):
            if name in INTEGER_DIMENSIONS:
                v = round_half_up(x[i])
                v = int(min(max(v, self.bounds[name][0]), self.bounds[name][1]))
                doc[name] = v
            else:
                doc[name] = float(x[i])
        return ParameterConfiguration.from_dict(doc)

    def unit_from_config(self, config: ParameterConfiguration) -> np.ndarray:
        return self.normalize(self.vector(config))

    def sample_configs(self, n: int, rng: np.random.Generator) -> list[ParameterConfiguration]:
        draws = rng.uniform(size=(n, self.dim))
        return [self.config_from_unit(u) for u in draws]
