"""Study configuration: one structured-text file drives everything.

The file holds the search space, objectives, generation phases, simulator
constants, capacity caps, seeds, broker settings, and export options. CLI
flags override individual fields.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .labsim.cells import SimParams


class ConfigError(Exception):
    pass


@dataclass
class GenerationConfig:
    n_initial: int = 3
    min_model_points: int = 2


@dataclass
class StoppingConfig:
    hv_patience: int | None = None      # stop after this many stagnant batches
    hv_rel_tolerance: float = 1e-3
    max_wall_clock_s: float | None = None


@dataclass
class BrokerConfig:
    bind: str = "127.0.0.1:8420"
    storage: str = ":memory:"           # ':memory:', 'memory', or a sqlite path
    poll_limit: int = 50
    token: str | None = None


@dataclass
class TenantDelays:
    electrolyte: int = 1
    assembly: int = 1


@dataclass
class StudyConfig:
    name: str = "demo-study"
    seed: int = 7
    search_space: dict = field(
        default_factory=lambda: {
            "c_rate_charge": [0.025, 2.0],
            "c_rate_discharge": [0.025, 2.0],
            "repetitions": [1, 6],
        }
    )
    objectives: list = field(
        default_factory=lambda: [
            {"name": "formation_time_h", "direction": "min"},
            {"name": "eol_cycles", "direction": "max"},
        ]
    )
    batch_size: int = 3
    n_cells: int = 4
    max_batches: int = 6
    max_parallel_workflows: int = 3
    mc_samples: int = 128
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    stopping: StoppingConfig = field(default_factory=StoppingConfig)
    warm_start: str | None = None
    auto_confirm_transport: bool = True
    soft_timeout_ticks: int | None = 50
    max_ticks: int = 5000
    failed_workflow_tolerance: int = 0
    broker: BrokerConfig = field(default_factory=BrokerConfig)
    delays: TenantDelays = field(default_factory=TenantDelays)
    simulator: SimParams = field(default_factory=SimParams)
    export_dir: str = "out"

    def validate(self) -> "StudyConfig":
        if self.batch_size > self.max_parallel_workflows:
            raise ConfigError(
                f"batch_size {self.batch_size} exceeds the parallel-batch cap "
                f"{self.max_parallel_workflows}; raise max_parallel_workflows to allow it"
            )
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.n_cells < 1:
            raise ConfigError("n_cells must be at least 1")
        if self.mc_samples < 64:
            raise ConfigError("mc_samples must be at least 64")
        for name, bounds in self.search_space.items():
            if len(bounds) != 2 or not bounds[0] < bounds[1]:
                raise ConfigError(f"bad bounds for '{name}': {bounds}")
        return self


_NESTED = {
    "generation": GenerationConfig,
    "stopping": StoppingConfig,
    "broker": BrokerConfig,
    "delays": TenantDelays,
    "simulator": SimParams,
}


def load_config(path: str | Path) -> StudyConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(data)


def config_from_dict(data: dict) -> StudyConfig:
    data = dict(data)
    kwargs = {}
    for key, cls in _NESTED.items():
        if key in data:
            section = data.pop(key) or {}
            if not isinstance(section, dict):
                raise ConfigError(f"section '{key}' must be a mapping")
            try:
                kwargs[key] = cls(**section)
            except TypeError as exc:
                raise ConfigError(f"bad '{key}' section: {exc}") from exc
    known = {f.name for f in dataclasses.fields(StudyConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        config = StudyConfig(**data, **kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return config.validate()
