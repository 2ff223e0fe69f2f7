"""Simulated laboratory tenants: poll the broker, do the work, post results.

Each tenant is an independent polling client against the broker interface;
in deterministic test mode they all run in one process and are ticked
round-robin. Electrolyte and assembly resolve after a configurable simulated
delay; transport waits for a human confirmation (or an auto-confirm flag);
the cycler owns channel reservation, cell cycling, and data export.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..broker import Capability, DuplicateResult, RequestEnvelope
from ..clock import RandomIds, component_seed
from ..optimizer.spaces import ParameterConfiguration
from .cells import CellInstance, SimParams, batch_anomaly_factor, simulate_cell

_RATE_SCHEMA = {"type": "number", "minimum": 0.0, "maximum": 10.0}

_BASE_REQUIRED = ["workflow_uuid", "step"]
_BASE_PROPS = {
    "workflow_uuid": {"type": "string"},
    "step": {"type": "string"},
}


def _obj(required, props, extra=True) -> dict:
    return {
        "type": "object",
        "required": required,
        "properties": props,
        "additionalProperties": extra,
    }


CHANNEL_CAP = Capability(
    "channel",
    "service",
    _obj(_BASE_REQUIRED + ["n_channels"], {**_BASE_PROPS, "n_channels": {"type": "integer", "minimum": 1}}),
    _obj(["channel_ids"], {"channel_ids": {"type": "array", "items": {"type": "string"}, "minItems": 1}}),
)

ELECTROLYTE_CAP = Capability(
    "electrolyte",
    "manual",
    _obj(_BASE_REQUIRED + ["volume_ml"], {**_BASE_PROPS, "volume_ml": {"type": "number", "minimum": 0.0}}),
    _obj(
        ["batch_id", "volume_ml"],
        {
            "batch_id": {"type": "string"},
            "volume_ml": {"type": "number", "minimum": 0.0},
            "composition": {"type": "string"},
        },
    ),
)

ASSEMBLY_CAP = Capability(
    "assembly",
    "autobass_sim",
    _obj(
        _BASE_REQUIRED + ["n_cells", "electrolyte_batch"],
        {**_BASE_PROPS, "n_cells": {"type": "integer", "minimum": 1}, "electrolyte_batch": {"type": "string"}},
    ),
    _obj(["cells"], {"cells": {"type": "array", "items": {"type": "string"}, "minItems": 1}}),
)

TRANSPORT_CAP = Capability(
    "transport",
    "manual",
    _obj(
        _BASE_REQUIRED + ["cell_ids", "channel_ids"],
        {
            **_BASE_PROPS,
            "cell_ids": {"type": "array", "items": {"type": "string"}},
            "channel_ids": {"type": "array", "items": {"type": "string"}},
        },
    ),
    _obj(["confirmed"], {"confirmed": {"type": "boolean"}, "note": {"type": "string"}}),
)

CYCLING_CAP = Capability(
    "cycling",
    "arbin_sim",
    _obj(
        _BASE_REQUIRED
        + ["cell_id", "c_rate_charge", "c_rate_discharge", "repetitions", "cell_seed", "batch_seed"],
        {
            **_BASE_PROPS,
            "cell_id": {"type": "string"},
            "channel_id": {"type": "string"},
            "c_rate_charge": _RATE_SCHEMA,
            "c_rate_discharge": _RATE_SCHEMA,
            "repetitions": {"type": "integer", "minimum": 1},
            "cell_seed": {"type": "integer"},
            "batch_seed": {"type": "integer"},
        },
    ),
    _obj(
        ["cell_id", "trace"],
        {
            "cell_id": {"type": "string"},
            "trace": {
                "type": "object",
                "required": ["formation", "aging"],
                "properties": {"formation": {"type": "array"}, "aging": {"type": "array"}},
            },
        },
    ),
)

EXPORT_CAP = Capability(
    "data_export",
    "arbin_sim",
    _obj(
        _BASE_REQUIRED + ["cycling_result_uuids"],
        {**_BASE_PROPS, "cycling_result_uuids": {"type": "array", "items": {"type": "string"}}},
    ),
    _obj(["dataset"], {"dataset": {"type": "object"}}),
)


class PollingTenant:
    """Base class: poll pending requests for my capabilities, serve them."""

    name = "tenant"
    capabilities: list[Capability] = []

    def __init__(self, client, ids=None):
        self.client = client
        self.ids = ids if ids is not None else RandomIds()
        self.tenant_uuid: str | None = None

    def register(self) -> str:
        self.tenant_uuid = self.client.register_tenant(self.name, self.capabilities)
        return self.tenant_uuid

    def tick(self) -> list[str]:
        """One polling pass; returns the request uuids acted upon."""
        acted = []
        for cap in self.capabilities:
            for request in self.client.get_pending_requests(cap.key):
                if self.handle_pending(cap, request):
                    acted.append(request.request_uuid)
        acted.extend(self.finish_held())
        return acted

    def handle_pending(self, cap: Capability, request: RequestEnvelope) -> bool:
        if not self.client.reserve_request(request.request_uuid, self.tenant_uuid):
            return False  # lost the race; re-poll next tick
        return self.serve(cap, request)

    def serve(self, cap: Capability, request: RequestEnvelope) -> bool:
        raise NotImplementedError

    def finish_held(self) -> list[str]:
        return []


@dataclass
class _Held:
    request: RequestEnvelope
    remaining: int


class DelayedTenant(PollingTenant):
    """Reserves immediately, posts the result after `delay_ticks` ticks."""

    def __init__(self, client, ids=None, delay_ticks: int = 1):
        super().__init__(client, ids)
        self.delay_ticks = delay_ticks
        self._held: list[_Held] = []

    def serve(self, cap, request) -> bool:
        self._held.append(_Held(request, self.delay_ticks))
        return True

    def finish_held(self) -> list[str]:
        done = []
        still = []
        for held in self._held:
            held.remaining -= 1
            if held.remaining <= 0:
                self.client.post_result(
                    held.request.request_uuid,
                    self.build_result(held.request),
                    held.request.parameters,
                    self.tenant_uuid,
                )
                done.append(held.request.request_uuid)
            else:
                still.append(held)
        self._held = still
        return done

    def build_result(self, request: RequestEnvelope) -> dict:
        raise NotImplementedError


class ElectrolyteTenant(DelayedTenant):
    """Human researcher formulating electrolyte; entry simulated after a delay."""

    name = "electrolyte-lab"
    capabilities = [ELECTROLYTE_CAP]

    def build_result(self, request) -> dict:
        return {
            "batch_id": self.ids.new(),
            "volume_ml": float(request.parameters.get("volume_ml", 2.7)),
            "composition": "1M NaPF6 in EC:PC (1:1 by weight)",
        }


class AssemblyTenant(DelayedTenant):
    """Robotic cell assembly; result enumerates the assembled cell UUIDs."""

    name = "autobass-sim"
    capabilities = [ASSEMBLY_CAP]

    def build_result(self, request) -> dict:
        n = int(request.parameters["n_cells"])
        return {"cells": [self.ids.new() for _ in range(n)]}


class TransportTenant(PollingTenant):
    """Posts a result only once a confirmation token arrives.

    Confirmation comes either from the task inbox (a human clicking confirm,
    which posts the result through the broker directly) or from the
    auto-confirm flag used in headless runs. Without either, requests simply
    stay pending.
    """

    name = "transport-lab"
    capabilities = [TRANSPORT_CAP]

    def __init__(self, client, ids=None, auto_confirm: bool = False):
        super().__init__(client, ids)
        self.auto_confirm = auto_confirm
        self.confirmations: set[str] = set()

    def confirm(self, request_uuid: str) -> None:
        self.confirmations.add(request_uuid)

    def handle_pending(self, cap, request) -> bool:
        if not (self.auto_confirm or request.request_uuid in self.confirmations):
            return False
        try:
            self.client.post_result(
                request.request_uuid,
                {"confirmed": True},
                request.parameters,
                self.tenant_uuid,
            )
        except DuplicateResult:
            return False  # a human beat us to it
        self.confirmations.discard(request.request_uuid)
        return True


class CyclerTenant(PollingTenant):
    """Battery cycler: channel reservation, per-cell cycling, data export.

    Achieved C-rates are quantized to the device's current resolution, so
    actual parameters deviate slightly from the requested ones.
    """

    name = "cycler-sim"
    capabilities = [CHANNEL_CAP, CYCLING_CAP, EXPORT_CAP]

    def __init__(self, client, ids=None, params: SimParams | None = None, rate_resolution: float = 0.005):
        super().__init__(client, ids)
        self.params = params or SimParams()
        self.rate_resolution = rate_resolution

    def serve(self, cap, request) -> bool:
        if cap.quantity == "channel":
            data = {
                "channel_ids": [self.ids.new() for _ in range(int(request.parameters["n_channels"]))]
            }
            actual = request.parameters
        elif cap.quantity == "cycling":
            data, actual = self._cycle(request)
        else:
            data = {"dataset": {"cycling_results": list(request.parameters["cycling_result_uuids"])}}
            actual = request.parameters
        self.client.post_result(request.request_uuid, data, actual, self.tenant_uuid)
        return True

    def _quantize(self, rate: float) -> float:
        steps = max(1, round(rate / self.rate_resolution))
        return round(steps * self.rate_resolution, 6)

    def _cycle(self, request) -> tuple[dict, dict]:
        p = request.parameters
        actual = dict(p)
        actual["c_rate_charge"] = self._quantize(float(p["c_rate_charge"]))
        actual["c_rate_discharge"] = self._quantize(float(p["c_rate_discharge"]))
        config = ParameterConfiguration(
            c_rate_charge=actual["c_rate_charge"],
            c_rate_discharge=actual["c_rate_discharge"],
            repetitions=int(p["repetitions"]),
        )
        cell = CellInstance(
            cell_id=p["cell_id"],
            config=config,
            seed=int(p["cell_seed"]),
            nominal_capacity=self.params.nominal_capacity_mah,
            rate_reference_capacity=self.params.rate_reference_capacity_mah,
        )
        factor = batch_anomaly_factor(int(p["batch_seed"]), self.params)
        trace = simulate_cell(cell, self.params, eol_factor=factor)
        return {"cell_id": p["cell_id"], "trace": trace.to_doc()}, actual


def standard_lab_tenants(
    client_factory,
    ids_factory,
    params: SimParams | None = None,
    auto_confirm_transport: bool = False,
    electrolyte_delay: int = 1,
    assembly_delay: int = 1,
) -> dict:
    """Instantiate and register the standard tenant population."""
    tenants = {
        "electrolyte": ElectrolyteTenant(
            client_factory(), ids=ids_factory("electrolyte"), delay_ticks=electrolyte_delay
        ),
        "assembly": AssemblyTenant(
            client_factory(), ids=ids_factory("assembly"), delay_ticks=assembly_delay
        ),
        "transport": TransportTenant(
            client_factory(), ids=ids_factory("transport"), auto_confirm=auto_confirm_transport
        ),
        "cycler": CyclerTenant(client_factory(), ids=ids_factory("cycler"), params=params),
    }
    for tenant in tenants.values():
        tenant.register()
    return tenants
