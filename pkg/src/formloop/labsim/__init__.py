from .cells import (
    CellInstance,
    CyclingTrace,
    SimParams,
    batch_anomaly_factor,
    eol_mean,
    eol_noise_sd,
    formation_cycle_hours,
    formation_time_mean,
    rate_capability,
    simulate_cell,
)
from .tenants import (
    ASSEMBLY_CAP,
    CHANNEL_CAP,
    CYCLING_CAP,
    ELECTROLYTE_CAP,
    EXPORT_CAP,
    TRANSPORT_CAP,
    AssemblyTenant,
    CyclerTenant,
    ElectrolyteTenant,
    PollingTenant,
    TransportTenant,
    standard_lab_tenants,
)

__all__ = [
    "ASSEMBLY_CAP",
    "AssemblyTenant",
    "CHANNEL_CAP",
    "CYCLING_CAP",
    "CellInstance",
    "CyclerTenant",
    "CyclingTrace",
    "ELECTROLYTE_CAP",
    "EXPORT_CAP",
    "ElectrolyteTenant",
    "PollingTenant",
    "SimParams",
    "TRANSPORT_CAP",
    "TransportTenant",
    "batch_anomaly_factor",
    "eol_mean",
    "eol_noise_sd",
    "formation_cycle_hours",
    "formation_time_mean",
    "rate_capability",
    "simulate_cell",
    "standard_lab_tenants",
]
