"""Massive MIMO-OFDM uplink rates under channel aging and Doppler ICI."""

from .errors import (
    ConfigError,
    DomainError,
    GroupingError,
    PlanError,
    QuadratureError,
    RegimeError,
    SingularityError,
    UplinkError,
)
from .estimation import ls_estimate, nmse, pilot_book
from .ici import ici_power_closed_form, ici_power_exact, leakage, sigma_u_sq
from .mcsim import measure_sinr, run_campaign
from .rate import Combiner, mrc_sinr, per_symbol_rate, sum_rate, zf_sinr
from .system import (
    AllocationPlan,
    SystemConfig,
    build_allocation,
    load_config,
    pilot_plan,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationPlan",
    "Combiner",
    "ConfigError",
    "DomainError",
    "GroupingError",
    "PlanError",
    "QuadratureError",
    "RegimeError",
    "SingularityError",
    "SystemConfig",
    "UplinkError",
    "build_allocation",
    "ici_power_closed_form",
    "ici_power_exact",
    "leakage",
    "load_config",
    "ls_estimate",
    "measure_sinr",
    "mrc_sinr",
    "nmse",
    "per_symbol_rate",
    "pilot_book",
    "pilot_plan",
    "run_campaign",
    "sigma_u_sq",
    "sum_rate",
    "validate_config",
    "zf_sinr",
]
