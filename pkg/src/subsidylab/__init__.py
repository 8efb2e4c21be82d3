"""Subsidy design for component maintenance and cost-sharing games."""
from .equilibrium import NashSet, enumerate_nash, is_nash, opt_cost
from .errors import (
    CapExceeded,
    GameError,
    InconsistentRevelation,
    SubsidyLabError,
    UndefinedMetric,
)
from .game import (
    CostSharingGame,
    CsgSubsidy,
    MaintenanceGame,
    MaintenanceSubsidy,
    SystemFunction,
)
from .kernels import BACKEND
from .metrics import (
    achieves_optimum,
    csg_voi_report,
    poa,
    poa_tilde,
    system_functions_in_all_ne,
    voi_report,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CapExceeded",
    "CostSharingGame",
    "CsgSubsidy",
    "GameError",
    "InconsistentRevelation",
    "MaintenanceGame",
    "MaintenanceSubsidy",
    "NashSet",
    "SubsidyLabError",
    "SystemFunction",
    "UndefinedMetric",
    "achieves_optimum",
    "csg_voi_report",
    "enumerate_nash",
    "is_nash",
    "opt_cost",
    "poa",
    "poa_tilde",
    "system_functions_in_all_ne",
    "voi_report",
]
