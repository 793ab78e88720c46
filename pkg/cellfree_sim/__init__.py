"""Cellfree Sim - Monte Carlo simulator for user-centric cell-free MU-MIMO with UL/DL duality."""

__version__ = "0.1.0"

from .config import DlPowerMode, Estimator, Scheme, SimConfig, load_config  # noqa: E402
from .core import ExperimentPlan, figure_plan, run_experiment, simulate_layout, validate_plan  # noqa: E402

__all__ = [
    "DlPowerMode",
    "Estimator",
    "ExperimentPlan",
    "Scheme",
    "SimConfig",
    "figure_plan",
    "load_config",
    "run_experiment",
    "simulate_layout",
    "validate_plan",
]
