"""Work statistics, reliability and uncertainty bounds of collective many-spin Otto engines."""

from .metrics import EngineMetrics, engine_metrics, near_carnot_predictions, reliability_ratio, tur_bound_f
from .spectra import ModelSpec, SpinEnsemble, subspace_spectrum
from .steady_state import collective_steady_state
from .sweep import SweepPlan, carnot_closure, fit_scaling, run_sweep
from .thermo import thermo_point
from .work_stats import CycleParams, cycle_moments, joint_distribution

__version__ = "0.1.0"

__all__ = [
    "CycleParams", "EngineMetrics", "ModelSpec", "SpinEnsemble", "SweepPlan", "carnot_closure",
    "collective_steady_state", "cycle_moments", "engine_metrics", "fit_scaling", "joint_distribution",
    "near_carnot_predictions", "reliability_ratio", "run_sweep", "subspace_spectrum", "thermo_point",
    "tur_bound_f",
]
