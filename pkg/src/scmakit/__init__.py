"""SCMA constellation analysis and link-level simulation."""

from .constellation import MultiDimConstellation, builtin, resolve
from .detector import detect, joint_map
from .harness import SweepConfig, compare, fit_slope, run_sweep
from .kpi import report
from .scma import SystemConfig, canonical_indicator

__all__ = [
    "MultiDimConstellation",
    "SystemConfig",
    "SweepConfig",
    "builtin",
    "canonical_indicator",
    "compare",
    "detect",
    "fit_slope",
    "joint_map",
    "report",
    "resolve",
    "run_sweep",
]
