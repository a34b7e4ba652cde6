"""Aggregate flexibility of thermostatically controlled loads.

Submodules: ``tcl_model`` (single unit), ``fleet_sim`` (fleet simulation),
``battery_model`` (generalized battery bounds), ``dissipation_opt``,
``clustering``, ``dispatch_control`` and ``cli``.
"""
from .battery_model import BatteryParams, is_member, necessary_params, sufficient_params
from .dispatch_control import feasibility_screen, run_dispatch
from .dissipation_opt import optimal_alpha
from .clustering import optimal_clusters
from .fleet_sim import Fleet, HeterogeneitySpec, build_fleet, simulate
from .signals import RegulationTrace
from .tcl_model import REFERENCE_AC, TclParameters, TclState

__version__ = "0.1.0"

__all__ = [
    "BatteryParams",
    "Fleet",
    "HeterogeneitySpec",
    "REFERENCE_AC",
    "RegulationTrace",
    "TclParameters",
    "TclState",
    "build_fleet",
    "feasibility_screen",
    "is_member",
    "necessary_params",
    "optimal_alpha",
    "optimal_clusters",
    "run_dispatch",
    "simulate",
    "sufficient_params",
]
