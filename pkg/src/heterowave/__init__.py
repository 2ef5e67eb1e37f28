"""Quantum correlations of counter-propagating side modes in superradiant Rayleigh scattering."""
from . import condensate, correlations, kernels, specfun
from .condensate import PhysicalParams, Profile, Regime, SimConfig, from_physical, preset
from .correlations import Correlator, SideMode
from .kernels import KernelId, eval_kernel, kernel_values

__version__ = "0.1.0"

__all__ = [
    "condensate",
    "correlations",
    "kernels",
    "specfun",
    "PhysicalParams",
    "Profile",
    "Regime",
    "SimConfig",
    "from_physical",
    "preset",
    "Correlator",
    "SideMode",
    "KernelId",
    "eval_kernel",
    "kernel_values",
]
