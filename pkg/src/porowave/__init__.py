"""Finite-volume wave propagation for coupled poroelastic/fluid media.

The package solves the first-order velocity-stress form of low-frequency
Biot poroelasticity, coupled to linear acoustics in fluid regions, on
logically rectangular mapped hexahedral grids.  High-resolution updates
use dimensional splitting with limited second-order corrections and an
energy-inner-product wave strength ratio that is robust to shear-family
relabeling on mapped grids.
"""

from porowave.limiter import LimiterChoice
from porowave.solver import (
    AnalyticFill,
    Boundaries,
    Extrapolate0,
    ReflectX,
    ReflectY,
    Solver,
    StateField,
    TimeControls,
    energy_density,
    state_from_solution,
    total_energy,
    uniform_state,
)
from porowave.state import NSTATE, COMPONENT_NAMES

__all__ = [
    "NSTATE",
    "COMPONENT_NAMES",
    "AnalyticFill",
    "Boundaries",
    "Extrapolate0",
    "LimiterChoice",
    "ReflectX",
    "ReflectY",
    "Solver",
    "StateField",
    "TimeControls",
    "energy_density",
    "state_from_solution",
    "total_energy",
    "uniform_state",
]

__version__ = "0.1.0"
