"""Mimetic dual-field solver for 3D incompressible Navier-Stokes on periodic boxes.

Two velocity copies live in H(curl) and H(div) conforming spectral-element
spaces and are marched on staggered time grids, which keeps mass, kinetic
energy and helicity exactly balanced at the discrete level.
"""
from .cases import CASES, get_case
from .config import ConfigError, RunConfig, parse_config
from .diagnostics import DiagnosticsRecord
from .mesh import SpaceKind, build_mesh
from .spaces import Discretization, Field
from .timestepping import DualFieldStepper, SimState, run

__version__ = "0.1.0"

__all__ = [
    "CASES",
    "ConfigError",
    "DiagnosticsRecord",
    "Discretization",
    "DualFieldStepper",
    "Field",
    "RunConfig",
    "SimState",
    "SpaceKind",
    "build_mesh",
    "get_case",
    "parse_config",
    "run",
]
