"""Finite-element traffic flow on an urban porous medium.

Streets are the fluid phase of a porous city: a nonconservative transport
equation moves car density while buildings inject demand and absorb parked
cars, and a Darcy-Brinkman-Forchheimer momentum equation relaxes the traffic
speed toward an Eikonal-derived routing velocity.
"""

from .dynamics import PhysicalParams
from .eikonal import EikonalConfig
from .mesh import Mesh, load_msh, mesh_from_arrays, validate_mesh
from .scenario import Scenario, ScenarioConfig, build_scenario
from .timeloop import SimulationState, TimeConfig, run_simulation

__version__ = "0.1.0"

__all__ = [
    "EikonalConfig",
    "Mesh",
    "PhysicalParams",
    "Scenario",
    "ScenarioConfig",
    "SimulationState",
    "TimeConfig",
    "build_scenario",
    "load_msh",
    "mesh_from_arrays",
    "run_simulation",
    "validate_mesh",
    "__version__",
]
