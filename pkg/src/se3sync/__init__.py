"""Distributed hybrid pose synchronization of rigid bodies on SE(3).

Modules
-------
liegroup    SO(3)/SE(3) primitives and the closed-form screw exponential
potential   weighting matrix, synergy parameters, U and its gradients
network     tree topologies and incidence matrices
controller  rigid-body dynamics and the distributed feedback
hybridsim   RK4 flows, jumps and Lyapunov certificates
config      TOML configs, the fig2 preset and random initial conditions
oracles     independent numerical checks
montecarlo  seeded batches of random initializations
"""

from .config import SimConfig, fig2_config, load_config
from .controller import ClosedLoop, Gains, Inertia
from .errors import (
    CertificateViolation,
    ConfigError,
    NumericalDivergence,
    OracleFailure,
    Se3SyncError,
    SynergyWarning,
)
from .hybridsim import Trace, do_jumps, run, simulate, step_flow
from .network import Topology, build_topology
from .potential import SynergyParams, WeightMatrix, synth_params, validate_weight
from .state import SwarmState

__version__ = "0.1.0"

__all__ = [
    "CertificateViolation",
    "ClosedLoop",
    "ConfigError",
    "Gains",
    "Inertia",
    "NumericalDivergence",
    "OracleFailure",
    "Se3SyncError",
    "SimConfig",
    "SwarmState",
    "SynergyParams",
    "SynergyWarning",
    "Topology",
    "Trace",
    "WeightMatrix",
    "build_topology",
    "do_jumps",
    "fig2_config",
    "load_config",
    "run",
    "simulate",
    "step_flow",
    "synth_params",
    "validate_weight",
]
