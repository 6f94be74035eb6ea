"""
Coupled-cavity analogue spin machine

Compiles Ising/XY spin-glass graphs into networks of spin and connecting
cavity modes, integrates their mean-field dynamics, runs the pulsed
feedback annealing protocol and checks results against exact oracles.
"""

from cavity_spin.analysis import (
    StationaryPrediction,
    extract_spins,
    homogeneity_deviation,
    ising_fixed_point_residual,
    predict_stationary,
    readout_energy,
    solve_chi_cubic,
)
from cavity_spin.compiler import CavityNetwork, compile_network
from cavity_spin.config import RunConfig, Schedule, SimParams
from cavity_spin.dynamics import CavityState, evolve, init_noise, step
from cavity_spin.graph import (
    Coupling,
    Edge,
    SpinConfig,
    SpinGraph,
    extend_with_dangling,
    generate_random_graph,
)
from cavity_spin.protocol import PulseRecord, batch_run, run_pulsed

__version__ = "1.0.0"

__all__ = [
    "CavityNetwork",
    "CavityState",
    "Coupling",
    "Edge",
    "PulseRecord",
    "RunConfig",
    "Schedule",
    "SimParams",
    "SpinConfig",
    "SpinGraph",
    "StationaryPrediction",
    "batch_run",
    "compile_network",
    "evolve",
    "extend_with_dangling",
    "extract_spins",
    "generate_random_graph",
    "homogeneity_deviation",
    "init_noise",
    "ising_fixed_point_residual",
    "predict_stationary",
    "readout_energy",
    "run_pulsed",
    "solve_chi_cubic",
    "step",
]
