"""
Graph to cavity-network compiler

Each spin site becomes one spin mode; each edge becomes a symmetric (S) and
an antisymmetric (A) connecting mode. All couplings are +J except the one
between the A mode and the edge's second endpoint, which is -J; that single
sign makes the two transport paths interfere destructively.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, List, Literal, NamedTuple, Tuple

import numpy as np

from cavity_spin.analysis import solve_chi_cubic
from cavity_spin.common.logging_config import get_logger
from cavity_spin.config import STABILITY_LIMIT, SimParams, check_physical
from cavity_spin.errors import InvalidInstanceError
from cavity_spin.graph import (
    Coupling,
    SpinGraph,
    compensated_pump_ising,
    compensated_pump_xy,
)

logger = get_logger(__name__)

ENDPOINT_A, ENDPOINT_B = 0, 1
BRANCH_S, BRANCH_A = 0, 1

# [endpoint][branch]
EDGE_SIGN_PATTERN = np.array([[1, 1], [1, -1]], dtype=np.int8)


class Branch(str, Enum):
    S = "S"
    A = "A"


class EdgeRecord(NamedTuple):
    spin_a: int
    spin_b: int
    s_mode: int
    a_mode: int
    readout_selector: Branch
    is_extra: bool

    @property
    def readout_mode(self) -> int:
        return self.s_mode if self.readout_selector is Branch.S else self.a_mode


@dataclass(frozen=True)
class CavityNetwork:
    """Compiled physical layout: modes, sign table and per-site pump."""

    n_spin_modes: int
    edge_records: Tuple[EdgeRecord, ...]
    coupling_sign: np.ndarray
    pump: np.ndarray
    params: SimParams
    extra_flags: Tuple[bool, ...]
    degrees: np.ndarray

    def __post_init__(self) -> None:
        for name in ("coupling_sign", "pump", "degrees"):
            arr = np.array(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.coupling_sign.shape != (len(self.edge_records), 2, 2):
            raise InvalidInstanceError(
                f"coupling_sign shape {self.coupling_sign.shape} does not match "
                f"{len(self.edge_records)} edges"
            )
        if self.pump.shape != (self.n_spin_modes,):
            raise InvalidInstanceError("pump needs one entry per spin mode")

    @property
    def n_edges(self) -> int:
        return len(self.edge_records)

    @property
    def n_modes(self) -> int:
        return self.n_spin_modes + 2 * self.n_edges

    @property
    def original_spins(self) -> List[int]:
        return [i for i, extra in enumerate(self.extra_flags) if not extra]

    @property
    def original_edges(self) -> List[EdgeRecord]:
        return [rec for rec in self.edge_records if not rec.is_extra]

    def sign(self, spin: int, mode: int) -> int:
        """Coupling sign between a spin mode and a connecting mode (0 if uncoupled)."""
        for e, rec in enumerate(self.edge_records):
            if mode in (rec.s_mode, rec.a_mode):
                branch = BRANCH_S if mode == rec.s_mode else BRANCH_A
                if spin == rec.spin_a:
                    return int(self.coupling_sign[e, ENDPOINT_A, branch])
                if spin == rec.spin_b:
                    return int(self.coupling_sign[e, ENDPOINT_B, branch])
        return 0

    def pump_offsets(self) -> np.ndarray:
        """Per-site pump above the base pump the network was compiled with."""
        return self.pump - self.params.p

    def with_pump(self, pump: np.ndarray) -> CavityNetwork:
        return replace(self, pump=np.asarray(pump, dtype=float))

    def kernel_arrays(self) -> Dict[str, np.ndarray]:
        """Flat arrays consumed by the integration kernel."""
        recs = self.edge_records
        return {
            "edge_a": np.array([r.spin_a for r in recs], dtype=np.int64),
            "edge_b": np.array([r.spin_b for r in recs], dtype=np.int64),
            "mode_s": np.array([r.s_mode for r in recs], dtype=np.int64),
            "mode_a": np.array([r.a_mode for r in recs], dtype=np.int64),
            "signs": np.ascontiguousarray(self.coupling_sign, dtype=np.float64),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_spin_modes": self.n_spin_modes,
            "n_modes": self.n_modes,
            "edge_records": [
                {
                    "spin_a": r.spin_a,
                    "spin_b": r.spin_b,
                    "s_mode": r.s_mode,
                    "a_mode": r.a_mode,
                    "readout_selector": r.readout_selector.value,
                    "is_extra": r.is_extra,
                }
                for r in self.edge_records
            ],
            "coupling_sign": self.coupling_sign.tolist(),
            "pump": [float(p) for p in self.pump],
            "extra_flags": list(self.extra_flags),
            "params": self.params.model_dump(),
        }


def compile_network(
    graph: SpinGraph,
    params: SimParams,
    pump_strategy: Literal["uniform", "compensated"] = "compensated",
) -> CavityNetwork:
    """
    Compile a spin graph into its coupled-cavity network.

    Args:
        graph: Problem instance (possibly extended with extra sites)
        params: Physical parameters; ``params.p`` is the base pump
        pump_strategy: ``uniform`` pumps every site at ``params.p``;
            ``compensated`` adds the per-degree loss offset

    Returns:
        CavityNetwork satisfying the one-minus-per-edge sign pattern
    """
    check_physical(params)
    if pump_strategy not in ("uniform", "compensated"):
        raise InvalidInstanceError(f"Unknown pump strategy '{pump_strategy}'")

    n_spin = graph.n_sites
    degrees = graph.degrees()
    records = []
    for e, edge in enumerate(graph.edges):
        records.append(
            EdgeRecord(
                spin_a=edge.site_a,
                spin_b=edge.site_b,
                s_mode=n_spin + 2 * e,
                a_mode=n_spin + 2 * e + 1,
                readout_selector=Branch.S if edge.coupling is Coupling.FM else Branch.A,
                is_extra=graph.is_extra_edge(edge),
            )
        )
    signs = np.broadcast_to(EDGE_SIGN_PATTERN, (graph.n_edges, 2, 2)).copy()

    if pump_strategy == "uniform":
        pump = np.full(n_spin, params.p, dtype=float)
    elif params.is_ising:
        chi_abs = solve_chi_cubic(params)
        pump = np.array(
            [
                compensated_pump_ising(
                    params.p, int(d), params.j, params.gamma, chi_abs, params.gamma_nl_prime
                )
                for d in degrees
            ]
        )
    else:
        pump = np.array(
            [compensated_pump_xy(params.p, int(d), params.j, params.gamma) for d in degrees]
        )

    if n_spin and params.dt * float(np.max(np.abs(pump))) >= STABILITY_LIMIT:
        logger.warning(
            "Compensated pump %.4g pushes dt*P to %.3g; consider a smaller dt",
            float(np.max(pump)),
            params.dt * float(np.max(pump)),
        )

    network = CavityNetwork(
        n_spin_modes=n_spin,
        edge_records=tuple(records),
        coupling_sign=signs,
        pump=pump,
        params=params,
        extra_flags=graph.extra_flags,
        degrees=degrees,
    )
    logger.debug(
        "Compiled %d spins and %d edges into %d modes (%s pump)",
        n_spin,
        graph.n_edges,
        network.n_modes,
        pump_strategy,
    )
    return network


def edge_sign_audit(network: CavityNetwork) -> List[int]:
    """Indices of edges whose sign table departs from the one-minus pattern."""
    return [
        e
        for e in range(network.n_edges)
        if not np.array_equal(network.coupling_sign[e], EDGE_SIGN_PATTERN)
    ]
