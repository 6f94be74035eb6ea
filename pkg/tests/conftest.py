# pylint: disable=redefined-outer-name
"""
Shared test configuration and fixtures for the cavity spin machine.

This module provides the reference parameter sets, canonical graphs and
state helpers used across test modules.
"""

import json
from pathlib import Path
from typing import List

import numpy as np
import pytest

from cavity_spin.compiler import CavityNetwork
from cavity_spin.config import SimParams
from cavity_spin.dynamics import CavityState
from cavity_spin.graph import (
    Coupling,
    Edge,
    SpinConfig,
    SpinGraph,
    frustrated_triangle,
    pair_graph,
)


@pytest.fixture
def base_params() -> SimParams:
    """XY reference parameters: P=14, gamma=4, J=0.5 in units of Gamma_NL."""
    return SimParams(p=14.0, gamma=4.0, gamma_nl=1.0, gamma_nl_prime=0.0, j=0.5)


@pytest.fixture
def ising_params() -> SimParams:
    """Reference parameters with connecting-site nonlinear loss switched on."""
    return SimParams(p=14.0, gamma=4.0, gamma_nl=1.0, gamma_nl_prime=1.0, j=0.5)


@pytest.fixture
def fm_pair() -> SpinGraph:
    return pair_graph(Coupling.FM)


@pytest.fixture
def afm_pair() -> SpinGraph:
    return pair_graph(Coupling.AFM)


@pytest.fixture
def triangle() -> SpinGraph:
    """Two FM bonds and one AFM bond: the smallest frustrated instance."""
    return frustrated_triangle()


@pytest.fixture
def fm_triangle() -> SpinGraph:
    return SpinGraph(
        3, (Edge(0, 1, Coupling.FM), Edge(0, 2, Coupling.FM), Edge(1, 2, Coupling.FM))
    )


@pytest.fixture
def afm_triangle() -> SpinGraph:
    return SpinGraph(
        3,
        (Edge(0, 1, Coupling.AFM), Edge(0, 2, Coupling.AFM), Edge(1, 2, Coupling.AFM)),
    )


@pytest.fixture
def path_graph() -> SpinGraph:
    """0 - 1 - 2, both bonds ferromagnetic."""
    return SpinGraph(3, (Edge(0, 1, Coupling.FM), Edge(1, 2, Coupling.FM)))


@pytest.fixture
def afm_square() -> SpinGraph:
    return SpinGraph(
        4,
        (
            Edge(0, 1, Coupling.AFM),
            Edge(1, 2, Coupling.AFM),
            Edge(2, 3, Coupling.AFM),
            Edge(3, 0, Coupling.AFM),
        ),
    )


@pytest.fixture
def seven_site_graph() -> SpinGraph:
    """Seven spin sites, maximum degree 4, needing eight extra sites."""
    return SpinGraph(
        7,
        (
            Edge(0, 1, Coupling.FM),
            Edge(0, 2, Coupling.AFM),
            Edge(0, 3, Coupling.FM),
            Edge(0, 4, Coupling.AFM),
            Edge(1, 2, Coupling.FM),
            Edge(1, 3, Coupling.AFM),
            Edge(1, 5, Coupling.FM),
            Edge(2, 6, Coupling.FM),
            Edge(3, 4, Coupling.FM),
            Edge(5, 6, Coupling.AFM),
        ),
    )


@pytest.fixture
def graph_file(tmp_path: Path, triangle: SpinGraph) -> Path:
    """The frustrated triangle written as a graph JSON file."""
    path = tmp_path / "triangle.json"
    triangle.save(path)
    return path


@pytest.fixture
def malformed_graph_file(tmp_path: Path) -> Path:
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({"n_sites": 2, "edges": [[0, 1, "XX"]]}), encoding="utf-8")
    return path


class StateTestHelper:
    """Helper class for building and inspecting cavity states."""

    @staticmethod
    def wrap(angle: float) -> float:
        """Map an angle onto (-pi, pi]."""
        return float(np.angle(np.exp(1j * angle)))

    @staticmethod
    def phase_differences(config: SpinConfig, graph: SpinGraph) -> List[float]:
        """Phase difference across every edge of ``graph``."""
        return [
            StateTestHelper.wrap(config.phases[e.site_a] - config.phases[e.site_b])
            for e in graph.edges
        ]

    @staticmethod
    def spin_state(network: CavityNetwork, psi: List[complex]) -> CavityState:
        """State with the given spin amplitudes and empty connecting modes."""
        z = np.zeros(network.n_modes, dtype=np.complex128)
        z[: len(psi)] = psi
        return CavityState(z, 0.0)

    @staticmethod
    def edge_intensities(network: CavityNetwork, state: CavityState) -> np.ndarray:
        """Rows of (|chi^S|^2, |chi^A|^2) for every edge."""
        z = np.asarray(state.amplitudes)
        return np.array(
            [[abs(z[r.s_mode]) ** 2, abs(z[r.a_mode]) ** 2] for r in network.edge_records]
        )


@pytest.fixture
def state_helper() -> StateTestHelper:
    """Provide StateTestHelper instance."""
    return StateTestHelper()
