"""
Exact and independent ground-truth solvers

Brute-force Ising enumeration with the global flip folded out, the Ising
density of states, a multi-start gradient-descent estimate of the XY
ground state, and the constrained-intensity relaxation that shows how
unequal amplitudes produce energies no spin configuration can reach.
All solvers work on the original problem: extra sites are dropped first.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from joblib import Parallel, delayed
import numpy as np
from scipy.optimize import minimize

from cavity_spin.common.decorators import log_stage
from cavity_spin.common.json_output import write_json
from cavity_spin.common.logging_config import get_logger
from cavity_spin.errors import CapacityError, InvalidParameterError
from cavity_spin.graph import SpinConfig, SpinGraph

logger = get_logger(__name__)

ORACLE_MAX_SITES = 24
CHUNK_SIZE = 1 << 16

XY_STEP = 0.1
XY_GRADIENT_TOL = 1e-8
XY_DESCENT_TOL = 1e-6
XY_ARMIJO = 1e-4
XY_ENERGY_RESOLUTION = 4.0 * float(np.finfo(float).eps)
XY_MAX_ITERATIONS = 20_000
XY_MAX_HALVINGS = 40

POWER_TOL = 1e-14
POWER_MAX_ITERATIONS = 1_000_000
EIGEN_CHECK_TOL = 1e-6


@dataclass(frozen=True)
class IsingGround:
    """Exact ground energy and every optimal sign vector (site 0 fixed to +1)."""

    energy: int
    configs: Tuple[Tuple[int, ...], ...]

    def to_dict(self) -> Dict[str, Any]:
        return {"energy": self.energy, "configs": [list(c) for c in self.configs]}


@dataclass(frozen=True)
class DensityOfStates:
    energies: Tuple[int, ...]
    multiplicities: Tuple[int, ...]

    @property
    def n_states(self) -> int:
        return int(sum(self.multiplicities))

    @property
    def ground_energy(self) -> int:
        return self.energies[0]

    def multiplicity(self, energy: int) -> int:
        try:
            return self.multiplicities[self.energies.index(energy)]
        except ValueError:
            return 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "energies": list(self.energies),
            "multiplicities": list(self.multiplicities),
        }


@dataclass(frozen=True)
class XYGround:
    energy: float
    config: SpinConfig
    gradient_norm: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "energy": self.energy,
            "phases": [float(p) for p in self.config.phases],
            "gradient_norm": self.gradient_norm,
        }


@dataclass(frozen=True)
class HeterogeneityResult:
    """
    Minimum of the amplitude-weighted energy at fixed total intensity.

    ``is_counterexample`` is False when the graph is unfrustrated; the
    amplitudes are then the uniform Ising optimum.
    """

    energy: float
    amplitudes: np.ndarray
    ising_energy: int
    eigen_bound: float
    is_counterexample: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "energy": self.energy,
            "amplitudes": [float(a) for a in self.amplitudes],
            "ising_energy": self.ising_energy,
            "eigen_bound": self.eigen_bound,
            "is_counterexample": self.is_counterexample,
        }


def _problem(graph: SpinGraph) -> SpinGraph:
    return graph.original_subgraph() if graph.has_extra_sites else graph


def _check_capacity(graph: SpinGraph) -> None:
    if graph.n_sites > ORACLE_MAX_SITES:
        raise CapacityError(
            f"Enumeration is limited to {ORACLE_MAX_SITES} sites, graph has {graph.n_sites}"
        )


def _edge_arrays(graph: SpinGraph) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = np.array([e.site_a for e in graph.edges], dtype=np.int64)
    b = np.array([e.site_b for e in graph.edges], dtype=np.int64)
    w = np.array([e.coupling.sign for e in graph.edges], dtype=np.int64)
    return a, b, w


def _spins_for(indices: np.ndarray, n_sites: int) -> np.ndarray:
    """Rows of +-1 spins; bit k of the index is the spin of site k + 1."""
    bits = (indices[:, None] >> np.arange(n_sites - 1, dtype=np.int64)) & 1
    spins = np.ones((len(indices), n_sites), dtype=np.int64)
    spins[:, 1:] = 1 - 2 * bits
    return spins


def _chunk_energies(
    edges: Tuple[np.ndarray, np.ndarray, np.ndarray], n_sites: int, start: int, stop: int
) -> np.ndarray:
    a, b, w = edges
    spins = _spins_for(np.arange(start, stop, dtype=np.int64), n_sites)
    if len(w) == 0:
        return np.zeros(stop - start, dtype=np.int64)
    return -((spins[:, a] * spins[:, b]) @ w)


def _chunk_minima(
    edges: Tuple[np.ndarray, np.ndarray, np.ndarray], n_sites: int, start: int, stop: int
) -> Tuple[int, np.ndarray]:
    energies = _chunk_energies(edges, n_sites, start, stop)
    low = int(energies.min())
    return low, start + np.flatnonzero(energies == low)


def _chunk_histogram(
    edges: Tuple[np.ndarray, np.ndarray, np.ndarray], n_sites: int, start: int, stop: int
) -> Tuple[np.ndarray, np.ndarray]:
    return np.unique(_chunk_energies(edges, n_sites, start, stop), return_counts=True)


def _ranges(n_sites: int) -> List[Tuple[int, int]]:
    total = 1 << max(n_sites - 1, 0)
    return [(s, min(s + CHUNK_SIZE, total)) for s in range(0, total, CHUNK_SIZE)]


def _map_chunks(function: Any, graph: SpinGraph, n_jobs: int) -> List[Any]:
    edges = _edge_arrays(graph)
    tasks = (delayed(function)(edges, graph.n_sites, s, e) for s, e in _ranges(graph.n_sites))
    if n_jobs == 1:
        return [f(*args, **kwargs) for f, args, kwargs in tasks]
    return Parallel(n_jobs=n_jobs)(tasks)


@log_stage("ising_ground")
def ising_ground(graph: SpinGraph, n_jobs: int = 1) -> IsingGround:
    """Exhaustive scan of the 2^(n-1) sign assignments with site 0 fixed to +1."""
    problem = _problem(graph)
    _check_capacity(problem)

    best: Optional[int] = None
    minimizers: List[np.ndarray] = []
    for low, indices in _map_chunks(_chunk_minima, problem, n_jobs):
        if best is None or low < best:
            best, minimizers = low, [indices]
        elif low == best:
            minimizers.append(indices)

    assert best is not None
    spins = _spins_for(np.concatenate(minimizers), problem.n_sites)
    configs = sorted(tuple(int(s) for s in row) for row in spins)
    logger.debug(
        "Ising ground of %d sites: E=%d with %d optimal configs",
        problem.n_sites,
        best,
        len(configs),
    )
    return IsingGround(int(best), tuple(configs))


@log_stage("density_of_states")
def ising_density_of_states(graph: SpinGraph, n_jobs: int = 1) -> DensityOfStates:
    """Histogram of the exact energy over all configurations up to global flip."""
    problem = _problem(graph)
    _check_capacity(problem)

    counts: Dict[int, int] = {}
    for energies, multiplicities in _map_chunks(_chunk_histogram, problem, n_jobs):
        for energy, count in zip(energies, multiplicities):
            counts[int(energy)] = counts.get(int(energy), 0) + int(count)

    ordered = sorted(counts)
    return DensityOfStates(tuple(ordered), tuple(counts[e] for e in ordered))


def _xy_energy(coupling: np.ndarray, theta: np.ndarray) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return -0.5 * (np.einsum("ri,ri->r", c, c @ coupling) + np.einsum("ri,ri->r", s, s @ coupling))


def _xy_gradient(coupling: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """dH/dtheta_i = sum_j J_ij sin(theta_i - theta_j), row-wise."""
    c, s = np.cos(theta), np.sin(theta)
    return s * (c @ coupling) - c * (s @ coupling)


def _descend(coupling: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """
    Fixed-step descent with per-row Armijo backtracking.

    A row is done once its gradient norm drops below ``XY_DESCENT_TOL``, when
    no halving gives a sufficient decrease, or when an accepted step moves
    the energy by less than float64 can resolve. The BFGS polish in
    ``xy_ground_estimate`` takes the best row the rest of the way.
    """
    theta = theta.copy()
    energy = _xy_energy(coupling, theta)
    done = np.zeros(theta.shape[0], dtype=bool)
    for _ in range(XY_MAX_ITERATIONS):
        grad = _xy_gradient(coupling, theta)
        grad_sq = np.einsum("ri,ri->r", grad, grad)
        done |= grad_sq < XY_DESCENT_TOL**2
        if done.all():
            break
        step = np.full(theta.shape[0], XY_STEP)
        pending = ~done
        previous = energy.copy()
        for _ in range(XY_MAX_HALVINGS):
            trial = theta - step[:, None] * grad
            trial_energy = _xy_energy(coupling, trial)
            accept = pending & (trial_energy <= energy - XY_ARMIJO * step * grad_sq)
            theta[accept] = trial[accept]
            energy[accept] = trial_energy[accept]
            pending &= ~accept
            if not pending.any():
                break
            step[pending] *= 0.5
        resolution = XY_ENERGY_RESOLUTION * np.maximum(1.0, np.abs(previous))
        done |= pending | (previous - energy <= resolution)
    return theta


def xy_ground_estimate(
    graph: SpinGraph, restarts: Optional[int] = None, seed: int = 0
) -> XYGround:
    """
    Best local minimum of the XY energy over ``restarts`` random starts.

    The Ising optimum, a stationary point of the XY energy, is always one of
    the starts when the graph is small enough to enumerate, so the estimate
    never exceeds the Ising ground energy.
    """
    problem = _problem(graph)
    n = problem.n_sites
    restarts = 100 * n if restarts is None else restarts
    if restarts < 1:
        raise InvalidParameterError(f"restarts must be >= 1, got {restarts}")

    coupling = problem.coupling_matrix()
    rng = np.random.default_rng(seed)
    starts = rng.uniform(0.0, 2.0 * np.pi, size=(restarts, n))
    if n <= ORACLE_MAX_SITES:
        signs = ising_ground(problem).configs[0]
        starts = np.vstack([SpinConfig.from_signs(signs).phases[None, :], starts])

    theta = _descend(coupling, starts)
    energies = _xy_energy(coupling, theta)
    best = theta[int(np.argmin(energies))]

    polished = minimize(
        lambda t: float(_xy_energy(coupling, t[None, :])[0]),
        best,
        jac=lambda t: _xy_gradient(coupling, t[None, :])[0],
        method="BFGS",
        options={"gtol": 1e-12},
    )
    if polished.fun <= float(_xy_energy(coupling, best[None, :])[0]) + 1e-12:
        best = polished.x

    config = SpinConfig(best).rotated(-best[0])
    gradient_norm = float(np.linalg.norm(_xy_gradient(coupling, config.phases[None, :])[0]))
    if gradient_norm >= XY_GRADIENT_TOL:
        logger.warning("XY estimate stopped at gradient norm %.3g", gradient_norm)
    return XYGround(
        float(_xy_energy(coupling, config.phases[None, :])[0]), config, gradient_norm
    )


def _top_eigenvector(coupling: np.ndarray, seed: int) -> np.ndarray:
    """Projected gradient ascent of psi^T J psi on the sphere |psi|^2 = n."""
    n = coupling.shape[0]
    shift = float(np.abs(coupling).sum(axis=1).max()) + 1.0
    psi = np.random.default_rng(seed).standard_normal(n)
    psi *= np.sqrt(n) / np.linalg.norm(psi)
    for _ in range(POWER_MAX_ITERATIONS):
        nxt = coupling @ psi + shift * psi
        nxt *= np.sqrt(n) / np.linalg.norm(nxt)
        if np.max(np.abs(nxt - psi)) < POWER_TOL:
            return nxt
        psi = nxt
    logger.warning("Amplitude relaxation hit the iteration limit")
    return psi


def heterogeneity_counterexample(graph: SpinGraph, seed: int = 0) -> HeterogeneityResult:
    """
    Minimise -1/2 psi^T J psi over real amplitudes with sum psi^2 = n.

    Real amplitudes suffice for the minimum value; on a frustrated graph the
    minimiser is forced away from uniform modulus because no +-1 vector lies
    in the top eigenspace of the signed adjacency.
    """
    problem = _problem(graph)
    ground = ising_ground(problem)
    coupling = problem.coupling_matrix()
    n = problem.n_sites
    eigen_bound = -0.5 * n * float(np.linalg.eigvalsh(coupling)[-1])

    if ground.energy == -problem.n_edges:
        amplitudes = np.array(ground.configs[0], dtype=float)
        return HeterogeneityResult(
            float(ground.energy), amplitudes, ground.energy, eigen_bound, False
        )

    psi = _top_eigenvector(coupling, seed)
    if psi[0] < 0:
        psi = -psi
    energy = float(-0.5 * psi @ coupling @ psi)
    if abs(energy - eigen_bound) > EIGEN_CHECK_TOL:
        logger.warning(
            "Relaxed energy %.9g departs from eigenvalue bound %.9g", energy, eigen_bound
        )
    moduli = np.abs(psi)
    heterogeneous = float(moduli.max() - moduli.min()) > 1e-6
    return HeterogeneityResult(
        energy,
        psi,
        ground.energy,
        eigen_bound,
        heterogeneous and energy < ground.energy - 1e-9,
    )


def oracle_report(
    graph: SpinGraph, restarts: Optional[int] = None, seed: int = 0, n_jobs: int = 1
) -> Dict[str, Any]:
    """Every oracle result for one graph, ready for JSON export."""
    problem = _problem(graph)
    ground = ising_ground(problem, n_jobs)
    report: Dict[str, Any] = {
        "n_sites": problem.n_sites,
        "n_edges": problem.n_edges,
        "ising_ground": ground.to_dict(),
        "density_of_states": ising_density_of_states(problem, n_jobs).to_dict(),
        "xy_ground_estimate": xy_ground_estimate(problem, restarts, seed).to_dict(),
    }
    if ground.energy > -problem.n_edges:
        report["heterogeneity_counterexample"] = heterogeneity_counterexample(
            problem, seed
        ).to_dict()
    return report


def write_oracle_json(report: Dict[str, Any], path: Path) -> None:
    write_json(report, path)

