"""
Mean-field dynamics of the coupled-cavity network

Spin modes obey
    dpsi/dt = (P_m - gamma)/2 psi - Gamma_NL |psi|^2 psi + iJ sum_edges (+-chi)
and connecting modes obey
    dchi/dt = -gamma/2 chi - Gamma'_NL |chi|^2 chi + iJ (+-psi_a +- psi_b)
with signs taken from the compiled sign table. Integration uses fixed-step
classical RK4 so that a run is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional, Tuple

from numba import njit
import numpy as np
import pandas as pd

from cavity_spin.common.decorators import log_stage
from cavity_spin.common.logging_config import get_logger
from cavity_spin.config import SimParams
from cavity_spin.errors import DivergenceError, InvalidInstanceError, InvalidParameterError

if TYPE_CHECKING:
    from cavity_spin.compiler import CavityNetwork

logger = get_logger(__name__)

STATIONARY_FLOOR = 1e-12


@dataclass(frozen=True)
class CavityState:
    """Complex amplitude of every mode (spin modes first) at one instant."""

    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        amplitudes = np.array(self.amplitudes, dtype=np.complex128)
        if amplitudes.ndim != 1:
            raise InvalidInstanceError("amplitudes must be one-dimensional")
        amplitudes.flags.writeable = False
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "time", float(self.time))

    def __len__(self) -> int:
        return len(self.amplitudes)

    def intensities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def rotated(self, angle: float) -> CavityState:
        return CavityState(self.amplitudes * np.exp(1j * angle), self.time)


@dataclass(frozen=True)
class Trajectory:
    """Sampled amplitudes; row k was taken at ``times[k]``."""

    times: np.ndarray
    samples: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        n_samples, n_modes = self.samples.shape
        return pd.DataFrame(
            {
                "time": np.repeat(self.times, n_modes),
                "mode_index": np.tile(np.arange(n_modes), n_samples),
                "re": self.samples.real.ravel(),
                "im": self.samples.imag.ravel(),
            }
        )

    def write_csv(self, path: Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.16e")


@njit(cache=True)
def _rhs(
    z: np.ndarray,
    out: np.ndarray,
    n_spin: int,
    half_gain: np.ndarray,
    gamma_nl: float,
    half_gamma: float,
    gamma_nl_prime: float,
    j: float,
    edge_a: np.ndarray,
    edge_b: np.ndarray,
    mode_s: np.ndarray,
    mode_a: np.ndarray,
    signs: np.ndarray,
) -> None:
    for m in range(n_spin):
        intensity = z[m].real * z[m].real + z[m].imag * z[m].imag
        out[m] = (half_gain[m] - gamma_nl * intensity) * z[m]
    for m in range(n_spin, z.shape[0]):
        intensity = z[m].real * z[m].real + z[m].imag * z[m].imag
        out[m] = (-half_gamma - gamma_nl_prime * intensity) * z[m]

    ij = 1j * j
    for e in range(edge_a.shape[0]):
        a = edge_a[e]
        b = edge_b[e]
        s = mode_s[e]
        x = mode_a[e]
        out[a] += ij * (signs[e, 0, 0] * z[s] + signs[e, 0, 1] * z[x])
        out[b] += ij * (signs[e, 1, 0] * z[s] + signs[e, 1, 1] * z[x])
        out[s] += ij * (signs[e, 0, 0] * z[a] + signs[e, 1, 0] * z[b])
        out[x] += ij * (signs[e, 0, 1] * z[a] + signs[e, 1, 1] * z[b])


@njit(cache=True)
def _integrate(
    z0: np.ndarray,
    n_steps: int,
    dt: float,
    stride: int,
    n_spin: int,
    half_gain: np.ndarray,
    gamma_nl: float,
    half_gamma: float,
    gamma_nl_prime: float,
    j: float,
    edge_a: np.ndarray,
    edge_b: np.ndarray,
    mode_s: np.ndarray,
    mode_a: np.ndarray,
    signs: np.ndarray,
) -> Tuple[np.ndarray, int, int, np.ndarray]:
    n = z0.shape[0]
    z = z0.copy()
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty(n, dtype=np.complex128)
    k3 = np.empty(n, dtype=np.complex128)
    k4 = np.empty(n, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)

    n_samples = n_steps // stride + 1 if stride > 0 else 0
    samples = np.empty((n_samples, n), dtype=np.complex128)
    if stride > 0:
        samples[0, :] = z

    bad_mode = -1
    done = 0
    for step in range(n_steps):
        _rhs(z, k1, n_spin, half_gain, gamma_nl, half_gamma, gamma_nl_prime, j,
             edge_a, edge_b, mode_s, mode_a, signs)
        for m in range(n):
            tmp[m] = z[m] + 0.5 * dt * k1[m]
        _rhs(tmp, k2, n_spin, half_gain, gamma_nl, half_gamma, gamma_nl_prime, j,
             edge_a, edge_b, mode_s, mode_a, signs)
        for m in range(n):
            tmp[m] = z[m] + 0.5 * dt * k2[m]
        _rhs(tmp, k3, n_spin, half_gain, gamma_nl, half_gamma, gamma_nl_prime, j,
             edge_a, edge_b, mode_s, mode_a, signs)
        for m in range(n):
            tmp[m] = z[m] + dt * k3[m]
        _rhs(tmp, k4, n_spin, half_gain, gamma_nl, half_gamma, gamma_nl_prime, j,
             edge_a, edge_b, mode_s, mode_a, signs)
        for m in range(n):
            z[m] = z[m] + (dt / 6.0) * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m])

        done = step + 1
        for m in range(n):
            if not (np.isfinite(z[m].real) and np.isfinite(z[m].imag)):
                bad_mode = m
                break
        if bad_mode >= 0:
            break
        if stride > 0 and done % stride == 0:
            samples[done // stride, :] = z

    return z, bad_mode, done, samples


def _kernel_args(network: CavityNetwork, params: SimParams) -> Tuple[Any, ...]:
    arrays = network.kernel_arrays()
    half_gain = 0.5 * (np.asarray(network.pump, dtype=np.float64) - params.gamma)
    return (
        network.n_spin_modes,
        half_gain,
        float(params.gamma_nl),
        0.5 * float(params.gamma),
        float(params.gamma_nl_prime),
        float(params.j),
        arrays["edge_a"],
        arrays["edge_b"],
        arrays["mode_s"],
        arrays["mode_a"],
        arrays["signs"],
    )


def _check_state(network: CavityNetwork, state: CavityState) -> None:
    if len(state) != network.n_modes:
        raise InvalidInstanceError(
            f"State has {len(state)} modes, network has {network.n_modes}"
        )


def steps_for(duration: float, dt: float) -> int:
    """Number of fixed steps covering ``duration`` (ceil, tolerant to round-off)."""
    return max(1, int(math.ceil(duration / dt - 1e-9)))


def complex_noise(rng: np.random.Generator, n_modes: int, amplitude: float) -> np.ndarray:
    """Independent complex Gaussians, ``amplitude`` standard deviation per quadrature."""
    if amplitude < 0:
        raise InvalidParameterError(f"Noise amplitude must be >= 0, got {amplitude}")
    if amplitude == 0:
        return np.zeros(n_modes, dtype=np.complex128)
    re = rng.standard_normal(n_modes)
    im = rng.standard_normal(n_modes)
    return amplitude * (re + 1j * im)


def init_noise(network: CavityNetwork, noise_amp: float, seed: int) -> CavityState:
    """Low-intensity random initial state, deterministic per seed."""
    rng = np.random.default_rng(seed)
    return CavityState(complex_noise(rng, network.n_modes, noise_amp), 0.0)


def evaluate_rhs(
    network: CavityNetwork, state: CavityState, params: Optional[SimParams] = None
) -> np.ndarray:
    """Time derivative of every mode at ``state``."""
    params = params or network.params
    _check_state(network, state)
    out = np.empty(network.n_modes, dtype=np.complex128)
    _rhs(np.array(state.amplitudes), out, *_kernel_args(network, params))
    return out


def _run(
    network: CavityNetwork,
    state: CavityState,
    params: SimParams,
    n_steps: int,
    stride: int,
) -> Tuple[CavityState, np.ndarray]:
    _check_state(network, state)
    z, bad_mode, done, samples = _integrate(
        np.array(state.amplitudes, dtype=np.complex128),
        int(n_steps),
        float(params.dt),
        int(stride),
        *_kernel_args(network, params),
    )
    time = state.time + done * params.dt
    if bad_mode >= 0:
        logger.error("Integration diverged in mode %d at t=%.6g", bad_mode, time)
        raise DivergenceError(int(bad_mode), time)
    return CavityState(z, time), samples


def step(network: CavityNetwork, state: CavityState, params: SimParams) -> CavityState:
    """Advance one RK4 step of size ``params.dt``."""
    new_state, _ = _run(network, state, params, 1, 0)
    return new_state


@log_stage("evolve")
def evolve(
    network: CavityNetwork,
    state: CavityState,
    params: SimParams,
    duration: float,
) -> CavityState:
    """Repeat `step` for ceil(duration / dt) steps."""
    if duration < params.dt * (1 - 1e-9):
        raise InvalidParameterError(
            f"duration {duration} shorter than one step dt={params.dt}"
        )
    new_state, _ = _run(network, state, params, steps_for(duration, params.dt), 0)
    return new_state


def evolve_with_trajectory(
    network: CavityNetwork,
    state: CavityState,
    params: SimParams,
    duration: float,
    stride: int,
) -> Tuple[CavityState, Trajectory]:
    """`evolve`, additionally sampling every ``stride`` steps (and the start)."""
    if stride < 1:
        raise InvalidParameterError(f"Sampling stride must be >= 1, got {stride}")
    n_steps = steps_for(duration, params.dt)
    new_state, samples = _run(network, state, params, n_steps, stride)
    times = state.time + np.arange(samples.shape[0]) * stride * params.dt
    return new_state, Trajectory(times, samples)


def is_stationary(prev: CavityState, next_state: CavityState, tol: float) -> bool:
    """
    Relative rate of change below ``tol`` for every mode.

    A common phase rotation between the two states is removed first, so a
    uniformly drifting global phase does not count as motion.
    """
    if len(prev) != len(next_state):
        raise InvalidInstanceError("States belong to different networks")
    elapsed = next_state.time - prev.time
    if elapsed <= 0:
        raise InvalidInstanceError("next_state must be later than prev")

    before = np.asarray(prev.amplitudes)
    after = np.asarray(next_state.amplitudes)
    overlap = np.vdot(before, after)
    if abs(overlap) > 0:
        after = after * np.exp(-1j * np.angle(overlap))

    magnitude = np.abs(after)
    scale = float(magnitude.max()) if magnitude.size else 0.0
    floor = STATIONARY_FLOOR * scale if scale > 0 else np.finfo(float).tiny
    rate = np.abs(after - before) / (elapsed * (magnitude + floor))
    return bool(np.all(rate < tol))
