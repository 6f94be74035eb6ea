"""
Closed-form stationary predictions and state read-out

Predictions: the stationary spin intensity I0 and its Ising correction,
connecting-mode intensities, and the cubic for the filled connecting mode
of an Ising edge. Read-out: spins, intensities, homogeneity and the energy
recovered from connecting-mode intensities.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import TYPE_CHECKING, Literal, NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq

from cavity_spin.config import SimParams
from cavity_spin.dynamics import CavityState, evaluate_rhs
from cavity_spin.errors import (
    BelowThresholdError,
    EmptyCondensateError,
    InvalidInstanceError,
    InvalidParameterError,
)
from cavity_spin.graph import SpinConfig

if TYPE_CHECKING:
    from cavity_spin.compiler import CavityNetwork

Calibration = Literal["xy", "ising"]

EMPTY_CONDENSATE_FRACTION = 1e-6
BINARY_PHASE_TOL = 1e-3


@dataclass(frozen=True)
class StationaryPrediction:
    """Analytic stationary values for one site and pump."""

    i0: float
    chi_abs_ising: float
    i0_mod: float
    above_threshold: bool
    j: float
    gamma: float

    def chi_s_intensity(self, phase_diff: float) -> float:
        return _chi_intensity(self.j, self.gamma, self.i0, phase_diff, +1)

    def chi_a_intensity(self, phase_diff: float) -> float:
        return _chi_intensity(self.j, self.gamma, self.i0, phase_diff, -1)


class SpinReadout(NamedTuple):
    config: SpinConfig
    intensities: np.ndarray


class EnergyReadout(NamedTuple):
    sum_chi2: float
    e_spin: float


def predicted_i0(params: SimParams, pump: float, degree: int) -> float:
    """(P - gamma)/(2 Gamma_NL) - 4 n J^2/(gamma Gamma_NL); may be <= 0."""
    return (pump - params.gamma) / (2.0 * params.gamma_nl) - 4.0 * degree * params.j**2 / (
        params.gamma * params.gamma_nl
    )


def _chi_intensity(j: float, gamma: float, i0: float, phase_diff: float, sign: int) -> float:
    return 8.0 * j**2 / gamma**2 * i0 * (1.0 + sign * math.cos(phase_diff))


def predicted_chi_intensity(
    params: SimParams, i0: float, phase_diff: float, branch: str
) -> float:
    """Stationary |chi^S|^2 or |chi^A|^2 of an edge in the XY regime."""
    if i0 < 0:
        raise InvalidParameterError(f"i0 must be >= 0, got {i0}")
    branch = str(getattr(branch, "value", branch)).upper()
    if branch not in ("S", "A"):
        raise InvalidParameterError(f"Unknown branch '{branch}'")
    return _chi_intensity(params.j, params.gamma, i0, phase_diff, 1 if branch == "S" else -1)


def chi_amplitude(params: SimParams, drive: float) -> float:
    """
    Positive root x of  Gamma'_NL x^3 + (gamma/2) x - J * drive = 0.

    ``drive`` is |psi_a +- psi_b| for the connecting mode in question. The
    left side is strictly increasing on x >= 0, so the root is unique; it is
    bracketed by [0, 2 J drive / gamma] and found with Brent's method, then
    polished by Newton steps.
    """
    if drive < 0:
        raise InvalidParameterError(f"drive must be >= 0, got {drive}")
    forcing = params.j * drive
    half_gamma = 0.5 * params.gamma
    if forcing == 0:
        return 0.0
    upper = forcing / half_gamma
    if params.gamma_nl_prime == 0:
        return upper

    g = params.gamma_nl_prime

    def cubic(x: float) -> float:
        return g * x**3 + half_gamma * x - forcing

    root = float(brentq(cubic, 0.0, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    for _ in range(3):
        slope = 3.0 * g * root**2 + half_gamma
        root -= cubic(root) / slope
    return root


def cubic_residual(params: SimParams, chi_abs: float) -> float:
    """Left side of the cubic at the stationary spin amplitude."""
    drive = 2.0 * math.sqrt(max(params.p - params.gamma, 0.0) / (2.0 * params.gamma_nl))
    return (
        params.gamma_nl_prime * chi_abs**3
        + 0.5 * params.gamma * chi_abs
        - params.j * drive
    )


def solve_chi_cubic(params: SimParams) -> float:
    """|chi^X| of a satisfied Ising edge, at |psi| = sqrt((P - gamma)/(2 Gamma_NL))."""
    if params.p <= params.gamma:
        raise BelowThresholdError(
            f"Pump P={params.p} does not exceed loss gamma={params.gamma}"
        )
    psi_abs = math.sqrt((params.p - params.gamma) / (2.0 * params.gamma_nl))
    return chi_amplitude(params, 2.0 * psi_abs)


def i0_mod(
    params: SimParams, degree: int, chi_abs: float, pump: Optional[float] = None
) -> float:
    """Spin intensity corrected for the connecting-site nonlinear loss."""
    pump = params.p if pump is None else pump
    effective_decay = params.gamma + 2.0 * chi_abs**2 * params.gamma_nl_prime
    if effective_decay <= 0:
        raise InvalidParameterError(
            f"Effective connecting-site decay must be positive, got {effective_decay}"
        )
    return (pump - params.gamma) / (2.0 * params.gamma_nl) - 4.0 * degree * params.j**2 / (
        effective_decay * params.gamma_nl
    )


def predict_stationary(
    params: SimParams, pump: Optional[float] = None, degree: int = 0
) -> StationaryPrediction:
    """All stationary predictions for one site, flagged when below threshold."""
    pump = params.p if pump is None else pump
    i0 = predicted_i0(params, pump, degree)
    if params.p > params.gamma:
        chi_abs = solve_chi_cubic(params)
        corrected = i0_mod(params, degree, chi_abs, pump)
    else:
        chi_abs, corrected = 0.0, i0
    return StationaryPrediction(
        i0=i0,
        chi_abs_ising=chi_abs,
        i0_mod=corrected,
        above_threshold=i0 > 0,
        j=params.j,
        gamma=params.gamma,
    )


def site_intensities(network: CavityNetwork) -> np.ndarray:
    """Predicted stationary intensity of every spin mode of the network."""
    params = network.params
    if params.is_ising:
        chi_abs = solve_chi_cubic(params)
        return np.array(
            [
                i0_mod(params, int(d), chi_abs, float(p))
                for d, p in zip(network.degrees, network.pump)
            ]
        )
    return np.array(
        [predicted_i0(params, float(p), int(d)) for d, p in zip(network.degrees, network.pump)]
    )


def reference_intensity(network: CavityNetwork) -> float:
    """Mean predicted intensity over the original (non-extra) spin sites."""
    sites = network.original_spins
    if not sites:
        raise InvalidInstanceError("Network has no original spin sites")
    i0 = float(np.mean(site_intensities(network)[sites]))
    if i0 <= 0:
        raise BelowThresholdError(f"Predicted spin intensity {i0:.6g} is not positive")
    return i0


def spin_amplitudes(network: CavityNetwork, state: CavityState) -> np.ndarray:
    return np.asarray(state.amplitudes)[: network.n_spin_modes]


def extract_spins(network: CavityNetwork, state: CavityState) -> SpinReadout:
    """Phase and intensity of every spin mode."""
    psi = spin_amplitudes(network, state)
    intensities = np.abs(psi) ** 2
    floor = EMPTY_CONDENSATE_FRACTION * reference_intensity(network)
    empty = np.flatnonzero(intensities < floor)
    if empty.size:
        raise EmptyCondensateError(
            f"Spin modes {empty.tolist()} hold less than {floor:.3g} intensity"
        )
    return SpinReadout(SpinConfig(np.angle(psi)), intensities)


def homogeneity_deviation(network: CavityNetwork, state: CavityState) -> float:
    """Largest relative departure of an original spin intensity from their mean."""
    sites = network.original_spins
    intensities = np.abs(spin_amplitudes(network, state)[sites]) ** 2
    mean = float(np.mean(intensities)) if len(sites) else 0.0
    if mean <= 0:
        raise EmptyCondensateError("All spin modes are empty; homogeneity undefined")
    return float(np.max(np.abs(intensities - mean)) / mean)


def readout_scale(network: CavityNetwork, calibration: Calibration) -> float:
    """kappa in e_spin = n_edges - kappa * sum |chi^X|^2."""
    params = network.params
    if params.j == 0:
        raise InvalidParameterError("Energy read-out needs a non-zero coupling J")
    if calibration == "xy":
        i0 = reference_intensity(network)
        return params.gamma**2 / (8.0 * params.j**2 * i0)
    if calibration == "ising":
        chi_abs = solve_chi_cubic(params)
        return 2.0 / chi_abs**2
    raise InvalidParameterError(f"Unknown calibration '{calibration}'")


def readout_energy(
    network: CavityNetwork, state: CavityState, calibration: Calibration
) -> EnergyReadout:
    """Spin energy recovered from the selected connecting mode of every original edge."""
    z = np.asarray(state.amplitudes)
    edges = network.original_edges
    sum_chi2 = float(sum(abs(z[rec.readout_mode]) ** 2 for rec in edges))
    kappa = readout_scale(network, calibration)
    return EnergyReadout(sum_chi2, len(edges) - kappa * sum_chi2)


def calibration_for(params: SimParams) -> Calibration:
    return "ising" if params.is_ising else "xy"


def candidate_state(network: CavityNetwork, config: SpinConfig) -> CavityState:
    """
    Stationary candidate for ``config``: spins at their predicted intensity,
    each connecting mode at the stationary amplitude its drive implies.
    """
    params = network.params
    if len(config) != network.n_spin_modes:
        raise InvalidInstanceError(
            f"Config has {len(config)} phases for {network.n_spin_modes} spin modes"
        )
    intensities = site_intensities(network)
    if np.any(intensities <= 0):
        raise BelowThresholdError("Some spin site is below threshold")

    z = np.zeros(network.n_modes, dtype=np.complex128)
    z[: network.n_spin_modes] = np.sqrt(intensities) * np.exp(1j * config.phases)
    for e, rec in enumerate(network.edge_records):
        signs = network.coupling_sign[e]
        for branch, mode in ((0, rec.s_mode), (1, rec.a_mode)):
            drive = signs[0, branch] * z[rec.spin_a] + signs[1, branch] * z[rec.spin_b]
            magnitude = abs(drive)
            if magnitude == 0:
                continue
            z[mode] = 1j * drive / magnitude * chi_amplitude(params, magnitude)
    return CavityState(z, 0.0)


def ising_fixed_point_residual(
    network: CavityNetwork,
    config: SpinConfig,
    params: Optional[SimParams] = None,
    require_binary: bool = True,
) -> float:
    """
    Max modulus of the equations of motion at the candidate state of ``config``.

    Near zero certifies a fixed point. With ``require_binary`` (default) a
    configuration that is not Ising-valued is rejected; switching it off
    evaluates the same construction for arbitrary phases.
    """
    if require_binary and not config.is_binary(1e-9):
        raise InvalidInstanceError("Configuration is not binary")
    state = candidate_state(network, config)
    return float(np.max(np.abs(evaluate_rhs(network, state, params or network.params))))
