"""
Pulsed readout/feedback annealing

Every pulse forms a stationary state under the fixed readout pump, reads
the selected connecting-mode intensities, and re-pumps the spin sites with
P_f = mu(j) * sum |chi^X|^2. A configuration whose readout is large enough
keeps its condensate through the feedback half and is carried into the
next pulse; otherwise the next pulse restarts from noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import time
from typing import Any, Dict, List, Literal, Mapping, NamedTuple, Optional, Sequence, Tuple

from joblib import Parallel, delayed
import numpy as np
import pandas as pd
from scipy import stats

from cavity_spin.analysis import (
    calibration_for,
    extract_spins,
    homogeneity_deviation,
    readout_energy,
    readout_scale,
    reference_intensity,
)
from cavity_spin.common.decorators import log_stage
from cavity_spin.common.json_output import write_json
from cavity_spin.common.logging_config import get_logger
from cavity_spin.common.telemetry import track_custom_event, track_custom_metric
from cavity_spin.compiler import CavityNetwork, compile_network
from cavity_spin.config import STABILITY_LIMIT, Homogenization, Schedule, SimParams
from cavity_spin.dynamics import CavityState, complex_noise, evolve, is_stationary
from cavity_spin.errors import CapacityError, DivergenceError, InvalidInstanceError
from cavity_spin.graph import SpinConfig, SpinGraph, extend_with_dangling, generate_random_graph
from cavity_spin.oracle import (
    ORACLE_MAX_SITES,
    DensityOfStates,
    ising_ground,
    xy_ground_estimate,
)

logger = get_logger(__name__)

SURVIVAL_FRACTION = 0.1
LOCK_IN_FRACTION = 0.7
READOUT_WINDOW_FRACTION = 0.05
READOUT_STATIONARY_TOL = 1e-6
SIGNIFICANT_MODE_FRACTION = 1e-6
SUCCESS_TOL = 1e-3

RECORD_COLUMNS = [
    "pulse_index",
    "mu",
    "p_f",
    "sum_chi2",
    "e_spin",
    "survived",
    "homogeneity_dev",
]
FLOAT_FORMAT = "%.16e"


@dataclass(frozen=True)
class PulseRecord:
    """Observables of one pulse; ``p_f`` is exactly ``mu * sum_chi2``."""

    pulse_index: int
    mu: float
    sum_chi2: float
    p_f: float
    e_spin: float
    survived: bool
    homogeneity_dev: float
    config: SpinConfig
    converged: bool = True

    def row(self) -> Dict[str, Any]:
        return {
            "pulse_index": self.pulse_index,
            "mu": self.mu,
            "p_f": self.p_f,
            "sum_chi2": self.sum_chi2,
            "e_spin": self.e_spin,
            "survived": int(self.survived),
            "homogeneity_dev": self.homogeneity_dev,
        }


class ReadoutCorrelation(NamedTuple):
    slope: float
    intercept: float
    r_value: float


class EnergyHistogram(NamedTuple):
    energies: Tuple[int, ...]
    visits: Tuple[int, ...]
    multiplicities: Tuple[int, ...]
    unmatched: int
    chi_square: float
    p_value: float


def max_readout(network: CavityNetwork) -> float:
    """sum |chi^X|^2 with every original edge satisfied."""
    return 2.0 * len(network.original_edges) / readout_scale(
        network, calibration_for(network.params)
    )


def survival_pump(network: CavityNetwork) -> float:
    """Feedback pump at which the stationary intensity is the survival threshold."""
    params = network.params
    return params.gamma + 2.0 * params.gamma_nl * SURVIVAL_FRACTION * reference_intensity(
        network
    )


def default_schedule(network: CavityNetwork, schedule: Schedule, noise_amp: float) -> Schedule:
    """
    Fill the unset schedule fields.

    The slope makes mu * S_max / 2 reach the survival pump at 70% of the
    pulses; any ground state reads at least S_max / 2.
    """
    if schedule.mu_slope is not None:
        slope = schedule.mu_slope
    else:
        half_max = 0.5 * max_readout(network) if network.original_edges else 0.0
        span = LOCK_IN_FRACTION * max(schedule.n_pulses - 1, 1)
        target = survival_pump(network) / half_max if half_max > 0 else 0.0
        slope = max(target - schedule.mu0, 0.0) / span
    return schedule.resolved(slope, noise_amp)


def _significant(state: CavityState, mask: np.ndarray) -> CavityState:
    return CavityState(np.asarray(state.amplitudes)[mask], state.time)


def readout_window(duration: float, dt: float) -> float:
    return max(READOUT_WINDOW_FRACTION * duration, dt)


def readout_converged(before: CavityState, after: CavityState) -> bool:
    """Stationarity of the modes holding a significant share of the light."""
    intensity = after.intensities()
    if intensity.size == 0 or not np.isfinite(intensity).all():
        return False
    mask = intensity > SIGNIFICANT_MODE_FRACTION * float(intensity.max())
    return is_stationary(
        _significant(before, mask), _significant(after, mask), READOUT_STATIONARY_TOL
    )


def evolve_to_readout(
    network: CavityNetwork, state: CavityState, params: SimParams, duration: float
) -> Tuple[CavityState, bool]:
    """Evolve for ``duration``; stationarity is judged over the final window."""
    window = readout_window(duration, params.dt)
    lead = duration - window
    if lead < params.dt:
        return evolve(network, state, params, duration), False

    before = evolve(network, state, params, lead)
    after = evolve(network, before, params, window)
    return after, readout_converged(before, after)


def run_pulsed(
    graph: SpinGraph,
    params: SimParams,
    schedule: Schedule,
    p_r: float,
    seed: int,
    pump_strategy: Literal["uniform", "compensated"] = "compensated",
) -> List[PulseRecord]:
    """
    Run the annealing loop for ``schedule.n_pulses`` pulses.

    Args:
        graph: Problem instance, possibly extended with extra sites
        params: Physical parameters; ``params.p`` is ignored in favour of ``p_r``
        schedule: Feedback ramp; unset slope and reset noise take defaults
        p_r: Spin-site pump of the readout half
        seed: Seed of the single random stream used for all noise
        pump_strategy: Pump homogenization of the compiled network

    Returns:
        One PulseRecord per pulse
    """
    readout_params = params.with_pump(p_r)
    network = compile_network(graph, readout_params, pump_strategy)
    offsets = network.pump_offsets()
    i0 = reference_intensity(network)
    calibration = calibration_for(readout_params)
    schedule = default_schedule(network, schedule, params.noise_amp)
    reset_amp = float(schedule.reset_noise_amp or 0.0)
    survival_floor = SURVIVAL_FRACTION * i0
    original = network.original_spins
    half = 0.5 * schedule.pulse_duration

    logger.info(
        "Annealing %d spins over %d pulses (mu0=%.6g, slope=%.6g, I0=%.6g)",
        len(original),
        schedule.n_pulses,
        schedule.mu0,
        schedule.mu_slope,
        i0,
    )

    rng = np.random.default_rng(seed)
    state = CavityState(complex_noise(rng, network.n_modes, params.noise_amp), 0.0)
    records: List[PulseRecord] = []
    previously_survived = False

    for j in range(schedule.n_pulses):
        try:
            state, converged = evolve_to_readout(network, state, readout_params, half)
            if not converged:
                logger.warning("Readout of pulse %d did not reach a stationary state", j)

            sum_chi2, e_spin = readout_energy(network, state, calibration)
            spins = extract_spins(network, state)
            config = SpinConfig(spins.config.phases[original])
            homogeneity = homogeneity_deviation(network, state)

            mu = schedule.mu(j)
            p_f = mu * sum_chi2
            feedback = network.with_pump(p_f + offsets)
            if readout_params.dt * float(np.max(np.abs(feedback.pump))) >= STABILITY_LIMIT:
                logger.warning("Feedback pump %.4g at pulse %d exceeds the step guard", p_f, j)
            state = evolve(feedback, state, readout_params, half)
        except DivergenceError as e:
            track_custom_event(
                "PulseDivergence",
                properties={"pulse_index": str(j), "mode_index": str(e.mode_index)},
            )
            raise e.at_pulse(j) from e

        mean_intensity = float(np.mean(state.intensities()[original]))
        survived = mean_intensity > survival_floor

        noise = complex_noise(rng, network.n_modes, reset_amp)
        amplitudes = np.asarray(state.amplitudes) + noise if survived else noise
        state = CavityState(amplitudes, state.time)

        track_custom_metric("PulseSumChi2", sum_chi2, properties={"pulse_index": str(j)})
        if survived and not previously_survived:
            track_custom_event(
                "PulseLockIn",
                properties={"pulse_index": str(j)},
                measurements={"e_spin": e_spin, "mu": mu},
            )
        previously_survived = survived

        records.append(
            PulseRecord(
                pulse_index=j,
                mu=mu,
                sum_chi2=sum_chi2,
                p_f=p_f,
                e_spin=e_spin,
                survived=survived,
                homogeneity_dev=homogeneity,
                config=config,
                converged=converged,
            )
        )
    return records


def excess_energy_trace(
    records: Sequence[PulseRecord], ground_energy: float
) -> List[Tuple[int, float]]:
    """Running minimum of e_spin above the ground energy, per pulse."""
    if not records:
        raise InvalidInstanceError("No pulse records to trace")
    trace = []
    best = float("inf")
    for record in records:
        best = min(best, record.e_spin)
        trace.append((record.pulse_index, best - ground_energy))
    return trace


def lock_in_pulse(records: Sequence[PulseRecord]) -> Optional[int]:
    """First pulse from which every later record survived; None if the last did not."""
    lock_in = None
    for record in reversed(records):
        if not record.survived:
            break
        lock_in = record.pulse_index
    return lock_in


def readout_correlation(records: Sequence[PulseRecord]) -> ReadoutCorrelation:
    """Least-squares line of e_spin against sum_chi2 over a run."""
    x = np.array([r.sum_chi2 for r in records])
    y = np.array([r.e_spin for r in records])
    if len(x) < 2 or np.ptp(x) == 0:
        raise InvalidInstanceError("Correlation needs at least two distinct readouts")
    fit = stats.linregress(x, y)
    return ReadoutCorrelation(float(fit.slope), float(fit.intercept), float(fit.rvalue))


def energy_histogram(
    records: Sequence[PulseRecord], dos: DensityOfStates
) -> EnergyHistogram:
    """
    Visits per exact energy next to the oracle multiplicities.

    Each readout is assigned to the nearest exact energy when within 0.5;
    the chi-square statistic compares visits with uniform sampling over
    configurations.
    """
    levels = np.array(dos.energies, dtype=float)
    visits = np.zeros(len(levels), dtype=np.int64)
    unmatched = 0
    for record in records:
        nearest = int(np.argmin(np.abs(levels - record.e_spin)))
        if abs(levels[nearest] - record.e_spin) <= 0.5:
            visits[nearest] += 1
        else:
            unmatched += 1

    total = int(visits.sum())
    if total > 0 and len(levels) > 1:
        expected = total * np.array(dos.multiplicities, dtype=float) / dos.n_states
        result = stats.chisquare(visits, expected)
        chi_square, p_value = float(result.statistic), float(result.pvalue)
    else:
        chi_square, p_value = 0.0, 1.0
    return EnergyHistogram(
        dos.energies,
        tuple(int(v) for v in visits),
        dos.multiplicities,
        unmatched,
        chi_square,
        p_value,
    )


def records_frame(records: Sequence[PulseRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.row() for r in records], columns=RECORD_COLUMNS)


def write_records_csv(records: Sequence[PulseRecord], path: Path) -> None:
    records_frame(records).to_csv(path, index=False, float_format=FLOAT_FORMAT)


# Batch benchmark


@dataclass(frozen=True)
class GraphOutcome:
    size: int
    graph_index: int
    ground_energy: float
    trace: Tuple[float, ...]
    final_energy: float
    success: bool
    lock_in: Optional[int]
    wall_time: float


@dataclass(frozen=True)
class SizeStatistics:
    size: int
    n_graphs: int
    mean_excess: Tuple[float, ...]
    success_rate: float
    wall_time: float

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "size": self.size,
            "n_graphs": self.n_graphs,
            "mean_excess": list(self.mean_excess),
            "success_rate": self.success_rate,
        }
        if include_timing:
            data["wall_time"] = self.wall_time
        return data


@dataclass(frozen=True)
class BatchSummary:
    sizes: Tuple[SizeStatistics, ...]
    outcomes: Tuple[GraphOutcome, ...] = field(repr=False)
    wall_time: float = 0.0

    def by_size(self, size: int) -> SizeStatistics:
        for stats_row in self.sizes:
            if stats_row.size == size:
                return stats_row
        raise KeyError(size)

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "sizes": [s.to_dict(include_timing) for s in self.sizes],
            "graphs": [
                {
                    "size": o.size,
                    "graph_index": o.graph_index,
                    "ground_energy": o.ground_energy,
                    "final_energy": o.final_energy,
                    "success": o.success,
                    "lock_in": o.lock_in,
                }
                for o in self.outcomes
            ],
        }
        if include_timing:
            data["wall_time"] = self.wall_time
        return data


def task_seeds(seed: int, size: int, graph_index: int) -> Tuple[int, int]:
    """Independent (graph, run) seeds for one benchmark task."""
    graph_seed, run_seed = np.random.SeedSequence([seed, size, graph_index]).generate_state(2)
    return int(graph_seed), int(run_seed)


def default_homogenization(params: SimParams) -> Homogenization:
    """Ising sweeps use the pump offset alone; XY sweeps also extend the graph."""
    return "pump" if params.is_ising else "both"


def _ground_energy(graph: SpinGraph, params: SimParams, seed: int) -> Tuple[float, Tuple]:
    if params.is_ising:
        ground = ising_ground(graph)
        return float(ground.energy), ground.configs
    return xy_ground_estimate(graph, seed=seed).energy, ()


def _run_task(
    size: int,
    graph_index: int,
    params: SimParams,
    schedule: Schedule,
    p_r: float,
    seed: int,
    homogenization: Homogenization,
    connectivity: float,
    fm_fraction: float,
    ground_energy: Optional[float],
) -> GraphOutcome:
    started = time.perf_counter()
    graph_seed, run_seed = task_seeds(seed, size, graph_index)
    graph = generate_random_graph(size, connectivity, fm_fraction, graph_seed)
    if ground_energy is None:
        ground_energy, optimal = _ground_energy(graph, params, run_seed)
    else:
        optimal = ()

    physical = extend_with_dangling(graph) if homogenization in ("dangling", "both") else graph
    strategy = "compensated" if homogenization in ("pump", "both") else "uniform"
    records = run_pulsed(physical, params, schedule, p_r, run_seed, strategy)

    trace = tuple(e for _, e in excess_energy_trace(records, ground_energy))
    final = records[-1]
    success = abs(final.e_spin - ground_energy) <= SUCCESS_TOL
    if success and optimal:
        success = final.config.is_binary() and final.config.signs() in optimal
    return GraphOutcome(
        size=size,
        graph_index=graph_index,
        ground_energy=float(ground_energy),
        trace=trace,
        final_energy=final.e_spin,
        success=success,
        lock_in=lock_in_pulse(records),
        wall_time=time.perf_counter() - started,
    )


@log_stage("batch_run")
def batch_run(
    sizes: Sequence[int],
    graphs_per_size: int,
    params: SimParams,
    schedule: Schedule,
    seed: int,
    p_r: Optional[float] = None,
    homogenization: Optional[Homogenization] = None,
    threads: Optional[int] = None,
    connectivity: float = 0.5,
    fm_fraction: float = 0.5,
    ground_energies: Optional[Mapping[int, Sequence[float]]] = None,
) -> BatchSummary:
    """
    Anneal ``graphs_per_size`` random graphs of every size.

    Tasks run on a joblib pool and are merged in (size, graph index) order,
    so the summary depends on ``seed`` alone.
    """
    ground_energies = ground_energies or {}
    for size in sizes:
        if size > ORACLE_MAX_SITES and size not in ground_energies:
            raise CapacityError(
                f"Size {size} is beyond oracle reach and no ground energies were given"
            )
        if size in ground_energies and len(ground_energies[size]) != graphs_per_size:
            raise InvalidInstanceError(
                f"Need {graphs_per_size} ground energies for size {size}"
            )

    p_r = params.p if p_r is None else p_r
    homogenization = homogenization or default_homogenization(params)
    started = time.perf_counter()
    tasks = [
        delayed(_run_task)(
            size,
            idx,
            params,
            schedule,
            p_r,
            seed,
            homogenization,
            connectivity,
            fm_fraction,
            ground_energies[size][idx] if size in ground_energies else None,
        )
        for size in sizes
        for idx in range(graphs_per_size)
    ]
    outcomes: List[GraphOutcome] = Parallel(n_jobs=threads or -1)(tasks)
    wall_time = time.perf_counter() - started

    rows = []
    for size in sizes:
        group = [o for o in outcomes if o.size == size]
        rows.append(
            SizeStatistics(
                size=size,
                n_graphs=len(group),
                mean_excess=tuple(float(v) for v in np.mean([o.trace for o in group], axis=0)),
                success_rate=float(np.mean([o.success for o in group])),
                wall_time=float(sum(o.wall_time for o in group)),
            )
        )
        logger.info(
            "Size %d: success rate %.3f over %d graphs",
            size,
            rows[-1].success_rate,
            len(group),
        )

    track_custom_metric("BatchWallTime", wall_time, properties={"sizes": str(list(sizes))})
    return BatchSummary(tuple(rows), tuple(outcomes), wall_time)


def sweep_frame(summary: BatchSummary) -> pd.DataFrame:
    rows = [
        {
            "size": s.size,
            "pulse_index": j,
            "mean_excess_energy": value,
            "success_rate": s.success_rate,
        }
        for s in summary.sizes
        for j, value in enumerate(s.mean_excess)
    ]
    return pd.DataFrame(rows, columns=["size", "pulse_index", "mean_excess_energy", "success_rate"])


def write_sweep_csv(summary: BatchSummary, path: Path) -> None:
    sweep_frame(summary).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def write_summary_json(data: Dict[str, Any], path: Path) -> None:
    write_json(data, path)
