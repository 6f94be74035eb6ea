"""
Command-line front end

Subcommands:
    simulate  single evolution to stationarity with polar-plot export
    anneal    pulsed annealing run with per-pulse CSV and summary JSON
    sweep     random-graph benchmark over several sizes
    oracle    exact ground-truth report for a graph file

Exit status is 0 on success, 2 for invalid input and 1 for runtime failures.
"""

from __future__ import annotations

import argparse
from pathlib import Path
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from cavity_spin.analysis import (
    calibration_for,
    extract_spins,
    homogeneity_deviation,
    readout_energy,
    site_intensities,
)
from cavity_spin.common import json_output
from cavity_spin.common.decorators import log_command_execution
from cavity_spin.common.logging_config import (
    get_logger,
    is_logging_configured,
    setup_logging,
)
from cavity_spin.compiler import CavityNetwork, compile_network
from cavity_spin.config import RunConfig, SimParams
from cavity_spin.dynamics import CavityState, Trajectory, evolve_with_trajectory, init_noise
from cavity_spin.errors import INPUT_ERRORS, CavitySpinError, InvalidInstanceError
from cavity_spin.graph import (
    SpinConfig,
    SpinGraph,
    extend_with_dangling,
    generate_random_graph,
    spin_energy,
)
from cavity_spin.oracle import (
    ORACLE_MAX_SITES,
    ising_density_of_states,
    ising_ground,
    oracle_report,
    write_oracle_json,
    xy_ground_estimate,
)
from cavity_spin.protocol import (
    FLOAT_FORMAT,
    batch_run,
    energy_histogram,
    evolve_to_readout,
    excess_energy_trace,
    lock_in_pulse,
    readout_converged,
    readout_correlation,
    readout_window,
    run_pulsed,
    write_records_csv,
    write_summary_json,
    write_sweep_csv,
)

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2

POLAR_COLUMNS = ["site_index", "kind", "radius", "angle", "time"]


def resolve_graph(config: RunConfig) -> SpinGraph:
    """The problem instance named by the config, before any extension."""
    source = config.graph
    if source is None:
        raise InvalidInstanceError("No graph given: use --graph or a 'graph' config entry")
    if source.file is not None:
        return SpinGraph.load(source.file)
    assert source.n_sites is not None
    return generate_random_graph(
        source.n_sites, source.connectivity, source.fm_fraction, source.seed
    )


def _physical_graph(config: RunConfig, graph: SpinGraph) -> SpinGraph:
    return extend_with_dangling(graph) if config.extend_graph else graph


def _mode_kinds(network: CavityNetwork) -> List[str]:
    kinds = ["extra" if extra else "spin" for extra in network.extra_flags]
    return kinds + ["connecting"] * (2 * network.n_edges)


def polar_frame(network: CavityNetwork, times: np.ndarray, samples: np.ndarray) -> pd.DataFrame:
    """Long-format (site_index, kind, radius, angle, time) rows, time-major."""
    n_samples, n_modes = samples.shape
    return pd.DataFrame(
        {
            "site_index": np.tile(np.arange(n_modes), n_samples),
            "kind": np.tile(np.array(_mode_kinds(network), dtype=object), n_samples),
            "radius": np.abs(samples).ravel(),
            "angle": np.angle(samples).ravel(),
            "time": np.repeat(times, n_modes),
        },
        columns=POLAR_COLUMNS,
    )


def _output_dir(config: RunConfig) -> Path:
    config.output_dir.mkdir(parents=True, exist_ok=True)
    return config.output_dir


def _floats(values: Any) -> List[float]:
    return [float(v) for v in values]


def _trajectory_stationary(
    trajectory: Trajectory, final: CavityState, params: SimParams
) -> bool:
    """Judge the final readout window using the last sample taken before it."""
    start = final.time - readout_window(params.duration, params.dt)
    earlier = np.flatnonzero(trajectory.times <= start + 1e-12)
    if earlier.size == 0:
        return False
    k = int(earlier[-1])
    before = CavityState(trajectory.samples[k], float(trajectory.times[k]))
    return readout_converged(before, final)


@log_command_execution("simulate")
def cmd_simulate(config: RunConfig) -> Dict[str, Any]:
    """
    Evolve once for the configured duration and report predicted against measured values.

    ``stationary`` tells whether the significant modes stopped moving over
    the final readout window; the network layout is dumped next to the report.
    """
    graph = resolve_graph(config)
    physical = _physical_graph(config, graph)
    params = config.params.with_pump(config.readout_pump)
    network = compile_network(physical, params, config.effective_pump_strategy)
    state = init_noise(network, params.noise_amp, config.seed)

    out = _output_dir(config)
    json_output.write_json(network.to_dict(), out / "network.json")

    if config.trajectory_stride > 0:
        final, trajectory = evolve_with_trajectory(
            network, state, params, params.duration, config.trajectory_stride
        )
        trajectory.write_csv(out / "trajectory.csv")
        stationary = _trajectory_stationary(trajectory, final, params)
    else:
        final, stationary = evolve_to_readout(network, state, params, params.duration)
        trajectory = Trajectory(
            np.array([final.time]), np.asarray(final.amplitudes)[None, :]
        )
    if not stationary:
        logger.warning("Simulation did not reach a stationary state by t=%.6g", final.time)

    polar_frame(network, trajectory.times, trajectory.samples).to_csv(
        out / "polar.csv", index=False, float_format=FLOAT_FORMAT
    )

    spins = extract_spins(network, final)
    original = network.original_spins
    config_phases = SpinConfig(spins.config.phases[original])
    sum_chi2, e_spin = readout_energy(network, final, calibration_for(params))
    report: Dict[str, Any] = {
        "mode": config.mode,
        "time": final.time,
        "stationary": stationary,
        "predicted_intensity": _floats(site_intensities(network)),
        "measured_intensity": _floats(spins.intensities),
        "phases": _floats(spins.config.phases),
        "homogeneity_deviation": homogeneity_deviation(network, final),
        "binary": config_phases.is_binary(),
        "sum_chi2": sum_chi2,
        "e_spin": e_spin,
        "spin_energy": spin_energy(graph, config_phases),
    }
    write_summary_json(report, out / "simulate_report.json")
    return report


def _oracle_reference(graph: SpinGraph, config: RunConfig) -> Optional[Dict[str, Any]]:
    if graph.n_sites > ORACLE_MAX_SITES:
        logger.warning("Graph of %d sites is beyond oracle reach", graph.n_sites)
        return None
    if config.params.is_ising:
        ground = ising_ground(graph)
        return {"energy": float(ground.energy), "configs": [list(c) for c in ground.configs]}
    estimate = xy_ground_estimate(graph, config.oracle_restarts, config.seed)
    return {"energy": estimate.energy}


@log_command_execution("anneal")
def cmd_anneal(config: RunConfig) -> Dict[str, Any]:
    """Run the pulsed protocol and export per-pulse records and a summary."""
    graph = resolve_graph(config)
    physical = _physical_graph(config, graph)
    records = run_pulsed(
        physical,
        config.params,
        config.schedule,
        config.readout_pump,
        config.seed,
        config.effective_pump_strategy,
    )

    out = _output_dir(config)
    write_records_csv(records, out / "anneal_records.csv")

    final = records[-1]
    summary: Dict[str, Any] = {
        "n_pulses": len(records),
        "lock_in_pulse": lock_in_pulse(records),
        "final_e_spin": final.e_spin,
        "final_phases": _floats(final.config.phases),
        "unconverged_pulses": [r.pulse_index for r in records if not r.converged],
    }
    try:
        fit = readout_correlation(records)
        summary["readout_correlation"] = fit._asdict()
    except InvalidInstanceError:
        summary["readout_correlation"] = None

    reference = _oracle_reference(graph, config)
    if reference is not None:
        summary["oracle"] = reference
        summary["excess_energy"] = [
            e for _, e in excess_energy_trace(records, reference["energy"])
        ]
        summary["reached_ground"] = abs(final.e_spin - reference["energy"]) <= 1e-3
        if config.params.is_ising:
            histogram = energy_histogram(records, ising_density_of_states(graph))
            summary["energy_histogram"] = histogram._asdict()

    write_summary_json(summary, out / "anneal_summary.json")
    return summary


@log_command_execution("sweep")
def cmd_sweep(config: RunConfig) -> Dict[str, Any]:
    """Benchmark random graphs of every configured size."""
    if not config.sizes:
        raise InvalidInstanceError("sweep needs a non-empty 'sizes' list")
    summary = batch_run(
        config.sizes,
        config.graphs_per_size,
        config.params,
        config.schedule,
        config.seed,
        p_r=config.readout_pump,
        homogenization=config.homogenization if "homogenization" in config.model_fields_set else None,
        threads=config.threads,
        connectivity=config.connectivity,
        fm_fraction=config.fm_fraction,
    )
    logger.info("Sweep finished in %.2fs", summary.wall_time)

    out = _output_dir(config)
    write_sweep_csv(summary, out / "sweep_curves.csv")
    data = summary.to_dict()
    write_summary_json(data, out / "sweep_summary.json")
    return data


@log_command_execution("oracle")
def cmd_oracle(config: RunConfig) -> Dict[str, Any]:
    """Exact ground-truth report for one graph."""
    graph = resolve_graph(config)
    report = oracle_report(graph, config.oracle_restarts, config.seed, config.threads or 1)
    write_oracle_json(report, _output_dir(config) / "oracle.json")
    return report


COMMANDS: Dict[str, Callable[[RunConfig], Dict[str, Any]]] = {
    "simulate": cmd_simulate,
    "anneal": cmd_anneal,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavity-spin",
        description="Coupled-cavity Ising/XY spin machine simulator",
    )
    parser.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: CAVITY_SPIN_LOG_LEVEL or INFO)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler in COMMANDS.items():
        cmd = sub.add_parser(name, help=(handler.__doc__ or "").strip().splitlines()[0])
        cmd.add_argument("--config", type=Path, help="JSON run configuration")
        cmd.add_argument("--graph", type=Path, help="Graph JSON file (overrides config)")
        cmd.add_argument("--seed", type=int, help="Random seed (overrides config)")
        cmd.add_argument("--out", type=Path, help="Output directory (overrides config)")
        cmd.add_argument("--threads", type=int, help="Worker cap for parallel stages")
        if name in ("anneal", "sweep"):
            cmd.add_argument("--pulses", type=int, help="Number of pulses (overrides config)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level or not is_logging_configured():
        setup_logging(log_level=args.log_level or "INFO")

    overrides = {
        "seed": args.seed,
        "pulses": getattr(args, "pulses", None),
        "output_dir": args.out,
        "threads": args.threads,
        "graph_file": args.graph,
    }
    try:
        config = RunConfig.load(args.config, overrides)
        result = COMMANDS[args.command](config)
    except (ValidationError, *INPUT_ERRORS) as e:
        logger.error("Invalid input: %s", e)
        return EXIT_INPUT
    except CavitySpinError as e:
        logger.error("Run failed: %s", e)
        return EXIT_RUNTIME

    json_output.dump(result, sys.stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
