"""
Tests for the pulsed readout/feedback protocol.

This module tests the pulse loop, its derived traces and statistics, the
default schedule and the batch benchmark.
"""

import numpy as np
import pytest
from scipy import stats

from cavity_spin.compiler import compile_network
from cavity_spin.config import Schedule, SimParams
from cavity_spin.dynamics import CavityState
from cavity_spin.errors import (
    BelowThresholdError,
    CapacityError,
    DivergenceError,
    InvalidInstanceError,
    InvalidParameterError,
)
from cavity_spin.graph import SpinConfig, generate_random_graph
from cavity_spin.oracle import DensityOfStates, ising_density_of_states
from cavity_spin.protocol import (
    RECORD_COLUMNS,
    PulseRecord,
    batch_run,
    default_schedule,
    energy_histogram,
    excess_energy_trace,
    lock_in_pulse,
    max_readout,
    readout_converged,
    readout_correlation,
    readout_window,
    records_frame,
    run_pulsed,
    survival_pump,
    task_seeds,
    write_records_csv,
)

SHORT = dict(pulse_duration=40.0)


def make_record(index, e_spin, survived=False, sum_chi2=None, mu=0.0):
    """Build a synthetic record with e_spin = 1 - 2 sum_chi2 unless given."""
    sum_chi2 = (1.0 - e_spin) / 2.0 if sum_chi2 is None else sum_chi2
    return PulseRecord(
        pulse_index=index,
        mu=mu,
        sum_chi2=sum_chi2,
        p_f=mu * sum_chi2,
        e_spin=e_spin,
        survived=survived,
        homogeneity_dev=0.0,
        config=SpinConfig(np.zeros(2)),
    )


class TestTraces:
    """Test cases for excess-energy traces and lock-in detection."""

    def test_trace_is_running_minimum(self):
        """Test that the trace never increases and reaches zero at the ground."""
        records = [make_record(j, e) for j, e in enumerate([1.0, -1.0, 3.0, -3.0, 1.0])]
        trace = excess_energy_trace(records, ground_energy=-3.0)
        assert [e for _, e in trace] == [4.0, 2.0, 2.0, 0.0, 0.0]
        assert [j for j, _ in trace] == [0, 1, 2, 3, 4]

    def test_single_pulse(self):
        """Test that one record gives one point."""
        assert excess_energy_trace([make_record(0, -1.0)], -1.0) == [(0, 0.0)]

    def test_empty_records(self):
        """Test that an empty run cannot be traced."""
        with pytest.raises(InvalidInstanceError):
            excess_energy_trace([], -1.0)

    def test_lock_in_pulse(self):
        """Test the first pulse of the final surviving streak."""
        flags = [False, True, False, True, True]
        records = [make_record(j, -1.0, survived=s) for j, s in enumerate(flags)]
        assert lock_in_pulse(records) == 3

    def test_no_lock_in(self):
        """Test that a run ending without survival has no lock-in."""
        records = [make_record(j, -1.0, survived=s) for j, s in enumerate([True, False])]
        assert lock_in_pulse(records) is None


class TestStatistics:
    """Test cases for read-out correlation and energy histograms."""

    def test_readout_correlation(self):
        """Test the exact affine line e = 1 - 2 s."""
        records = [make_record(j, e) for j, e in enumerate([1.0, -1.0, 0.5])]
        fit = readout_correlation(records)
        assert fit.slope == pytest.approx(-2.0)
        assert fit.intercept == pytest.approx(1.0)
        assert fit.r_value == pytest.approx(-1.0)

    def test_correlation_needs_spread(self):
        """Test that identical readouts cannot be fitted."""
        with pytest.raises(InvalidInstanceError):
            readout_correlation([make_record(0, -1.0), make_record(1, -1.0)])

    def test_histogram_counts(self):
        """Test visit counts per exact energy and unmatched readouts."""
        dos = DensityOfStates((-1, 3), (3, 1))
        records = [make_record(j, e) for j, e in enumerate([-1.0004, -0.9998, 3.0002, 1.0])]
        histogram = energy_histogram(records, dos)
        assert histogram.visits == (2, 1)
        assert histogram.unmatched == 1
        assert histogram.multiplicities == (3, 1)

    def test_histogram_chi_square(self):
        """Test a perfectly proportional histogram scores zero."""
        dos = DensityOfStates((-1, 3), (3, 1))
        records = [make_record(j, -1.0) for j in range(3)] + [make_record(3, 3.0)]
        histogram = energy_histogram(records, dos)
        assert histogram.chi_square == pytest.approx(0.0)
        assert histogram.p_value == pytest.approx(1.0)


class TestDefaultSchedule:
    """Test cases for the default feedback ramp."""

    def test_explicit_slope_kept(self, fm_pair, base_params):
        """Test that a chosen slope and noise survive resolution."""
        network = compile_network(fm_pair, base_params)
        schedule = default_schedule(network, Schedule(mu_slope=0.25, reset_noise_amp=0.0), 1e-3)
        assert schedule.mu_slope == 0.25
        assert schedule.reset_noise_amp == 0.0

    def test_slope_reaches_survival_pump(self, triangle, base_params):
        """Test mu * S_max / 2 equals the survival pump at 70% of the pulses."""
        network = compile_network(triangle, base_params)
        schedule = default_schedule(network, Schedule(n_pulses=101), 1e-3)
        assert schedule.reset_noise_amp == 1e-3
        mu = schedule.mu(70)
        assert mu * max_readout(network) / 2 == pytest.approx(survival_pump(network))

    def test_survival_pump(self, fm_pair, base_params):
        """Test gamma + 0.2 Gamma_NL I0 for the compensated pair."""
        network = compile_network(fm_pair, base_params)
        assert survival_pump(network) == pytest.approx(4.0 + 0.2 * 5.0)

    def test_unresolved_slope(self):
        """Test that an unresolved schedule cannot evaluate mu."""
        with pytest.raises(InvalidParameterError):
            Schedule().mu(0)


class TestReadoutWindow:
    """Test cases for the readout stationarity helpers."""

    def test_window_is_five_percent(self):
        """Test the final-window length and its one-step floor."""
        assert readout_window(1000.0, 0.005) == pytest.approx(50.0)
        assert readout_window(0.05, 0.005) == 0.005

    def test_faint_modes_ignored(self):
        """Test that motion in a mode far below the brightest one does not count."""
        before = CavityState(np.array([2.0, 1e-5]), 0.0)
        after = CavityState(np.array([2.0, 3e-5j]), 5.0)
        assert readout_converged(before, after)
        moved = CavityState(np.array([2.1, 1e-5]), 5.0)
        assert not readout_converged(before, moved)

    def test_diverged_state_not_converged(self):
        """Test that a non-finite state is never reported as stationary."""
        before = CavityState(np.array([1.0, 1.0]), 0.0)
        after = CavityState(np.array([np.inf, 1.0]), 1.0)
        assert not readout_converged(before, after)


@pytest.mark.dynamics
class TestRunPulsed:
    """Test cases for the pulse loop on small networks."""

    def test_feedback_pump_is_exact(self, fm_pair, base_params):
        """Test p_f = mu * sum_chi2 bit for bit on every record."""
        schedule = Schedule(mu0=0.5, mu_slope=1.0, n_pulses=4, **SHORT)
        records = run_pulsed(fm_pair, base_params, schedule, 14.0, seed=1)
        assert len(records) == 4
        for record in records:
            assert record.p_f == record.mu * record.sum_chi2
            assert record.mu == 0.5 + 1.0 * record.pulse_index

    def test_deterministic_per_seed(self, triangle, ising_params, tmp_path):
        """Test identical records and CSV bytes for a repeated seed."""
        schedule = Schedule(mu_slope=0.5, n_pulses=3, **SHORT)
        first = run_pulsed(triangle, ising_params, schedule, 14.0, seed=9)
        second = run_pulsed(triangle, ising_params, schedule, 14.0, seed=9)
        write_records_csv(first, tmp_path / "a.csv")
        write_records_csv(second, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert list(records_frame(first).columns) == RECORD_COLUMNS

    def test_zero_gain_never_survives(self, fm_pair, base_params):
        """Test that mu = 0 lets every condensate decay."""
        schedule = Schedule(mu0=0.0, mu_slope=0.0, n_pulses=3, **SHORT)
        records = run_pulsed(fm_pair, base_params, schedule, 14.0, seed=2)
        assert not any(r.survived for r in records)
        assert lock_in_pulse(records) is None

    def test_large_gain_carries_config(self, fm_pair, base_params, state_helper):
        """Test that a large fixed mu carries a surviving configuration through."""
        schedule = Schedule(mu0=50.0, mu_slope=0.0, n_pulses=4, **SHORT)
        records = run_pulsed(fm_pair, base_params, schedule, 14.0, seed=3)
        lock_in = lock_in_pulse(records)
        assert lock_in is not None
        assert all(r.converged for r in records[lock_in:])
        locked = state_helper.phase_differences(records[lock_in].config, fm_pair)[0]
        for record in records[lock_in + 1 :]:
            delta = state_helper.phase_differences(record.config, fm_pair)[0]
            assert delta == pytest.approx(locked, abs=1e-2)
            assert record.e_spin == pytest.approx(records[lock_in].e_spin, abs=1e-3)

    def test_below_threshold_readout_pump(self, fm_pair, base_params):
        """Test that a readout pump below loss is refused."""
        with pytest.raises(BelowThresholdError):
            run_pulsed(fm_pair, base_params, Schedule(mu_slope=0.0, **SHORT), 3.0, seed=0)

    def test_divergence_tagged_with_pulse(self, fm_pair, base_params, mocker):
        """Test that a divergence carries the index of the failing pulse."""
        mocker.patch(
            "cavity_spin.protocol.evolve", side_effect=DivergenceError(2, 1.5)
        )
        track = mocker.patch("cavity_spin.protocol.track_custom_event")
        with pytest.raises(DivergenceError) as info:
            run_pulsed(fm_pair, base_params, Schedule(mu_slope=0.0, **SHORT), 14.0, seed=0)
        assert info.value.pulse_index == 0
        assert info.value.mode_index == 2
        assert track.call_args[0][0] == "PulseDivergence"


@pytest.mark.dynamics
class TestBatchRun:
    """Test cases for the random-graph benchmark."""

    def test_pairs_always_succeed(self, ising_params):
        """Test success rate 1 on two-site graphs."""
        schedule = Schedule(n_pulses=20, pulse_duration=100.0)
        summary = batch_run(
            [2], 3, ising_params, schedule, seed=5, threads=1, connectivity=1.0
        )
        stats_row = summary.by_size(2)
        assert stats_row.n_graphs == 3
        assert stats_row.success_rate == 1.0
        assert len(stats_row.mean_excess) == 20
        assert stats_row.mean_excess[-1] == pytest.approx(0.0, abs=1e-3)

    def test_deterministic_summary(self, base_params):
        """Test identical exported summaries for a repeated seed."""
        schedule = Schedule(n_pulses=2, **SHORT)
        first = batch_run([2, 3], 2, base_params, schedule, seed=6, threads=1)
        second = batch_run([2, 3], 2, base_params, schedule, seed=6, threads=1)
        assert first.to_dict() == second.to_dict()
        assert "wall_time" not in first.to_dict()
        assert "wall_time" in first.to_dict(include_timing=True)

    def test_beyond_oracle_reach(self, base_params):
        """Test that size 30 without ground energies raises CapacityError."""
        with pytest.raises(CapacityError):
            batch_run([30], 1, base_params, Schedule(**SHORT), seed=0, threads=1)

    def test_ground_energy_count(self, base_params):
        """Test that supplied ground energies must cover every graph."""
        with pytest.raises(InvalidInstanceError):
            batch_run(
                [3], 2, base_params, Schedule(**SHORT), seed=0, ground_energies={3: [-1.0]}
            )

    def test_task_seeds_distinct(self):
        """Test that seeds differ across sizes and graph indices."""
        seeds = {task_seeds(0, size, idx) for size in (2, 3) for idx in range(4)}
        assert len(seeds) == 8


@pytest.mark.slow
@pytest.mark.dynamics
class TestSamplingAndLockIn:
    """Long runs of the sampling and lock-in properties."""

    def test_zero_gain_samples_uniformly(self):
        """Test uniform visits over the eight Ising states of a 4-site graph."""
        params = SimParams(gamma_nl_prime=1.0)
        graph = generate_random_graph(4, 0.7, 0.5, 12)
        schedule = Schedule(mu0=0.0, mu_slope=0.0, n_pulses=2000, pulse_duration=400.0)
        records = run_pulsed(graph, params, schedule, 14.0, seed=1)
        counts = {}
        for record in records:
            counts[record.config.signs()] = counts.get(record.config.signs(), 0) + 1
        assert len(counts) == 8
        assert stats.chisquare(list(counts.values())).pvalue > 1e-3

        histogram = energy_histogram(records, ising_density_of_states(graph))
        assert histogram.unmatched == 0
        assert histogram.p_value > 1e-3

    def test_lock_in_is_monotone(self):
        """Test that survival, once reached, persists to the end of the run."""
        params = SimParams(gamma_nl_prime=1.0)
        schedule = Schedule(n_pulses=60, pulse_duration=200.0)
        for seed in range(3):
            graph = generate_random_graph(4, 0.7, 0.5, 40 + seed)
            records = run_pulsed(graph, params, schedule, 14.0, seed=seed)
            flags = [r.survived for r in records]
            if True in flags:
                first = flags.index(True)
                assert all(flags[first:])

    def test_first_survivor_has_largest_connecting_intensity(self, ising_params):
        """Test that the first surviving config beats every config sampled before it."""
        schedule = Schedule(n_pulses=150, pulse_duration=200.0)
        locked, ordered = 0, 0
        for seed in range(6):
            graph = generate_random_graph(4, 0.7, 0.5, 60 + seed)
            records = run_pulsed(graph, ising_params, schedule, 14.0, seed=seed)
            first = lock_in_pulse(records)
            if first is None or first == 0:
                continue
            locked += 1
            survivor = records[first].sum_chi2
            earlier = max(r.sum_chi2 for r in records[:first])
            ordered += survivor >= earlier * (1 - 1e-3)
        assert locked >= 4
        assert ordered >= locked - 1

    def test_ising_batch_at_full_pulse_duration(self, ising_params):
        """Test near-certain success on 4- and 6-site graphs with 1000-unit pulses."""
        schedule = Schedule(n_pulses=60, pulse_duration=1000.0)
        summary = batch_run([4, 6], 10, ising_params, schedule, seed=21)
        for size in (4, 6):
            row = summary.by_size(size)
            assert row.n_graphs == 10
            assert row.success_rate >= 0.9
            excess = np.asarray(row.mean_excess)
            assert len(excess) == 60
            assert np.all(np.diff(excess) <= 1e-12)
            assert excess[-1] <= excess[0]
