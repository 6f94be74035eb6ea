"""
Tests for closed-form predictions and state read-out.

This module tests:
- Stationary intensity and connecting-mode predictions
- The connecting-amplitude cubic and the corrected intensity
- Spin extraction, homogeneity and the energy read-out
- Ising fixed-point certification
"""

import itertools
import math

import numpy as np
import pytest
from scipy.optimize import bisect

from cavity_spin.analysis import (
    candidate_state,
    chi_amplitude,
    cubic_residual,
    extract_spins,
    homogeneity_deviation,
    i0_mod,
    ising_fixed_point_residual,
    predict_stationary,
    predicted_chi_intensity,
    predicted_i0,
    readout_energy,
    solve_chi_cubic,
)
from cavity_spin.compiler import compile_network
from cavity_spin.config import SimParams
from cavity_spin.errors import (
    BelowThresholdError,
    EmptyCondensateError,
    InvalidInstanceError,
    InvalidParameterError,
)
from cavity_spin.graph import SpinConfig, generate_random_graph, spin_energy


class TestPredictedIntensity:
    """Test cases for the stationary spin intensity."""

    def test_degree_four_compensated(self, base_params):
        """Test I0 = 4 at P=14, gamma=4, J=0.5, degree 4."""
        assert predicted_i0(base_params, 14.0, 4) == pytest.approx(4.0)

    def test_threshold(self, base_params):
        """Test that P = gamma at degree 0 sits exactly at threshold."""
        assert predicted_i0(base_params, 4.0, 0) == 0.0

    def test_plaquette(self, base_params):
        """Test the two-spin plaquette value of 4.75."""
        assert predicted_i0(base_params, 14.0, 1) == pytest.approx(4.75)

    def test_below_threshold_flagged(self, base_params):
        """Test that a negative prediction is returned with the flag cleared."""
        prediction = predict_stationary(base_params, pump=4.5, degree=4)
        assert prediction.i0 < 0
        assert not prediction.above_threshold

    def test_prediction_record(self, ising_params):
        """Test the record bundles I0, the cubic root and the corrected intensity."""
        prediction = predict_stationary(ising_params, degree=1)
        assert prediction.above_threshold
        assert prediction.chi_abs_ising == pytest.approx(solve_chi_cubic(ising_params))
        assert prediction.i0 < prediction.i0_mod < 5.0
        assert prediction.chi_s_intensity(0.0) == pytest.approx(
            predicted_chi_intensity(ising_params, prediction.i0, 0.0, "S")
        )


class TestChiIntensity:
    """Test cases for the connecting-mode intensity law."""

    def test_aligned(self, base_params):
        """Test S=1 and A=0 for aligned phases at I0=4."""
        assert predicted_chi_intensity(base_params, 4.0, 0.0, "S") == pytest.approx(1.0)
        assert predicted_chi_intensity(base_params, 4.0, 0.0, "A") == pytest.approx(0.0)

    def test_pi_swaps_branches(self, base_params):
        """Test that a phase difference of pi swaps S and A."""
        assert predicted_chi_intensity(base_params, 4.0, math.pi, "A") == pytest.approx(1.0)
        assert predicted_chi_intensity(base_params, 4.0, math.pi, "S") == pytest.approx(0.0)

    def test_quadrature_equal(self, base_params):
        """Test that S and A are equal at a phase difference of pi/2."""
        s = predicted_chi_intensity(base_params, 4.0, math.pi / 2, "S")
        a = predicted_chi_intensity(base_params, 4.0, math.pi / 2, "A")
        assert s == pytest.approx(a) == pytest.approx(0.5)

    def test_negative_intensity_rejected(self, base_params):
        """Test that i0 must be non-negative."""
        with pytest.raises(InvalidParameterError):
            predicted_chi_intensity(base_params, -1.0, 0.0, "S")

    def test_unknown_branch(self, base_params):
        """Test that only S and A are accepted."""
        with pytest.raises(InvalidParameterError):
            predicted_chi_intensity(base_params, 1.0, 0.0, "Q")


class TestChiCubic:
    """Test cases for the connecting-amplitude cubic."""

    def test_linear_limit(self, base_params):
        """Test the closed form 0.5 * sqrt(5) without connecting loss."""
        assert solve_chi_cubic(base_params) == pytest.approx(0.5 * math.sqrt(5), abs=1e-12)

    def test_residual_at_root(self, ising_params):
        """Test that the root satisfies the cubic to 1e-12."""
        root = solve_chi_cubic(ising_params)
        assert abs(cubic_residual(ising_params, root)) < 1e-12

    def test_matches_bisection(self, ising_params):
        """Test agreement with plain bisection of x^3 + 2x - sqrt(5)."""
        reference = bisect(lambda x: x**3 + 2 * x - math.sqrt(5), 0.0, math.sqrt(5), xtol=1e-15)
        assert solve_chi_cubic(ising_params) == pytest.approx(reference, abs=1e-12)

    def test_zero_coupling(self):
        """Test that J=0 leaves the connecting modes empty."""
        assert solve_chi_cubic(SimParams(j=0.0, gamma_nl_prime=1.0)) == 0.0

    def test_below_threshold(self):
        """Test that P <= gamma raises BelowThresholdError."""
        with pytest.raises(BelowThresholdError):
            solve_chi_cubic(SimParams(p=4.0))

    def test_decreasing_in_connecting_loss(self):
        """Test that the root strictly decreases as the connecting loss grows."""
        roots = [solve_chi_cubic(SimParams(gamma_nl_prime=g)) for g in (0.0, 0.1, 1.0, 10.0)]
        assert all(a > b for a, b in zip(roots, roots[1:]))

    def test_general_drive(self, ising_params):
        """Test that chi_amplitude solves the cubic for an arbitrary drive."""
        x = chi_amplitude(ising_params, 1.7)
        assert x**3 + 2 * x - 0.5 * 1.7 == pytest.approx(0.0, abs=1e-12)
        assert chi_amplitude(ising_params, 0.0) == 0.0

    def test_negative_drive_rejected(self, ising_params):
        """Test that a negative drive is refused."""
        with pytest.raises(InvalidParameterError):
            chi_amplitude(ising_params, -1.0)


class TestCorrectedIntensity:
    """Test cases for the connecting-loss corrected intensity."""

    def test_reduces_without_connecting_loss(self, base_params):
        """Test equality with predicted_i0 when the connecting loss is zero."""
        assert i0_mod(base_params, 3, 1.1) == pytest.approx(predicted_i0(base_params, 14.0, 3))

    def test_isolated_site(self, ising_params):
        """Test (P - gamma) / 2 Gamma_NL at degree zero."""
        assert i0_mod(ising_params, 0, 0.8) == pytest.approx(5.0)

    def test_between_bounds(self, ising_params):
        """Test the corrected value lies between the XY value and the bare one."""
        value = i0_mod(ising_params, 1, solve_chi_cubic(ising_params))
        assert predicted_i0(ising_params, 14.0, 1) < value < 5.0


class TestReadout:
    """Test cases for spin extraction, homogeneity and energy read-out."""

    def test_extract_binary_phases(self, afm_pair, base_params, state_helper):
        """Test phases (0, pi) from psi = sqrt(I0) * (1, -1)."""
        network = compile_network(afm_pair, base_params, "uniform")
        amplitude = math.sqrt(4.75)
        spins = extract_spins(network, state_helper.spin_state(network, [amplitude, -amplitude]))
        np.testing.assert_allclose(np.abs(spins.config.phases), [0.0, math.pi])
        np.testing.assert_allclose(spins.intensities, [4.75, 4.75])

    def test_extract_empty_mode(self, fm_pair, base_params, state_helper):
        """Test that an empty spin mode raises EmptyCondensateError."""
        network = compile_network(fm_pair, base_params)
        with pytest.raises(EmptyCondensateError):
            extract_spins(network, state_helper.spin_state(network, [2.0, 0.0]))

    def test_uniform_homogeneity(self, triangle, base_params, state_helper):
        """Test that equal intensities give zero deviation."""
        network = compile_network(triangle, base_params)
        state = state_helper.spin_state(network, [2.0, -2.0, 2j])
        assert homogeneity_deviation(network, state) == pytest.approx(0.0)

    def test_unequal_homogeneity(self, fm_pair, base_params, state_helper):
        """Test the relative deviation of intensities 1 and 3."""
        network = compile_network(fm_pair, base_params)
        state = state_helper.spin_state(network, [1.0, math.sqrt(3.0)])
        assert homogeneity_deviation(network, state) == pytest.approx(0.5)

    def test_homogeneity_of_vacuum(self, fm_pair, base_params, state_helper):
        """Test that an all-zero state is signalled."""
        network = compile_network(fm_pair, base_params)
        with pytest.raises(EmptyCondensateError):
            homogeneity_deviation(network, state_helper.spin_state(network, [0.0, 0.0]))

    def test_fm_edge_aligned(self, fm_pair, base_params):
        """Test sum_chi2 = 2 (8J^2/gamma^2) I0 and e_spin = -1 for an aligned bond."""
        network = compile_network(fm_pair, base_params, "uniform")
        state = candidate_state(network, SpinConfig(np.array([0.4, 0.4])))
        sum_chi2, e_spin = readout_energy(network, state, "xy")
        assert sum_chi2 == pytest.approx(2 * 0.125 * 4.75)
        assert e_spin == pytest.approx(-1.0)

    def test_fm_edge_opposed(self, fm_pair, base_params):
        """Test e_spin = +1 for an unsatisfied bond."""
        network = compile_network(fm_pair, base_params, "uniform")
        state = candidate_state(network, SpinConfig(np.array([0.0, math.pi])))
        _, e_spin = readout_energy(network, state, "xy")
        assert e_spin == pytest.approx(1.0)

    def test_ising_calibration(self, afm_pair, ising_params):
        """Test the Ising read-out of a satisfied and an unsatisfied AFM bond."""
        network = compile_network(afm_pair, ising_params, "compensated")
        opposed = candidate_state(network, SpinConfig.from_signs([1, -1]))
        aligned = candidate_state(network, SpinConfig.from_signs([1, 1]))
        assert readout_energy(network, opposed, "ising").e_spin == pytest.approx(-1.0)
        assert readout_energy(network, aligned, "ising").e_spin == pytest.approx(1.0)

    def test_xy_readout_matches_spin_energy(self, base_params):
        """Test the affine calibration at arbitrary phases on a random graph."""
        graph = generate_random_graph(8, 0.5, 0.5, 17)
        network = compile_network(graph, base_params, "compensated")
        config = SpinConfig(np.random.default_rng(4).uniform(0, 2 * np.pi, 8))
        _, e_spin = readout_energy(network, candidate_state(network, config), "xy")
        assert e_spin == pytest.approx(spin_energy(graph, config), abs=1e-9)

    def test_below_threshold_readout(self, fm_pair, state_helper):
        """Test that a non-positive I0 raises BelowThresholdError."""
        network = compile_network(fm_pair, SimParams(p=4.2), "uniform")
        with pytest.raises(BelowThresholdError):
            readout_energy(network, state_helper.spin_state(network, [1.0, 1.0]), "xy")

    def test_unknown_calibration(self, fm_pair, base_params, state_helper):
        """Test that only xy and ising calibrations exist."""
        network = compile_network(fm_pair, base_params)
        with pytest.raises(InvalidParameterError):
            readout_energy(network, state_helper.spin_state(network, [1.0, 1.0]), "potts")


class TestIsingFixedPoint:
    """Test cases for fixed-point certification."""

    def test_aligned_fm_pair(self, fm_pair, ising_params):
        """Test that the aligned FM pair is a fixed point with connecting loss."""
        network = compile_network(fm_pair, ising_params, "compensated")
        assert ising_fixed_point_residual(network, SpinConfig.from_signs([1, 1])) < 1e-6

    def test_xy_limit_any_phases(self, fm_pair, base_params):
        """Test that every phase pair is stationary without connecting loss."""
        network = compile_network(fm_pair, base_params, "compensated")
        for delta in np.linspace(0.0, 2 * np.pi, 7):
            config = SpinConfig(np.array([0.0, delta]))
            residual = ising_fixed_point_residual(network, config, require_binary=False)
            assert residual < 1e-6

    def test_non_binary_with_loss(self, triangle, ising_params):
        """Test the negative control: generic phases are not a fixed point."""
        network = compile_network(triangle, ising_params, "compensated")
        config = SpinConfig(np.array([0.0, 1.1, 2.3]))
        assert ising_fixed_point_residual(network, config, require_binary=False) > 1e-3

    def test_non_binary_rejected(self, fm_pair, ising_params):
        """Test that a non-binary configuration is refused by default."""
        network = compile_network(fm_pair, ising_params, "compensated")
        with pytest.raises(InvalidInstanceError):
            ising_fixed_point_residual(network, SpinConfig(np.array([0.0, 1.0])))

    def test_exhaustive_small_graphs(self, ising_params):
        """Test every binary configuration of random graphs with up to six sites."""
        for n in range(2, 7):
            for seed in range(3):
                graph = generate_random_graph(n, 0.6, 0.5, seed)
                network = compile_network(graph, ising_params, "compensated")
                for signs in itertools.product((1, -1), repeat=n):
                    config = SpinConfig.from_signs(signs)
                    assert ising_fixed_point_residual(network, config) < 1e-6
