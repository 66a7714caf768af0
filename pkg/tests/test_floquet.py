import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from kerrchaos.errors import StatisticsError
from kerrchaos.floquet import (
    R_COE_PRINTED,
    R_POISSON_EXACT,
    R_POISSON_PRINTED,
    floquet_solve,
    floquet_spectrum,
    propagate_one_period,
    spacing_ratio,
)
from kerrchaos.model import (
    FockSpace,
    OscillatorParams,
    build_static_hamiltonian,
    params_from_targets,
)

from conftest import DRIVE_RATIO


class TestPropagator:
    def test_free_evolution_is_diagonal_phase(self):
        params = OscillatorParams(g3=0.0, g4=0.0, omega_d=DRIVE_RATIO)
        t_d = 2.0 * math.pi / params.omega_d
        u = propagate_one_period(params, FockSpace(8), steps=256)
        expected = np.diag(np.exp(-1j * np.arange(8) * t_d))
        assert np.max(np.abs(u - expected)) < 1e-11

    def test_undriven_matches_eigendecomposition(self):
        g3 = 25.7371 / 6000.0
        params = OscillatorParams(
            g3=g3, g4=20.0 * g3**2 / 69.0, omega_d=DRIVE_RATIO, Omega_d=0.0
        )
        space = FockSpace(32)
        t_d = 2.0 * math.pi / params.omega_d
        u = propagate_one_period(params, space, steps=256)
        u_exact = expm(-1j * build_static_hamiltonian(params, space) * t_d)
        assert np.max(np.abs(u - u_exact)) < 1e-10

    def test_step_doubling_self_consistency(self, point_a_params):
        t_d = 2.0 * math.pi / point_a_params.omega_d
        space = FockSpace(68)
        sols = []
        for steps in (512, 1024):
            u = propagate_one_period(point_a_params, space, steps=steps)
            sols.append(floquet_spectrum(u, t_d))
        e1 = np.sort(sols[0].converged_quasienergies())
        e2 = np.sort(sols[1].converged_quasienergies())
        m = min(e1.size, e2.size)
        drift = np.max(np.abs(e1[:m] - e2[:m]))
        assert drift < 1e-8 * point_a_params.omega_d

    def test_unitarity(self, point_a_solution):
        n = point_a_solution.N
        defect = np.max(
            np.abs(point_a_solution.U.conj().T @ point_a_solution.U - np.eye(n))
        )
        assert defect < 1e-9

    def test_second_order_composition_available(self, point_a_params):
        space = FockSpace(48)
        u4 = propagate_one_period(point_a_params, space, steps=512, order=4)
        u2 = propagate_one_period(point_a_params, space, steps=4096, order=2)
        # both must agree on the physical propagator
        assert np.max(np.abs(u4 - u2)) < 1e-6

    def test_rejects_bad_arguments(self, point_a_params):
        with pytest.raises(ValueError):
            propagate_one_period(point_a_params, FockSpace(16), steps=100)
        with pytest.raises(ValueError):
            propagate_one_period(point_a_params, FockSpace(16), steps=256, order=3)


class TestSpectrum:
    def test_free_evolution_folding(self):
        params = OscillatorParams(g3=0.0, g4=0.0, omega_d=DRIVE_RATIO)
        t_d = 2.0 * math.pi / params.omega_d
        u = propagate_one_period(params, FockSpace(8), steps=256)
        sol = floquet_spectrum(u, t_d)
        for j in range(8):
            n = int(np.argmax(np.abs(sol.states[:, j])))
            # e^{-i eps T} must equal e^{-i n w0 T}: eps = n w0 (mod w_d)
            phase_diff = (sol.quasienergies[j] - n * params.omega0) * t_d
            assert abs(math.remainder(phase_diff, 2.0 * math.pi)) < 1e-9

    def test_window_and_sorting(self, point_a_solution):
        eps_t = point_a_solution.quasienergies * point_a_solution.T_d
        assert np.all(eps_t > -math.pi) and np.all(eps_t <= math.pi)
        assert np.all(np.diff(point_a_solution.quasienergies) >= 0)

    def test_eigen_residual(self, point_a_solution):
        assert point_a_solution.max_residual < 1e-8

    def test_cat_pair_quasidegenerate_modulo_half_drive(
        self, point_a_solution, point_a_scales
    ):
        from kerrchaos.qphase import find_cat_pair

        pair = find_cat_pair(point_a_solution, point_a_scales)
        # the physical splitting (measured modulo omega_d/2) is far below
        # the mean spacing of the retained spectrum
        mean_spacing = 2.0 * math.pi / (
            point_a_solution.T_d * point_a_solution.converged.sum()
        )
        assert pair.splitting < 1e-2 * mean_spacing

    def test_time_origin_shift_leaves_spectrum(self, point_a_params):
        t_d = 2.0 * math.pi / point_a_params.omega_d
        space = FockSpace(68)
        sols = []
        for t0 in (0.0, 0.5 * t_d):
            u = propagate_one_period(point_a_params, space, steps=512, t0=t0)
            sols.append(floquet_spectrum(u, t_d))
        e1 = np.sort(sols[0].converged_quasienergies())
        e2 = np.sort(sols[1].converged_quasienergies())
        m = min(e1.size, e2.size)
        assert np.max(np.abs(e1[:m] - e2[:m])) < 1e-8 * point_a_params.omega_d

    def test_retained_set_stable_under_truncation_growth(self, point_a_params):
        t_d = 2.0 * math.pi / point_a_params.omega_d
        eps = {}
        for n in (96, 144):
            u = propagate_one_period(point_a_params, FockSpace(n), steps=512)
            eps[n] = floquet_spectrum(u, t_d).converged_quasienergies()
        small, big = np.sort(eps[96]), np.sort(eps[144])
        matched = sum(
            1 for e in small if np.min(np.abs(big - e)) < 1e-6 * point_a_params.omega_d
        )
        assert matched / small.size > 0.99

    def test_undriven_statistics_not_orthogonal_ensemble(self):
        # without the drive the folded static spectrum stays uncorrelated
        params = params_from_targets(3.3e-3, 5.0)
        undriven = OscillatorParams(
            g3=params.g3, g4=params.g4, omega_d=params.omega_d, Omega_d=0.0
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sol = floquet_solve(undriven, n=256, steps=512)
            stats = sol.spacing_stats(min_levels=3)
        assert abs(stats.r_tilde - R_POISSON_EXACT) < abs(stats.r_tilde - 0.5307)
        assert stats.r_tilde < 0.47

    def test_csv_dump(self, point_a_solution, tmp_path):
        out = tmp_path / "spectrum.csv"
        point_a_solution.write_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "j,quasienergy_over_w0,converged,mean_n"
        assert len(lines) == point_a_solution.N + 1
        first = lines[1].split(",")
        assert float(first[1]) == pytest.approx(
            point_a_solution.quasienergies[0], rel=1e-15
        )


class TestSpacingRatio:
    def test_picket_fence_is_exactly_one(self):
        levels = np.arange(50) / 50.0
        stats = spacing_ratio(levels, 1.0, min_levels=3)
        assert stats.r_tilde == pytest.approx(1.0, abs=1e-12)

    def test_poisson_monte_carlo(self):
        rng = np.random.default_rng(2024)
        levels = np.sort(rng.uniform(0.0, 1.0, 100_000))
        stats = spacing_ratio(levels, 1.0)
        assert abs(stats.r_tilde - 0.386) < 0.005
        assert abs(stats.r_tilde - R_POISSON_EXACT) < 0.005

    def test_renormalization_endpoints(self):
        # the printed reference constants pin the r_bar scale
        rng = np.random.default_rng(5)
        levels = np.sort(rng.uniform(0.0, 1.0, 50_000))
        stats = spacing_ratio(levels, 1.0)
        assert stats.r_bar == pytest.approx(
            (stats.r_tilde - R_POISSON_PRINTED) / (R_COE_PRINTED - R_POISSON_PRINTED),
            rel=1e-12,
        )
        analytic = spacing_ratio(levels, 1.0, r_reference=(R_POISSON_EXACT, 0.5307))
        assert analytic.r_tilde == stats.r_tilde
        assert analytic.r_bar != stats.r_bar

    def test_shift_and_rescale_invariance(self):
        rng = np.random.default_rng(8)
        levels = np.sort(rng.uniform(0.0, 2.0, 400))
        base = spacing_ratio(levels, 2.0)
        shifted = spacing_ratio((levels + 0.37) % 2.0, 2.0)
        scaled = spacing_ratio(5.0 * levels, 10.0)
        assert shifted.r_tilde == pytest.approx(base.r_tilde, rel=1e-12)
        assert scaled.r_tilde == pytest.approx(base.r_tilde, rel=1e-12)

    def test_wraparound_included(self):
        # three levels on a circle: only the wrap spacing makes 3 ratios
        stats = spacing_ratio(np.array([0.0, 0.1, 0.5]), 1.0, min_levels=3)
        assert stats.count == 3

    def test_too_few_levels(self):
        with pytest.raises(StatisticsError):
            spacing_ratio(np.array([0.0, 0.5]), 1.0)

    def test_below_floor_warns(self):
        with pytest.warns(UserWarning, match="retained levels"):
            spacing_ratio(np.arange(10) / 10.0, 1.0, min_levels=50)

    def test_degenerate_pairs_count_as_zero_ratio(self):
        levels = np.array([0.0, 0.0, 0.3, 0.6])
        stats = spacing_ratio(levels, 1.0, min_levels=3)
        assert np.isfinite(stats.r_tilde)
        assert stats.r_tilde < 0.6
