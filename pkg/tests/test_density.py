"""Tests of the analytic density kernels and quadrature."""

from __future__ import annotations

import numpy as np
import pytest

import _oracles
from extremal import (
    BoxDomain,
    QuadratureError,
    RngSeed,
    ScalarField,
    ShiftedOffset,
    adaptive_simpson,
    build_measure_table,
    closed_form_rho_delta,
    eval_I,
    eval_Phi,
    eval_Psi,
    joint_density_grid,
    joint_density_k,
    joint_density_k_mc,
    joint_location_value_grid,
    marginal_argmin_density,
    min_value_density,
    rho_delta_integral,
)

LAM1 = ScalarField.constant(1.0)
G0 = ScalarField.constant(0.0)
G_LIN = ScalarField.poly(np.array([0.0, 1.0]))
G_SQ = ScalarField.poly(np.array([0.0, 0.0, 1.0]))


def unit_domain(cells: int = 1) -> BoxDomain:
    return BoxDomain(dim=1, lower=(0.0,), upper=(1.0,), cells_per_axis=cells)


def table(cells=1, lam=LAM1, g=G0):
    return build_measure_table(unit_domain(cells), lam, g)


class TestAdaptiveSimpson:
    def test_exact_on_cubic(self):
        got = adaptive_simpson(lambda x: x**3 - 2 * x + 1, 0.0, 2.0)
        assert got == pytest.approx(4.0 - 4.0 + 2.0, abs=1e-12)

    def test_smooth_integral(self):
        got = adaptive_simpson(np.exp, 0.0, 1.0, rel_tol=1e-10)
        assert got == pytest.approx(np.e - 1.0, rel=1e-10)

    def test_kinked_integrand(self):
        got = adaptive_simpson(lambda x: abs(x - 0.3), 0.0, 1.0, rel_tol=1e-8)
        assert got == pytest.approx(0.3**2 / 2 + 0.7**2 / 2, rel=1e-7)

    def test_depth_exhaustion_raises_with_estimate(self):
        with pytest.raises(QuadratureError) as err:
            adaptive_simpson(lambda x: np.sqrt(abs(x)), -1.0, 1.0, rel_tol=1e-14, max_depth=3)
        assert np.isfinite(err.value.estimate)

    def test_empty_interval(self):
        assert adaptive_simpson(np.exp, 1.0, 1.0) == 0.0


class TestPhiPsi:
    def test_phi_trivial_unit(self):
        assert eval_Phi(table(), [0.5]) == 1.0

    def test_phi_trivial_rate_two(self):
        t = table(lam=ScalarField.constant(2.0))
        assert eval_Phi(t, [0.5]) == pytest.approx(0.5, abs=1e-15)

    def test_phi_quadratic_offset_continuum(self):
        t = table(cells=1000, g=G_SQ)
        # continuum value at g(x)=1 is exp(-2/3)
        got = float(eval_Phi(t, [1.0 - 1e-9]))
        assert got == pytest.approx(np.exp(-2.0 / 3.0), abs=2e-3)

    def test_phi_matches_brute_quadrature(self):
        t = table(cells=200, lam=ScalarField.poly(np.array([1.0, 1.0])), g=G_SQ)
        for x in (0.05, 0.45, 0.95):
            exact = float(eval_Phi(t, [x]))
            brute = _oracles.brute_phi(t, [x])
            assert exact == pytest.approx(brute, abs=1e-6)

    def test_psi_trivials(self):
        t = table()
        assert eval_Psi(t, [0.5], 1.0) == pytest.approx(np.exp(-1.0), abs=1e-15)
        assert eval_Psi(t, [0.5], 0.5) == pytest.approx(np.exp(-0.5), abs=1e-15)
        t2 = table(g=ScalarField.constant(2.0))
        assert eval_Psi(t2, [0.5], 1.5) == 0.0

    def test_psi_matches_brute(self):
        t = table(cells=150, g=G_LIN)
        for tv in (0.1, 0.49, 0.8, 2.0):
            assert eval_Psi(t, [0.25], tv) == pytest.approx(
                _oracles.brute_psi(t, [0.25], tv), abs=1e-12
            )

    def test_phi_vectorized_points(self):
        t = table(cells=64, g=G_LIN)
        xs = np.array([[0.1], [0.5], [0.9]])
        vec = eval_Phi(t, xs)
        assert vec.shape == (3,)
        for i, x in enumerate(xs):
            assert vec[i] == eval_Phi(t, x)


class TestMarginalDensity:
    def test_uniform(self):
        grid = marginal_argmin_density(table(cells=16))
        assert np.allclose(grid.values, 1.0, atol=1e-14)
        assert grid.total_mass() == pytest.approx(1.0, abs=1e-14)

    def test_rate_proportional_when_offset_flat(self):
        lam = ScalarField.poly(np.array([1.0, 1.0]))
        t = table(cells=128, lam=lam)
        grid = marginal_argmin_density(t)
        assert np.allclose(grid.values, t.lambda_cells / t.lambda_bar, atol=1e-14)

    def test_quadratic_offset_matches_closed_form(self):
        t = table(cells=2000, g=G_SQ)
        grid = marginal_argmin_density(t)
        ref = np.array([closed_form_rho_delta(1.0, y) for y in grid.centers[:, 0]])
        assert np.max(np.abs(grid.values - ref)) < 5e-4

    def test_normalized_for_random_fields(self):
        gen = np.random.default_rng(1)
        for _ in range(5):
            lam = ScalarField.poly(np.array([1.0 + gen.random(), gen.random()]))
            g = ScalarField.poly(gen.uniform(-1.0, 1.0, 4))
            grid = marginal_argmin_density(table(cells=300, lam=lam, g=g))
            assert grid.total_mass() == pytest.approx(1.0, abs=1e-12)


class TestMinValueDensity:
    def test_flat_offset_is_exponential(self):
        mvd = min_value_density(table())
        ts = np.linspace(0.0, 5.0, 11)
        assert np.allclose(mvd(ts), np.exp(-ts), atol=1e-14)
        assert np.allclose(mvd.cdf(ts), -np.expm1(-ts), atol=1e-14)

    def test_constant_offset_shifts(self):
        mvd = min_value_density(table(g=ScalarField.constant(2.0)))
        assert mvd(1.9) == 0.0
        assert mvd(3.0) == pytest.approx(np.exp(-1.0), abs=1e-14)

    def test_ppf_inverts_cdf(self):
        mvd = min_value_density(table(cells=200, g=G_SQ))
        q = np.linspace(0.001, 0.999, 57)
        assert np.allclose(mvd.cdf(mvd.ppf(q)), q, atol=1e-12)

    def test_density_integrates_to_one(self):
        t = table(cells=150, lam=ScalarField.poly(np.array([0.5, 1.0])), g=G_LIN)
        mvd = min_value_density(t)
        hi = float(mvd.ppf(1.0 - 1e-12))
        got = adaptive_simpson(lambda s: float(mvd(s)), t.support_min, hi, rel_tol=1e-9)
        assert got == pytest.approx(1.0, abs=1e-8)

    def test_grid_masses(self):
        mvd = min_value_density(table(cells=50, g=G_LIN))
        edges = np.linspace(0.0, 4.0, 21)
        grid = mvd.grid(edges)
        assert grid.kind == "marginal-min-value"
        assert grid.total_mass() == pytest.approx(float(mvd.cdf(4.0)), abs=1e-12)


class TestShiftedOffset:
    def test_table_matches_direct_build(self):
        dom = unit_domain(300)
        base = build_measure_table(dom, LAM1, G_LIN)
        for r in (0.0005, 0.2, 0.7, 1.5):
            shifted = ShiftedOffset(base, r).table
            clipped = ScalarField.grid(np.maximum(base.g_cells - r, 0.0))
            direct = build_measure_table(dom, LAM1, clipped)
            assert np.allclose(shifted.h_breakpoints, direct.h_breakpoints, atol=1e-15)
            assert np.allclose(shifted.h_values, direct.h_values, atol=1e-14)
            assert np.allclose(shifted.i_values, direct.i_values, atol=1e-14)

    def test_shift_below_support_is_pure_translation(self):
        base = build_measure_table(unit_domain(100), LAM1, ScalarField.constant(1.0))
        sh = ShiftedOffset(base, 0.25).table
        assert sh.h_breakpoints[0] == pytest.approx(0.75, abs=1e-15)
        assert sh.g_cells[0] == pytest.approx(0.75, abs=1e-15)

    def test_shift_beyond_support_collapses_to_zero(self):
        base = build_measure_table(unit_domain(50), LAM1, G_LIN)
        sh = ShiftedOffset(base, 5.0).table
        assert sh.h_breakpoints.tolist() == [0.0]
        assert sh.h_values.tolist() == [1.0]
        assert np.all(sh.g_cells == 0.0)

    def test_exponent_telescopes(self):
        # I_{(g-r)+}(t) == I(r + t) - I(r) for t >= 0
        base = build_measure_table(unit_domain(80), LAM1, G_SQ)
        for r in (0.1, 0.33, 0.9):
            sh = ShiftedOffset(base, r).table
            for t in (0.05, 0.4, 1.7):
                lhs = float(eval_I(sh, t))
                rhs = float(eval_I(base, r + t)) - float(eval_I(base, r))
                assert lhs == pytest.approx(rhs, abs=1e-13)


class TestJointDensity:
    def test_flat_scenario_is_uniform(self):
        t = table()
        assert joint_density_k(t, [[0.3], [0.7]]) == pytest.approx(1.0, abs=1e-5)
        assert joint_density_k(t, [[0.9], [0.1], [0.5]]) == pytest.approx(1.0, abs=1e-5)

    def test_k_out_of_range(self):
        t = table()
        with pytest.raises(ValueError):
            joint_density_k(t, [[0.5]])
        with pytest.raises(ValueError):
            joint_density_k(t, [[0.1], [0.2], [0.3], [0.4]])

    def test_matches_literal_kernel_product(self):
        # same density through the record kernels evaluated on shifted tables,
        # with an independent outer quadrature
        t = table(cells=40, lam=ScalarField.poly(np.array([1.0, 0.5])), g=G_LIN)
        x1, x2 = np.array([[0.275]]), np.array([[0.725]])
        lam_c = t.lambda_cells[t.domain.cell_index(np.vstack([x1, x2]))]

        def integrand(r: float) -> float:
            psi = eval_Psi(t, x1, r)
            if psi == 0.0:
                return 0.0
            return psi * float(eval_Phi(ShiftedOffset(t, r).table, x2))

        # integrate from g(x1), where the indicator inside Psi switches on;
        # the integrand has a kink at every offset level, so integrate each
        # smooth piece separately
        g1 = float(t.g_cells[t.domain.cell_index(x1)][0])
        hi = t.support_min + 40.0 / t.lambda_bar
        brk = t.h_breakpoints
        nodes = np.concatenate([[g1], brk[(brk > g1) & (brk < hi)], [hi]])
        pieces = sum(
            adaptive_simpson(integrand, float(nodes[i]), float(nodes[i + 1]), rel_tol=1e-9)
            for i in range(nodes.size - 1)
        )
        literal = float(np.prod(lam_c)) * pieces
        fast = joint_density_k(t, np.vstack([x1, x2]), rel_tol=1e-9)
        assert fast == pytest.approx(literal, rel=1e-6)

    def test_marginalization_recovers_k1(self):
        t = table(cells=10, lam=ScalarField.poly(np.array([1.0, 1.0])), g=G_LIN)
        joint = joint_density_grid(t, rel_tol=1e-8)
        marg = joint.marginal_of_joint(axis=0)
        ref = marginal_argmin_density(t)
        assert np.max(np.abs(marg.values - ref.values)) < 1e-5
        assert joint.total_mass() == pytest.approx(1.0, abs=1e-6)

    def test_asymmetry_with_offset(self):
        # the first argmin is likelier where g is low
        t = table(cells=10, g=G_LIN)
        lo, hi = np.array([[0.05]]), np.array([[0.95]])
        assert joint_density_k(t, np.vstack([lo, hi])) > joint_density_k(
            t, np.vstack([hi, lo])
        )

    def test_quadrature_error_carries_estimate(self):
        with pytest.raises(QuadratureError) as err:
            joint_density_k(table(), [[0.2], [0.8]], rel_tol=1e-15, max_depth=3)
        assert np.isfinite(err.value.estimate)

    def test_mc_agrees_with_quadrature(self):
        t = table(cells=50, lam=ScalarField.poly(np.array([1.0, 1.0])), g=G_LIN)
        locs = np.array([[0.21], [0.61], [0.81]])
        exact = joint_density_k(t, locs)
        est, stderr = joint_density_k_mc(t, locs, 40_000, RngSeed(5))
        assert stderr > 0
        assert abs(est - exact) < 5 * stderr

    def test_mc_flat_k4(self):
        t = table()
        locs = np.array([[0.1], [0.3], [0.5], [0.7]])
        est, stderr = joint_density_k_mc(t, locs, 60_000, RngSeed(6))
        assert est == pytest.approx(1.0, abs=5 * stderr + 1e-12)


class TestJointLocationValue:
    def test_masses_sum_to_one(self):
        t = table(cells=100, g=G_LIN)
        mvd = min_value_density(t)
        edges = np.linspace(0.0, float(mvd.ppf(1.0 - 1e-10)), 400)
        grid = joint_location_value_grid(t, edges)
        assert grid.kind == "joint-1"
        assert grid.total_mass() == pytest.approx(1.0, abs=1e-8)

    def test_location_marginal_consistent(self):
        t = table(cells=60, g=G_LIN)
        mvd = min_value_density(t)
        edges = np.linspace(0.0, float(mvd.ppf(1.0 - 1e-12)), 600)
        grid = joint_location_value_grid(t, edges)
        loc_masses = grid.masses().sum(axis=1)
        ref = marginal_argmin_density(t).masses()
        assert np.max(np.abs(loc_masses - ref)) < 1e-10


class TestClosedFormRho:
    def test_value_at_one(self):
        assert closed_form_rho_delta(1.0, 1.0) == pytest.approx(
            np.exp(-2.0 / 3.0), abs=1e-10
        )

    def test_normalization(self):
        for delta in (0.1, 1.0, 10.0):
            assert rho_delta_integral(delta) == pytest.approx(1.0, abs=1e-8)

    def test_printed_term_breaks_normalization_at_large_delta(self):
        assert abs(rho_delta_integral(10.0, printed_term=True) - 1.0) > 0.1

    def test_printed_term_agrees_at_delta_one(self):
        ys = np.linspace(0.0, 1.0, 9)
        for y in ys:
            assert closed_form_rho_delta(1.0, y, printed_term=True) == pytest.approx(
                closed_form_rho_delta(1.0, y), abs=1e-14
            )

    def test_small_delta_concentrates_near_zero(self):
        assert closed_form_rho_delta(0.01, 0.02) > 100.0 * closed_form_rho_delta(0.01, 0.5)
        assert closed_form_rho_delta(0.01, 0.9) < 1e-6
        # most of the mass sits below y = 0.4
        tail = adaptive_simpson(lambda y: closed_form_rho_delta(0.01, y), 0.4, 1.0, 1e-9)
        assert tail < 1e-3

    def test_large_delta_nearly_flat(self):
        vals = np.array([closed_form_rho_delta(10.0, y) for y in np.linspace(0, 1, 21)])
        assert vals.min() > 0.8 * vals.max()

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            closed_form_rho_delta(0.0, 0.5)
        with pytest.raises(ValueError):
            closed_form_rho_delta(-1.0, 0.5)
        with pytest.raises(ValueError):
            closed_form_rho_delta(1.0, 1.5)
