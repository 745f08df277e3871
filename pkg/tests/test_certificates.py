"""Certificate formulas, monotonicity, regime consistency, error-bound
transfer constants, and the empirical error-bound modulus."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modelcert.certificates import (
    ErrorBoundEstimate,
    cert_exact_quadratic,
    cert_general_growth,
    cert_general_model_decrease,
    cert_inexact_optimal,
    cert_model_decrease,
    cert_prox_subgradient,
    estimate_slope_error_bound_L,
    inexact_error_bound,
    kl_to_slope_bound,
    model_error_bound,
    prox_stationary_error_bound,
    slope_bound_to_kl,
    step_error_bound,
    validity_flags,
)
from modelcert.grids import GridFunction, PointSet, find_certificate_witness
from modelcert.growth import GrowthFunction

pos = st.floats(1e-3, 1e3)
nonneg = st.floats(0.0, 1e3)


class TestGeneralGrowth:
    def test_quadratic_case_within_specialized_bound(self):
        w = GrowthFunction.quadratic(2.0)
        c = cert_general_growth(w, 0.3)
        assert c.point_radius == pytest.approx(0.3)
        assert c.value_gap == pytest.approx(0.5 * 2.0 * 0.09)
        assert c.slope_bound <= cert_exact_quadratic(2.0, 0.3).slope_bound

    def test_zero_step(self):
        c = cert_general_growth(GrowthFunction.quadratic(5.0), 0.0)
        assert (c.point_radius, c.value_gap, c.slope_bound) == (0.0, 0.0, 0.0)

    def test_cubic_growth(self):
        # omega = t^3/3: radius 2/3, gap 1/3, slope 1 + (5/3)^2
        c = cert_general_growth(GrowthFunction.power(1.0, 3.0), 1.0)
        assert c.point_radius == pytest.approx(2.0 / 3.0)
        assert c.value_gap == pytest.approx(1.0 / 3.0)
        assert c.slope_bound == pytest.approx(1.0 + (5.0 / 3.0) ** 2)


class TestExactQuadratic:
    def test_formula(self):
        c = cert_exact_quadratic(1.0, 0.2)
        assert (c.point_radius, c.value_gap, c.slope_bound) == (0.2, pytest.approx(0.02), 1.0)

    def test_zero_step(self):
        c = cert_exact_quadratic(7.0, 0.0)
        assert (c.point_radius, c.value_gap, c.slope_bound) == (0.0, 0.0, 0.0)

    def test_second_step_of_the_sharp_example(self):
        # d = 0.225 with eta = 1: slope bound 1.125 and a grid witness with
        # slope 0 near the sharp minimum
        c = cert_exact_quadratic(1.0, 0.225)
        assert c.slope_bound == pytest.approx(1.125)
        grid = GridFunction.sample_vectorized(
            lambda X: np.abs(0.5 * X[:, 0] ** 2 + X[:, 0]), [(-3.0, 3.0)], 1e-3
        )
        w = find_certificate_witness(grid, [0.25], [0.025], eta=1.0)
        assert w is not None and w.slope <= 1.125


class TestInexactOptimal:
    def test_eps_zero_collapses(self):
        c = cert_inexact_optimal(1.0, 0.0, 0.2)
        assert c.point_radius == pytest.approx(0.2)
        assert c.value_gap == pytest.approx(0.06)
        assert c.slope_bound == pytest.approx(0.6)

    def test_pure_tolerance(self):
        c = cert_inexact_optimal(3.0, 0.01, 0.0)
        assert c.slope_bound == pytest.approx(0.6)

    def test_mixed(self):
        c = cert_inexact_optimal(1.0, 0.03, 0.1)
        assert c.point_radius == pytest.approx(0.3)
        assert c.slope_bound == pytest.approx(0.9)


class TestModelDecrease:
    def test_formula(self):
        c = cert_model_decrease(3.0, 0.25)
        assert c.point_radius == pytest.approx(1.0 / 3.0)
        assert c.value_gap == pytest.approx(1.0 / 12.0)
        assert c.slope_bound == pytest.approx(3.0)

    def test_zero_decrease(self):
        c = cert_model_decrease(2.0, 0.0)
        assert (c.point_radius, c.value_gap, c.slope_bound) == (0.0, 0.0, 0.0)

    def test_first_decrease_of_the_sharp_example(self):
        # f(1) - inf f_1 = 1.5 - 0.28125 with eta = 1
        delta = 1.5 - 0.28125
        c = cert_model_decrease(1.0, delta)
        assert c.slope_bound == pytest.approx(math.sqrt(14.625))
        grid = GridFunction.sample_vectorized(
            lambda X: np.abs(0.5 * X[:, 0] ** 2 + X[:, 0]), [(-3.0, 3.0)], 1e-3
        )
        from modelcert.grids import find_witness, witness_slack

        w = find_witness(grid, [1.0], 1.5, c.point_radius, c.value_gap, c.slope_bound,
                         witness_slack(1.0, 1e-3))
        assert w is not None


class TestGeneralModelDecrease:
    def test_quadratic_default_tradeoff_recovers_specialized(self):
        for eta, delta in ((1.0, 0.5), (3.0, 0.25), (0.4, 2.0)):
            g = cert_general_model_decrease(GrowthFunction.quadratic(eta), delta)
            q = cert_model_decrease(eta, delta)
            assert g.point_radius == pytest.approx(q.point_radius)
            assert g.value_gap == pytest.approx(q.value_gap)
            assert g.slope_bound == pytest.approx(q.slope_bound)

    def test_zero_decrease(self):
        c = cert_general_model_decrease(GrowthFunction.power(1.0, 3.0), 0.0)
        assert (c.point_radius, c.value_gap, c.slope_bound) == (0.0, 0.0, 0.0)

    def test_explicit_tradeoff(self):
        # omega = t^2 (eta = 2), delta = 1, c = 1: r_z = 1, radius 2, slope 7
        c = cert_general_model_decrease(GrowthFunction.power(2.0, 2.0), 1.0, c=1.0)
        assert c.point_radius == pytest.approx(2.0)
        assert c.value_gap == pytest.approx(2.0)
        assert c.slope_bound == pytest.approx(7.0)


class TestProxSubgradient:
    def test_all_zero(self):
        c = cert_prox_subgradient(1.0, 1.0, 0.0, 0.0)
        assert (c.point_radius, c.value_gap, c.slope_bound) == (0.0, 0.0, 0.0)

    def test_common_eta_gives_four_eta_d(self):
        eta, v, d = 2.0, 0.05, 0.3
        c = cert_prox_subgradient(eta, eta, v, d)
        assert c.slope_bound == pytest.approx(v + 4.0 * eta * d)

    def test_mixed(self):
        c = cert_prox_subgradient(1.0, 1.0, 0.1, 0.2)
        assert c.slope_bound == pytest.approx(0.9)
        assert c.point_radius == pytest.approx(0.2)


class TestMonotonicity:
    @given(pos, nonneg, nonneg)
    @settings(max_examples=100, deadline=None)
    def test_exact_quadratic(self, eta, d, bump):
        a, b = cert_exact_quadratic(eta, d), cert_exact_quadratic(eta, d + bump)
        assert b.point_radius >= a.point_radius
        assert b.value_gap >= a.value_gap
        assert b.slope_bound >= a.slope_bound

    @given(pos, nonneg, nonneg, nonneg, nonneg)
    @settings(max_examples=100, deadline=None)
    def test_inexact_optimal(self, eta, eps, d, bump_eps, bump_d):
        a = cert_inexact_optimal(eta, eps, d)
        b = cert_inexact_optimal(eta, eps + bump_eps, d + bump_d)
        assert b.point_radius >= a.point_radius
        assert b.value_gap >= a.value_gap
        assert b.slope_bound >= a.slope_bound

    @given(pos, nonneg, nonneg)
    @settings(max_examples=100, deadline=None)
    def test_model_decrease(self, eta, delta, bump):
        a, b = cert_model_decrease(eta, delta), cert_model_decrease(eta, delta + bump)
        assert b.point_radius >= a.point_radius
        assert b.value_gap >= a.value_gap
        assert b.slope_bound >= a.slope_bound

    @given(pos, pos, nonneg, nonneg, nonneg, nonneg)
    @settings(max_examples=100, deadline=None)
    def test_prox_subgradient(self, e1, e2, v, d, bump_v, bump_d):
        a = cert_prox_subgradient(e1, e2, v, d)
        b = cert_prox_subgradient(e1, e2, v + bump_v, d + bump_d)
        assert b.point_radius >= a.point_radius
        assert b.value_gap >= a.value_gap
        assert b.slope_bound >= a.slope_bound


class TestRegimeConsistency:
    @given(pos, nonneg)
    @settings(max_examples=100, deadline=None)
    def test_inexact_with_zero_eps_dominated_by_exact(self, eta, d):
        inexact = cert_inexact_optimal(eta, 0.0, d)
        exact = cert_exact_quadratic(eta, d)
        assert inexact.point_radius == pytest.approx(exact.point_radius)
        assert inexact.slope_bound <= exact.slope_bound + 1e-12

    def test_vanishing_observables_vanish(self):
        for c in (
            cert_exact_quadratic(2.0, 0.0),
            cert_inexact_optimal(2.0, 0.0, 0.0),
            cert_model_decrease(2.0, 0.0),
            cert_general_growth(GrowthFunction.quadratic(2.0), 0.0),
            cert_prox_subgradient(2.0, 2.0, 0.0, 0.0),
        ):
            assert c.point_radius == 0.0 and c.value_gap == 0.0 and c.slope_bound == 0.0


class TestErrorBoundFormulas:
    def test_step(self):
        assert step_error_bound(2.0, 1.0, 0.1) == pytest.approx(0.8)

    def test_inexact(self):
        # mu = 2 sqrt(1 * 9) = 6; 6*0.1 + 13*0.1 = 1.9
        assert inexact_error_bound(1.0, 1.0, 0.01, 0.1) == pytest.approx(1.9)

    def test_model_vanishes_with_decrease(self):
        assert model_error_bound(1.0, 3.0, 0.0) == 0.0
        assert model_error_bound(1.0, 3.0, 1e-12) < 1e-5

    def test_prox_stationary(self):
        assert prox_stationary_error_bound(2.0, 1.0, 0.1, 0.05) == pytest.approx(
            2.0 * 0.1 + 10.0 * 0.05
        )


class TestKLConversion:
    def test_parabola_constants(self):
        const, expo = kl_to_slope_bound(0.5, 0.5)
        assert const == pytest.approx(0.5)
        assert expo == pytest.approx(1.0)

    def test_alpha_two(self):
        const, expo = kl_to_slope_bound(0.5, 2.0)
        assert const == pytest.approx(8.0)
        assert expo == pytest.approx(1.0)

    def test_theta_out_of_range(self):
        with pytest.raises(ValueError):
            kl_to_slope_bound(1.0, 1.0)
        with pytest.raises(ValueError):
            kl_to_slope_bound(0.0, 1.0)

    def test_converse_constant(self):
        const, threshold = slope_bound_to_kl(0.5, 0.0)
        assert const == pytest.approx(math.sqrt(0.5))
        assert threshold is None

    def test_converse_threshold(self):
        const, threshold = slope_bound_to_kl(1.0, 2.0, r=0.3, epsilon=0.4)
        assert const == pytest.approx(math.sqrt(2.0))
        assert threshold == pytest.approx(min(0.3, 2.0 * 0.16))

    def test_parabola_round_trip(self):
        # forward on t^2 gives |t| <= 0.5 * |2t| with equality; converse
        # sqrt(L) = sqrt(0.5) validates sqrt(f) <= sqrt(L) * slope
        const, expo = kl_to_slope_bound(0.5, 0.5)
        for t in np.linspace(-1, 1, 41):
            assert abs(t) <= const * (2 * abs(t)) ** expo + 1e-12
            assert math.sqrt(t * t) <= math.sqrt(0.5) * 2 * abs(t) + 1e-12


class TestEmpiricalModulus:
    def test_parabola(self):
        grid = GridFunction.sample_vectorized(lambda X: X[:, 0] ** 2, [(-1.0, 1.0)], 1e-3)
        L = estimate_slope_error_bound_L(grid, PointSet([[0.0]]), [0.0], 1.0)
        assert L == pytest.approx(0.5, abs=0.02)

    def test_vee(self):
        grid = GridFunction.sample_vectorized(lambda X: np.abs(X[:, 0]), [(-1.0, 1.0)], 1e-3)
        L = estimate_slope_error_bound_L(grid, PointSet([[0.0]]), [0.0], 1.0)
        assert L == pytest.approx(1.0, abs=1e-6)

    def test_folded_parabola(self):
        grid = GridFunction.sample_vectorized(
            lambda X: np.abs(0.5 * X[:, 0] ** 2 + X[:, 0]), [(-3.0, 3.0)], 1e-3
        )
        L = estimate_slope_error_bound_L(grid, PointSet([[-2.0], [0.0]]), [0.0], 0.5)
        assert L == pytest.approx(1.0, abs=0.05)

    def test_hypothesis_failure_detected(self):
        # a flat shelf away from S has zero slope but positive distance
        grid = GridFunction.sample_vectorized(
            lambda X: np.maximum(np.abs(X[:, 0]) - 0.3, 0.0), [(-1.0, 1.0)], 1e-3
        )
        with pytest.raises(ValueError, match="hypothesis fails"):
            estimate_slope_error_bound_L(grid, PointSet([[0.0]]), [0.0], 0.8)

    def test_ball_must_fit(self):
        grid = GridFunction.sample_vectorized(lambda X: X[:, 0] ** 2, [(-1.0, 1.0)], 1e-3)
        with pytest.raises(ValueError, match="ball"):
            estimate_slope_error_bound_L(grid, PointSet([[0.0]]), [0.5], 1.0)


class TestValidityFlags:
    def test_step_regime_guards(self):
        est = ErrorBoundEstimate(L=1.0, gamma=0.9, x_star=[0.0], eta=2.0)
        flags = validity_flags(est, "exact-step", [0.1], x_plus=[0.05])
        assert flags == {"x_in_third_ball": True, "x_plus_in_third_ball": True}
        flags = validity_flags(est, "exact-step", [0.5], x_plus=[0.05])
        assert not flags["x_in_third_ball"]

    def test_decrease_regime_guards(self):
        est = ErrorBoundEstimate(L=1.0, gamma=0.8, x_star=[0.0], eta=2.0)
        flags = validity_flags(est, "model-decrease", [0.1], delta=0.01)
        assert flags["x_in_half_ball"] and flags["decrease_below_threshold"]
        flags = validity_flags(est, "model-decrease", [0.1], delta=10.0)
        assert not flags["decrease_below_threshold"]

    def test_inexact_regime_guards(self):
        est = ErrorBoundEstimate(L=1.0, gamma=0.9, x_star=[0.0], eta=1.0)
        flags = validity_flags(est, "inexact-optimal", [0.1], x_plus=[0.12], eps=1e-6)
        assert flags["eps_small"] and flags["step_small"] and flags["x_plus_in_third_ball"]
