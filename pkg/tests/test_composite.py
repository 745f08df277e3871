"""Prox-linear models, exact subproblem solvers, the outer loop and its
rate ledger, schedules, and the complexity formula."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modelcert.composite import (
    CompositeProblem,
    Gpart,
    Hpart,
    StopRule,
    ToleranceSchedule,
    UnboundedObjectiveError,
    build_prox_linear_model,
    complexity_estimate,
    model_error_max,
    prox_linear_step,
    run_prox_linear,
)
from modelcert.problems import get_problem
from modelcert.subsolver import SupportSet


def scalar_problem(g, h, c, jac, beta, box=(-3.0, 3.0), l=None, c_batch=None, name="t"):
    return CompositeProblem(g=g, h=h, c=c, jacobian=jac, beta=beta, l=l,
                            working_box=[box], c_batch=c_batch, name=name)


@pytest.fixture(scope="module")
def footnote():
    return get_problem("footnote")


class TestModelConstruction:
    def test_footnote_model_display(self, footnote):
        # at x = 1 the model is |1.5 + 2 (y - 1)| + (y - 1)^2 / 2
        m = build_prox_linear_model(footnote.problem, [1.0])
        for y in (-2.0, -0.3, 0.25, 1.0, 2.4):
            expected = abs(1.5 + 2.0 * (y - 1.0)) + 0.5 * (y - 1.0) ** 2
            assert m.evaluate([y]) == pytest.approx(expected, rel=1e-14)
        assert m.minimize_hint == "piecewise-1d"

    def test_model_agrees_with_f_at_base(self, footnote):
        for x in (-2.5, -1.0, 0.0, 0.7, 2.0):
            m = build_prox_linear_model(footnote.problem, [x])
            assert m.evaluate([x]) == pytest.approx(footnote.problem.f([x]), abs=1e-14)

    def test_model_majorizes_f(self, footnote):
        # h convex: the linearization under-estimates inside h, so the full
        # model sits above f everywhere
        m = build_prox_linear_model(footnote.problem, [0.7])
        for y in np.linspace(-3, 3, 601):
            assert m.evaluate([y]) >= footnote.problem.f([y]) - 1e-12

    def test_default_error_constant_is_l_beta(self, footnote):
        m = build_prox_linear_model(footnote.problem, [1.0])
        assert m.error_bound.descriptor() == {"kind": "power", "eta": 1.0, "r": 2.0}

    def test_sampled_error_constant(self, footnote):
        # the l*beta claim fails on this problem (tight factor is 2 l beta);
        # the validated registry constant has no sampled violation
        samples = np.linspace(-3, 3, 1001)[:, None]
        viol_lbeta, _ = model_error_max(footnote.problem, [1.0], samples, eta=1.0)
        assert viol_lbeta > 0.1
        viol_validated, _ = model_error_max(footnote.problem, [1.0], samples, eta=footnote.eta)
        assert viol_validated <= 1e-12

    def test_degenerate_linearization_is_a_prox(self):
        # c(0) = 0 and c'(0) = 0: the step is the prox of g at the base
        p = scalar_problem(
            Gpart.l1(0.3), Hpart.abs(),
            c=lambda x: np.array([0.5 * float(x[0]) ** 2]),
            jac=lambda x: np.array([[float(x[0])]]),
            beta=1.0,
        )
        res = prox_linear_step(p, [0.0], mode="exact")
        assert res.x_plus == pytest.approx([0.0])
        m = build_prox_linear_model(p, [0.0])
        assert m.evaluate([0.4]) == pytest.approx(0.3 * 0.4 + 0.0 + 0.5 * 0.16)


class TestExactSteps:
    def test_footnote_first_step(self, footnote):
        res = prox_linear_step(footnote.problem, [1.0], mode="exact")
        assert res.x_plus == pytest.approx([0.25], abs=1e-14)
        assert res.model_value == pytest.approx(0.28125)
        assert res.achieved_tolerance == 0.0

    def test_footnote_newton_identity(self, footnote):
        # once the kink is the minimizer the step is x - c(x)/c'(x)
        res = prox_linear_step(footnote.problem, [0.25], mode="exact")
        assert res.x_plus == pytest.approx([0.25 - 0.28125 / 1.25], abs=1e-14)

    def test_proximal_gradient_specialization(self):
        # g = 0, h the identity, c(t) = t^2/2: the step is x - c'(x)
        p = scalar_problem(
            Gpart.zero(), Hpart.identity(),
            c=lambda x: np.array([0.5 * float(x[0]) ** 2]),
            jac=lambda x: np.array([[float(x[0])]]),
            beta=1.0,
        )
        res = prox_linear_step(p, [1.0], mode="exact")
        assert res.x_plus == pytest.approx([0.0], abs=1e-14)

    def test_box_constrained_steps_stay_feasible(self):
        ps = get_problem("box-lsq")
        rep = run_prox_linear(ps.problem, [0.3], eta=ps.eta)
        for rec in rep.iterates:
            assert 0.0 - 1e-12 <= rec.x[0] <= 2.0 + 1e-12
        assert rep.x_final[0] == pytest.approx(math.sqrt(2.0), abs=1e-7)

    def test_levenberg_marquardt_closed_form(self):
        ps = get_problem("curve-lm")
        p = ps.problem
        x = 1.2
        res = prox_linear_step(p, [x], mode="exact")
        # independent oracle: dense scan plus local quadratic refinement
        m = build_prox_linear_model(p, [x])
        ts = np.linspace(-2.0, 2.0, 400001)
        vals = [m.evaluate([t]) for t in ts]
        t0 = ts[int(np.argmin(vals))]
        assert res.x_plus[0] == pytest.approx(t0, abs=1e-5)
        assert m.evaluate(res.x_plus) <= min(vals) + 1e-12

    def test_norm_residual_secular_matches_scan(self):
        ps = get_problem("circle-lsq")
        x = np.array([1.3, 0.8])
        res = prox_linear_step(ps.problem, x, mode="exact")
        m = build_prox_linear_model(ps.problem, x)
        rng = np.random.default_rng(0)
        for _ in range(200):
            y = res.x_plus + rng.normal(scale=1e-4, size=2)
            assert m.evaluate(y) >= res.model_value - 1e-12

    def test_support_function_piecewise(self):
        ps = get_problem("support-box")
        res = prox_linear_step(ps.problem, [1.0], mode="exact")
        m = build_prox_linear_model(ps.problem, [1.0])
        ts = np.linspace(-3, 3, 200001)
        vals = [m.evaluate([t]) for t in ts]
        assert m.evaluate(res.x_plus) <= min(vals) + 1e-12


class TestRunInvariants:
    def test_footnote_iterate_sequence(self, footnote):
        rep = run_prox_linear(footnote.problem, [1.0], eta=footnote.eta)
        xs = [float(r.x[0]) for r in rep.iterates]
        assert xs[:3] == pytest.approx([1.0, 0.25, 0.025], abs=1e-12)
        assert rep.stop_reason == "step-tolerance"
        assert rep.f_star_estimate == pytest.approx(0.0, abs=1e-12)

    def test_descent_chain(self, footnote):
        # f(x_k+1) <= model value <= f(x_k) for every exact step
        rep = run_prox_linear(footnote.problem, [1.3], eta=footnote.eta)
        fs = [r.f for r in rep.iterates] + [rep.f_final]
        for i, rec in enumerate(rep.iterates):
            assert fs[i + 1] <= rec.model_value + 1e-12
            assert rec.model_value <= rec.f + 1e-12

    @pytest.mark.parametrize("name,x0", [
        ("footnote", [1.0]), ("bowl", [1.0, 0.7]), ("circle-lsq", [1.3, 0.8]),
        ("scalar-l1", [0.9]), ("support-box", [1.0]), ("box-lsq", [0.3]),
        ("curve-lm", [1.2]),
    ])
    def test_cumulative_rate_ledger(self, name, x0):
        ps = get_problem(name)
        mu = ps.problem.l * ps.problem.beta
        rep = run_prox_linear(ps.problem, x0, eta=ps.eta)
        assert len(rep.iterates) >= 1
        f1 = rep.iterates[0].f
        fs = [r.f for r in rep.iterates] + [rep.f_final]
        ssum, mn = 0.0, math.inf
        for i, rec in enumerate(rep.iterates):
            ssum += rec.step**2
            mn = min(mn, rec.step**2)
            rhs = 2.0 * (f1 - fs[i + 1]) / mu
            assert ssum <= rhs + 1e-10
            assert mn <= rhs / rec.k + 1e-10
            assert rec.ledger_slack >= -1e-10

    def test_certificates_attached(self, footnote):
        rep = run_prox_linear(footnote.problem, [1.0], eta=footnote.eta)
        cert = rep.iterates[0].certificate
        assert cert.regime == "exact-step"
        assert cert.slope_bound == pytest.approx(5.0 * footnote.eta * rep.iterates[0].step)

    def test_inexact_run_records_tolerances(self, footnote):
        sched = ToleranceSchedule(0.1, 0.5)
        rep = run_prox_linear(
            footnote.problem, [1.0], stop=StopRule(max_iter=40),
            schedule=sched, eta=footnote.eta,
        )
        assert rep.mode == "inexact"
        for rec in rep.iterates:
            assert rec.eps == pytest.approx(sched.eps(rec.k))
            assert rec.certificate.regime == "inexact-optimal"
            assert rec.ledger_slack >= -1e-10

    def test_unbounded_objective_detected(self):
        # f = c with c concave and decreasing: iterates race downhill
        p = scalar_problem(
            Gpart.zero(), Hpart.identity(),
            c=lambda x: np.array([-float(x[0]) - 0.005 * float(x[0]) ** 2]),
            jac=lambda x: np.array([[-1.0 - 0.01 * float(x[0])]]),
            beta=0.01, box=(-5.0, 5.0),
        )
        with pytest.raises(UnboundedObjectiveError):
            run_prox_linear(p, [0.0], eta=0.02, floor=-100.0)

    def test_wrong_eta_rejected_before_certificates(self, footnote):
        with pytest.raises(ValueError, match="eta"):
            run_prox_linear(footnote.problem, [1.0], eta=0.5 * footnote.problem.l * footnote.problem.beta)

    def test_max_iter_zero_gives_empty_run(self, footnote):
        rep = run_prox_linear(footnote.problem, [1.0], stop=StopRule(max_iter=0), eta=footnote.eta)
        assert rep.iterates == ()
        assert rep.stop_reason == "max-iterations"
        assert rep.x_final == pytest.approx([1.0])


class TestToleranceSchedule:
    @given(st.floats(1e-3, 10.0), st.floats(0.05, 3.0))
    @settings(max_examples=80, deadline=None)
    def test_partial_sums_below_harmonic_bound(self, eps0, q):
        sched = ToleranceSchedule(eps0, q)
        assert sched.partial_sum(2000) <= sched.sum_bound * (1 + 1e-12)

    def test_rule_values(self):
        sched = ToleranceSchedule(1.0, 0.5)
        assert sched.eps(1) == 1.0
        assert sched.eps(4) == pytest.approx(4.0 ** -1.5)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            ToleranceSchedule(0.0, 0.5)
        with pytest.raises(ValueError):
            ToleranceSchedule(1.0, 0.0)


class TestProxOperators:
    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.01, 10))
    @settings(max_examples=100, deadline=None)
    def test_l1_prox_nonexpansive(self, a, b, t):
        g = Gpart.l1(0.7)
        pa, pb = g.prox(np.array([a]), t), g.prox(np.array([b]), t)
        assert abs(pa[0] - pb[0]) <= abs(a - b) + 1e-12

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.01, 10))
    @settings(max_examples=100, deadline=None)
    def test_box_prox_nonexpansive(self, a, b, t):
        g = Gpart.box([-1.0], [2.0])
        pa, pb = g.prox(np.array([a]), t), g.prox(np.array([b]), t)
        assert abs(pa[0] - pb[0]) <= abs(a - b) + 1e-12

    def test_l1_prox_is_soft_threshold(self):
        g = Gpart.l1(0.5)
        assert g.prox(np.array([2.0]), 1.0) == pytest.approx([1.5])
        assert g.prox(np.array([0.3]), 1.0) == pytest.approx([0.0])
        assert g.prox(np.array([-2.0]), 2.0) == pytest.approx([-1.0])

    def test_h_convexity_and_lipschitz_sampled(self):
        rng = np.random.default_rng(3)
        for name in ("footnote", "circle-lsq", "support-box", "bowl"):
            p = get_problem(name).problem
            m = p.residual(np.asarray(p.working_box)[:, 0]).size
            for _ in range(100):
                u, v = rng.normal(size=m), rng.normal(size=m)
                h_mid = p.h.value(0.5 * (u + v))
                assert h_mid <= 0.5 * (p.h.value(u) + p.h.value(v)) + 1e-10
                assert abs(p.h.value(u) - p.h.value(v)) <= p.l * np.linalg.norm(u - v) + 1e-10


class TestComplexity:
    def test_default_q_at_milli(self):
        est = complexity_estimate(1e-3)
        assert est.q == pytest.approx(1.0 / (2.0 * math.log(1000.0)))
        assert 3.07 <= est.exponent <= 3.08
        assert 3.9 <= est.prefactor <= 4.3

    def test_explicit_q(self):
        est = complexity_estimate(0.1, q=1.0)
        assert est.operations == pytest.approx(1e4)

    def test_centi_default(self):
        est = complexity_estimate(1e-2)
        q = 1.0 / (2.0 * math.log(100.0))
        assert est.q == pytest.approx(q)
        assert est.operations == pytest.approx(q ** (-(1 + q) / 2) / (1e-2) ** (3 + q))

    def test_out_of_range_rejected(self):
        for eps in (1.0, 1.5, 0.0, -0.1):
            with pytest.raises(ValueError):
                complexity_estimate(eps)
