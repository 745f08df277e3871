"""Corpus-wide verification: witness existence for every emitted
certificate, rate ledgers, error-bound chains, KL round trips, dual gap
rates, and slope/subdifferential cross-checks.

Each check returns a CheckResult with one counted instance per assertion;
the CLI aggregates these into the machine-readable verification report.
Entries are independent deterministic computations and may run in
parallel; assembly is a single merge point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .certificates import (
    cert_model_decrease,
    estimate_slope_error_bound_L,
    inexact_error_bound,
    kl_to_slope_bound,
    model_error_bound,
    slope_bound_to_kl,
    step_error_bound,
)
from .composite import (
    SolveReport,
    StopRule,
    ToleranceSchedule,
    build_prox_linear_model,
    prox_linear_step,
    run_prox_linear,
)
from .grids import GridFunction, PointSet, dist_to_set, find_witness, witness_slack
from .problems import ProblemSpec, get_problem, registry
from .subsolver import solve_dual_accelerated

__all__ = [
    "CheckResult",
    "corpus_runs",
    "check_witnesses",
    "check_rate_ledger",
    "check_error_bound_chain",
    "check_kl_round_trip",
    "check_dual_gap",
    "check_terminal_stationarity",
    "check_slope_subdifferential",
    "run_verification",
]

LEDGER_SLACK = 1e-10


@dataclass
class CheckResult:
    theorem: str
    instances: int = 0
    passes: int = 0
    failures: list = field(default_factory=list)

    def count(self, ok: bool, message: str = "") -> None:
        self.instances += 1
        if ok:
            self.passes += 1
        else:
            self.failures.append(message)

    @property
    def ok(self) -> bool:
        return self.passes == self.instances

    def to_json_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "instances": self.instances,
            "passes": self.passes,
            "failures": list(self.failures),
        }

    def merge(self, other: "CheckResult") -> None:
        self.instances += other.instances
        self.passes += other.passes
        self.failures.extend(other.failures)


# ----------------------------------------------------------------------
# run generation
# ----------------------------------------------------------------------


def corpus_runs(
    ps: ProblemSpec,
    mode: str = "exact",
    starts: Optional[Sequence] = None,
    stop: Optional[StopRule] = None,
    schedule: Optional[ToleranceSchedule] = None,
    seed: int = 0,
) -> list[SolveReport]:
    if starts is None:
        starts = ps.default_starts
    if stop is None:
        stop = StopRule()
    reports = []
    for x0 in starts:
        reports.append(
            run_prox_linear(
                ps.problem,
                np.atleast_1d(np.asarray(x0, dtype=float)),
                stop=stop,
                schedule=schedule if mode == "inexact" else None,
                eta=ps.eta,
                seed=seed,
            )
        )
    return reports


def _points_and_values(report: SolveReport) -> list[tuple[np.ndarray, float]]:
    seq = [(rec.x, rec.f) for rec in report.iterates]
    seq.append((report.x_final, report.f_final))
    return seq


# ----------------------------------------------------------------------
# witness existence (the central soundness property)
# ----------------------------------------------------------------------


def check_witnesses(ps: ProblemSpec, reports: Sequence[SolveReport]) -> CheckResult:
    """Every emitted certificate must admit a grid witness: a node within
    point_radius of its center whose value and slope respect the bounds,
    up to the stated grid slack."""
    out = CheckResult("witness-existence")
    grid = ps.grid()
    if grid is None:
        return out
    slack = witness_slack(ps.eta, grid.spacing)
    for rep in reports:
        seq = _points_and_values(rep)
        for i, rec in enumerate(rep.iterates):
            x_next, f_next = seq[i + 1]
            if not (grid.contains(rec.x, tol=grid.spacing) and grid.contains(x_next, tol=grid.spacing)):
                out.count(False, f"{ps.name}: iterate {rec.k} left the grid box")
                continue
            cert = rec.certificate
            w = find_witness(
                grid, x_next, f_next, cert.point_radius, cert.value_gap, cert.slope_bound, slack
            )
            out.count(
                w is not None,
                f"{ps.name} k={rec.k}: no witness for {cert.regime} certificate",
            )
            delta = rec.f - rec.model_value + rec.eps
            mcert = cert_model_decrease(ps.eta, max(delta, 0.0))
            w2 = find_witness(
                grid, rec.x, rec.f, mcert.point_radius, mcert.value_gap, mcert.slope_bound, slack
            )
            out.count(
                w2 is not None,
                f"{ps.name} k={rec.k}: no witness for model-decrease certificate",
            )
    return out


# ----------------------------------------------------------------------
# rate ledger
# ----------------------------------------------------------------------


def check_rate_ledger(ps: ProblemSpec, reports: Sequence[SolveReport]) -> CheckResult:
    """Exact runs: sum_{i<=k} d_i^2 <= 2 (f(x_1) - f(x_k+1)) / (l beta) and
    min_{i<=k} d_i^2 <= 2 (f(x_1) - f(x_k+1)) / (l beta k), at every k.
    Scheduled runs: the analogous bound with the tolerance sum, against
    exact-solver step lengths."""
    out = CheckResult("rate-ledger")
    mu = ps.problem.l * ps.problem.beta
    for rep in reports:
        seq = _points_and_values(rep)
        f1 = rep.iterates[0].f if rep.iterates else rep.f_final
        if rep.mode == "exact":
            ssum = 0.0
            mn = math.inf
            for i, rec in enumerate(rep.iterates):
                f_next = seq[i + 1][1]
                ssum += rec.step**2
                mn = min(mn, rec.step**2)
                rhs = 2.0 * (f1 - f_next) / mu
                out.count(
                    ssum <= rhs + LEDGER_SLACK,
                    f"{ps.name} k={rec.k}: cumulative rate {ssum:.3e} > {rhs:.3e}",
                )
                out.count(
                    mn <= rhs / rec.k + LEDGER_SLACK,
                    f"{ps.name} k={rec.k}: min-step rate fails",
                )
        else:
            mn = math.inf
            eps_sum = 0.0
            for i, rec in enumerate(rep.iterates):
                f_next = seq[i + 1][1]
                eps_sum += rec.eps
                exact = prox_linear_step(ps.problem, rec.x, mode="exact")
                d_bar = float(np.linalg.norm(exact.x_plus - rec.x))
                mn = min(mn, d_bar**2)
                rhs = (2.0 * (f1 - f_next) + eps_sum) / (mu * rec.k)
                out.count(
                    mn <= rhs + LEDGER_SLACK,
                    f"{ps.name} k={rec.k}: inexact min-step rate fails",
                )
        for rec in rep.iterates:
            out.count(
                rec.ledger_slack >= -LEDGER_SLACK,
                f"{ps.name} k={rec.k}: recorded ledger slack negative",
            )
    return out


# ----------------------------------------------------------------------
# error-bound chain
# ----------------------------------------------------------------------


def check_error_bound_chain(
    ps: ProblemSpec, reports: Sequence[SolveReport], tol: float = 1e-9
) -> CheckResult:
    """With L from the empirical estimator: inside the validity regions,
    dist(x_k, S) <= (3 L eta + 2) d_k (step form) and
    dist(x_k, S) <= (L sqrt(12 eta) + 2 / sqrt(3 eta)) sqrt(delta_k)."""
    out = CheckResult("error-bound-chain")
    grid = ps.grid()
    if grid is None or ps.known_stationary_set is None or ps.eb_center is None:
        return out
    s = ps.known_stationary_set
    gamma = ps.eb_gamma
    L = estimate_slope_error_bound_L(grid, s, ps.eb_center, gamma)
    eta = ps.eta
    for rep in reports:
        seq = _points_and_values(rep)
        for i, rec in enumerate(rep.iterates):
            x, x_next = rec.x, seq[i + 1][0]
            r_x = float(np.linalg.norm(x - ps.eb_center))
            r_next = float(np.linalg.norm(x_next - ps.eb_center))
            dist = dist_to_set(x, s)
            if rep.mode == "exact":
                if r_x < gamma / 3.0 and r_next < gamma / 3.0:
                    bound = step_error_bound(L, eta, rec.step)
                    out.count(
                        dist <= bound + tol,
                        f"{ps.name} k={rec.k}: step error-bound {dist:.3e} > {bound:.3e}",
                    )
            else:
                mu_const = 2.0 * math.sqrt(L * (5.0 * L * eta + 4.0))
                if (
                    math.sqrt(rec.eps) < gamma * mu_const / (12.0 * L)
                    and rec.step < gamma / 9.0
                    and r_next < gamma / 3.0
                ):
                    bound = inexact_error_bound(L, eta, rec.eps, rec.step)
                    out.count(
                        dist <= bound + tol,
                        f"{ps.name} k={rec.k}: inexact error-bound fails",
                    )
            delta = max(rec.f - rec.model_value + rec.eps, 0.0)
            if delta < 3.0 * eta * gamma * gamma / 16.0 and r_x < gamma / 2.0:
                bound = model_error_bound(L, eta, delta)
                out.count(
                    dist <= bound + tol,
                    f"{ps.name} k={rec.k}: model error-bound {dist:.3e} > {bound:.3e}",
                )
    return out


# ----------------------------------------------------------------------
# KL round trip
# ----------------------------------------------------------------------


def _sublevel_distances(grid: GridFunction, f_star: float, pts: np.ndarray, tol: float) -> np.ndarray:
    axes = grid.axes()
    if grid.dimension == 1:
        coords = axes[0][:, None]
    else:
        g1, g2 = np.meshgrid(axes[0], axes[1], indexing="ij")
        coords = np.stack([g1.ravel(), g2.ravel()], axis=1)
    level = coords[(grid.values.ravel() <= f_star + tol)]
    if level.size == 0:
        raise ValueError("empty sublevel set on the grid")
    tree = cKDTree(level)
    d, _ = tree.query(pts)
    return d


def check_kl_round_trip(ps: ProblemSpec, l_proxreg: float = 1.0) -> CheckResult:
    """Fit KL parameters near the reference minimizer, then:
    (1) the fitted inequality has zero residual on admissible nodes;
    (2) the forward constant bounds the distance to the sublevel set;
    (3) at exponent ~ 1/2 the converse (prox-regular) constant derived
        from the empirical L validates back on the grid."""
    out = CheckResult("kl-round-trip")
    grid = ps.grid()
    if grid is None or ps.known_f_star is None or ps.eb_center is None:
        return out
    h = grid.spacing
    center, gamma = ps.eb_center, ps.eb_gamma
    region = [(c - gamma, c + gamma) for c in center]
    from .grids import estimate_kl_parameters

    fit = estimate_kl_parameters(grid, ps.known_f_star, region=region)
    out.count(fit.residual <= 1e-9, f"{ps.name}: KL fit residual {fit.residual:.3e}")

    const, expo = kl_to_slope_bound(fit.theta, fit.alpha)
    slices, distc, vals = grid.window(center, gamma)
    slopes = grid.slope_field()[slices]
    axes = grid.axes()
    if grid.dimension == 1:
        pts = axes[0][slices[0]][:, None]
    else:
        g1, g2 = np.meshgrid(axes[0][slices[0]], axes[1][slices[1]], indexing="ij")
        pts = np.stack([g1.ravel(), g2.ravel()], axis=1)
    gap = vals - ps.known_f_star
    mask = (distc <= gamma) & (gap >= 10.0 * h) & (slopes >= h)
    if mask.any():
        dists = _sublevel_distances(grid, ps.known_f_star, pts.reshape(-1, grid.dimension), 2.0 * h)
        dists = dists.reshape(vals.shape)
        slack = 5.0 * h * max(1.0, const)
        lhs = dists[mask]
        rhs = const * np.power(slopes[mask], expo)
        bad = lhs > rhs + slack
        out.count(
            not bad.any(),
            f"{ps.name}: forward KL distance bound fails at {int(bad.sum())} nodes",
        )
        mid = (fit.alpha / (1.0 - fit.theta)) * np.power(gap[mask], 1.0 - fit.theta)
        bad_mid = lhs > mid + slack
        out.count(
            not bad_mid.any(),
            f"{ps.name}: value-form KL distance bound fails at {int(bad_mid.sum())} nodes",
        )
        if abs(fit.theta - 0.5) < 0.26:
            L = estimate_slope_error_bound_L(
                grid, ps.known_stationary_set, center, gamma
            ) if ps.known_stationary_set is not None else const
            c_conv, _ = slope_bound_to_kl(L, l_proxreg)
            lhs_c = np.sqrt(gap[mask])
            rhs_c = c_conv * slopes[mask]
            bad_c = lhs_c > rhs_c + 3.0 * h * max(1.0, c_conv)
            out.count(
                not bad_c.any(),
                f"{ps.name}: converse KL constant fails at {int(bad_c.sum())} nodes",
            )
    return out


# ----------------------------------------------------------------------
# dual gap rate and inexact-step contract
# ----------------------------------------------------------------------


def check_dual_gap(
    ps: ProblemSpec,
    starts: Optional[Sequence] = None,
    eps_values: Sequence[float] = (1e-4, 1e-6),
) -> CheckResult:
    """Per-iteration certified gap bound on every recorded solve, plus the
    eps-optimality contract cross-checked against the exact solver."""
    out = CheckResult("dual-gap-rate")
    p = ps.problem
    if p.h.support_set is None:
        return out
    if starts is None:
        starts = ps.default_starts[:4]
    for x0 in starts:
        x = np.atleast_1d(np.asarray(x0, dtype=float))
        model = build_prox_linear_model(p, x)
        for eps in eps_values:
            state = solve_dual_accelerated(p, x, eps=eps, cap=500_000, record_history=True)
            viol = [(k, g, b) for k, g, b in state.gap_history if g > b + 1e-10]
            out.count(
                not viol,
                f"{ps.name} x0={x0}: gap bound violated at iterations {viol[:3]}",
            )
            out.count(
                state.gap <= eps,
                f"{ps.name} x0={x0}: returned gap {state.gap:.3e} > eps {eps:.3e}",
            )
            try:
                exact = prox_linear_step(p, x, mode="exact")
            except Exception:
                continue
            excess = model.evaluate(state.y) - exact.model_value
            out.count(
                excess <= eps + 1e-8,
                f"{ps.name} x0={x0}: inexact step excess {excess:.3e} > eps {eps:.3e}",
            )
    return out


# ----------------------------------------------------------------------
# terminal stationarity
# ----------------------------------------------------------------------


def check_terminal_stationarity(
    ps: ProblemSpec, reports: Sequence[SolveReport], tol_spacings: float = 10.0
) -> CheckResult:
    """Runs end at points whose limiting slope, at grid resolution, is at
    most tol_spacings * spacing."""
    out = CheckResult("terminal-stationarity")
    grid = ps.grid()
    if grid is None:
        return out
    for rep in reports:
        if not grid.contains(rep.x_final, tol=grid.spacing):
            out.count(False, f"{ps.name}: final point left the grid box")
            continue
        node = grid.nearest_node(rep.x_final)
        lim = grid.limiting_slope_at(node)
        out.count(
            lim <= tol_spacings * grid.spacing,
            f"{ps.name} ({rep.mode}, stop={rep.stop_reason}): terminal limiting slope {lim:.4f}",
        )
    return out


# ----------------------------------------------------------------------
# slope vs subdifferential cross-checks on analytic test functions
# ----------------------------------------------------------------------


def _eq34_cases():
    absfn = dict(
        name="abs",
        box=[(-1.0, 1.0)],
        fn=lambda X: np.abs(X[:, 0]),
        frechet_dist=lambda t: 0.0 if abs(t[0]) < 1e-12 else 1.0,
        kinks=[[0.0]],
        kink_limit_dist=[0.0],
    )
    square = dict(
        name="square",
        box=[(-1.0, 1.0)],
        fn=lambda X: X[:, 0] ** 2,
        frechet_dist=lambda t: 2.0 * abs(t[0]),
        kinks=[[0.0]],
        kink_limit_dist=[0.0],
    )
    folded = dict(
        name="folded-parabola",
        box=[(-3.0, 3.0)],
        fn=lambda X: np.abs(0.5 * X[:, 0] ** 2 + X[:, 0]),
        frechet_dist=lambda t: (
            0.0 if min(abs(t[0]), abs(t[0] + 2.0)) < 1e-12 else abs(t[0] + 1.0)
        ),
        kinks=[[0.0], [-2.0], [-1.0]],
        kink_limit_dist=[0.0, 0.0, 0.0],
    )
    l1norm = dict(
        name="l1-norm-2d",
        box=[(-0.5, 0.5), (-0.5, 0.5)],
        fn=lambda X: np.abs(X[:, 0]) + np.abs(X[:, 1]),
        frechet_dist=lambda t: (
            0.0
            if max(abs(t[0]), abs(t[1])) < 1e-12
            else (1.0 if min(abs(t[0]), abs(t[1])) < 1e-12 else math.sqrt(2.0))
        ),
        kinks=[[0.0, 0.0], [0.0, 0.25]],
        kink_limit_dist=[0.0, 1.0],
    )
    return [absfn, square, folded, l1norm]


def check_slope_subdifferential(spacing: float = 1e-3, samples: int = 200, seed: int = 7) -> CheckResult:
    """On convex / piecewise-smooth test functions with known
    subdifferentials: slope <= dist(0, Frechet subdifferential) + O(h) at
    sampled nodes, and the limiting slope matches dist(0, limiting
    subdifferential) at the kink list within O(h)."""
    out = CheckResult("slope-subdifferential")
    rng = np.random.default_rng(seed)
    for case in _eq34_cases():
        sp = spacing if len(case["box"]) == 1 else 2e-3
        grid = GridFunction.sample_vectorized(case["fn"], case["box"], sp)
        tol = 2.0 * sp
        box = np.asarray(case["box"], dtype=float)
        pts = rng.uniform(box[:, 0], box[:, 1], size=(samples, box.shape[0]))
        for pt in pts:
            node = grid.nearest_node(pt)
            t = grid.node_point(node)
            slope = grid.slope_at(node, radius=grid.spacing)
            ref = case["frechet_dist"](t)
            out.count(
                slope <= ref + tol,
                f"{case['name']} at {t}: slope {slope:.4f} > dist {ref:.4f} + tol",
            )
        for kink, ref in zip(case["kinks"], case["kink_limit_dist"]):
            lim = grid.limiting_slope_at(grid.nearest_node(np.asarray(kink)))
            out.count(
                abs(lim - ref) <= tol,
                f"{case['name']} kink {kink}: limiting slope {lim:.4f} != {ref:.4f}",
            )
    return out


# ----------------------------------------------------------------------
# full corpus verification
# ----------------------------------------------------------------------


def run_verification(
    selector: Optional[Sequence[str]] = None,
    seed: int = 0,
    include_inexact: bool = False,
    inexact_cap: int = 400,
) -> list[CheckResult]:
    """Run the invariant suite over the selected corpus entries and return
    one aggregated CheckResult per theorem-style check."""
    reg = registry()
    names = sorted(reg) if not selector else [n for n in sorted(reg) for s in selector if s in n]
    names = sorted(set(names))
    if not names:
        raise ValueError(f"selector {selector!r} matches no corpus problem")
    agg: dict[str, CheckResult] = {}

    def fold(result: CheckResult) -> None:
        if result.theorem not in agg:
            agg[result.theorem] = result
        else:
            agg[result.theorem].merge(result)

    for name in names:
        ps = reg[name]
        reports = corpus_runs(ps, seed=seed)
        fold(check_witnesses(ps, reports))
        fold(check_rate_ledger(ps, reports))
        fold(check_error_bound_chain(ps, reports))
        fold(check_kl_round_trip(ps))
        fold(check_terminal_stationarity(ps, reports))
        fold(check_dual_gap(ps))
        if include_inexact and ps.problem.h.support_set is not None:
            sched = ToleranceSchedule(1.0, 0.5)
            inex = corpus_runs(
                ps,
                mode="inexact",
                starts=ps.default_starts[:2],
                stop=StopRule(max_iter=inexact_cap),
                schedule=sched,
                seed=seed,
            )
            fold(check_rate_ledger(ps, inex))
            fold(check_terminal_stationarity(ps, inex))
    fold(check_slope_subdifferential())
    return list(agg.values())
