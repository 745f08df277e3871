"""Convex-composite problems f = g + h(c(.)) and the prox-linear driver.

The model at x linearizes the smooth map inside h and adds the strongly
convex quadratic (l beta / 2)||y - x||^2:

    f_x(y) = g(y) + h(c(x) + Jac(x)(y - x)) + (l beta / 2)||y - x||^2.

One-dimensional subproblems are solved exactly by enumerating the kink
points of the piecewise-quadratic model together with per-piece vertices;
higher-dimensional instances use closed forms (linear h, squared norm) or
a trust-region-style secular equation (Euclidean norm h). Inexact steps go
through the accelerated dual subsolver. Every run keeps a ledger of the
cumulative step-size rate inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .certificates import StationarityCertificate, cert_exact_quadratic, cert_inexact_optimal
from .growth import GrowthFunction, TaylorModel
from .subsolver import SupportSet, SubsolverError, solve_dual_accelerated

__all__ = [
    "Gpart",
    "Hpart",
    "CompositeProblem",
    "ToleranceSchedule",
    "StopRule",
    "StepResult",
    "IterateRecord",
    "SolveReport",
    "UnboundedObjectiveError",
    "ExactSolveUnavailable",
    "build_prox_linear_model",
    "prox_linear_step",
    "run_prox_linear",
    "model_error_max",
    "ComplexityEstimate",
    "complexity_estimate",
]


class UnboundedObjectiveError(RuntimeError):
    """Objective values fell below the configured floor."""


class ExactSolveUnavailable(RuntimeError):
    """No exact subproblem route for this (g, h, dimension) combination."""


# ----------------------------------------------------------------------
# problem components
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Gpart:
    """The proximable convex component g."""

    tag: str  # zero | l1 | box | custom
    weight: float = 0.0
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    value_fn: Optional[Callable] = None
    prox_fn: Optional[Callable] = None

    @classmethod
    def zero(cls) -> "Gpart":
        return cls("zero")

    @classmethod
    def l1(cls, weight: float) -> "Gpart":
        if weight < 0:
            raise ValueError("l1 weight must be nonnegative")
        return cls("l1", weight=float(weight))

    @classmethod
    def box(cls, lo, hi) -> "Gpart":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if np.any(hi < lo):
            raise ValueError("box bounds must satisfy lo <= hi")
        return cls("box", lo=lo, hi=hi)

    @classmethod
    def custom(cls, value_fn, prox_fn) -> "Gpart":
        return cls("custom", value_fn=value_fn, prox_fn=prox_fn)

    def value(self, y) -> float:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.tag == "zero":
            return 0.0
        if self.tag == "l1":
            return self.weight * float(np.sum(np.abs(y)))
        if self.tag == "box":
            inside = np.all(y >= self.lo - 1e-12) and np.all(y <= self.hi + 1e-12)
            return 0.0 if inside else math.inf
        return float(self.value_fn(y))

    def value_batch(self, Y: np.ndarray) -> np.ndarray:
        if self.tag == "zero":
            return np.zeros(Y.shape[0])
        if self.tag == "l1":
            return self.weight * np.sum(np.abs(Y), axis=1)
        if self.tag == "box":
            inside = np.all((Y >= self.lo - 1e-12) & (Y <= self.hi + 1e-12), axis=1)
            return np.where(inside, 0.0, np.inf)
        return np.array([self.value_fn(y) for y in Y])

    def prox(self, v, t: float) -> np.ndarray:
        """prox_{t g}(v) = argmin_y g(y) + ||y - v||^2 / (2 t)."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if self.tag == "zero":
            return v.copy()
        if self.tag == "l1":
            return np.sign(v) * np.maximum(np.abs(v) - t * self.weight, 0.0)
        if self.tag == "box":
            return np.clip(v, self.lo, self.hi)
        return np.atleast_1d(np.asarray(self.prox_fn(v, t), dtype=float))


@dataclass(frozen=True)
class Hpart:
    """The finite convex Lipschitz outer component h.

    All polyhedral / norm choices are represented through their support
    set, which both evaluates h and powers the dual subsolver. The squared
    Euclidean norm (Gauss-Newton / Levenberg-Marquardt least squares) is
    kept as a separate smooth tag with a caller-supplied local Lipschitz
    constant.
    """

    tag: str  # abs | norm | sqnorm | max | support | linear
    support_set: Optional[SupportSet] = None

    @classmethod
    def abs(cls) -> "Hpart":
        return cls("abs", SupportSet.interval(1.0))

    @classmethod
    def norm(cls, dim: int) -> "Hpart":
        return cls("norm", SupportSet.ball(1.0, dim=dim))

    @classmethod
    def max_of_coordinates(cls, dim: int) -> "Hpart":
        return cls("max", SupportSet.simplex(dim))

    @classmethod
    def support(cls, zset: SupportSet) -> "Hpart":
        return cls("support", zset)

    @classmethod
    def linear(cls, z) -> "Hpart":
        return cls("linear", SupportSet.singleton(z))

    @classmethod
    def identity(cls) -> "Hpart":
        return cls.linear([1.0])

    @classmethod
    def sqnorm(cls) -> "Hpart":
        return cls("sqnorm", None)

    def value(self, u) -> float:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.tag == "sqnorm":
            return float(u @ u)
        return self.support_set.support_value(u)

    def value_batch(self, U: np.ndarray) -> np.ndarray:
        if self.tag == "sqnorm":
            return np.sum(U * U, axis=1)
        s = self.support_set
        if s.kind == "interval":
            return s.params["a"] * np.abs(U[:, 0])
        if s.kind == "box":
            lo, hi = s.params["lo"], s.params["hi"]
            return np.sum(np.where(U >= 0, hi * U, lo * U), axis=1)
        if s.kind == "ball":
            c, r = s.params["center"], s.params["radius"]
            return U @ c + r * np.linalg.norm(U, axis=1)
        return np.max(U, axis=1)

    @property
    def default_lipschitz(self) -> Optional[float]:
        if self.tag == "sqnorm":
            return None  # only locally Lipschitz; caller supplies l
        return self.support_set.max_norm


@dataclass(frozen=True)
class CompositeProblem:
    """f = g + h(c(.)) with smoothness data (l, beta) for the model.

    ``c`` maps a point (n,) to residuals (m,); ``jacobian`` returns the
    (m, n) Jacobian. ``c_batch`` optionally maps (N, n) -> (N, m) for fast
    sampled validation. ``working_box`` bounds the region on which the
    model-error constant is validated by sampling.
    """

    g: Gpart
    h: Hpart
    c: Callable
    jacobian: Callable
    beta: float
    working_box: np.ndarray
    l: Optional[float] = None
    c_batch: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        box = np.atleast_2d(np.asarray(self.working_box, dtype=float))
        object.__setattr__(self, "working_box", box)
        if self.l is None:
            default = self.h.default_lipschitz
            if default is None:
                raise ValueError("h is only locally Lipschitz; supply l explicitly")
            object.__setattr__(self, "l", float(default))
        if not (self.l > 0):
            raise ValueError("l must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    @property
    def dim(self) -> int:
        return self.working_box.shape[0]

    def residual(self, x) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.c(np.atleast_1d(np.asarray(x, dtype=float))), dtype=float))

    def jac(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        J = np.atleast_2d(np.asarray(self.jacobian(x), dtype=float))
        m = self.residual(x).size
        return J.reshape(m, x.size)

    def f(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.g.value(x) + self.h.value(self.residual(x))

    def f_batch(self, X: np.ndarray) -> np.ndarray:
        if self.c_batch is not None:
            resid = np.atleast_2d(self.c_batch(X))
        else:
            resid = np.stack([self.residual(x) for x in X])
        return self.g.value_batch(X) + self.h.value_batch(resid)


# ----------------------------------------------------------------------
# model construction and validation
# ----------------------------------------------------------------------


def build_prox_linear_model(p: CompositeProblem, x, eta: Optional[float] = None) -> TaylorModel:
    """The prox-linear model at x, with error constant eta (default l beta)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cx = p.residual(x)
    J = p.jac(x)
    mu = p.l * p.beta
    if eta is None:
        eta = p.l * p.beta

    def evaluate(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        d = y - x
        return p.g.value(y) + p.h.value(cx + J @ d) + 0.5 * mu * float(d @ d)

    if p.dim == 1 and p.h.tag != "norm":
        hint = "piecewise-1d"
    elif p.h.tag in ("linear", "sqnorm") or (p.h.tag == "norm" and p.g.tag == "zero"):
        hint = "closed-form"
    elif p.h.support_set is not None:
        hint = "dual-solver"
    else:
        hint = "generic"
    return TaylorModel(
        base_point=x,
        evaluate=evaluate,
        error_bound=GrowthFunction.quadratic(eta),
        minimize_hint=hint,
    )


def model_error_max(p: CompositeProblem, x, samples: np.ndarray, eta: float) -> tuple[float, float]:
    """Max positive violation of |f_x(y) - f(y)| <= (eta/2) d^2 over the
    sample batch, and the largest sampled ratio 2|f_x - f| / d^2."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    Y = np.atleast_2d(np.asarray(samples, dtype=float))
    cx = p.residual(x)
    J = p.jac(x)
    mu = p.l * p.beta
    D = Y - x[None, :]
    lin = cx[None, :] + D @ J.T
    d2 = np.sum(D * D, axis=1)
    fx = p.g.value_batch(Y) + p.h.value_batch(lin) + 0.5 * mu * d2
    fY = p.f_batch(Y)
    ok = np.isfinite(fx) & np.isfinite(fY) & (d2 > 0)
    err = np.abs(fx[ok] - fY[ok])
    if err.size == 0:
        return 0.0, 0.0
    viol = float(np.max(err - 0.5 * eta * d2[ok]))
    ratio = float(np.max(2.0 * err / d2[ok]))
    return max(viol, 0.0), ratio


# ----------------------------------------------------------------------
# exact subproblem solvers
# ----------------------------------------------------------------------


def _kinks_1d(p: CompositeProblem, x: float, cx: np.ndarray, J: np.ndarray) -> list[float]:
    """y-values where the 1-d model is nondifferentiable."""
    kinks: list[float] = []
    h = p.h
    j = J[:, 0]
    if h.tag in ("abs", "support", "norm", "linear"):
        s = h.support_set
        if s.kind in ("interval", "box") or (s.kind == "ball" and s.params["radius"] > 0 and j.size == 1):
            # each coordinate of the linearized residual crosses zero once
            for i in range(cx.size):
                if abs(j[i]) > 0:
                    kinks.append(x - cx[i] / j[i])
        elif s.kind == "simplex":
            for i in range(cx.size):
                for k in range(i + 1, cx.size):
                    if abs(j[i] - j[k]) > 0:
                        kinks.append(x + (cx[k] - cx[i]) / (j[i] - j[k]))
    elif h.tag == "max":
        for i in range(cx.size):
            for k in range(i + 1, cx.size):
                if abs(j[i] - j[k]) > 0:
                    kinks.append(x + (cx[k] - cx[i]) / (j[i] - j[k]))
    if p.g.tag == "l1":
        kinks.append(0.0)
    return kinks


def _exact_step_1d(p: CompositeProblem, x: float) -> np.ndarray:
    """Exact minimizer of the 1-d model: kink enumeration plus per-piece
    quadratic vertices (the model is piecewise quadratic and strongly
    convex for all polyhedral h; the Euclidean-norm h with several
    residual components is handled by monotone root finding instead)."""
    xa = np.array([x], dtype=float)
    cx = p.residual(xa)
    J = p.jac(xa)
    mu = p.l * p.beta
    if mu <= 0:
        raise ExactSolveUnavailable("model is not strongly convex (l * beta = 0)")
    model = build_prox_linear_model(p, xa)

    if p.h.tag == "norm" and cx.size > 1:
        return _exact_norm_1d(p, xa, cx, J, mu)

    lo, hi = -math.inf, math.inf
    if p.g.tag == "box":
        lo, hi = float(p.g.lo[0]), float(p.g.hi[0])
    kinks = sorted({k for k in _kinks_1d(p, x, cx, J) if lo < k < hi})
    edges = [lo] + kinks + [hi]
    width = max(1.0, abs(x))
    candidates = list(kinks)
    if math.isfinite(lo):
        candidates.append(lo)
    if math.isfinite(hi):
        candidates.append(hi)
    for a, b in zip(edges[:-1], edges[1:]):
        # three probe points strictly inside the piece; the smooth part is
        # an exact quadratic there, so divided differences recover the vertex
        if math.isinf(a) and math.isinf(b):
            t0, t1, t2 = x - width, x, x + width
        elif math.isinf(a):
            t0, t1, t2 = b - 3 * width, b - 2 * width, b - width
        elif math.isinf(b):
            t0, t1, t2 = a + width, a + 2 * width, a + 3 * width
        else:
            span = b - a
            if span <= 0:
                continue
            t0, t1, t2 = a + 0.25 * span, a + 0.5 * span, a + 0.75 * span
        m0 = model.evaluate([t0])
        m1 = model.evaluate([t1])
        m2 = model.evaluate([t2])
        d01 = (m1 - m0) / (t1 - t0)
        d12 = (m2 - m1) / (t2 - t1)
        curv = (d12 - d01) / (t2 - t0)
        if curv <= 0:
            continue
        vtx = 0.5 * (t0 + t1) - d01 / (2.0 * curv)
        if a < vtx < b and lo <= vtx <= hi:
            candidates.append(vtx)
    if not candidates:
        candidates.append(x)
    vals = [model.evaluate([t]) for t in candidates]
    return np.array([candidates[int(np.argmin(vals))]])


def _exact_norm_1d(p: CompositeProblem, x: np.ndarray, cx: np.ndarray, J: np.ndarray, mu: float) -> np.ndarray:
    """Scalar y, vector residual, h = r||.||: the model derivative is
    strictly increasing; bracket and root-find, checking the single
    possible nonsmooth point."""
    r = p.h.support_set.params["radius"]
    j = J[:, 0]

    def deriv(t: float) -> float:
        u = cx + j * (t - x[0])
        nu = float(np.linalg.norm(u))
        smooth = r * float(u @ j) / nu if nu > 0 else 0.0
        return smooth + mu * (t - x[0])

    # the residual can only vanish at one t (if cx is parallel to j)
    t_zero = None
    nj = float(j @ j)
    if nj > 0:
        t_c = x[0] - float(cx @ j) / nj
        if np.linalg.norm(cx + j * (t_c - x[0])) < 1e-14 * max(1.0, float(np.linalg.norm(cx))):
            t_zero = t_c
    scale = (r * float(np.linalg.norm(j)) + 1.0) / mu + 1.0
    a, b = x[0] - scale, x[0] + scale
    while deriv(a) > 0:
        a -= scale
    while deriv(b) < 0:
        b += scale
    if t_zero is not None:
        # subdifferential at the zero-residual point may already contain 0
        gap = r * float(np.linalg.norm(j))
        if abs(mu * (t_zero - x[0])) <= gap:
            return np.array([t_zero])
    root = brentq(deriv, a, b, xtol=1e-15, rtol=8.9e-16)
    return np.array([root])


def _exact_step_nd(p: CompositeProblem, x: np.ndarray) -> np.ndarray:
    cx = p.residual(x)
    J = p.jac(x)
    mu = p.l * p.beta
    if mu <= 0:
        raise ExactSolveUnavailable("model is not strongly convex (l * beta = 0)")
    if p.h.tag == "linear" or (p.h.support_set is not None and p.h.support_set.kind == "ball"
                               and p.h.support_set.params["radius"] == 0.0):
        z = p.h.support_set.params["center"]
        return p.g.prox(x - (J.T @ z) / mu, 1.0 / mu)
    if p.g.tag != "zero":
        raise ExactSolveUnavailable(
            f"no exact route for g={p.g.tag}, h={p.h.tag} in dimension {x.size}"
        )
    if p.h.tag == "sqnorm":
        A = 2.0 * (J.T @ J) + mu * np.eye(x.size)
        d = np.linalg.solve(A, -2.0 * J.T @ cx)
        return x + d
    if p.h.tag == "norm" or (p.h.support_set is not None and p.h.support_set.kind == "ball"):
        s = p.h.support_set
        if float(np.linalg.norm(s.params["center"])) != 0.0:
            raise ExactSolveUnavailable("norm-type exact solve requires a centered ball")
        return _exact_ball_dual(x, cx, J, mu, s.params["radius"])
    raise ExactSolveUnavailable(f"no exact route for h={p.h.tag} in dimension {x.size}")


def _exact_ball_dual(x: np.ndarray, cx: np.ndarray, J: np.ndarray, mu: float, radius: float) -> np.ndarray:
    """Exact minimizer for g = 0, h = radius * ||.||: maximize the concave
    dual over the radius-ball via its secular equation."""
    if float(np.linalg.norm(cx)) == 0.0:
        return x.copy()
    A = (J @ J.T) / mu
    lam, Q = np.linalg.eigh(A)
    coef = Q.T @ cx

    def znorm2(nu: float) -> float:
        return float(np.sum(coef**2 / (lam + nu) ** 2))

    # interior stationary point if A is nonsingular and ||A^-1 c|| <= radius
    if lam.min() > 1e-14 * max(lam.max(), 1.0) and znorm2(0.0) <= radius * radius:
        z = Q @ (coef / lam)
    else:
        nu_hi = float(np.linalg.norm(cx)) / radius
        nu_lo = 1e-300
        f = lambda nu: znorm2(nu) - radius * radius
        while f(nu_hi) > 0:
            nu_hi *= 2.0
        z = Q @ (coef / (lam + brentq(f, nu_lo, nu_hi, xtol=1e-300, rtol=8.9e-16)))
    return x - (J.T @ z) / mu


@dataclass(frozen=True)
class StepResult:
    x_plus: np.ndarray
    model_value: float
    achieved_tolerance: float


def prox_linear_step(p: CompositeProblem, x, mode: str = "exact", eps: Optional[float] = None,
                     cap: int = 200_000) -> StepResult:
    """One model-minimization step.

    Exact mode returns the unique minimizer of the strongly convex model;
    inexact mode returns a point whose model value is within ``eps`` of the
    model infimum, certified by the dual gap.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    model = build_prox_linear_model(p, x)
    if mode == "exact":
        if x.size == 1:
            y = _exact_step_1d(p, float(x[0]))
        else:
            y = _exact_step_nd(p, x)
        return StepResult(x_plus=y, model_value=model.evaluate(y), achieved_tolerance=0.0)
    if mode != "inexact":
        raise ValueError("mode must be 'exact' or 'inexact'")
    if eps is None or eps <= 0:
        raise ValueError("inexact mode needs a positive tolerance")
    state = solve_dual_accelerated(p, x, eps=eps, cap=cap)
    return StepResult(x_plus=state.y, model_value=state.primal, achieved_tolerance=state.gap)


# ----------------------------------------------------------------------
# schedules, stopping, reports
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ToleranceSchedule:
    """Subproblem tolerances eps_k = eps0 * k^-(1+q); the tail sum obeys
    sum_k eps_k <= eps0 * (1 + 1/q)."""

    eps0: float
    q: float

    def __post_init__(self):
        if self.eps0 <= 0 or self.q <= 0:
            raise ValueError("eps0 and q must be positive")

    def eps(self, k: int) -> float:
        return self.eps0 * float(k) ** -(1.0 + self.q)

    def partial_sum(self, k: int) -> float:
        return self.eps0 * float(np.sum(np.arange(1, k + 1, dtype=float) ** -(1.0 + self.q)))

    @property
    def sum_bound(self) -> float:
        return self.eps0 * (1.0 + 1.0 / self.q)


@dataclass(frozen=True)
class StopRule:
    step_tol: float = 1e-8
    decrease_tol: float = 1e-12
    max_iter: int = 100_000


@dataclass(frozen=True)
class IterateRecord:
    k: int
    x: np.ndarray
    f: float
    model_value: float
    step: float
    eps: float
    certificate: StationarityCertificate
    ledger_slack: float

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "x": np.atleast_1d(self.x).tolist(),
            "f": self.f,
            "model_value": self.model_value,
            "step": self.step,
            "eps": self.eps,
            "certificate": self.certificate.to_json_dict(),
            "ledger_slack": self.ledger_slack,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "IterateRecord":
        return cls(
            k=doc["k"],
            x=np.asarray(doc["x"], dtype=float),
            f=doc["f"],
            model_value=doc["model_value"],
            step=doc["step"],
            eps=doc["eps"],
            certificate=StationarityCertificate.from_json_dict(doc["certificate"]),
            ledger_slack=doc["ledger_slack"],
        )


@dataclass(frozen=True)
class SolveReport:
    problem: str
    mode: str
    eta: float
    l: float
    beta: float
    iterates: tuple
    x_final: np.ndarray
    f_final: float
    f_star_estimate: float
    cumulative_step_sq: float
    stop_reason: str
    seed: int = 0

    @property
    def steps(self) -> list[float]:
        return [r.step for r in self.iterates]

    def xs(self) -> list[np.ndarray]:
        return [r.x for r in self.iterates] + [self.x_final]


# ----------------------------------------------------------------------
# the outer loop
# ----------------------------------------------------------------------


def run_prox_linear(
    p: CompositeProblem,
    x0,
    stop: StopRule = StopRule(),
    schedule: Optional[ToleranceSchedule] = None,
    eta: Optional[float] = None,
    floor: float = -1e12,
    seed: int = 0,
    validation_samples: int = 1000,
    oracle_ledger: bool = True,
) -> SolveReport:
    """Iterate model minimization from x0 until the stopping rule fires.

    Exact runs record the cumulative rate-inequality slack
    2 (f(x_1) - f(x_k+1)) / (l beta) - sum step^2 >= 0. Scheduled (inexact)
    runs record the analogous slack with the schedule's tolerance sum and
    the minimum exact step length, recomputed by the exact solver when one
    is available (the solver internally targets half the scheduled
    tolerance so the recorded inequality keeps its stated constant).

    The model-error constant ``eta`` (default validated-free l beta) is
    re-checked by sampling at every iterate before its certificate is
    emitted; a violation raises.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    mu = p.l * p.beta
    if eta is None:
        eta = mu
    f1 = p.f(x)
    if not math.isfinite(f1):
        raise ValueError("f(x0) must be finite")
    rng = np.random.default_rng(seed)
    box = p.working_box
    if p.g.tag == "box":
        box = np.stack([np.maximum(box[:, 0], p.g.lo), np.minimum(box[:, 1], p.g.hi)], axis=1)
    samples = rng.uniform(box[:, 0], box[:, 1], size=(validation_samples, box.shape[0]))

    mode = "exact" if schedule is None else "inexact"
    records: list[IterateRecord] = []
    sum_sq = 0.0
    sum_eps = 0.0
    min_exact_sq = math.inf
    best_f = f1
    stop_reason = "max-iterations"

    for k in range(1, stop.max_iter + 1):
        viol, _ = model_error_max(p, x, samples, eta)
        if viol > 1e-9:
            raise ValueError(
                f"model error constant eta={eta} violated by {viol:.3g} at iterate {k}; "
                "re-validate the problem's eta"
            )
        fx = p.f(x)
        if mode == "exact":
            eps_k = 0.0
            res = prox_linear_step(p, x, mode="exact")
        else:
            eps_k = schedule.eps(k)
            res = prox_linear_step(p, x, mode="inexact", eps=0.5 * eps_k)
            sum_eps += eps_k
        x_plus = res.x_plus
        d = float(np.linalg.norm(x_plus - x))
        f_next = p.f(x_plus)
        if f_next < floor:
            raise UnboundedObjectiveError(
                f"objective fell below the floor {floor} at iterate {k}"
            )
        best_f = min(best_f, f_next)

        if mode == "exact":
            cert = cert_exact_quadratic(eta, d)
            sum_sq += d * d
            slack = 2.0 * (f1 - f_next) / mu - sum_sq
        else:
            cert = cert_inexact_optimal(eta, eps_k, d)
            sum_sq += d * d
            d_oracle = d
            if oracle_ledger:
                try:
                    exact = prox_linear_step(p, x, mode="exact")
                    d_oracle = float(np.linalg.norm(exact.x_plus - x))
                except ExactSolveUnavailable:
                    pass
            min_exact_sq = min(min_exact_sq, d_oracle * d_oracle)
            slack = (2.0 * (f1 - f_next) + sum_eps) / (mu * k) - min_exact_sq

        records.append(
            IterateRecord(
                k=k, x=x, f=fx, model_value=res.model_value, step=d,
                eps=eps_k, certificate=cert, ledger_slack=slack,
            )
        )
        # Inexact steps can sit anywhere in a sqrt(2 eps / mu) ball around the
        # exact minimizer, so the stopping observables carry that radius.
        step_obs = d if mode == "exact" else d + math.sqrt(2.0 * eps_k / mu)
        decrease_obs = fx - res.model_value + eps_k
        x = x_plus
        if step_obs <= stop.step_tol:
            stop_reason = "step-tolerance"
            break
        if decrease_obs <= stop.decrease_tol:
            stop_reason = "decrease-tolerance"
            break

    return SolveReport(
        problem=p.name,
        mode=mode,
        eta=eta,
        l=p.l,
        beta=p.beta,
        iterates=tuple(records),
        x_final=x,
        f_final=p.f(x),
        f_star_estimate=best_f,
        cumulative_step_sq=sum_sq,
        stop_reason=stop_reason,
        seed=seed,
    )


# ----------------------------------------------------------------------
# complexity of the inexact scheme
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ComplexityEstimate:
    eps: float
    q: float
    exponent: float       # 3 + q
    prefactor: float      # q^-((1+q)/2)
    operations: float     # prefactor / eps^exponent


def complexity_estimate(eps_target: float, q: Optional[float] = None) -> ComplexityEstimate:
    """Predicted basic-operation count prefactor / eps^(3+q) for driving the
    exact-step proxy below eps with scheduled subproblem tolerances; the
    default trade-off is q = 1 / (2 ln(1/eps))."""
    if not 0.0 < eps_target < 1.0:
        raise ValueError("eps_target must lie in (0, 1)")
    if q is None:
        q = 1.0 / (2.0 * math.log(1.0 / eps_target))
    if q <= 0:
        raise ValueError("q must be positive")
    prefactor = q ** (-(1.0 + q) / 2.0)
    exponent = 3.0 + q
    return ComplexityEstimate(
        eps=eps_target,
        q=q,
        exponent=exponent,
        prefactor=prefactor,
        operations=prefactor / eps_target**exponent,
    )
