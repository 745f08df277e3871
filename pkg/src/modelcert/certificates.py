"""Near-stationarity certificates from observable algorithm quantities.

Every function here is a pure formula: it maps observables (step length d,
subproblem tolerance eps, model decrease delta, proximal subgradient norm
v) and the certified model-error growth to a triple of bounds

    point_radius  -- how far a better point can be,
    value_gap     -- how much lower its value can be required to go,
    slope_bound   -- how small its slope is guaranteed to be.

The slope oracle verifies each emitted certificate by exhaustive witness
search at desk scale; the constants are quoted verbatim, with no attempt
to sharpen them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grids import GridFunction, PointSet, dist_to_set
from .growth import GrowthFunction

__all__ = [
    "StationarityCertificate",
    "ErrorBoundEstimate",
    "cert_general_growth",
    "cert_exact_quadratic",
    "cert_inexact_optimal",
    "cert_model_decrease",
    "cert_general_model_decrease",
    "cert_prox_subgradient",
    "step_error_bound",
    "model_error_bound",
    "inexact_error_bound",
    "prox_stationary_error_bound",
    "kl_to_slope_bound",
    "slope_bound_to_kl",
    "estimate_slope_error_bound_L",
]


@dataclass(frozen=True)
class StationarityCertificate:
    regime: str
    inputs: dict
    point_radius: float
    value_gap: float
    slope_bound: float
    validity_flags: Optional[dict] = None

    def to_json_dict(self) -> dict:
        doc = {
            "regime": self.regime,
            "inputs": dict(self.inputs),
            "point_radius": self.point_radius,
            "value_gap": self.value_gap,
            "slope_bound": self.slope_bound,
        }
        if self.validity_flags is not None:
            doc["validity_flags"] = dict(self.validity_flags)
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "StationarityCertificate":
        return cls(
            regime=doc["regime"],
            inputs=dict(doc["inputs"]),
            point_radius=doc["point_radius"],
            value_gap=doc["value_gap"],
            slope_bound=doc["slope_bound"],
            validity_flags=dict(doc["validity_flags"]) if "validity_flags" in doc else None,
        )


@dataclass(frozen=True)
class ErrorBoundEstimate:
    """Empirical slope error-bound data: dist(x, S) <= L * slope(x) on the
    ball of radius gamma around x_star."""

    L: float
    gamma: float
    x_star: np.ndarray
    eta: float
    l_proxreg: float = 0.0

    def __post_init__(self):
        if not (self.L > 0 and self.gamma > 0):
            raise ValueError("L and gamma must be positive")
        xs = np.atleast_1d(np.asarray(self.x_star, dtype=float))
        xs.setflags(write=False)
        object.__setattr__(self, "x_star", xs)


# ----------------------------------------------------------------------
# certificate formulas
# ----------------------------------------------------------------------


def cert_general_growth(w: GrowthFunction, d: float) -> StationarityCertificate:
    """Certificate for an exact model step of length d under growth w.

    point_radius = 2 w(d) / w'(d); value_gap = w(d);
    slope_bound = w'(d) + w'(d + point_radius), where the distance from the
    witness to the base point is majorized through the triangle inequality
    so the bound is computable from observables alone.
    """
    if d < 0:
        raise ValueError("step length must be nonnegative")
    if d == 0:
        return StationarityCertificate("general-growth", {"d": 0.0}, 0.0, 0.0, 0.0)
    pr = w.point_proximity(d)
    return StationarityCertificate(
        regime="general-growth",
        inputs={"d": d, **w.descriptor()},
        point_radius=pr,
        value_gap=w.value(d),
        slope_bound=w.derivative(d) + w.derivative(d + pr),
    )


def cert_exact_quadratic(eta: float, d: float) -> StationarityCertificate:
    """Quadratic-error certificate for an exact step: (d, (eta/2) d^2, 5 eta d)."""
    if d < 0:
        raise ValueError("step length must be nonnegative")
    return StationarityCertificate(
        regime="exact-step",
        inputs={"eta": eta, "d": d},
        point_radius=d,
        value_gap=0.5 * eta * d * d,
        slope_bound=5.0 * eta * d,
    )


def cert_inexact_optimal(eta: float, eps: float, d: float) -> StationarityCertificate:
    """Certificate when the step is only eps-optimal for its model."""
    if eps < 0 or d < 0:
        raise ValueError("eps and d must be nonnegative")
    root = math.sqrt(eps / (3.0 * eta)) if eta > 0 else 0.0
    return StationarityCertificate(
        regime="inexact-optimal",
        inputs={"eta": eta, "eps": eps, "d": d},
        point_radius=2.0 * root + d,
        value_gap=eta * (root + d) ** 2 + 0.5 * eta * d * d,
        slope_bound=math.sqrt(12.0 * eta * eps) + 3.0 * eta * d,
    )


def cert_model_decrease(eta: float, delta: float) -> StationarityCertificate:
    """Certificate from the model decrease delta = f(x) - inf f_x alone."""
    if delta < 0:
        raise ValueError("model decrease must be nonnegative")
    return StationarityCertificate(
        regime="model-decrease",
        inputs={"eta": eta, "delta": delta},
        point_radius=math.sqrt(4.0 * delta / (3.0 * eta)) if eta > 0 else 0.0,
        value_gap=delta / 3.0,
        slope_bound=math.sqrt(12.0 * eta * delta),
    )


def default_decrease_tradeoff(w: GrowthFunction, delta: float) -> float:
    """Dimensionally balanced trade-off constant for the general model-
    decrease certificate; recovers the specialized quadratic constant."""
    if w.kind == "power" and w.exponent == 2.0:
        return math.sqrt(3.0 * w.eta) / 2.0
    if delta > 0:
        return w.derivative(math.sqrt(delta)) / math.sqrt(delta)
    return 1.0


def cert_general_model_decrease(
    w: GrowthFunction, delta: float, c: Optional[float] = None
) -> StationarityCertificate:
    """Model-decrease certificate under a general growth function.

    An intermediate radius r_z = sqrt(delta) / c controls the construction;
    with quadratic growth and the default trade-off the specialized
    (sharper) quadratic formulas are returned, since they come from a
    tighter argument than the generic majorization used here.
    """
    if delta < 0:
        raise ValueError("model decrease must be nonnegative")
    if c is not None and c <= 0:
        raise ValueError("trade-off constant must be positive")
    use_default = c is None
    if use_default:
        c = default_decrease_tradeoff(w, delta)
    if w.kind == "power" and w.exponent == 2.0 and use_default:
        quad = cert_model_decrease(w.eta, delta)
        return StationarityCertificate(
            regime="general-model-decrease",
            inputs={"delta": delta, "c": c, **w.descriptor()},
            point_radius=quad.point_radius,
            value_gap=quad.value_gap,
            slope_bound=quad.slope_bound,
        )
    if delta == 0:
        return StationarityCertificate(
            "general-model-decrease", {"delta": 0.0, "c": c, **w.descriptor()}, 0.0, 0.0, 0.0
        )
    r_z = math.sqrt(delta) / c
    pr = r_z + w.point_proximity(r_z)
    return StationarityCertificate(
        regime="general-model-decrease",
        inputs={"delta": delta, "c": c, **w.descriptor()},
        point_radius=pr,
        value_gap=2.0 * w.value(r_z),
        slope_bound=c * math.sqrt(delta) + w.derivative(r_z) + w.derivative(pr),
    )


def cert_prox_subgradient(eta1: float, eta2: float, v_norm: float, d: float) -> StationarityCertificate:
    """Certificate when the step is only eps-stationary: the model majorizes
    a v-tilted quadratic at x_plus (proximal subgradient), with quadratic
    growths eta1 (model error) and eta2 (lower curvature)."""
    if min(eta1, eta2, v_norm, d) < 0:
        raise ValueError("all inputs must be nonnegative")
    return StationarityCertificate(
        regime="prox-subgradient",
        inputs={"eta1": eta1, "eta2": eta2, "v_norm": v_norm, "d": d},
        point_radius=d,
        value_gap=v_norm * d + 0.5 * eta1 * d * d,
        slope_bound=v_norm + eta1 * d + 2.0 * eta1 * d + eta2 * d,
    )


# ----------------------------------------------------------------------
# error-bound transfer formulas
# ----------------------------------------------------------------------


def step_error_bound(L: float, eta: float, d: float) -> float:
    """dist(x, S) <= (3 L eta + 2) d, valid inside the error-bound ball."""
    return (3.0 * L * eta + 2.0) * d


def model_error_bound(L: float, eta: float, delta: float) -> float:
    """dist(x, S) <= (L sqrt(12 eta) + 2 / sqrt(3 eta)) sqrt(delta)."""
    return (L * math.sqrt(12.0 * eta) + 2.0 / math.sqrt(3.0 * eta)) * math.sqrt(delta)


def inexact_error_bound(L: float, eta: float, eps: float, d: float) -> float:
    """dist(x, S) <= mu sqrt(eps) + (7 L eta + 6) d with mu = 2 sqrt(L(5 L eta + 4))."""
    mu = 2.0 * math.sqrt(L * (5.0 * L * eta + 4.0))
    return mu * math.sqrt(eps) + (7.0 * L * eta + 6.0) * d


def prox_stationary_error_bound(L: float, eta: float, v_norm: float, d: float) -> float:
    """dist(x, S) <= L ||v|| + (4 eta L + 2) d under a proximal subgradient v."""
    return L * v_norm + (4.0 * eta * L + 2.0) * d


def kl_to_slope_bound(theta: float, alpha: float) -> tuple[float, float]:
    """KL parameters -> sublevel-set distance bound
    dist(x, [f <= f*]) <= constant * slope^exponent, with
    constant = alpha^(1/theta) / (1 - theta) and exponent = (1-theta)/theta.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return alpha ** (1.0 / theta) / (1.0 - theta), (1.0 - theta) / theta


def slope_bound_to_kl(
    L: float,
    l_proxreg: float,
    r: Optional[float] = None,
    epsilon: Optional[float] = None,
) -> tuple[float, Optional[float]]:
    """Slope error-bound modulus -> KL constant at exponent 1/2 for
    prox-regular functions: sqrt(f - f*) <= sqrt(L + l L^2 / 2) * slope.

    When the sublevel radius ``r`` and subgradient radius ``epsilon`` of the
    hypothesis are supplied, the validity threshold
    min(r, (L + l L^2 / 2) epsilon^2) is reported alongside.
    """
    if L <= 0 or l_proxreg < 0:
        raise ValueError("need L > 0 and l_proxreg >= 0")
    c2 = L + l_proxreg * L * L / 2.0
    threshold = None
    if r is not None and epsilon is not None:
        threshold = min(r, c2 * epsilon * epsilon)
    return math.sqrt(c2), threshold


# ----------------------------------------------------------------------
# validity guards
# ----------------------------------------------------------------------


def validity_flags(
    estimate: ErrorBoundEstimate,
    regime: str,
    x,
    x_plus=None,
    eps: float = 0.0,
    delta: float = 0.0,
) -> dict:
    """Evaluate the region guards each error-bound formula assumes.

    The guards are reported as flags rather than enforced: mid-run they are
    often unverifiable, and the transfer formulas remain well defined
    outside the region (they just lose their guarantee).
    """
    xs, g = estimate.x_star, estimate.gamma
    x = np.atleast_1d(np.asarray(x, dtype=float))
    flags = {}
    if regime in ("exact-step", "general-growth"):
        flags["x_in_third_ball"] = bool(np.linalg.norm(x - xs) < g / 3.0)
        if x_plus is not None:
            xp = np.atleast_1d(np.asarray(x_plus, dtype=float))
            flags["x_plus_in_third_ball"] = bool(np.linalg.norm(xp - xs) < g / 3.0)
    elif regime in ("model-decrease", "general-model-decrease"):
        flags["x_in_half_ball"] = bool(np.linalg.norm(x - xs) < g / 2.0)
        flags["decrease_below_threshold"] = bool(delta < 3.0 * estimate.eta * g * g / 16.0)
    elif regime == "inexact-optimal":
        mu = 2.0 * math.sqrt(estimate.L * (5.0 * estimate.L * estimate.eta + 4.0))
        flags["eps_small"] = bool(math.sqrt(max(eps, 0.0)) < g * mu / (12.0 * estimate.L))
        if x_plus is not None:
            xp = np.atleast_1d(np.asarray(x_plus, dtype=float))
            flags["step_small"] = bool(np.linalg.norm(xp - x) < g / 9.0)
            flags["x_plus_in_third_ball"] = bool(np.linalg.norm(xp - xs) < g / 3.0)
    elif regime == "prox-subgradient":
        flags["x_in_third_ball"] = bool(np.linalg.norm(x - xs) < g / 3.0)
        if x_plus is not None:
            xp = np.atleast_1d(np.asarray(x_plus, dtype=float))
            flags["x_plus_in_third_ball"] = bool(np.linalg.norm(xp - xs) < g / 3.0)
    return flags


# ----------------------------------------------------------------------
# empirical error-bound modulus
# ----------------------------------------------------------------------


def estimate_slope_error_bound_L(
    grid: GridFunction,
    s: PointSet,
    center,
    gamma: float,
    dist_floor: Optional[float] = None,
    slope_floor: Optional[float] = None,
) -> float:
    """Empirical modulus for dist(x, S) <= L * slope(x) on the gamma-ball.

    Nodes closer to S than ``dist_floor`` (default sqrt(spacing)) are
    skipped: there the discrete slope error dominates the true ratio. A
    node beyond the floor whose slope the grid cannot resolve means the
    hypothesis fails, and is reported as an error.
    """
    h = grid.spacing
    if dist_floor is None:
        dist_floor = math.sqrt(h)
    if slope_floor is None:
        slope_floor = h
    center = np.atleast_1d(np.asarray(center, dtype=float))
    for c, (lo, hi) in zip(center, grid.box):
        if c - gamma < lo - 1e-12 or c + gamma > hi + 1e-12:
            raise ValueError("the gamma-ball must lie inside the grid box")
    slices, dist_to_center, _ = grid.window(center, gamma)
    slopes = grid.slope_field()[slices]
    axes = grid.axes()
    if grid.dimension == 1:
        pts = axes[0][slices[0]][:, None]
    else:
        c1 = axes[0][slices[0]]
        c2 = axes[1][slices[1]]
        g1, g2 = np.meshgrid(c1, c2, indexing="ij")
        pts = np.stack([g1.ravel(), g2.ravel()], axis=1)
    dists = np.min(
        np.linalg.norm(pts[:, None, :] - s.points[None, :, :], axis=2), axis=1
    ).reshape(slopes.shape)
    in_ball = dist_to_center <= gamma
    candidates = in_ball & (dists >= dist_floor)
    bad = candidates & (slopes < slope_floor)
    if bad.any():
        j = np.unravel_index(int(np.argmax(bad)), bad.shape)
        idx = tuple(sl.start + jj for sl, jj in zip(slices, j))
        raise ValueError(
            f"slope error-bound hypothesis fails at node {grid.node_point(idx)}: "
            f"dist {dists[j]:.3g} but slope {slopes[j]:.3g}"
        )
    if not candidates.any():
        raise ValueError("no usable nodes in the ball; enlarge gamma or refine the grid")
    return float(np.max(dists[candidates] / slopes[candidates]))
