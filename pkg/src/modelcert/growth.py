"""Growth functions and the Taylor-like model contract.

A model f_x based at x comes with a growth function omega certifying
|f_x(y) - f(y)| <= omega(d(x, y)). The error constant is data, not a
promise: it is validated by sampling before any certificate quotes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "GrowthFunction",
    "TaylorModel",
    "build_quadratic_model",
    "verify_model_error",
    "sample_box",
]


@dataclass(frozen=True)
class GrowthFunction:
    """omega with omega(0) = omega'(0) = 0 and omega' > 0 on (0, inf).

    The power form is omega(t) = (eta / r) * t**r with eta > 0, r > 1;
    it is a proper growth function (omega' -> 0 and omega/omega' -> 0 at 0).
    Custom (value, derivative) pairs are accepted; their growth-function
    properties are only checked by sampling.
    """

    kind: str  # "power" | "custom"
    eta: float = 0.0
    exponent: float = 2.0
    value_fn: Optional[Callable[[float], float]] = None
    deriv_fn: Optional[Callable[[float], float]] = None
    proper: bool = True

    @classmethod
    def power(cls, eta: float, r: float = 2.0) -> "GrowthFunction":
        if eta < 0:
            raise ValueError("eta must be nonnegative")
        if r <= 1:
            raise ValueError("exponent must exceed 1")
        return cls(kind="power", eta=float(eta), exponent=float(r), proper=True)

    @classmethod
    def quadratic(cls, eta: float) -> "GrowthFunction":
        return cls.power(eta, 2.0)

    @classmethod
    def custom(cls, value_fn, deriv_fn, proper: bool = False, check_samples: int = 64) -> "GrowthFunction":
        w = cls(kind="custom", value_fn=value_fn, deriv_fn=deriv_fn, proper=proper)
        if abs(value_fn(0.0)) > 1e-12 or abs(deriv_fn(0.0)) > 1e-12:
            raise ValueError("growth function must satisfy omega(0) = omega'(0) = 0")
        for t in np.geomspace(1e-6, 1.0, check_samples):
            if deriv_fn(float(t)) <= 0:
                raise ValueError(f"omega' must be positive on (0, inf); failed at t={t}")
        if proper:
            for t in (2.0**-k for k in range(24, 40)):
                d = deriv_fn(t)
                if d > 1e-4 or value_fn(t) / d > 1e-4:
                    raise ValueError("proper growth limits fail on sampled t -> 0")
        return w

    def value(self, t: float) -> float:
        if t < 0:
            raise ValueError("growth functions are defined on t >= 0")
        if self.kind == "power":
            return (self.eta / self.exponent) * t**self.exponent
        return float(self.value_fn(t))

    def derivative(self, t: float) -> float:
        if t < 0:
            raise ValueError("growth functions are defined on t >= 0")
        if self.kind == "power":
            return self.eta * t ** (self.exponent - 1.0)
        return float(self.deriv_fn(t))

    def point_proximity(self, t: float) -> float:
        """2 * omega(t) / omega'(t), with the 0/0 := 0 convention."""
        if t == 0:
            return 0.0
        d = self.derivative(t)
        if d == 0:
            return 0.0
        return 2.0 * self.value(t) / d

    def descriptor(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "eta": self.eta, "r": self.exponent}
        return {"kind": "custom", "proper": self.proper}


@dataclass(frozen=True)
class TaylorModel:
    """An evaluable model of f based at ``base_point`` with a certified
    error bound |f_x(y) - f(y)| <= error_bound(d(x, y))."""

    base_point: np.ndarray
    evaluate: Callable[[np.ndarray], float]
    error_bound: GrowthFunction
    minimize_hint: str = "generic"  # closed-form | piecewise-1d | dual-solver | generic
    argmin: Optional[np.ndarray] = None

    def __post_init__(self):
        bp = np.atleast_1d(np.asarray(self.base_point, dtype=float))
        bp.setflags(write=False)
        object.__setattr__(self, "base_point", bp)

    def descriptor(self) -> dict:
        doc = {"base_point": self.base_point.tolist()}
        doc.update(self.error_bound.descriptor())
        return doc


def build_quadratic_model(f, grad, x, B, eta: float) -> TaylorModel:
    """Quadratic model f(x) + <g, y - x> + 0.5 <B (y - x), y - x>.

    ``B`` must be positive semidefinite (a negative eigenvalue would leave
    the model unbounded below). ``eta`` is the caller-certified quadratic
    error constant; validate it with :func:`verify_model_error`.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape != (n, n):
        raise ValueError(f"B must be {n}x{n}")
    eigs = np.linalg.eigvalsh(0.5 * (B + B.T))
    if eigs.min() < -1e-10 * max(1.0, abs(eigs).max()):
        raise ValueError("B has a negative eigenvalue; model would be unbounded below")
    f0 = float(f(x if n > 1 else float(x[0])))
    g0 = np.atleast_1d(np.asarray(grad(x if n > 1 else float(x[0])), dtype=float))

    def evaluate(y):
        d = np.atleast_1d(np.asarray(y, dtype=float)) - x
        return f0 + float(g0 @ d) + 0.5 * float(d @ (B @ d))

    definite = eigs.min() > 1e-12 * max(1.0, abs(eigs).max())
    argmin = x - np.linalg.solve(B, g0) if definite else None
    return TaylorModel(
        base_point=x,
        evaluate=evaluate,
        error_bound=GrowthFunction.quadratic(eta) if eta > 0 else GrowthFunction(kind="power", eta=0.0),
        minimize_hint="closed-form" if definite else "generic",
        argmin=argmin,
    )


def verify_model_error(f, model: TaylorModel, samples) -> tuple[float, Optional[np.ndarray]]:
    """Max over samples of (|f_x(y) - f(y)| - omega(d(x, y)))+ and the argmax.

    Zero means the certified error hypothesis holds on the sample.
    """
    samples = [np.atleast_1d(np.asarray(s, dtype=float)) for s in samples]
    if not samples:
        raise ValueError("samples must be nonempty")
    x = model.base_point
    worst = 0.0
    worst_pt = None
    for y in samples:
        d = float(np.linalg.norm(y - x))
        fy = float(f(y if y.size > 1 else float(y[0])))
        err = abs(model.evaluate(y) - fy) - model.error_bound.value(d)
        if err > worst:
            worst = err
            worst_pt = y
    return worst, worst_pt


def sample_box(box, n: int, seed: int = 0) -> np.ndarray:
    """``n`` uniform points in the box (per-axis (lo, hi)), seeded."""
    box = np.atleast_2d(np.asarray(box, dtype=float))
    rng = np.random.default_rng(seed)
    return rng.uniform(box[:, 0], box[:, 1], size=(n, box.shape[0]))
