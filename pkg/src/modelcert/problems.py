"""Problem library: built-in smooth maps, the desk-scale corpus, and JSON
problem descriptors.

Each corpus entry carries its composite problem, a sample-validated model
error constant, optional exact stationary-set / optimal-value data, and a
lazily built grid rendering of f for the slope oracle.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .composite import CompositeProblem, Gpart, Hpart, model_error_max
from .grids import GridFunction, PointSet
from .subsolver import SupportSet

__all__ = [
    "ProblemSpec",
    "registry",
    "get_problem",
    "problem_names",
    "load_problem_json",
    "validate_eta",
    "PROBLEM_DIR_ENV",
]

PROBLEM_DIR_ENV = "MODELCERT_PROBLEM_DIR"

ETA_SAFETY_FACTOR = 2.0


# ----------------------------------------------------------------------
# built-in smooth maps, registered by name
# ----------------------------------------------------------------------


def _map_shifted_parabola(shift: float):
    # c(t) = t^2/2 + shift*t as a 1-residual map; Jacobian Lipschitz 1
    def c(x):
        t = float(np.atleast_1d(x)[0])
        return np.array([0.5 * t * t + shift * t])

    def jac(x):
        t = float(np.atleast_1d(x)[0])
        return np.array([[t + shift]])

    def c_batch(X):
        t = X[:, 0]
        return (0.5 * t * t + shift * t)[:, None]

    return c, jac, c_batch, 1.0


def _map_offset_parabola(offset: float):
    # c(t) = t^2/2 - offset
    def c(x):
        t = float(np.atleast_1d(x)[0])
        return np.array([0.5 * t * t - offset])

    def jac(x):
        t = float(np.atleast_1d(x)[0])
        return np.array([[t]])

    def c_batch(X):
        t = X[:, 0]
        return (0.5 * t * t - offset)[:, None]

    return c, jac, c_batch, 1.0


def _map_bowl(a: float, b: float):
    # scalar c(x) = (a x1^2 + b x2^2) / 2
    def c(x):
        x = np.atleast_1d(x)
        return np.array([0.5 * (a * x[0] ** 2 + b * x[1] ** 2)])

    def jac(x):
        x = np.atleast_1d(x)
        return np.array([[a * x[0], b * x[1]]])

    def c_batch(X):
        return (0.5 * (a * X[:, 0] ** 2 + b * X[:, 1] ** 2))[:, None]

    return c, jac, c_batch, max(a, b)


def _map_circle_residuals():
    # c(x) = (x1^2 - x2, x2 - 1); Jacobian Lipschitz 2
    def c(x):
        x = np.atleast_1d(x)
        return np.array([x[0] ** 2 - x[1], x[1] - 1.0])

    def jac(x):
        x = np.atleast_1d(x)
        return np.array([[2.0 * x[0], -1.0], [0.0, 1.0]])

    def c_batch(X):
        return np.stack([X[:, 0] ** 2 - X[:, 1], X[:, 1] - 1.0], axis=1)

    return c, jac, c_batch, 2.0


def _map_line_probe():
    # c(t) = (t^2/2 + t, 0.5 t - 0.25); Jacobian Lipschitz 1
    def c(x):
        t = float(np.atleast_1d(x)[0])
        return np.array([0.5 * t * t + t, 0.5 * t - 0.25])

    def jac(x):
        t = float(np.atleast_1d(x)[0])
        return np.array([[t + 1.0], [0.5]])

    def c_batch(X):
        t = X[:, 0]
        return np.stack([0.5 * t * t + t, 0.5 * t - 0.25], axis=1)

    return c, jac, c_batch, 1.0


def _map_curve_fit():
    # c(t) = (t^2 - 1, t); Jacobian Lipschitz 2
    def c(x):
        t = float(np.atleast_1d(x)[0])
        return np.array([t * t - 1.0, t])

    def jac(x):
        t = float(np.atleast_1d(x)[0])
        return np.array([[2.0 * t], [1.0]])

    def c_batch(X):
        t = X[:, 0]
        return np.stack([t * t - 1.0, t], axis=1)

    return c, jac, c_batch, 2.0


BUILTIN_MAPS: dict[str, Callable] = {
    "shifted-parabola": _map_shifted_parabola,
    "offset-parabola": _map_offset_parabola,
    "bowl": _map_bowl,
    "circle-residuals": _map_circle_residuals,
    "line-probe": _map_line_probe,
    "curve-fit": _map_curve_fit,
}


# ----------------------------------------------------------------------
# eta validation
# ----------------------------------------------------------------------


def validate_eta(
    p: CompositeProblem,
    eta0: Optional[float] = None,
    base_points: int = 24,
    target_points: int = 1000,
    seed: int = 1234,
    max_inflations: int = 8,
) -> float:
    """Sample-validate the model error constant on the working box.

    Starts from l*beta and inflates by the safety factor until the sampled
    hypothesis |f_x(y) - f(y)| <= (eta/2) d(x, y)^2 holds with zero
    violation for every sampled base point.
    """
    rng = np.random.default_rng(seed)
    box = p.working_box
    if p.g.tag == "box":
        box = np.stack([np.maximum(box[:, 0], p.g.lo), np.minimum(box[:, 1], p.g.hi)], axis=1)
    bases = rng.uniform(box[:, 0], box[:, 1], size=(base_points, box.shape[0]))
    targets = rng.uniform(box[:, 0], box[:, 1], size=(target_points, box.shape[0]))
    eta = p.l * p.beta if eta0 is None else eta0
    for _ in range(max_inflations):
        worst = 0.0
        for x in bases:
            viol, ratio = model_error_max(p, x, targets, eta)
            worst = max(worst, viol)
        if worst <= 1e-10:  # roundoff allowance; the bound may hold with equality
            return eta
        eta *= ETA_SAFETY_FACTOR
    raise ValueError(f"could not validate a model error constant for {p.name!r}")


# ----------------------------------------------------------------------
# corpus
# ----------------------------------------------------------------------


@dataclass
class ProblemSpec:
    """A corpus entry: problem + validated eta + verification metadata."""

    name: str
    problem: CompositeProblem
    eta: float
    known_stationary_set: Optional[PointSet] = None
    known_f_star: Optional[float] = None
    grid_box: Optional[np.ndarray] = None
    grid_spacing: float = 1e-3
    analytic_derivative: Optional[Callable] = None
    eb_center: Optional[np.ndarray] = None
    eb_gamma: Optional[float] = None
    default_starts: tuple = ()
    _grid: Optional[GridFunction] = field(default=None, repr=False)

    def grid(self) -> Optional[GridFunction]:
        """Grid rendering of f (built lazily, cached)."""
        if self.grid_box is None:
            return None
        if self._grid is None:
            self._grid = GridFunction.sample_vectorized(
                self.problem.f_batch,
                self.grid_box,
                self.grid_spacing,
                analytic_derivative=self.analytic_derivative,
            )
        return self._grid

    def release_grid(self) -> None:
        self._grid = None


def _build_footnote() -> ProblemSpec:
    c, jac, c_batch, beta = _map_shifted_parabola(1.0)
    p = CompositeProblem(
        g=Gpart.zero(), h=Hpart.abs(), c=c, jacobian=jac, beta=beta,
        working_box=[(-3.0, 3.0)], c_batch=c_batch, name="footnote",
    )
    return ProblemSpec(
        name="footnote",
        problem=p,
        eta=validate_eta(p),
        known_stationary_set=PointSet([[-2.0], [-1.0], [0.0]]),
        known_f_star=0.0,
        grid_box=np.array([(-3.0, 3.0)]),
        analytic_derivative=lambda t: np.array(
            [(t + 1.0) * math.copysign(1.0, 0.5 * t * t + t) if 0.5 * t * t + t != 0 else t + 1.0]
        ),
        eb_center=np.array([0.0]),
        eb_gamma=0.6,
        default_starts=(1.0, 0.8, 0.55, 1.3, 0.35, -0.45, 1.8, 0.19, -0.3, 2.4),
    )


def _build_bowl() -> ProblemSpec:
    c, jac, c_batch, beta = _map_bowl(1.0, 2.0)
    p = CompositeProblem(
        g=Gpart.zero(), h=Hpart.identity(), c=c, jacobian=jac, beta=beta,
        working_box=[(-1.2, 1.2), (-1.2, 1.2)], c_batch=c_batch, name="bowl",
    )
    return ProblemSpec(
        name="bowl",
        problem=p,
        eta=validate_eta(p),
        known_stationary_set=PointSet([[0.0, 0.0]]),
        known_f_star=0.0,
        grid_box=np.array([(-1.2, 1.2), (-1.2, 1.2)]),
        eb_center=np.array([0.0, 0.0]),
        eb_gamma=0.9,
        default_starts=((1.0, 0.7), (-0.8, 0.9), (0.6, -1.0), (-1.1, -0.4), (0.9, 0.2), (0.2, 1.1)),
    )


def _build_circle_lsq() -> ProblemSpec:
    c, jac, c_batch, beta = _map_circle_residuals()
    p = CompositeProblem(
        g=Gpart.zero(), h=Hpart.norm(dim=2), c=c, jacobian=jac, beta=beta,
        working_box=[(0.0, 1.8), (0.0, 1.8)], c_batch=c_batch, name="circle-lsq",
    )
    return ProblemSpec(
        name="circle-lsq",
        problem=p,
        eta=validate_eta(p),
        known_stationary_set=PointSet([[1.0, 1.0], [-1.0, 1.0], [0.0, 0.5]]),
        known_f_star=0.0,
        grid_box=np.array([(0.0, 1.8), (0.0, 1.8)]),
        eb_center=np.array([1.0, 1.0]),
        eb_gamma=0.45,
        default_starts=((1.3, 0.8), (0.7, 1.2), (1.45, 1.35), (0.85, 0.7), (1.2, 1.15), (0.65, 0.9)),
    )


def _build_scalar_l1() -> ProblemSpec:
    c, jac, c_batch, beta = _map_offset_parabola(0.25)
    p = CompositeProblem(
        g=Gpart.l1(0.3), h=Hpart.abs(), c=c, jacobian=jac, beta=beta,
        working_box=[(-2.0, 2.0)], c_batch=c_batch, name="scalar-l1",
    )
    root = math.sqrt(0.5)
    return ProblemSpec(
        name="scalar-l1",
        problem=p,
        eta=validate_eta(p),
        known_stationary_set=PointSet([[-root], [-0.3], [0.0], [0.3], [root]]),
        known_f_star=0.3 * root,
        grid_box=np.array([(-2.0, 2.0)]),
        eb_center=np.array([root]),
        eb_gamma=0.24,
        default_starts=(0.9, 1.2, 0.95, 1.6, 0.85, -0.9, -1.4, 1.05, -1.1, 1.8),
    )


def _build_support_box() -> ProblemSpec:
    c, jac, c_batch, beta = _map_line_probe()
    p = CompositeProblem(
        g=Gpart.zero(),
        h=Hpart.support(SupportSet.box([-1.0, -1.0], [1.0, 1.0])),
        c=c, jacobian=jac, beta=beta,
        working_box=[(-3.0, 3.0)], c_batch=c_batch, name="support-box",
    )
    return ProblemSpec(
        name="support-box",
        problem=p,
        eta=validate_eta(p),
        known_stationary_set=PointSet([[-2.0], [-1.5], [0.0]]),
        known_f_star=0.25,
        grid_box=np.array([(-3.0, 3.0)]),
        eb_center=np.array([0.0]),
        eb_gamma=0.5,
        default_starts=(1.0, 0.7, 1.4, 0.45, 1.9, -0.6, 0.3, 1.15, 2.3, -0.25),
    )


def _build_box_lsq() -> ProblemSpec:
    c, jac, c_batch, beta = _map_offset_parabola(1.0)
    p = CompositeProblem(
        g=Gpart.box([0.0], [2.0]), h=Hpart.abs(), c=c, jacobian=jac, beta=beta,
        working_box=[(0.0, 2.0)], c_batch=c_batch, name="box-lsq",
    )
    root = math.sqrt(2.0)
    return ProblemSpec(
        name="box-lsq",
        problem=p,
        eta=validate_eta(p),
        known_stationary_set=PointSet([[0.0], [root]]),
        known_f_star=0.0,
        grid_box=np.array([(0.0, 2.0)]),
        eb_center=np.array([root]),
        eb_gamma=0.4,
        default_starts=(0.3, 0.75, 1.9, 1.1, 0.52, 1.7, 0.9, 1.25, 0.64, 1.05),
    )


def _build_curve_lm() -> ProblemSpec:
    c, jac, c_batch, beta = _map_curve_fit()
    # h = ||.||^2 is only locally Lipschitz; take l = 2 sup ||c|| over the
    # working box (sampled) so the model majorizes f along the runs
    box = np.array([(-1.3, 1.3)])
    ts = np.linspace(box[0, 0], box[0, 1], 2001)[:, None]
    resid = np.stack([ts[:, 0] ** 2 - 1.0, ts[:, 0]], axis=1)
    l_local = 2.0 * float(np.max(np.linalg.norm(resid, axis=1)))
    p = CompositeProblem(
        g=Gpart.zero(), h=Hpart.sqnorm(), c=c, jacobian=jac, beta=beta, l=l_local,
        working_box=box, c_batch=c_batch, name="curve-lm",
    )
    root = math.sqrt(0.5)
    return ProblemSpec(
        name="curve-lm",
        problem=p,
        eta=validate_eta(p),
        known_stationary_set=PointSet([[-root], [0.0], [root]]),
        known_f_star=0.75,
        grid_box=box.copy(),
        eb_center=np.array([root]),
        eb_gamma=0.3,
        default_starts=(1.2, 0.9, 1.05, 0.45, -1.2, 0.6, 1.25, -0.95, 0.8, 1.1),
    )


_BUILDERS = {
    "footnote": _build_footnote,
    "bowl": _build_bowl,
    "circle-lsq": _build_circle_lsq,
    "scalar-l1": _build_scalar_l1,
    "support-box": _build_support_box,
    "box-lsq": _build_box_lsq,
    "curve-lm": _build_curve_lm,
}


@lru_cache(maxsize=1)
def _cached_registry() -> dict:
    reg = {name: build() for name, build in _BUILDERS.items()}
    override = os.environ.get(PROBLEM_DIR_ENV)
    if override:
        for fname in sorted(os.listdir(override)):
            if fname.endswith(".json"):
                ps = load_problem_json(os.path.join(override, fname))
                reg[ps.name] = ps
    return reg


def registry() -> dict:
    """Name -> ProblemSpec for the built-in corpus, plus any problems found
    in the directory named by the MODELCERT_PROBLEM_DIR environment
    variable."""
    return dict(_cached_registry())


def problem_names() -> list[str]:
    return sorted(registry())


def get_problem(name: str) -> ProblemSpec:
    reg = registry()
    if name not in reg:
        raise KeyError(f"unknown problem {name!r}; known: {sorted(reg)}")
    return reg[name]


# ----------------------------------------------------------------------
# JSON problem descriptors
# ----------------------------------------------------------------------


def _g_from_doc(doc: dict) -> Gpart:
    tag = doc["tag"]
    if tag == "zero":
        return Gpart.zero()
    if tag == "l1":
        return Gpart.l1(doc["weight"])
    if tag == "box":
        return Gpart.box(doc["lo"], doc["hi"])
    raise ValueError(f"unsupported g tag {tag!r} in a JSON descriptor")


def _h_from_doc(doc: dict) -> Hpart:
    tag = doc["tag"]
    if tag == "abs":
        return Hpart.abs()
    if tag == "norm":
        return Hpart.norm(dim=doc["dim"])
    if tag == "sqnorm":
        return Hpart.sqnorm()
    if tag == "max":
        return Hpart.max_of_coordinates(doc["dim"])
    if tag == "support":
        s = doc["set"]
        kind = s["kind"]
        if kind == "interval":
            return Hpart.support(SupportSet.interval(s["a"]))
        if kind == "box":
            return Hpart.support(SupportSet.box(s["lo"], s["hi"]))
        if kind == "ball":
            return Hpart.support(SupportSet.ball(s["radius"], s.get("center"), dim=s.get("dim", 1)))
        if kind == "simplex":
            return Hpart.support(SupportSet.simplex(s["dim"]))
    if tag == "linear":
        return Hpart.linear(doc["z"])
    raise ValueError(f"unsupported h tag {tag!r} in a JSON descriptor")


def load_problem_json(path: str) -> ProblemSpec:
    """Load a problem descriptor:
    {name, g: {tag, ...}, h: {tag, ...}, c: {name, params}, l?, beta, box,
     known_stationary_set?, known_f_star?, grid?: {box, spacing}}."""
    with open(path) as fh:
        doc = json.load(fh)
    cdoc = doc["c"]
    if cdoc["name"] not in BUILTIN_MAPS:
        raise ValueError(f"unknown builtin map {cdoc['name']!r}")
    c, jac, c_batch, beta_hint = BUILTIN_MAPS[cdoc["name"]](*cdoc.get("params", []))
    p = CompositeProblem(
        g=_g_from_doc(doc["g"]),
        h=_h_from_doc(doc["h"]),
        c=c,
        jacobian=jac,
        beta=doc.get("beta", beta_hint),
        l=doc.get("l"),
        working_box=doc["box"],
        c_batch=c_batch,
        name=doc["name"],
    )
    ps = ProblemSpec(name=doc["name"], problem=p, eta=doc.get("eta") or validate_eta(p))
    if "known_stationary_set" in doc:
        ps.known_stationary_set = PointSet(doc["known_stationary_set"])
    if "known_f_star" in doc:
        ps.known_f_star = doc["known_f_star"]
    if "grid" in doc:
        ps.grid_box = np.atleast_2d(np.asarray(doc["grid"]["box"], dtype=float))
        ps.grid_spacing = doc["grid"].get("spacing", 1e-3)
    return ps
