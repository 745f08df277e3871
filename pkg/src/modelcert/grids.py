"""Brute-force slope oracle on gridded 1-d / 2-d functions.

The grid is the ground truth everything else is checked against: discrete
slopes, limiting slopes, distances to explicit point sets, exhaustive
witness searches for near-stationarity certificates, and empirical
Kurdyka-Lojasiewicz (KL) envelope fits.

Everything here is a pure function of immutable inputs; a GridFunction may
be shared freely across threads (the cached slope field is computed once,
and a duplicated computation under a race is benign).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "GridFunction",
    "PointSet",
    "Witness",
    "KLFit",
    "dist_to_set",
    "find_witness",
    "find_certificate_witness",
    "witness_slack",
    "estimate_kl_parameters",
]

# Default shrinking radius schedule, in units of grid spacing. The slope
# estimate reports the value at the final (smallest) radius.
SLOPE_RADIUS_SCHEDULE = (8.0, 4.0, 2.0, 1.0)


class DegenerateGridError(RuntimeError):
    """Raised when a node has no neighbor inside the query radius."""


def _as_box(box) -> tuple[tuple[float, float], ...]:
    arr = np.asarray(box, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] != 2:
        raise ValueError(f"box must be per-axis (lo, hi) pairs, got shape {arr.shape}")
    return tuple((float(lo), float(hi)) for lo, hi in arr)


class GridFunction:
    """A function sampled on a uniform grid over a closed box.

    Parameters
    ----------
    box : per-axis (lo, hi) pairs; one pair for 1-d, two for 2-d.
    spacing : uniform node spacing, shared by all axes.
    values : dense node values, shape (n1,) or (n1, n2).
    analytic_derivative : optional gradient callable used for cross-checks
        where the sampled function is smooth.
    """

    def __init__(self, box, spacing: float, values, analytic_derivative=None):
        self.box = _as_box(box)
        self.dimension = len(self.box)
        if self.dimension not in (1, 2):
            raise ValueError("only 1-d and 2-d grids are supported")
        if not (spacing > 0):
            raise ValueError("spacing must be positive")
        self.spacing = float(spacing)
        counts = []
        for lo, hi in self.box:
            if not hi > lo:
                raise ValueError("box must have positive volume")
            n = int(round((hi - lo) / self.spacing)) + 1
            if n < 2 or abs((hi - lo) - (n - 1) * self.spacing) > 1e-9 * max(1.0, abs(hi - lo)):
                raise ValueError("box endpoints must be an integer number of spacings apart")
            counts.append(n)
        self.shape = tuple(counts)
        vals = np.asarray(values, dtype=float)
        if vals.size != int(np.prod(self.shape)):
            raise ValueError(f"values size {vals.size} != node count {np.prod(self.shape)}")
        vals = vals.reshape(self.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must all be finite")
        vals.setflags(write=False)
        self.values = vals
        self.analytic_derivative = analytic_derivative
        self._slope_field: Optional[np.ndarray] = None

    # ------------------------------------------------------------------
    # construction / serialization
    # ------------------------------------------------------------------

    @classmethod
    def sample(cls, fn: Callable, box, spacing: float, analytic_derivative=None) -> "GridFunction":
        """Sample ``fn`` on the grid. ``fn`` receives scalar / 1-d points."""
        box = _as_box(box)
        axes = [np.linspace(lo, hi, int(round((hi - lo) / spacing)) + 1) for lo, hi in box]
        if len(box) == 1:
            values = np.array([fn(t) for t in axes[0]], dtype=float)
        else:
            x1, x2 = np.meshgrid(axes[0], axes[1], indexing="ij")
            pts = np.stack([x1.ravel(), x2.ravel()], axis=1)
            values = np.array([fn(p) for p in pts], dtype=float).reshape(x1.shape)
        return cls(box, spacing, values, analytic_derivative=analytic_derivative)

    @classmethod
    def sample_vectorized(cls, fn: Callable, box, spacing: float, analytic_derivative=None) -> "GridFunction":
        """Like :meth:`sample` for an ``fn`` that maps (N, dim) -> (N,)."""
        box = _as_box(box)
        axes = [np.linspace(lo, hi, int(round((hi - lo) / spacing)) + 1) for lo, hi in box]
        if len(box) == 1:
            values = fn(axes[0][:, None]).reshape(-1)
        else:
            x1, x2 = np.meshgrid(axes[0], axes[1], indexing="ij")
            pts = np.stack([x1.ravel(), x2.ravel()], axis=1)
            values = fn(pts).reshape(x1.shape)
        return cls(box, spacing, values, analytic_derivative=analytic_derivative)

    def to_json_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "box": [list(b) for b in self.box],
            "spacing": self.spacing,
            "values_row_major": self.values.ravel().tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GridFunction":
        box = doc["box"]
        g = cls(box, doc["spacing"], np.asarray(doc["values_row_major"], dtype=float))
        if g.dimension != doc.get("dimension", g.dimension):
            raise ValueError("dimension field inconsistent with box")
        return g

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "GridFunction":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    # ------------------------------------------------------------------
    # node bookkeeping
    # ------------------------------------------------------------------

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.box, self.shape)]

    def nearest_node(self, x) -> tuple[int, ...]:
        """Index of the grid node closest to ``x`` (clipped into the box)."""
        pt = np.atleast_1d(np.asarray(x, dtype=float))
        idx = []
        for i, (lo, hi) in enumerate(self.box):
            j = int(round((pt[i] - lo) / self.spacing))
            idx.append(min(max(j, 0), self.shape[i] - 1))
        return tuple(idx)

    def node_point(self, idx: tuple[int, ...]) -> np.ndarray:
        return np.array([lo + j * self.spacing for (lo, _), j in zip(self.box, idx)])

    def value_at(self, idx: tuple[int, ...]) -> float:
        return float(self.values[idx])

    def contains(self, x, tol: float = 0.0) -> bool:
        pt = np.atleast_1d(np.asarray(x, dtype=float))
        return all(lo - tol <= p <= hi + tol for p, (lo, hi) in zip(pt, self.box))

    def _node_index(self, x) -> tuple[int, ...]:
        """Resolve ``x`` (index tuple or coordinates) to a node index."""
        if isinstance(x, tuple) and all(isinstance(j, (int, np.integer)) for j in x):
            return x
        if isinstance(x, (int, np.integer)) and self.dimension == 1:
            return (int(x),)
        idx = self.nearest_node(x)
        pt = np.atleast_1d(np.asarray(x, dtype=float))
        if np.max(np.abs(self.node_point(idx) - pt)) > 1e-6 * self.spacing:
            raise ValueError(f"{x!r} is not a grid node")
        return idx

    # ------------------------------------------------------------------
    # slope oracle
    # ------------------------------------------------------------------

    def _offsets(self, radius: float) -> list[tuple[tuple[int, ...], float]]:
        k = int(math.floor(radius / self.spacing + 1e-12))
        offs = []
        ranges = [range(-k, k + 1)] * self.dimension
        for off in itertools.product(*ranges):
            if all(o == 0 for o in off):
                continue
            d = math.hypot(*off) * self.spacing
            if d <= radius * (1 + 1e-12):
                offs.append((off, d))
        return offs

    def slope_at(self, x, radius: Optional[float] = None) -> float:
        """Discrete slope: max over nodes y with d(x, y) <= radius of
        (f(x) - f(y))+ / d(x, y).

        With ``radius=None`` the shrinking schedule is applied and the value
        at the final radius (one spacing) is reported.
        """
        if radius is None:
            return self.slope_schedule(x)[-1]
        idx = self._node_index(x)
        if radius < self.spacing * (1 - 1e-12):
            raise ValueError("radius must be at least one grid spacing")
        fx = self.values[idx]
        best = 0.0
        found = False
        for off, d in self._offsets(radius):
            j = tuple(i + o for i, o in zip(idx, off))
            if any(jj < 0 or jj >= n for jj, n in zip(j, self.shape)):
                continue
            found = True
            dec = fx - self.values[j]
            if dec > 0:
                best = max(best, dec / d)
        if not found:
            raise DegenerateGridError(f"no neighbor of node {idx} within radius {radius}")
        return best

    def slope_schedule(self, x, schedule: Sequence[float] = SLOPE_RADIUS_SCHEDULE) -> list[float]:
        """Slopes along the shrinking radius schedule (multiples of spacing)."""
        return [self.slope_at(x, radius=s * self.spacing) for s in schedule]

    def slope_field(self) -> np.ndarray:
        """Slope at every node (radius = one spacing), computed vectorized."""
        if self._slope_field is None:
            f = self.values
            best = np.zeros_like(f)
            if self.dimension == 1:
                dec = np.full_like(f, -np.inf)
                dec[1:] = np.maximum(dec[1:], f[1:] - f[:-1])
                dec[:-1] = np.maximum(dec[:-1], f[:-1] - f[1:])
                best = np.maximum(dec, 0.0) / self.spacing
            else:
                dec = np.full_like(f, -np.inf)
                dec[1:, :] = np.maximum(dec[1:, :], f[1:, :] - f[:-1, :])
                dec[:-1, :] = np.maximum(dec[:-1, :], f[:-1, :] - f[1:, :])
                dec[:, 1:] = np.maximum(dec[:, 1:], f[:, 1:] - f[:, :-1])
                dec[:, :-1] = np.maximum(dec[:, :-1], f[:, :-1] - f[:, 1:])
                best = np.maximum(dec, 0.0) / self.spacing
            best.setflags(write=False)
            self._slope_field = best
        return self._slope_field

    def limiting_slope_at(self, x, radius_schedule: Optional[Sequence[float]] = None) -> float:
        """Discrete liminf proxy of the slope.

        Takes the minimum slope over nodes y (the base node included) with
        d(y, x) <= r and |f(y) - f(x)| <= r, for the smallest schedule
        radius r.
        """
        idx = self._node_index(x)
        if radius_schedule is None:
            radius_schedule = [s * self.spacing for s in SLOPE_RADIUS_SCHEDULE]
        r = min(radius_schedule)
        if r < self.spacing * (1 - 1e-12):
            raise ValueError("schedule must end at or above one grid spacing")
        fx = self.values[idx]
        best = self.slope_at(idx, radius=self.spacing)
        for off, d in self._offsets(r):
            j = tuple(i + o for i, o in zip(idx, off))
            if any(jj < 0 or jj >= n for jj, n in zip(j, self.shape)):
                continue
            if abs(self.values[j] - fx) <= r:
                best = min(best, self.slope_at(j, radius=self.spacing))
        return best

    def window(self, center, radius: float) -> tuple[tuple[slice, ...], np.ndarray, np.ndarray]:
        """Index slices, node distances to ``center`` and node values on the
        sub-box of nodes within (inf-norm) ``radius`` of ``center``."""
        pt = np.atleast_1d(np.asarray(center, dtype=float))
        slices = []
        for i, (lo, _) in enumerate(self.box):
            jlo = int(math.floor((pt[i] - radius - lo) / self.spacing))
            jhi = int(math.ceil((pt[i] + radius - lo) / self.spacing))
            slices.append(slice(max(jlo, 0), min(jhi, self.shape[i] - 1) + 1))
        slices = tuple(slices)
        axes = self.axes()
        if self.dimension == 1:
            coords = axes[0][slices[0]]
            dist = np.abs(coords - pt[0])
        else:
            c1 = axes[0][slices[0]][:, None]
            c2 = axes[1][slices[1]][None, :]
            dist = np.hypot(c1 - pt[0], c2 - pt[1])
        return slices, dist, self.values[slices]


@dataclass(frozen=True)
class PointSet:
    """An explicit finite set of reference points (e.g. stationary points)."""

    points: np.ndarray
    tolerance: float = 0.0

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def dist_to(self, x) -> float:
        return dist_to_set(x, self)

    def contains(self, x) -> bool:
        return self.dist_to(x) <= self.tolerance


def dist_to_set(x, s: PointSet) -> float:
    """Exact minimum Euclidean distance from ``x`` to the explicit set."""
    if s.points.size == 0:
        raise ValueError("point set is empty")
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    return float(np.min(np.linalg.norm(s.points - pt[None, :], axis=1)))


# ----------------------------------------------------------------------
# witness search
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Witness:
    """A grid node certifying the three-bound near-stationarity conclusion."""

    point: np.ndarray
    value: float
    slope: float
    dist_to_center: float


def witness_slack(eta: float, spacing: float) -> float:
    # Continuum witnesses may fall between nodes; one node of slack plus the
    # slope-bound scale keeps the discretized search faithful.
    return 5.0 * eta * spacing + spacing


def find_witness(
    grid: GridFunction,
    center,
    reference_value: float,
    point_radius: float,
    value_gap: float,
    slope_bound: float,
    slack: float,
) -> Optional[Witness]:
    """Search the grid for a node within ``point_radius`` of ``center`` whose
    value and slope fall under the certificate bounds, each relaxed by the
    additive ``slack``. Returns the admissible node of least slope."""
    pt = np.atleast_1d(np.asarray(center, dtype=float))
    if not grid.contains(pt, tol=grid.spacing):
        raise ValueError("witness search center lies outside the grid box")
    r = point_radius + slack
    slices, dist, vals = grid.window(pt, r)
    slopes = grid.slope_field()[slices]
    mask = (dist <= r) & (vals <= reference_value + value_gap + slack) & (slopes <= slope_bound + slack)
    if not mask.any():
        return None
    cand_slopes = np.where(mask, slopes, np.inf)
    flat = int(np.argmin(cand_slopes))
    idx_local = np.unravel_index(flat, cand_slopes.shape)
    idx = tuple(s.start + j for s, j in zip(slices, idx_local))
    return Witness(
        point=grid.node_point(idx),
        value=grid.value_at(idx),
        slope=float(grid.slope_field()[idx]),
        dist_to_center=float(np.linalg.norm(grid.node_point(idx) - pt)),
    )


def find_certificate_witness(
    grid: GridFunction,
    x,
    x_plus,
    eta: float,
    f_x_plus: Optional[float] = None,
) -> Optional[Witness]:
    """Witness search for the quadratic-error certificate produced by an
    exact model step x -> x_plus with certified error constant ``eta``:
    d(x+, w) <= d(x+, x), f(w) <= f(x+) + (eta/2) d^2, slope(w) <= 5 eta d,
    each with additive grid slack.
    """
    xp = np.atleast_1d(np.asarray(x_plus, dtype=float))
    xx = np.atleast_1d(np.asarray(x, dtype=float))
    if not (grid.contains(xx, tol=grid.spacing) and grid.contains(xp, tol=grid.spacing)):
        raise ValueError("x and x_plus must lie inside the grid box")
    d = float(np.linalg.norm(xp - xx))
    if f_x_plus is None:
        f_x_plus = grid.value_at(grid.nearest_node(xp))
    return find_witness(
        grid,
        center=xp,
        reference_value=f_x_plus,
        point_radius=d,
        value_gap=0.5 * eta * d * d,
        slope_bound=5.0 * eta * d,
        slack=witness_slack(eta, grid.spacing),
    )


# ----------------------------------------------------------------------
# KL envelope estimation
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class KLFit:
    """Result of the KL envelope fit (f - f*)^theta <= alpha * slope."""

    theta: float
    alpha: float
    residual: float
    nodes_used: int


def estimate_kl_parameters(
    grid: GridFunction,
    f_star: float,
    region=None,
    theta_grid: Sequence[float] = tuple(np.round(np.arange(0.1, 0.96, 0.05), 2)),
    value_floor: Optional[float] = None,
    slope_floor: Optional[float] = None,
    stability_tol: float = 0.04,
) -> KLFit:
    """Fit KL parameters on the grid by a log-log envelope scan.

    Admissible nodes have f - f* above ``value_floor`` (default 10 spacings,
    so the discrete slope resolves the local geometry) and lie inside
    ``region`` (per-axis (lo, hi), default the whole box). For each candidate
    theta the envelope constant is alpha(theta) = max (f - f*)^theta / slope
    over admissible nodes with resolvable slope. A candidate is kept when its
    envelope is stable under tightening the admissibility floor (otherwise
    the constant is an artifact of nodes near the minimizer, and would blow
    up on refinement); the smallest stable theta is returned.

    The residual reports the worst violation of the fitted inequality over
    all admissible nodes, including those whose slope the grid cannot
    resolve.
    """
    h = grid.spacing
    if value_floor is None:
        value_floor = 10.0 * h
    if slope_floor is None:
        slope_floor = h
    theta_grid = sorted(theta_grid)
    if not theta_grid or not all(0.0 < t < 1.0 for t in theta_grid):
        raise ValueError("theta candidates must lie in (0, 1)")

    vals = grid.values
    slopes = grid.slope_field()
    if region is not None:
        region = _as_box(region)
        axes = grid.axes()
        if grid.dimension == 1:
            in_region = (axes[0] >= region[0][0]) & (axes[0] <= region[0][1])
        else:
            m1 = (axes[0] >= region[0][0]) & (axes[0] <= region[0][1])
            m2 = (axes[1] >= region[1][0]) & (axes[1] <= region[1][1])
            in_region = m1[:, None] & m2[None, :]
    else:
        in_region = np.ones(grid.shape, dtype=bool)

    gap = vals - f_star
    if not np.any(in_region & (gap > 0)):
        raise ValueError("region contains no node with f above f_star")
    admissible = in_region & (gap >= value_floor)
    usable = admissible & (slopes >= slope_floor)
    if not usable.any():
        if admissible.any():
            raise ValueError("no KL inequality detectable: all admissible nodes have zero slope")
        raise ValueError("no admissible nodes above the value floor")

    g_use = gap[usable]
    s_use = slopes[usable]
    tight = admissible & (slopes >= slope_floor) & (gap >= 4.0 * value_floor)
    g_tight = gap[tight]
    s_tight = slopes[tight]

    def envelope(theta: float, g: np.ndarray, s: np.ndarray) -> float:
        return float(np.max(np.power(g, theta) / s)) if g.size else math.inf

    chosen = None
    for theta in theta_grid:
        a_full = envelope(theta, g_use, s_use)
        a_tight = envelope(theta, g_tight, s_tight)
        if math.isinf(a_tight) or a_full <= (1.0 + stability_tol) * a_tight:
            chosen = (theta, a_full)
            break
    if chosen is None:
        # No candidate passes the stability probe; fall back to the least
        # unstable one so the caller still gets an envelope to inspect.
        ratios = [
            (envelope(t, g_use, s_use) / envelope(t, g_tight, s_tight), t)
            for t in theta_grid
            if not math.isinf(envelope(t, g_tight, s_tight))
        ]
        theta = min(ratios)[1] if ratios else theta_grid[-1]
        chosen = (theta, envelope(theta, g_use, s_use))

    theta, alpha = chosen
    viol = np.power(gap[admissible], theta) - alpha * slopes[admissible]
    residual = float(np.max(np.maximum(viol, 0.0))) if viol.size else 0.0
    return KLFit(theta=theta, alpha=alpha, residual=residual, nodes_used=int(usable.sum()))
