"""Two-point and chord-arc gauges of closed curves.

Both constants are suprema over pairs of curve points.  They are estimated on
a finite cyclic sample of the curve:

* when every vertex pair fits in the pair budget, the sample is all vertices
  topped up with evenly spaced arclength points (the supremum of a polygon is
  often attained at non-vertex points, e.g. side midpoints of a square);
* otherwise the sample is the vertex set thinned to the vertices nearest an
  even arclength grid.  Thinned estimates are lower bounds.

The smaller-subarc diameters of all sample pairs come from a dynamic program
over cyclic windows: ``diam[i, i+k] = max(diam[i, i+k-1], diam[i+1, i+k],
|p_i - p_{i+k}|)``, evaluated one diagonal at a time.
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import BudgetError, GeometryError, check_int
from .curves import PolyCurve, point_set_diameter

log = logging.getLogger(__name__)

MAX_PAIRS = 4_000_000


@dataclass(frozen=True)
class GaugeResult:
    """Outcome of a pair scan: the constant and the pair attaining it."""

    constant: float
    x: np.ndarray
    y: np.ndarray
    x_param: float
    y_param: float
    n_samples: int
    exhaustive: bool
    truncation: bool = False

    def as_dict(self):
        return {
            "constant": self.constant,
            "x": [float(v) for v in self.x],
            "y": [float(v) for v in self.y],
            "x_param": self.x_param,
            "y_param": self.y_param,
            "n_samples": self.n_samples,
            "exhaustive": self.exhaustive,
            "truncation": self.truncation,
        }


def _as_closed_curve(curve):
    if not isinstance(curve, PolyCurve):
        curve = PolyCurve(curve, closed=True)
    if not curve.closed:
        raise GeometryError("pair gauges are defined for closed curves")
    return curve


def _sample_size(budget):
    cap = min(budget, MAX_PAIRS)
    m = int((1 + np.sqrt(1 + 8 * cap)) // 2)
    while m * (m - 1) // 2 > cap:
        m -= 1
    return m


def sample_curve(curve, budget):
    """Cyclic sample used by the gauges.

    Returns ``(params, points, piece_diam, exhaustive)`` where ``piece_diam[i]``
    is the diameter of the curve piece between samples ``i`` and ``i + 1``.
    """
    n = curve.n_vertices
    budget = check_int(budget, "budget", 1)
    if budget < n:
        raise BudgetError(f"budget {budget} is below the vertex count {n}; refusing to undersample")
    m = _sample_size(budget)
    L = curve.length
    vp = curve.vertex_params
    if m >= n:
        extra = m - n
        grid = L * np.arange(extra) / max(extra, 1)
        params = np.unique(np.concatenate([vp, grid]))
        pts = curve.point_at(params)
        nxt = np.roll(pts, -1, axis=0)
        piece = np.hypot(*(nxt - pts).T)
        return params, pts, piece, True
    # thin: keep the vertex nearest each grid value
    grid = L * np.arange(m) / m
    k = np.clip(np.searchsorted(vp, grid), 1, n - 1)
    left = vp[k - 1]
    right = vp[k]
    idx = np.where(grid - left <= right - grid, k - 1, k)
    idx = np.unique(idx)
    params = vp[idx]
    pts = curve.vertices[idx]
    piece = np.empty(len(idx))
    verts = curve.vertices
    for j in range(len(idx)):
        a = idx[j]
        b = idx[(j + 1) % len(idx)]
        if b > a:
            chunk = verts[a:b + 1]
        else:
            chunk = np.concatenate([verts[a:], verts[: b + 1]])
        piece[j] = point_set_diameter(chunk)
    return params, pts, piece, False


def _two_point_scan(pts, piece):
    m = len(pts)
    diam = np.empty((m, m))
    diam[0] = 0.0
    diam[1] = piece
    idx = np.arange(m)
    for k in range(2, m):
        j = (idx + k) % m
        chord = np.hypot(pts[j, 0] - pts[:, 0], pts[j, 1] - pts[:, 1])
        np.maximum(diam[k - 1], np.roll(diam[k - 1], -1), out=diam[k])
        np.maximum(diam[k], chord, out=diam[k])
    best, arg = 0.0, (0, 1)
    for k in range(1, m // 2 + 1):
        j = (idx + k) % m
        chord = np.hypot(pts[j, 0] - pts[:, 0], pts[j, 1] - pts[:, 1])
        smaller = np.minimum(diam[k], diam[m - k][j])
        ratio = smaller / chord
        i = int(np.argmax(ratio))
        if ratio[i] > best:
            best, arg = float(ratio[i]), (i, int(j[i]))
    return best, arg


def _chord_arc_scan(params, pts, L):
    m = len(pts)
    idx = np.arange(m)
    best, arg = 0.0, (0, 1)
    for k in range(1, m // 2 + 1):
        j = (idx + k) % m
        chord = np.hypot(pts[j, 0] - pts[:, 0], pts[j, 1] - pts[:, 1])
        run = np.mod(params[j] - params, L)
        ratio = np.minimum(run, L - run) / chord
        i = int(np.argmax(ratio))
        if ratio[i] > best:
            best, arg = float(ratio[i]), (i, int(j[i]))
    return best, arg


def _result(curve, value, arg, params, pts, exhaustive):
    i, j = arg
    return GaugeResult(
        constant=max(1.0, value),
        x=pts[i].copy(),
        y=pts[j].copy(),
        x_param=float(params[i]),
        y_param=float(params[j]),
        n_samples=len(pts),
        exhaustive=exhaustive,
        truncation=curve.resolution > 0,
    )


def two_point_constant(curve, budget=MAX_PAIRS):
    """Estimate the least C with ``diam(smaller arc between x, y) <= C |x - y|``.

    ``budget`` is the number of pairs to examine; it must be at least the
    vertex count.  The result is at least 1 and carries the witness pair.
    """
    curve = _as_closed_curve(curve)
    params, pts, piece, exhaustive = sample_curve(curve, budget)
    value, arg = _two_point_scan(pts, piece)
    return _result(curve, value, arg, params, pts, exhaustive)


def chord_arc_constant(curve, budget=MAX_PAIRS):
    """Estimate the least c with ``length(shorter arc between x, y) <= c |x - y|``.

    On a snowflake truncation the estimate is finite but grows with depth;
    ``truncation`` is set on the result to flag that case.
    """
    curve = _as_closed_curve(curve)
    params, pts, _, exhaustive = sample_curve(curve, budget)
    value, arg = _chord_arc_scan(params, pts, curve.length)
    return _result(curve, value, arg, params, pts, exhaustive)


class _PairGauge(BaseEstimator):
    _scan = None

    def __init__(self, budget=MAX_PAIRS):
        self.budget = budget

    def fit(self, X, y=None):
        result = type(self)._scan(_as_closed_curve(X), self.budget)
        self.result_ = result
        self.constant_ = result.constant
        self.witness_ = (result.x, result.y)
        log.info("%s fit: constant=%.6g samples=%d", type(self).__name__, result.constant, result.n_samples)
        return self

    def transform(self, X):
        """Per-curve constants for a list of curves, shape (n, 1)."""
        return np.array([[type(self)._scan(_as_closed_curve(c), self.budget).constant] for c in X])


class TwoPointGauge(_PairGauge):
    """Estimator wrapper around :func:`two_point_constant`."""

    _scan = staticmethod(two_point_constant)


class ChordArcGauge(_PairGauge):
    """Estimator wrapper around :func:`chord_arc_constant`."""

    _scan = staticmethod(chord_arc_constant)
