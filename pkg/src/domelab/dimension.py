"""Box-counting and Assouad-style dimension estimates for curves.

Box counts use a grid of side ``delta * diam(curve)``; the curve is densified
so no crossed box is missed, and the count is the minimum over a few grid
offsets.  Assouad profiles tabulate ``log N(Y, delta) / log(1/delta)`` where
``N`` is a greedy covering of the subarc ``Y`` by consecutive pieces of
diameter at most ``delta * diam(Y)``; the profile exponent is the maximum of
the table and is reported with its witness.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import DomelabError, ResolutionError, check_int
from .curves import PolyCurve, diameter
from .partition import covering_count, dyadic_subarcs

log = logging.getLogger(__name__)

OFFSETS = ((0.0, 0.0), (0.5, 0.5), (0.25, 0.75), (0.75, 0.25))
EPSILON_GRID = (0.1, 0.2, 0.3)


@dataclass
class DimensionFit:
    scales: np.ndarray
    counts: np.ndarray
    exponent: float
    residual: float
    per_subarc: list = field(default_factory=list)
    witness: object = None

    def as_dict(self):
        return {
            "scales": [float(s) for s in self.scales],
            "counts": [int(c) for c in self.counts],
            "exponent": self.exponent,
            "residual": self.residual,
            "witness": self.witness,
        }


def loglog_fit(scales, counts):
    """Least-squares slope of log(count) against log(1/scale) and its RMS residual."""
    x = np.log(1.0 / np.asarray(scales, dtype=float))
    y = np.log(np.asarray(counts, dtype=float))
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return float(slope), resid


def _densify(curve, spacing):
    a = curve.segment_starts
    d = curve.segment_ends - a
    k = np.maximum(1, np.ceil(curve.segment_lengths / spacing).astype(np.int64))
    if int(k.sum()) > 40_000_000:
        raise ResolutionError("box size too small for the densified point budget")
    seg = np.repeat(np.arange(len(k)), k)
    first = np.repeat(np.cumsum(k) - k, k)
    t = (np.arange(len(seg)) - first) / k[seg]
    pts = a[seg] + t[:, None] * d[seg]
    if not curve.closed:
        pts = np.vstack([pts, curve.vertices[-1]])
    return pts


def box_count(curve, size):
    """Occupied grid boxes of side ``size`` (minimum over fixed grid offsets)."""
    pts = _densify(curve, size / 4)
    origin = pts.min(axis=0)
    best = None
    for ox, oy in OFFSETS:
        ij = np.floor((pts - origin + np.array([ox, oy]) * size) / size).astype(np.int64)
        key = ij[:, 0] * (int(ij[:, 1].max()) + 2) + ij[:, 1]
        c = len(np.unique(key))
        best = c if best is None else min(best, c)
    return best


def box_dimension(curve, scale_range=(2.0 ** -10, 2.0 ** -3), levels=8):
    """Box-counting dimension from a geometric sequence of relative box sizes."""
    levels = check_int(levels, "levels", 1)
    if levels < 4:
        raise DomelabError("box counting needs at least 4 scales")
    lo, hi = float(scale_range[0]), float(scale_range[1])
    if not 0 < lo < hi < 1:
        raise DomelabError("scale_range must satisfy 0 < min < max < 1")
    D = curve.diameter
    if lo * D < curve.resolution:
        raise ResolutionError(f"smallest box {lo * D:.3g} is below the curve resolution {curve.resolution:.3g}")
    scales = np.geomspace(hi, lo, levels)
    counts = np.array([box_count(curve, s * D) for s in scales])
    slope, resid = loglog_fit(scales, counts)
    return DimensionFit(scales, counts, slope, resid)


def _subarc_diameter(sub):
    return sub.diameter if hasattr(sub, "covering_count") else diameter(sub)


def _subarc_cover(sub, size):
    return sub.covering_count(size) if hasattr(sub, "covering_count") else covering_count(sub, size)


def default_delta_grid(lo_exp=8, hi_exp=18):
    return 2.0 ** -np.arange(lo_exp, hi_exp + 1)


def assouad_profile(curve, subarc_sampler=None, delta_grid=None):
    """Table of covering exponents over (subarc, delta) and its maximum.

    ``curve`` is a :class:`PolyCurve` (subarcs default to random dyadic
    subarcs) or a snowflake spec (subarcs default to one edge subarc per step).
    ``subarc_sampler`` may be a list of subarcs or a callable returning one.
    Rows the curve cannot resolve are kept with ``flag`` set.
    """
    from .snowflake import SnowflakeSpec

    if delta_grid is None:
        delta_grid = default_delta_grid() if isinstance(curve, SnowflakeSpec) else 2.0 ** -np.arange(2, 8)
    delta_grid = np.sort(np.asarray(delta_grid, dtype=float))[::-1]
    if subarc_sampler is None:
        if isinstance(curve, SnowflakeSpec):
            from .hierarchy import EdgeSubarc

            subarcs = [EdgeSubarc(curve, n) for n in range(1, curve.depth + 1)]
        else:
            subarcs = dyadic_subarcs(curve)
    else:
        subarcs = subarc_sampler(curve) if callable(subarc_sampler) else list(subarc_sampler)
    rows = []
    best, witness = -np.inf, None
    for sid, sub in enumerate(subarcs):
        D = _subarc_diameter(sub)
        for delta in delta_grid:
            try:
                count = _subarc_cover(sub, delta * D)
            except ResolutionError as exc:
                rows.append({"subarc_id": sid, "diam": D, "delta": float(delta), "count": 0,
                             "exponent": float("nan"), "flag": str(exc)})
                continue
            expo = math.log(count) / math.log(1.0 / delta)
            rows.append({"subarc_id": sid, "diam": D, "delta": float(delta), "count": int(count),
                         "exponent": expo, "flag": ""})
            if expo > best:
                best, witness = expo, {"subarc_id": sid, "delta": float(delta), "step": getattr(sub, "step", None)}
    ok = [r for r in rows if not r["flag"]]
    if not ok:
        raise ResolutionError("no (subarc, delta) pair is resolved by the curve")
    # pooled log-log fit over all resolved rows
    slope, resid = loglog_fit([r["delta"] for r in ok], [r["count"] for r in ok]) if len(
        {r["delta"] for r in ok}) > 1 else (float("nan"), float("nan"))
    scales = np.array(sorted({r["delta"] for r in ok}, reverse=True))
    counts = np.array([max(r["count"] for r in ok if r["delta"] == s) for s in scales])
    fit = DimensionFit(scales, counts, float(best), resid, rows, witness)
    fit.pooled_slope = slope
    return fit


def step_exponents(fit):
    """Max exponent per subarc (per construction step for snowflake profiles)."""
    out = {}
    for r in fit.per_subarc:
        if r["flag"]:
            continue
        out[r["subarc_id"]] = max(out.get(r["subarc_id"], -np.inf), r["exponent"])
    return [out[k] for k in sorted(out)]


def tail_max(values):
    """``t[n] = max(values[n:])``; nonincreasing by construction."""
    return list(np.maximum.accumulate(np.asarray(values, dtype=float)[::-1])[::-1])


def assouad_threshold(epsilon, p):
    """Least M with sqrt(x) - sqrt(y) <= c (x - y) for all x > M, 0 < y < x."""
    c = epsilon / (1 + epsilon) * math.log(4) / math.log(4 * p)
    return 1.0 / c ** 2


def assouad_bound(delta, epsilon, p):
    """Covering bound 4^M (4p)^2 delta^-(1+epsilon), returned as a natural log."""
    M = assouad_threshold(epsilon, p)
    return M * math.log(4) + 2 * math.log(4 * p) - (1 + epsilon) * math.log(delta)


def assouad_bound_check(fit, p, epsilons=EPSILON_GRID):
    """For each epsilon, whether every resolved count respects the covering bound."""
    result = {}
    for eps in epsilons:
        ok = all(math.log(r["count"]) <= assouad_bound(r["delta"], eps, p)
                 for r in fit.per_subarc if not r["flag"])
        result[eps] = ok
    return result


class BoxDimension(BaseEstimator):
    """Estimator form of :func:`box_dimension`."""

    def __init__(self, scale_range=(2.0 ** -10, 2.0 ** -3), levels=8):
        self.scale_range = scale_range
        self.levels = levels

    def fit(self, X, y=None):
        if not isinstance(X, PolyCurve):
            raise DomelabError("BoxDimension.fit expects a PolyCurve")
        self.fit_ = box_dimension(X, self.scale_range, self.levels)
        self.dimension_ = self.fit_.exponent
        self.residual_ = self.fit_.residual
        log.info("BoxDimension fit: exponent=%.4f residual=%.3g", self.dimension_, self.residual_)
        return self

    def transform(self, X):
        return np.array([[box_dimension(c, self.scale_range, self.levels).exponent] for c in X])
