"""delta-partitions, the chord-arc index M and weak chord-arc scans.

A partition of an arc is stored as its break parameters.  A delta-partition
of an arc of diameter D has every piece diameter in ``[delta*D/2, delta*D]``.
The builder walks the arc and cuts where the diameter of the running piece
reaches a target ``t*D``; the cut inside a segment is solved in closed form
(the running diameter is the max distance from the moving endpoint to the
hull of what came before, a union of circle exits).
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import PartitionError, ResolutionError, check_fraction, check_int, check_positive
from .curves import ArcRef, PolyCurve, _hull_indices, diameter, point_set_diameter

log = logging.getLogger(__name__)

T_TRIES = 8


def _hull_points(pts):
    if len(pts) <= 32:
        return pts
    return pts[_hull_indices(pts)]


def _sub_points(params, pts, a, b):
    """Points of the polyline (params, pts) restricted to [a, b]."""
    lo = np.searchsorted(params, a, side="right")
    hi = np.searchsorted(params, b, side="left")
    pa = _interp(params, pts, a)
    pb = _interp(params, pts, b)
    return np.concatenate([pa[None], pts[lo:hi], pb[None]])


def _interp(params, pts, s):
    k = int(np.clip(np.searchsorted(params, s, side="right") - 1, 0, len(params) - 2))
    span = params[k + 1] - params[k]
    lam = 0.0 if span <= 0 else min(max((s - params[k]) / span, 0.0), 1.0)
    return pts[k] + lam * (pts[k + 1] - pts[k])


def _exit_fraction(hull, A, B, T):
    """Least lam in [0, 1] with max_k |A + lam (B - A) - hull_k| = T."""
    d = B - A
    w = A - hull
    a = float(d @ d)
    b = 2.0 * (w @ d)
    c = np.einsum("ij,ij->i", w, w) - T * T
    disc = np.maximum(b * b - 4 * a * c, 0.0)
    lam = (-b + np.sqrt(disc)) / (2 * a)
    lam = lam[np.isfinite(lam)]
    return float(np.clip(np.min(lam), 0.0, 1.0)) if len(lam) else 1.0


def greedy_cuts(params, pts, T):
    """Walk a polyline and cut whenever the running piece reaches diameter ``T``.

    Returns ``(breaks, diams)``; the last piece is the (possibly short)
    remainder.
    """
    n = len(pts)
    breaks = [float(params[0])]
    diams = []
    c_par, c_pt, i = float(params[0]), pts[0], 1
    guess = 8
    while True:
        def g(j):
            return point_set_diameter(np.concatenate([c_pt[None], pts[i:j + 1]]))

        # exponential search for the last vertex keeping the piece within T
        lo, hi = i - 1, None
        step = max(1, guess // 2)
        while True:
            j = min(lo + step, n - 1)
            if g(j) <= T:
                lo = j
                if j == n - 1:
                    break
                step *= 2
            else:
                hi = j
                break
        if hi is None:
            breaks.append(float(params[-1]))
            diams.append(g(n - 1) if n - 1 >= i else 0.0)
            return np.array(breaks), np.array(diams)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if g(mid) <= T:
                lo = mid
            else:
                hi = mid
        j = lo
        prev = np.concatenate([c_pt[None], pts[i:j + 1]])
        hull = _hull_points(prev)
        if j < i:
            A, a_par = c_pt, c_par
        else:
            A, a_par = pts[j], float(params[j])
        B, b_par = pts[j + 1], float(params[j + 1])
        lam = _exit_fraction(hull, A, B, T)
        q = A + lam * (B - A)
        q_par = a_par + lam * (b_par - a_par)
        if q_par <= c_par:
            q_par, q, lam = b_par, B, 1.0
        diams.append(point_set_diameter(np.concatenate([prev, q[None]])))
        breaks.append(q_par)
        guess = max(1, j + 1 - i)
        c_par, c_pt = q_par, q
        i = j + 2 if lam >= 1.0 else j + 1
        if i > n - 1:
            # cut landed on the final vertex
            return np.array(breaks), np.array(diams)


def _balanced_cut(params, pts, a, b):
    """Cut [a, b] where the two sides have equal diameter (bisection)."""
    lo, hi = a, b
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        left = point_set_diameter(_sub_points(params, pts, a, mid))
        right = point_set_diameter(_sub_points(params, pts, mid, b))
        if left < right:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * (b - a):
            break
    return 0.5 * (lo + hi)


def t_sequence(count=T_TRIES):
    """Targets as fractions of delta: 3/4 first, then dyadic midpoints of [1/2, 1]."""
    out = [0.75]
    level = 2
    while len(out) < count:
        for k in range(1, 2 ** level, 2):
            t = 0.5 + 0.5 * k / 2 ** level
            if t not in out:
                out.append(t)
            if len(out) == count:
                break
        level += 1
    return out


@dataclass(frozen=True)
class PartitionSummary:
    """Size and diameter statistics of a partition (no piece geometry)."""

    size: int
    sum_diam: float
    min_diam: float
    max_diam: float
    parent_diam: float
    delta: float = None

    @property
    def m_index(self):
        return self.sum_diam / self.parent_diam

    @property
    def min_fraction(self):
        return self.min_diam / self.parent_diam

    def band_ok(self, rtol=1e-12):
        if self.delta is None:
            return True
        lo = 0.5 * self.delta * self.parent_diam
        hi = self.delta * self.parent_diam
        return self.min_diam >= lo * (1 - rtol) and self.max_diam <= hi * (1 + rtol)


@dataclass(eq=False)
class Partition:
    """Consecutive pieces tiling ``parent``, stored as break parameters."""

    parent: ArcRef
    breaks: np.ndarray
    delta: float = None
    _diams: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=np.float64)
        tol = 1e-12 * self.parent.curve.length
        if len(b) < 2 or np.any(np.diff(b) <= 0):
            raise PartitionError("break parameters must be strictly increasing")
        if abs(b[0] - self.parent.start) > tol or abs(b[-1] - self.parent.end) > tol:
            raise PartitionError("pieces do not tile the parent arc")
        b[0], b[-1] = self.parent.start, self.parent.end
        self.breaks = b

    @classmethod
    def from_pieces(cls, parent, pieces, delta=None):
        tol = 1e-12 * parent.curve.length
        for a, b in zip(pieces, pieces[1:]):
            if a.curve is not parent.curve or abs(a.end - b.start) > tol:
                raise PartitionError("pieces are not consecutive")
        return cls(parent, [pieces[0].start] + [p.end for p in pieces], delta)

    def __len__(self):
        return len(self.breaks) - 1

    @property
    def pieces(self):
        c = self.parent.curve
        out = []
        for a, b in zip(self.breaks[:-1], self.breaks[1:]):
            if c.closed and a >= c.length:
                a, b = a - c.length, b - c.length
            out.append(ArcRef(c, float(a), float(b)))
        return out

    @property
    def diameters(self):
        if self._diams is None:
            params, pts = self.parent.params_and_points()
            if not self.parent.forward:
                params, pts = params[::-1], pts[::-1]
            self._diams = np.array([
                point_set_diameter(_sub_points(params, pts, a, b)) for a, b in zip(self.breaks[:-1], self.breaks[1:])
            ])
        return self._diams

    def summary(self, parent_diam=None):
        d = self.diameters
        D = diameter(self.parent) if parent_diam is None else parent_diam
        return PartitionSummary(len(self), float(np.sum(d)), float(d.min()), float(d.max()), D, self.delta)

    def check_band(self, rtol=1e-12):
        """Raise unless every piece lies in the delta band."""
        if self.delta is None:
            raise PartitionError("not a delta-partition")
        if not self.summary().band_ok(rtol):
            raise PartitionError("piece diameters leave the delta band")
        return True


def _same_arc(a, b):
    tol = 1e-12 * a.curve.length
    return a.curve is b.curve and abs(a.start - b.start) <= tol and abs(a.end - b.end) <= tol


def build_delta_partition(arc, delta, reverse=False, parent_diam=None):
    """Partition ``arc`` into pieces with diameters in ``[delta*D/2, delta*D]``.

    ``reverse`` walks from the end of the arc instead of its start (a second,
    independent delta-partition of the same arc).
    """
    if isinstance(arc, PolyCurve):
        arc = arc.whole()
    delta = check_fraction(delta, "delta")
    D = diameter(arc) if parent_diam is None else parent_diam
    res = arc.curve.resolution
    if 0.5 * delta * D < res:
        raise ResolutionError(
            f"pieces of diameter {0.5 * delta * D:.3g} are below the curve resolution {res:.3g}; "
            "generate a deeper curve"
        )
    params, pts = arc.params_and_points()
    if not arc.forward:
        params, pts = params[::-1], pts[::-1]
    if reverse:
        w_params, w_pts = (params[-1] + params[0]) - params[::-1], pts[::-1]
    else:
        w_params, w_pts = params, pts
    lo_band = 0.5 * delta * D
    breaks = None
    for t in t_sequence():
        b, d = greedy_cuts(w_params, w_pts, t * delta * D)
        if len(d) >= 1 and d[-1] >= lo_band:
            breaks = b
            break
    if breaks is None:
        # fold the remainder into the last piece and rebalance
        if len(b) <= 2:
            raise PartitionError("arc is too small for a delta-partition at this delta")
        merged_start = b[-3]
        merged = point_set_diameter(_sub_points(w_params, w_pts, merged_start, b[-1]))
        if merged <= delta * D:
            breaks = np.delete(b, -2)
        else:
            cut = _balanced_cut(w_params, w_pts, merged_start, b[-1])
            breaks = np.concatenate([b[:-2], [cut, b[-1]]])
    if reverse:
        breaks = (params[-1] + params[0]) - breaks[::-1]
    return Partition(arc, breaks, delta)


def m_index(arc, partition):
    """``sum(diam pieces) / diam(arc)``."""
    if not _same_arc(arc, partition.parent):
        raise PartitionError("partition does not belong to this arc")
    return float(np.sum(partition.diameters) / diameter(arc))


def refine(partition, sub_partitions):
    """Union of one sub-partition per piece."""
    pieces = partition.pieces
    if len(sub_partitions) != len(pieces):
        raise PartitionError(f"expected {len(pieces)} sub-partitions, got {len(sub_partitions)}")
    breaks = [partition.breaks[0]]
    for piece, sub in zip(pieces, sub_partitions):
        if not _same_arc(piece, sub.parent):
            raise PartitionError("a sub-partition does not tile its piece")
        breaks.extend(sub.breaks[1:])
    return Partition(partition.parent, breaks)


def covering_constant(summary):
    """``|P| * lambda^2`` with lambda the smallest piece-to-parent diameter ratio."""
    return summary.size * summary.min_fraction ** 2


def covering_count(arc, size):
    """Greedy count of consecutive pieces of diameter at most ``size`` covering ``arc``."""
    size = check_positive(size, "size")
    if size < arc.curve.resolution:
        raise ResolutionError(f"covering size {size:.3g} is below the curve resolution {arc.curve.resolution:.3g}")
    params, pts = arc.params_and_points()
    if not arc.forward:
        params, pts = params[::-1], pts[::-1]
    breaks, _ = greedy_cuts(params, pts, size)
    return len(breaks) - 1


def alpha_scale(diam, alpha):
    return diam ** (1.0 / alpha - 1.0)


def alpha_partition_index(arc, alpha):
    """M of a (diam arc)^(1/alpha - 1)-partition of ``arc`` (diam arc < 1)."""
    alpha = check_fraction(alpha, "alpha")
    if hasattr(arc, "delta_partition_summary"):
        D = arc.diameter
        _require_small(D)
        return arc.delta_partition_summary(alpha_scale(D, alpha)).m_index
    D = diameter(arc)
    _require_small(D)
    return m_index(arc, build_delta_partition(arc, alpha_scale(D, alpha), parent_diam=D))


def _require_small(D):
    if D >= 1:
        raise PartitionError(f"subarc diameter {D:.3g} must be below 1")


@dataclass
class WcaRow:
    subarc_id: int
    start: float
    end: float
    diam: float
    pieces: int
    m_index: float
    passed: bool
    flag: str = ""


@dataclass
class WcaReport:
    """Per-subarc M values of diam-partitions and their maximum."""

    rows: list
    threshold: float
    witness: object = None

    @property
    def max_index(self):
        vals = [r.m_index for r in self.rows if np.isfinite(r.m_index)]
        return max(vals) if vals else float("nan")

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    @property
    def m_values(self):
        return np.array([r.m_index for r in self.rows])

    def to_csv(self):
        from .reports import csv_text

        header = ["subarc_id", "start", "end", "diam", "pieces", "m_index", "pass"]
        data = [[r.subarc_id, r.start, r.end, r.diam, r.pieces, r.m_index, r.passed] for r in self.rows]
        return csv_text(header, data)


def _scan_row(i, sub):
    if hasattr(sub, "delta_partition_summary"):
        D = sub.diameter
        _require_small(D)
        s = sub.delta_partition_summary(D)
        return i, getattr(sub, "start", 0.0), getattr(sub, "end", 1.0), D, s
    D = diameter(sub)
    _require_small(D)
    part = build_delta_partition(sub, D, parent_diam=D)
    return i, sub.start, sub.end, D, part.summary(D)


def weak_chord_arc_scan(curve, subarcs=None, m0=10.0, per_level=4, levels=4, seed=0):
    """Build a diam(G)-partition of every subarc G and compare its M with ``m0``.

    ``curve`` may be a :class:`PolyCurve` (subarcs default to random anchored
    subarcs at dyadic diameters) or a snowflake spec (subarcs default to one
    edge subarc per construction step; all edges of a step are congruent).
    Rows whose scale the curve does not resolve are kept and flagged.
    """
    m0 = check_positive(m0, "m0")
    if subarcs is None:
        from .snowflake import SnowflakeSpec

        if isinstance(curve, SnowflakeSpec):
            from .hierarchy import EdgeSubarc

            subarcs = [EdgeSubarc(curve, n) for n in range(1, curve.depth + 1)]
        else:
            subarcs = dyadic_subarcs(curve, per_level=per_level, levels=levels, seed=seed)
    rows = []
    witness, best = None, -np.inf
    for i, sub in enumerate(subarcs):
        try:
            _, a, b, D, s = _scan_row(i, sub)
        except ResolutionError as exc:
            rows.append(WcaRow(i, getattr(sub, "start", np.nan), getattr(sub, "end", np.nan), np.nan, 0, np.nan,
                               False, f"resolution: {exc}"))
            continue
        rows.append(WcaRow(i, a, b, D, s.size, s.m_index, s.m_index <= m0))
        if s.m_index > best:
            best, witness = s.m_index, sub
    return WcaReport(rows, m0, witness)


def dyadic_subarcs(curve, per_level=4, levels=4, seed=0, top=0.5):
    """Random subarcs with diameters near ``top * 2**-j * diam(curve)``, j < levels."""
    check_int(per_level, "per_level", 1)
    check_int(levels, "levels", 1)
    if isinstance(curve, ArcRef):
        curve = curve.curve
    rng = np.random.default_rng(seed)
    L = curve.length
    out = []
    for j in range(levels):
        target = min(top * 2.0 ** -j * curve.diameter, 0.999)
        for _ in range(per_level):
            s0 = rng.uniform(0, L if curve.closed else 0.5 * L)
            span = L if curve.closed else L - s0
            probe = ArcRef(curve, s0, s0 + span * (1 - 1e-12))
            params, pts = probe.params_and_points()
            b, d = greedy_cuts(params, pts, target)
            if len(b) < 3:
                continue
            out.append(ArcRef(curve, float(b[0]), float(b[1])))
    return out


class DeltaPartitioner(BaseEstimator):
    """Estimator form of :func:`build_delta_partition`.

    ``fit`` builds the partition of an arc (or whole curve) and stores it with
    its M index; ``transform`` returns the break parameters.
    """

    def __init__(self, delta=0.1, reverse=False):
        self.delta = delta
        self.reverse = reverse

    def fit(self, X, y=None):
        arc = X.whole() if isinstance(X, PolyCurve) else X
        self.partition_ = build_delta_partition(arc, self.delta, reverse=self.reverse)
        self.summary_ = self.partition_.summary()
        self.m_index_ = self.summary_.m_index
        log.info("DeltaPartitioner fit: delta=%g pieces=%d M=%.6g", self.delta, self.summary_.size, self.m_index_)
        return self

    def transform(self, X=None):
        return self.partition_.breaks.copy()
