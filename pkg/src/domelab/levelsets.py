"""Distance fields, level curves and the level-set lemmas.

The grid stores exact point-to-boundary distances.  Level curves start as
marching-squares contours and every vertex is then moved along the distance
gradient (the unit vector away from its nearest boundary point) until it
sits on the level to ``1e-6 * diam``.  Where consecutive vertices see
different boundary segments the sharp corner of the level set is restored by
intersecting the two offset lines.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from skimage.measure import find_contours

from ._validation import DomelabError, GeometryError, check_int, check_positive
from .curves import ArcRef, PolyCurve
from .distance import SegmentIndex
from .gauges import MAX_PAIRS, chord_arc_constant, two_point_constant

log = logging.getLogger(__name__)

LEVEL_RTOL = 1e-6


@dataclass(eq=False)
class DistanceField:
    """Signed distances to ``domain`` (positive inside) on a regular grid."""

    domain: PolyCurve
    grid_spacing: float
    x: np.ndarray
    y: np.ndarray
    samples: np.ndarray
    index: SegmentIndex

    @property
    def max_value(self):
        return float(self.samples.max())

    def node(self, i, j):
        return np.array([self.x[j], self.y[i]])

    def value_at(self, points):
        return self.index.signed_distance(np.atleast_2d(points))


def build_distance_field(domain, h, index=None):
    """Exact signed distances on a grid of spacing ``h`` padded by ``2h``."""
    if not isinstance(domain, PolyCurve) or not domain.closed:
        raise GeometryError("the domain must be a closed PolyCurve")
    h = check_positive(h, "h")
    if h >= domain.diameter / 32:
        raise DomelabError(f"grid spacing {h:.3g} must be below diam/32 = {domain.diameter / 32:.3g}")
    if not domain.is_simple():
        raise GeometryError("domain boundary is self-intersecting")
    lo = domain.vertices.min(axis=0) - 2 * h
    hi = domain.vertices.max(axis=0) + 2 * h
    x = lo[0] + h * np.arange(int(math.ceil((hi[0] - lo[0]) / h)) + 1)
    y = lo[1] + h * np.arange(int(math.ceil((hi[1] - lo[1]) / h)) + 1)
    index = index if index is not None else SegmentIndex(domain)
    X, Y = np.meshgrid(x, y)
    vals = index.signed_distance(np.c_[X.ravel(), Y.ravel()]).reshape(X.shape)
    return DistanceField(domain, h, x, y, vals, index)


@dataclass(eq=False)
class LevelCurve:
    epsilon: float
    components: list

    @property
    def is_empty(self):
        return not self.components

    @property
    def is_jordan(self):
        return len(self.components) == 1

    @property
    def curve(self):
        if not self.is_jordan:
            raise GeometryError(f"level set has {len(self.components)} components, not one Jordan curve")
        return self.components[0]


def _project_to_level(index, pts, eps, tol, iters=30):
    p = pts.copy()
    for _ in range(iters):
        d, seg, t = index.query(p)
        foot = index.starts[seg] + t[:, None] * index.delta[seg]
        off = p - foot
        r = np.hypot(off[:, 0], off[:, 1])
        r = np.where(r > 0, r, 1.0)
        u = off / r[:, None]
        err = eps - d
        if np.max(np.abs(err)) <= tol:
            break
        p = p + err[:, None] * u
    d, seg, t = index.query(p)
    return p, d, seg, t


def _offset_corner(index, seg_a, seg_b, pa, pb, eps):
    """Intersection of the eps-offset lines of two segments on the side of pa, pb."""
    out = []
    for s, q in ((seg_a, pa), (seg_b, pb)):
        a = index.starts[s]
        t = index.delta[s] / math.sqrt(index.len2[s])
        n = np.array([-t[1], t[0]])
        if np.dot(q - a, n) < 0:
            n = -n
        out.append((a + eps * n, t))
    (p1, t1), (p2, t2) = out
    M = np.array([[t1[0], -t2[0]], [t1[1], -t2[1]]])
    if abs(np.linalg.det(M)) < 1e-12:
        return None
    s, _ = np.linalg.solve(M, p2 - p1)
    return p1 + s * t1


def _insert_corners(index, pts, seg, t, eps, tol):
    n = len(pts)
    out = []
    for k in range(n):
        out.append(pts[k])
        j = (k + 1) % n
        if seg[k] == seg[j]:
            continue
        c = _offset_corner(index, seg[k], seg[j], pts[k], pts[j], eps)
        if c is None:
            continue
        gap = np.hypot(*(pts[j] - pts[k]))
        if np.hypot(*(c - pts[k])) > 2 * gap or np.hypot(*(c - pts[j])) > 2 * gap:
            continue
        # feet at segment ends are fine: candidates off the level are rejected here
        dc = index.distance(c[None])[0]
        if abs(dc - eps) <= tol:
            out.append(c)
    return np.array(out)


def _dedupe(pts, tol):
    keep = np.ones(len(pts), dtype=bool)
    step = np.hypot(*(np.diff(pts, axis=0)).T)
    keep[1:] = step > tol
    pts = pts[keep]
    if len(pts) > 1 and np.hypot(*(pts[0] - pts[-1])) <= tol:
        pts = pts[:-1]
    return pts


def extract_level_curve(field, epsilon, refine=True):
    """Components of ``{x in domain : dist(x, boundary) = epsilon}``.

    Components come back as closed counter-clockwise PolyCurves.  An empty
    list is returned when ``epsilon`` exceeds the inradius.
    """
    eps = check_positive(epsilon, "epsilon")
    if eps >= field.max_value:
        return LevelCurve(eps, [])
    D = field.domain.diameter
    tol = LEVEL_RTOL * D
    comps = []
    for c in find_contours(field.samples, eps):
        if len(c) < 4 or not np.allclose(c[0], c[-1]):
            continue
        pts = np.c_[field.x[0] + c[:, 1] * field.grid_spacing, field.y[0] + c[:, 0] * field.grid_spacing]
        pts = _dedupe(pts[:-1], 1e-3 * field.grid_spacing)
        if len(pts) < 3:
            continue
        if refine:
            pts, _, seg, t = _project_to_level(field.index, pts, eps, tol)
            pts = _insert_corners(field.index, pts, seg, t, eps, tol)
            pts = _dedupe(pts, 1e-9 * D)
        if len(pts) < 3:
            continue
        try:
            curve = PolyCurve(pts, closed=True)
        except GeometryError:
            curve = PolyCurve(pts, closed=True, validate=False)
            log.warning("level %.6g produced a non-simple component (%d vertices)", eps, len(pts))
        if curve.signed_area() < 0:
            curve = PolyCurve(curve.vertices[::-1], closed=True, validate=False)
        comps.append(curve)
    comps.sort(key=lambda c: -abs(c.signed_area()))
    return LevelCurve(eps, comps)


@dataclass
class LqcReport:
    rows: list
    max_constant: float
    violations: list
    eps0_passing: float
    bound: float

    def to_csv(self):
        from .reports import csv_text

        return csv_text(["epsilon", "components", "two_point_constant"],
                        [[r["epsilon"], r["components"], r["two_point_constant"]] for r in self.rows])


def level_grid(eps0, levels):
    """Geometric grid eps0 * 2**-k, k < levels, in increasing order."""
    return sorted(eps0 * 2.0 ** -np.arange(levels))


def lqc_scan(domain, eps0, levels=6, budget=MAX_PAIRS, h=None, bound=10.0, field=None):
    """Extract level curves on a geometric grid in (0, eps0] and gauge each one.

    A level passes when it is a single Jordan curve with two-point constant at
    most ``bound``.  ``eps0_passing`` is the largest grid level below which
    every level passes.
    """
    levels = check_int(levels, "levels", 1)
    eps0 = check_positive(eps0, "eps0")
    grid = level_grid(eps0, levels)
    if field is None:
        h = h if h is not None else min(domain.diameter / 256, grid[0] / 4)
        field = build_distance_field(domain, h)
    rows, violations = [], []
    best = 1.0
    eps_ok = 0.0
    prefix = True
    for eps in grid:
        lc = extract_level_curve(field, eps)
        comps = len(lc.components)
        const = float("nan")
        if comps == 1:
            c = lc.curve
            const = two_point_constant(c, max(budget, c.n_vertices)).constant
            best = max(best, const)
        passed = comps == 1 and const <= bound
        if not passed:
            violations.append({"epsilon": eps, "components": comps, "two_point_constant": const})
        prefix = prefix and passed
        if prefix:
            eps_ok = eps
        rows.append({"epsilon": eps, "components": comps, "two_point_constant": const, "pass": passed})
    return LqcReport(rows, best, violations, eps_ok, bound)


@dataclass
class LevelSubarc:
    epsilon: float
    points: np.ndarray
    mask: np.ndarray
    connected: bool
    runs: int

    @property
    def is_empty(self):
        return not self.mask.any()


def _cyclic_runs(mask):
    if mask.all():
        return 1
    if not mask.any():
        return 0
    m = mask.astype(np.int8)
    return int(np.sum((m - np.roll(m, 1)) == 1))


def level_subarc(domain, sigma, epsilon, level=None, field=None, h=None, rtol=1e-9):
    """Points of the level curve whose distance to ``sigma`` equals ``epsilon``.

    ``connected`` is the verdict that these points form one subarc of the
    level curve (or none).  The level set must be a single Jordan curve.
    """
    if level is None:
        if field is None:
            field = build_distance_field(domain, h if h is not None else domain.diameter / 256)
        level = extract_level_curve(field, epsilon)
    curve = level.curve
    sig = sigma.to_curve() if isinstance(sigma, ArcRef) else sigma
    pts = curve.vertices
    d_all = field.index.distance(pts) if field is not None else SegmentIndex(domain).distance(pts)
    d_sig = SegmentIndex(sig).distance(pts)
    mask = d_sig - d_all <= rtol * domain.diameter
    runs = _cyclic_runs(mask)
    return LevelSubarc(float(epsilon), pts[mask], mask, runs <= 1, runs)


def distant_level_set(sigma, epsilon, n_rays=1024):
    """The curve ``{x : dist(x, sigma) = epsilon}`` by ray casting from a point of sigma."""
    sig = sigma.to_curve() if isinstance(sigma, ArcRef) else sigma
    D = sig.diameter
    if not epsilon > 3 * D:
        raise DomelabError(f"epsilon {epsilon:.3g} must exceed 3 diam(sigma) = {3 * D:.3g}")
    index = SegmentIndex(sig)
    c = sig.point_at(0.5 * sig.length)
    theta = 2 * math.pi * np.arange(n_rays) / n_rays
    u = np.c_[np.cos(theta), np.sin(theta)]
    lo = np.full(n_rays, float(epsilon))
    hi = np.full(n_rays, float(epsilon + D))
    # dist(c + r u, sigma) is squeezed between r - D and r, so the root is in [eps, eps + D]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        d = index.distance(c + mid[:, None] * u)
        below = d < epsilon
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) <= 1e-13 * epsilon:
            break
    r = 0.5 * (lo + hi)
    return PolyCurve(c + r[:, None] * u, closed=True, validate=False)


def distant_level_chord_arc(sigma, epsilon, n_rays=1024):
    """Chord-arc constant of the distant level curve of ``sigma``."""
    return chord_arc_constant(distant_level_set(sigma, epsilon, n_rays)).constant


def nesting_holds(field, eps_small, eps_large):
    """Every component of the larger level lies inside some component of the smaller one."""
    import shapely

    small = extract_level_curve(field, eps_small).components
    large = extract_level_curve(field, eps_large).components
    polys = [shapely.polygons(c.vertices) for c in small]
    for comp in large:
        if not any(shapely.contains_xy(p, comp.vertices[:, 0], comp.vertices[:, 1]).all() for p in polys):
            return False
    return True
