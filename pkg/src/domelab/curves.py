"""Polyline curves and arcs in the plane.

A :class:`PolyCurve` is a simple polygonal Jordan curve (``closed=True``) or
Jordan arc (``closed=False``) with an arclength parameterisation.  Subarcs are
referenced by :class:`ArcRef`, a parameter interval on a parent curve.  All
diameter routines rely on the fact that the extreme points of a polyline are
among its vertices, so a diameter is a maximum over a finite point set.
"""

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import shapely
from scipy.spatial import ConvexHull, QhullError

from ._validation import DomelabError, GeometryError, check_point, check_points

SNAP_TOLERANCE = 1e-9
TIE_TOLERANCE = 1e-12


def _hull_indices(points):
    """Indices of the convex hull vertices of ``points`` (extremes only if collinear)."""
    if len(points) <= 3:
        return np.arange(len(points))
    try:
        return ConvexHull(points).vertices
    except QhullError:
        centred = points - points.mean(axis=0)
        _, _, vt = np.linalg.svd(centred, full_matrices=False)
        proj = centred @ vt[0]
        return np.unique([int(np.argmin(proj)), int(np.argmax(proj))])


def _calipers(hull):
    # rotating calipers over a counter-clockwise convex polygon
    h = len(hull)

    def area2(i, j, k):
        a, b, c = hull[i], hull[j], hull[k]
        return abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    best, pair = 0.0, (0, 0)
    j = 1
    for i in range(h):
        i2 = (i + 1) % h
        while area2(i, i2, (j + 1) % h) > area2(i, i2, j):
            j = (j + 1) % h
        for a, b in ((i, j), (i2, j)):
            d = float(np.hypot(*(hull[a] - hull[b])))
            if d > best:
                best, pair = d, (a, b)
    return best, pair


def point_set_diameter(points, return_pair=False):
    """Maximum pairwise distance of a finite planar point set.

    The search is restricted to convex hull vertices; hulls with more than a
    few thousand vertices use rotating calipers instead of a full scan.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return (0.0, (0, 0)) if return_pair else 0.0
    idx = _hull_indices(pts) if len(pts) > 32 else np.arange(len(pts))
    hull = pts[idx]
    if len(hull) > 4096:
        d, (a, b) = _calipers(hull)
    else:
        best, pair = -1.0, (0, 0)
        chunk = max(1, 2_000_000 // len(hull))
        for lo in range(0, len(hull), chunk):
            block = hull[lo:lo + chunk]
            dist = np.hypot(block[:, None, 0] - hull[None, :, 0], block[:, None, 1] - hull[None, :, 1])
            k = int(np.argmax(dist))
            r, c = divmod(k, len(hull))
            if dist[r, c] > best:
                best, pair = float(dist[r, c]), (lo + r, c)
        d, (a, b) = best, pair
    if return_pair:
        return d, (int(idx[a]), int(idx[b]))
    return d


def nearest_on_segments(points, starts, ends):
    """Brute-force nearest point on a set of segments.

    Returns ``(distance, segment_index, fraction)`` for every query point.
    Meant for small query batches (snapping); bulk queries belong in
    :mod:`domelab.distance`.
    """
    q = np.atleast_2d(np.asarray(points, dtype=np.float64))
    d = ends - starts
    dd = np.einsum("ij,ij->i", d, d)
    dd = np.where(dd > 0, dd, 1.0)
    out_d = np.empty(len(q))
    out_i = np.empty(len(q), dtype=np.int64)
    out_t = np.empty(len(q))
    chunk = max(1, 4_000_000 // max(1, len(starts)))
    for lo in range(0, len(q), chunk):
        block = q[lo:lo + chunk]
        rel = block[:, None, :] - starts[None, :, :]
        t = np.clip(np.einsum("qij,ij->qi", rel, d) / dd, 0.0, 1.0)
        foot = starts[None, :, :] + t[..., None] * d[None, :, :]
        dist = np.hypot(block[:, None, 0] - foot[..., 0], block[:, None, 1] - foot[..., 1])
        k = np.argmin(dist, axis=1)
        rows = np.arange(len(block))
        out_d[lo:lo + chunk] = dist[rows, k]
        out_i[lo:lo + chunk] = k
        out_t[lo:lo + chunk] = t[rows, k]
    return out_d, out_i, out_t


class PolyCurve:
    """A simple polygonal curve with arclength parameterisation.

    Parameters
    ----------
    vertices : array_like, shape (n, 2)
        Ordered vertices.  For closed curves a repeated first vertex at the end
        is dropped.
    closed : bool
        Jordan curve (True) or Jordan arc (False).
    resolution : float
        Length scale below which the polyline is not trusted to represent the
        underlying curve.  Exact polylines use 0; truncations of a limit curve
        (snowflakes) set it to their edge length.
    validate : bool
        Run the simplicity check.  Only skip it for inputs that are simple by
        construction.
    """

    def __init__(self, vertices, closed=True, *, resolution=0.0, validate=True):
        v = check_points(vertices, "vertices").copy()
        if closed and len(v) > 1 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        need = 3 if closed else 2
        if len(v) < need:
            raise GeometryError(f"a {'closed' if closed else 'open'} curve needs at least {need} vertices")
        nxt = np.roll(v, -1, axis=0) if closed else v[1:]
        cur = v if closed else v[:-1]
        seg = np.hypot(nxt[:, 0] - cur[:, 0], nxt[:, 1] - cur[:, 1])
        if np.any(seg == 0):
            raise GeometryError("consecutive vertices must be distinct")
        self.vertices = v
        self.closed = bool(closed)
        self.resolution = float(resolution)
        self.segment_lengths = seg
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        # compensated total so long snowflake perimeters stay exact to ~1e-15
        cum[-1] = max(math.fsum(seg), cum[-2])
        self.cumulative_length = cum
        for arr in (self.vertices, self.segment_lengths, self.cumulative_length):
            arr.setflags(write=False)
        if validate and not self.is_simple():
            raise GeometryError("curve is self-intersecting")

    def __repr__(self):
        kind = "closed" if self.closed else "open"
        return f"PolyCurve({self.n_vertices} vertices, {kind}, length={self.length:.6g})"

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_segments(self):
        return len(self.segment_lengths)

    @property
    def length(self):
        return float(self.cumulative_length[-1])

    @property
    def segment_starts(self):
        return self.vertices[: self.n_segments]

    @property
    def segment_ends(self):
        return np.roll(self.vertices, -1, axis=0) if self.closed else self.vertices[1:]

    @property
    def vertex_params(self):
        return self.cumulative_length[: self.n_vertices]

    @cached_property
    def diameter(self):
        return point_set_diameter(self.vertices)

    def as_shapely(self):
        if self.closed:
            return shapely.linearrings(self.vertices)
        return shapely.linestrings(self.vertices)

    def is_simple(self):
        return bool(shapely.is_simple(self.as_shapely()))

    def signed_area(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    def wrap(self, s):
        s = np.asarray(s, dtype=np.float64)
        if self.closed:
            return np.mod(s, self.length)
        return np.clip(s, 0.0, self.length)

    def point_at(self, s):
        """Points at arclength parameters ``s`` (wrapped for closed curves)."""
        s_arr = self.wrap(s)
        scalar = s_arr.ndim == 0
        s_arr = np.atleast_1d(s_arr)
        cum = self.cumulative_length
        k = np.clip(np.searchsorted(cum, s_arr, side="right") - 1, 0, self.n_segments - 1)
        t = (s_arr - cum[k]) / self.segment_lengths[k]
        a = self.segment_starts[k]
        b = self.segment_ends[k]
        pts = a + t[:, None] * (b - a)
        return pts[0] if scalar else pts

    def project(self, points):
        """Arclength parameter and distance of the nearest curve point to each query."""
        dist, k, t = nearest_on_segments(points, self.segment_starts, self.segment_ends)
        params = self.cumulative_length[k] + t * self.segment_lengths[k]
        return params, dist

    def snap(self, point, tol=SNAP_TOLERANCE):
        """Parameter of ``point`` on the curve; raise if it is farther than ``tol * diam``."""
        p = check_point(point)
        params, dist = self.project(p[None, :])
        if dist[0] > tol * self.diameter:
            raise GeometryError(f"point {tuple(p)} is {dist[0]:.3g} away from the curve")
        s = float(params[0])
        if self.closed and s >= self.length:
            s -= self.length
        return s

    def arc(self, start, end, forward=True):
        return ArcRef(self, float(start), float(end), forward)

    def whole(self):
        return ArcRef(self, 0.0, self.length)


@dataclass(frozen=True, eq=False)
class ArcRef:
    """A subarc of a :class:`PolyCurve` given by arclength parameters.

    ``start < end``; on closed curves ``end`` may exceed the total length, in
    which case the interval wraps.  ``forward=False`` means the arc is
    traversed from ``end`` back to ``start``; the point set is the same.
    """

    curve: PolyCurve
    start: float
    end: float
    forward: bool = True

    def __post_init__(self):
        L = self.curve.length
        slack = 1e-12 * L
        if not (np.isfinite(self.start) and np.isfinite(self.end)):
            raise DomelabError("arc parameters must be finite")
        if self.curve.closed:
            ok = -slack <= self.start < L + slack and self.start < self.end <= self.start + L + slack
        else:
            ok = -slack <= self.start < self.end <= L + slack
        if not ok:
            raise DomelabError(f"invalid arc parameters [{self.start}, {self.end}] on curve of length {L}")

    @property
    def length(self):
        return self.end - self.start

    @property
    def is_whole(self):
        return self.curve.closed and self.length >= self.curve.length * (1 - 1e-15)

    def endpoints(self):
        a, b = self.curve.point_at([self.start, self.end])
        return (a, b) if self.forward else (b, a)

    def params_and_points(self):
        """Materialise the arc: start point, interior vertices, end point (in forward order)."""
        c = self.curve
        vp = c.vertex_params
        verts = c.vertices
        if c.closed:
            vp = np.concatenate([vp, vp + c.length])
            verts = np.concatenate([verts, verts])
        lo = np.searchsorted(vp, self.start, side="right")
        hi = np.searchsorted(vp, self.end, side="left")
        params = np.concatenate([[self.start], vp[lo:hi], [self.end]])
        pts = np.concatenate([c.point_at(self.start)[None, :], verts[lo:hi], c.point_at(self.end)[None, :]])
        # drop duplicates where an endpoint sits on a vertex
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        params, pts = params[keep], pts[keep]
        if not self.forward:
            params, pts = params[::-1], pts[::-1]
        return params, pts

    def points(self):
        return self.params_and_points()[1]

    def complement(self):
        if not self.curve.closed:
            raise DomelabError("complement is only defined on closed curves")
        L = self.curve.length
        start = self.end % L
        if start >= L:
            start = 0.0
        return ArcRef(self.curve, start, start + (L - self.length), not self.forward)

    def subarc(self, a, b):
        """The arc between absolute parameters ``a < b`` inside this arc."""
        slack = 1e-12 * self.curve.length
        if not (self.start - slack <= a < b <= self.end + slack):
            raise DomelabError(f"[{a}, {b}] is not inside [{self.start}, {self.end}]")
        a = max(a, self.start)
        b = min(b, self.end)
        if self.curve.closed and a >= self.curve.length:
            a -= self.curve.length
            b -= self.curve.length
        return ArcRef(self.curve, a, b)

    def contains(self, other):
        """True if ``other`` (same curve) lies inside this arc as a point set."""
        if other.curve is not self.curve:
            return False
        slack = 1e-12 * self.curve.length
        shifts = (0.0, self.curve.length, -self.curve.length) if self.curve.closed else (0.0,)
        return any(self.start - slack <= other.start + s and other.end + s <= self.end + slack for s in shifts)

    def to_curve(self):
        """The arc as a standalone open :class:`PolyCurve`."""
        return PolyCurve(self.points(), closed=False, resolution=self.curve.resolution, validate=False)


def diameter(arc):
    """Diameter of a subarc: max distance over its vertices and two endpoints."""
    if isinstance(arc, PolyCurve):
        return arc.diameter
    if arc.length <= 0 or arc.length < 1e-15 * arc.curve.length:
        raise DomelabError("degenerate arc has zero length")
    if arc.is_whole:
        return arc.curve.diameter
    return point_set_diameter(arc.points())


def smaller_diameter_subarc(curve, x, y, tol=SNAP_TOLERANCE):
    """The subarc between ``x`` and ``y`` of smaller diameter.

    Both points are snapped onto the curve.  The returned arc always begins at
    ``x``; on a tie (relative difference below ``TIE_TOLERANCE``) the arc that
    runs forward from ``x`` is returned.
    """
    if not curve.closed:
        raise GeometryError("smaller_diameter_subarc needs a closed curve")
    sx = curve.snap(x, tol)
    sy = curve.snap(y, tol)
    L = curve.length
    gap = (sy - sx) % L
    if gap <= tol * L or L - gap <= tol * L:
        raise GeometryError("x and y coincide after snapping")
    fwd = ArcRef(curve, sx, sx + gap, True)
    back = ArcRef(curve, sy, sy + (L - gap), False)
    d_fwd, d_back = diameter(fwd), diameter(back)
    if d_fwd <= d_back * (1 + TIE_TOLERANCE):
        return fwd
    return back


def read_curve_csv(path, closed=None, resolution=0.0, validate=True):
    """Read a curve CSV (header ``x,y``).

    ``closed`` defaults to the ``closed`` flag of a sidecar ``<path>.json``
    file when present, else True.
    """
    path = Path(path)
    if closed is None:
        side = path.with_suffix(path.suffix + ".json")
        closed = bool(json.loads(side.read_text()).get("closed", True)) if side.exists() else True
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header[:2] != ["x", "y"]:
            raise GeometryError(f"curve CSV header must be 'x,y', got {header}")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    return PolyCurve(rows, closed=closed, resolution=resolution, validate=validate)


def write_curve_csv(curve, path, sidecar=True):
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("x,y\n")
        for x, y in curve.vertices:
            fh.write(f"{x:.17g},{y:.17g}\n")
    if sidecar:
        path.with_suffix(path.suffix + ".json").write_text(json.dumps({"closed": curve.closed}) + "\n")
    return path


def regular_polygon(n, radius=1.0, center=(0.0, 0.0), phase=0.0):
    """Counter-clockwise regular ``n``-gon."""
    t = phase + 2 * np.pi * np.arange(n) / n
    return PolyCurve(np.c_[center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], closed=True)
