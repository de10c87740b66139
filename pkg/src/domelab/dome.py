"""Double-dome surfaces z = +-dist(x, boundary)^alpha over a Jordan domain.

The planar mesh is a constrained Delaunay triangulation of the domain
(``triangle``), graded so that the target edge length near the boundary
follows the distance to it, from ``h_min`` up to ``h``.  Heights come from
exact point-to-boundary distances.  The upper and lower sheets share the
boundary vertices, so the result is a closed triangulated sphere.

Areas of sets are sums of triangle areas; triangles that straddle a set's
boundary are split four ways ``depth`` times and counted by sub-centroids.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import shapely
import triangle as tr
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator

from ._validation import DomelabError, GeometryError, check_points, check_positive
from .curves import PolyCurve, smaller_diameter_subarc
from .distance import SegmentIndex

log = logging.getLogger(__name__)

UPPER, BOUNDARY, LOWER = 1, 0, -1
SUBDIVISION_DEPTH = 4
MAX_REFINE_ROUNDS = 10


def _tri_areas(v, f):
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


@dataclass(eq=False)
class DomeMesh:
    """Triangulated double dome with per-vertex sheet tags."""

    vertices: np.ndarray
    triangles: np.ndarray
    sheet: np.ndarray
    alpha: float
    domain: PolyCurve
    h: float
    planar_distance: np.ndarray
    index: SegmentIndex = field(repr=False, default=None)

    @cached_property
    def areas(self):
        return _tri_areas(self.vertices, self.triangles)

    @property
    def total_area(self):
        return float(np.sum(self.areas))

    @cached_property
    def edges(self):
        f = self.triangles
        e = np.vstack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def adjacency(self):
        """Symmetric sparse graph with Euclidean edge lengths."""
        e = self.edges
        w = np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)
        n = len(self.vertices)
        g = coo_matrix((np.r_[w, w], (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))
        return g.tocsr()

    @property
    def euler_characteristic(self):
        return len(self.vertices) - len(self.edges) + len(self.triangles)

    @cached_property
    def vertex_tree(self):
        return cKDTree(self.vertices)

    @cached_property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def tri_radius(self):
        v = self.vertices[self.triangles]
        return np.max(np.linalg.norm(v - self.centroids[:, None, :], axis=2), axis=1)

    @cached_property
    def centroid_tree(self):
        return cKDTree(self.centroids)

    @property
    def upper_triangles(self):
        return np.all(self.sheet[self.triangles] >= 0, axis=1)

    def height(self, planar_points):
        d = self.index.distance(np.atleast_2d(planar_points))
        return d ** self.alpha

    def lift(self, planar_points):
        p = np.atleast_2d(planar_points)
        return np.c_[p, self.height(p)]

    def to_obj(self, path):
        from .reports import write_obj

        return write_obj(path, self.vertices, self.triangles)


def _grade_targets(d, h, h_min, grade):
    s = np.clip(grade * d, h_min, h)
    return s * s * math.sqrt(3) / 4


def planar_mesh(domain, h, h_min=None, grade=1.0, alpha=1.0, index=None, quality=25):
    """Graded constrained Delaunay triangulation of the domain.

    Returns ``(points, triangles, boundary_mask)``.
    """
    h_min = h / 8 if h_min is None else h_min
    index = index if index is not None else SegmentIndex(domain)
    n = domain.n_vertices
    seg = np.c_[np.arange(n), (np.arange(n) + 1) % n]
    A0 = h * h * math.sqrt(3) / 4
    mesh = tr.triangulate({"vertices": np.array(domain.vertices), "segments": seg}, f"pq{quality}a{A0:.17f}Q")
    var_tol = h ** alpha
    for _ in range(MAX_REFINE_ROUNDS):
        pts, f = mesh["vertices"], mesh["triangles"]
        area = _tri_areas(np.c_[pts, np.zeros(len(pts))], f)
        cen = pts[f].mean(axis=1)
        d = index.distance(cen)
        target = _grade_targets(d, h, h_min, grade)
        dv = index.distance(pts)
        zv = dv ** alpha
        var = np.ptp(zv[f], axis=1)
        too_big = area > 1.5 * target
        steep = (d < 4 * h) & (var > var_tol) & (area > h_min * h_min * math.sqrt(3) / 4 * 1.5)
        mark = too_big | steep
        if not mark.any():
            break
        max_area = np.where(mark, np.minimum(target, area / 2), -1.0)
        mesh = tr.triangulate(dict(mesh, triangle_max_area=max_area), f"rpq{quality}aQ")
    pts, f = mesh["vertices"], mesh["triangles"]
    on_b = mesh["vertex_markers"].ravel() == 1
    return _split_boundary_chords(pts, f, on_b)


def _split_boundary_chords(pts, f, on_b, rounds=8):
    """Insert midpoints on interior edges joining two boundary vertices.

    Such an edge would be shared by both sheets of the dome and pinch the
    surface, so each one gets an interior vertex.
    """
    for _ in range(rounds):
        e = np.sort(np.vstack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        u, count = np.unique(e, axis=0, return_counts=True)
        chords = u[(count == 2) & on_b[u[:, 0]] & on_b[u[:, 1]]]
        if not len(chords):
            return pts, f, on_b
        seg = u[count == 1]
        mid = 0.5 * (pts[chords[:, 0]] + pts[chords[:, 1]])
        mesh = tr.triangulate({"vertices": np.vstack([pts, mid]), "segments": seg,
                               "vertex_markers": np.r_[on_b, np.zeros(len(mid), bool)].astype(np.int32)[:, None],
                               "segment_markers": np.ones((len(seg), 1), np.int32)}, "pQ")
        pts, f = mesh["vertices"], mesh["triangles"]
        on_b = mesh["vertex_markers"].ravel() == 1
    raise GeometryError("could not remove boundary chords from the planar mesh")


def drop_collinear(curve, rtol=1e-12):
    """Remove vertices lying on the segment between their neighbours; the point set is unchanged."""
    v = curve.vertices
    a, b = np.roll(v, 1, axis=0), np.roll(v, -1, axis=0)
    cross = (v[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]) - (v[:, 1] - a[:, 1]) * (b[:, 0] - a[:, 0])
    scale = np.hypot(*(b - a).T) * curve.diameter
    between = np.einsum("ij,ij->i", v - a, b - v) > 0
    keep = ~((np.abs(cross) <= rtol * scale) & between)
    if keep.all():
        return curve
    return PolyCurve(v[keep], closed=True, resolution=curve.resolution, validate=False)


def build_dome(domain, alpha, h, h_min=None, grade=1.0):
    """Mesh both sheets of ``z = +-dist(x, boundary)^alpha`` over the domain."""
    if not isinstance(domain, PolyCurve) or not domain.closed:
        raise GeometryError("the domain must be a closed PolyCurve")
    alpha = check_positive(alpha, "alpha")
    h = check_positive(h, "h")
    if h >= domain.diameter / 64:
        raise DomelabError(f"h = {h:.3g} must be below diam/64 = {domain.diameter / 64:.3g}")
    if not domain.is_simple():
        raise GeometryError("domain boundary is self-intersecting")
    if domain.signed_area() < 0:
        domain = PolyCurve(domain.vertices[::-1], closed=True, resolution=domain.resolution, validate=False)
    domain = drop_collinear(domain)
    index = SegmentIndex(domain)
    if alpha == 1 and h_min is None:
        # Lipschitz heights need no boundary grading
        h_min = h
    pts, f, on_b = planar_mesh(domain, h, h_min, grade, min(alpha, 1.0), index)
    d = index.distance(pts)
    d[on_b] = 0.0
    z = d ** alpha
    n = len(pts)
    interior = np.flatnonzero(~on_b)
    twin = np.arange(n)
    twin[interior] = n + np.arange(len(interior))
    verts = np.vstack([np.c_[pts, z], np.c_[pts[interior], -z[interior]]])
    sheet = np.r_[np.where(on_b, BOUNDARY, UPPER), np.full(len(interior), LOWER)]
    # orient the upper sheet counter-clockwise seen from above, lower sheet reversed
    p0, p1, p2 = pts[f[:, 0]], pts[f[:, 1]], pts[f[:, 2]]
    cross = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    f = np.where(cross[:, None] < 0, f[:, ::-1], f)
    lower = twin[f][:, ::-1]
    tris = np.vstack([f, lower])
    mesh = DomeMesh(verts, tris, sheet, alpha, domain, h, np.r_[d, d[interior]], index)
    log.info("build_dome: alpha=%g h=%g vertices=%d triangles=%d area=%.6g", alpha, h, len(verts), len(tris),
             mesh.total_area)
    return mesh


class Ball:
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float).reshape(3)
        self.radius = check_positive(radius, "radius")

    def contains(self, p):
        return np.sum((p - self.center) ** 2, axis=-1) <= self.radius ** 2

    def candidates(self, mesh):
        return np.asarray(mesh.centroid_tree.query_ball_point(self.center, self.radius + mesh.tri_radius.max()),
                          dtype=np.int64)

    def classify(self, cen, rad):
        dist = np.linalg.norm(cen - self.center, axis=1)
        out = np.zeros(len(cen), dtype=np.int8)
        out[dist + rad <= self.radius] = 1
        out[dist - rad > self.radius] = -1
        return out


class HalfSpace:
    """Closed half-space ``normal . x >= offset``."""

    def __init__(self, normal, offset=0.0):
        self.normal = np.asarray(normal, dtype=float).reshape(3)
        self.offset = float(offset)

    def contains(self, p):
        return p @ self.normal >= self.offset


class Whole:
    def contains(self, p):
        return np.ones(p.shape[:-1], dtype=bool)


class PlanarRegion:
    """Points of one sheet whose projection lies in a planar polygon."""

    def __init__(self, polygon_points, sheet=UPPER):
        self.polygon = shapely.polygons(np.asarray(polygon_points))
        shapely.prepare(self.polygon)
        self.sheet = sheet

    def contains(self, p):
        flat = p.reshape(-1, 3)
        ok = shapely.contains_xy(self.polygon, flat[:, 0], flat[:, 1])
        ok &= flat[:, 2] >= 0 if self.sheet == UPPER else flat[:, 2] <= 0
        return ok.reshape(p.shape[:-1])


def _sub_barycentric(depth=SUBDIVISION_DEPTH):
    """Barycentric centroids of the 4**depth congruent subtriangles of a triangle."""
    k = 2 ** depth
    out = []
    for i in range(k):
        for j in range(k - i):
            out.append(((i + 1 / 3) / k, (j + 1 / 3) / k))
            if i + j < k - 1:
                out.append(((i + 2 / 3) / k, (j + 2 / 3) / k))
    uv = np.array(out)
    return np.c_[1 - uv.sum(axis=1), uv]


_BARY = _sub_barycentric()


def _inside_fraction(mesh, tri_idx, contains, chunk=2048):
    frac = np.empty(len(tri_idx))
    for s in range(0, len(tri_idx), chunk):
        v = mesh.vertices[mesh.triangles[tri_idx[s:s + chunk]]]
        pts = np.einsum("kb,mbd->mkd", _BARY, v)
        frac[s:s + chunk] = contains(pts).mean(axis=1)
    return frac


def region_area(mesh, predicate):
    """Surface area of the part of the mesh selected by ``predicate``.

    ``predicate`` is a :class:`Ball`, :class:`HalfSpace`, :class:`Whole`,
    :class:`PlanarRegion` or any callable mapping an ``(..., 3)`` array to a
    boolean array.  Triangles with all vertices on one side are counted whole
    (exact for convex sets); the rest are split into 256 subtriangles.
    """
    if isinstance(predicate, Whole):
        return mesh.total_area
    contains = predicate.contains if hasattr(predicate, "contains") else predicate
    if isinstance(predicate, Ball):
        cand = predicate.candidates(mesh)
        if len(cand) == 0:
            return 0.0
        state = predicate.classify(mesh.centroids[cand], mesh.tri_radius[cand])
    else:
        cand = np.arange(len(mesh.triangles))
        state = np.zeros(len(cand), dtype=np.int8)
    und = np.flatnonzero(state == 0)
    inside = contains(mesh.vertices[mesh.triangles[cand[und]]])
    n_in = inside.sum(axis=1)
    state[und[n_in == 3]] = 1
    if not isinstance(predicate, Ball):
        state[und[n_in == 0]] = -1
    area = float(np.sum(mesh.areas[cand[state == 1]]))
    mixed = cand[state == 0]
    if len(mixed):
        area += float(np.sum(mesh.areas[mixed] * _inside_fraction(mesh, mixed, contains)))
    return area


# --- Ahlfors regularity -------------------------------------------------------------------------

STRATA = ("interior", "near-boundary", "on-boundary")


def dyadic_radii(mesh, r_max=0.5, r_min=None):
    """Dyadic radii 2**-k in [r_min, r_max], r_min defaulting to 4h."""
    r_min = 4 * mesh.h if r_min is None else r_min
    k0 = math.ceil(-math.log2(r_max) - 1e-12)
    out = []
    k = k0
    while 2.0 ** -k >= r_min * (1 - 1e-12):
        out.append(2.0 ** -k)
        k += 1
    return out


def default_eps0(domain, levels=3):
    """Passing level of an LQC scan started at diam/8."""
    from .levelsets import lqc_scan

    rep = lqc_scan(domain, domain.diameter / 8, levels=levels)
    return rep.eps0_passing if rep.eps0_passing > 0 else domain.diameter / 64


def stratum_of(d, eps0):
    return np.where(d <= 0, 2, np.where(d <= eps0, 1, 0))


def sample_centers(mesh, per_stratum=8, eps0=None, seed=0):
    """Vertex indices of sampled centers: ``per_stratum`` from each stratum."""
    eps0 = default_eps0(mesh.domain) if eps0 is None else eps0
    rng = np.random.default_rng(seed)
    cand = np.flatnonzero(mesh.sheet >= 0)
    st = stratum_of(mesh.planar_distance[cand], eps0)
    out = []
    for s in range(3):
        pool = cand[st == s]
        if len(pool):
            out.extend(rng.choice(pool, size=min(per_stratum, len(pool)), replace=False).tolist())
    return np.array(sorted(out), dtype=np.int64), eps0


@dataclass
class RegularityReport:
    rows: list
    constant: float
    per_radius: dict
    eps0: float

    def per_radius_stratum(self, stratum):
        out = {}
        for r in self.rows:
            if r["stratum"] == stratum and not r["flagged"]:
                out[r["r"]] = max(out.get(r["r"], 0.0), r["ratio"])
        return dict(sorted(out.items(), reverse=True))

    def boundary_profile(self):
        """Per-radius maximum over centers within eps0 of the boundary (both non-interior strata)."""
        out = {}
        for r in self.rows:
            if r["stratum"] != "interior" and not r["flagged"]:
                out[r["r"]] = max(out.get(r["r"], 0.0), r["ratio"])
        return dict(sorted(out.items(), reverse=True))

    def to_csv(self):
        from .reports import csv_text

        return csv_text(["center_id", "stratum", "r", "area", "ratio"],
                        [[r["center_id"], r["stratum"], r["r"], r["area"], r["ratio"]] for r in self.rows])


def regularity_scan(mesh, centers=None, radii=None, eps0=None, per_stratum=8, seed=0):
    """Ratios max(area/r^2, r^2/area) of ball areas on the surface.

    ``centers`` are vertex indices or 3-space points; rows with r below 4h are
    kept but flagged and ignored in the constant.
    """
    if centers is None:
        centers, eps0 = sample_centers(mesh, per_stratum, eps0, seed)
    elif eps0 is None:
        eps0 = default_eps0(mesh.domain)
    centers = np.asarray(centers)
    if centers.ndim == 1:
        pts = mesh.vertices[centers]
    else:
        pts = np.asarray(centers, dtype=float).reshape(-1, 3)
    d = mesh.index.distance(pts[:, :2])
    d[np.abs(pts[:, 2]) == 0] = 0.0
    st = stratum_of(d, eps0)
    radii = dyadic_radii(mesh) if radii is None else sorted(radii, reverse=True)
    rows = []
    for cid, (p, s) in enumerate(zip(pts, st)):
        for r in radii:
            a = region_area(mesh, Ball(p, r))
            ratio = max(a / r ** 2, r ** 2 / a) if a > 0 else math.inf
            rows.append({"center_id": cid, "stratum": STRATA[s], "r": float(r), "area": a, "ratio": ratio,
                         "flagged": r < 4 * mesh.h})
    ok = [r for r in rows if not r["flagged"]]
    per_radius = {}
    for r in ok:
        per_radius[r["r"]] = max(per_radius.get(r["r"], 0.0), r["ratio"])
    const = max((r["ratio"] for r in ok), default=math.nan)
    log.info("regularity_scan: centers=%d radii=%d C=%.4g", len(pts), len(radii), const)
    return RegularityReport(rows, const, dict(sorted(per_radius.items(), reverse=True)), float(eps0))


# --- linear local connectivity ------------------------------------------------------------------


def _one_component(adj, members, targets):
    """Whether all ``targets`` (subset of ``members``) share a component of the induced subgraph."""
    if len(targets) <= 1:
        return True
    sub = adj[members][:, members]
    _, lab = connected_components(sub, directed=False)
    pos = np.searchsorted(members, targets)
    return bool(np.all(lab[pos] == lab[pos[0]]))


def llc1(mesh, x, r, lambda_cap=100.0):
    """Least lambda with all vertices of B(x, r) connected inside B(x, lambda r).

    Returns ``(lambda, capped)``.
    """
    tree = mesh.vertex_tree
    idx = np.asarray(tree.query_ball_point(x, lambda_cap * r), dtype=np.int64)
    if len(idx) == 0:
        return 1.0, False
    dist = np.linalg.norm(mesh.vertices[idx] - x, axis=1)
    order = np.argsort(dist, kind="stable")
    idx, dist = idx[order], dist[order]
    n_in = int(np.searchsorted(dist, r, side="right"))
    if n_in <= 1:
        return 1.0, False
    targets = np.sort(idx[:n_in])

    def ok(k):
        return _one_component(mesh.adjacency, np.sort(idx[:k]), targets)

    if not ok(len(idx)):
        return float(lambda_cap), True
    lo, hi = n_in, len(idx)
    if ok(lo):
        return 1.0, False
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return max(1.0, float(dist[hi - 1] / r)), False


def llc2(mesh, x, r, lambda_cap=100.0):
    """Least lambda with all vertices outside B(x, r) connected outside B(x, r/lambda)."""
    dist = np.linalg.norm(mesh.vertices - x, axis=1)
    outer = np.flatnonzero(dist >= r)
    if len(outer) <= 1:
        return 1.0, False
    # candidate inner radii rho in [r/cap, r], as vertex distances in decreasing order
    cand = np.sort(dist[(dist < r) & (dist >= r / lambda_cap)])[::-1]
    rhos = np.r_[r, cand]

    def ok(rho):
        return _one_component(mesh.adjacency, np.flatnonzero(dist >= rho), outer)

    if ok(r):
        return 1.0, False
    if not ok(rhos[-1]) or (len(cand) and not ok(r / lambda_cap)):
        return float(lambda_cap), True
    lo, hi = 0, len(rhos) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(rhos[mid]):
            hi = mid
        else:
            lo = mid
    # the set outside B(x, rho) only changes at vertex distances, so any rho in (rhos[hi+1], rhos[hi]] works
    nxt = rhos[hi + 1] if hi + 1 < len(rhos) else r / lambda_cap
    return min(float(lambda_cap), max(1.0, r / max(nxt, r / lambda_cap) * (1 - 1e-12))), False


@dataclass
class LlcReport:
    rows: list
    lambda1: float
    lambda2: float
    capped: bool
    lambda_cap: float

    def to_csv(self):
        from .reports import csv_text

        return csv_text(["sample_id", "r", "lambda1", "lambda2"],
                        [[r["sample_id"], r["r"], r["lambda1"], r["lambda2"]] for r in self.rows])


def llc_samples(mesh, n_centers=8, eps0=None, seed=0, radii=None):
    """Default LLC samples: near-boundary upper vertices, each at its twin gap and dyadic radii.

    The twin gap ``2 z`` is the distance between a vertex and its mirror image;
    balls just above it contain both sheets, where the cusp of a steep dome lives.
    """
    eps0 = eps0 if eps0 is not None else mesh.domain.diameter / 8
    rng = np.random.default_rng(seed)
    d = mesh.planar_distance
    pool = np.flatnonzero((mesh.sheet == UPPER) & (d <= eps0))
    if len(pool) == 0:
        pool = np.flatnonzero(mesh.sheet == UPPER)
    # stratify by log-distance so both coarse and fine layers are sampled
    logd = np.log2(d[pool])
    bins = np.linspace(logd.min(), logd.max() + 1e-9, n_centers + 1)
    picks = []
    for a, b in zip(bins[:-1], bins[1:]):
        sel = pool[(logd >= a) & (logd < b)]
        if len(sel):
            picks.append(int(rng.choice(sel)))
    radii = list(dyadic_radii(mesh, r_max=0.25)) if radii is None else list(radii)
    out = []
    for v in picks:
        z = mesh.vertices[v, 2]
        out.append((v, 2 * z * (1 + 1e-6)))
        for r in radii:
            out.append((v, r))
    return out


def llc_scan(mesh, samples=None, lambda_cap=100.0, n_centers=8, seed=0):
    """Estimate LLC constants over ``(center, r)`` samples.

    Centers are vertex indices or 3-space points.  Graph connectivity over mesh
    edges stands in for continua, so the estimates are biased upward.
    """
    if samples is None:
        samples = llc_samples(mesh, n_centers=n_centers, seed=seed)
    rows = []
    capped = False
    for sid, (c, r) in enumerate(samples):
        x = mesh.vertices[c] if np.ndim(c) == 0 else np.asarray(c, dtype=float).reshape(3)
        r = check_positive(r, "r")
        l1, c1 = llc1(mesh, x, r, lambda_cap)
        l2, c2 = llc2(mesh, x, r, lambda_cap)
        capped = capped or c1 or c2
        rows.append({"sample_id": sid, "r": float(r), "lambda1": l1, "lambda2": l2, "capped": c1 or c2})
    lam1 = max((r["lambda1"] for r in rows), default=1.0)
    lam2 = max((r["lambda2"] for r in rows), default=1.0)
    log.info("llc_scan: samples=%d lambda1=%.4g lambda2=%.4g capped=%s", len(rows), lam1, lam2, capped)
    return LlcReport(rows, lam1, lam2, capped, float(lambda_cap))


# --- square pieces ------------------------------------------------------------------------------


@dataclass(eq=False)
class SquarePiece:
    x1: np.ndarray
    y1: np.ndarray
    x2: np.ndarray
    y2: np.ndarray
    t1: float
    t2: float
    polygon: np.ndarray
    area: float
    diameter: float
    c0: float
    checks: dict

    @property
    def ratio(self):
        """area / diam(D)^2, bounded above and below for square pieces."""
        return self.area / self.diameter ** 2


def _level_component(field, t, point):
    from .levelsets import extract_level_curve

    if t == 0:
        return field.domain
    comps = extract_level_curve(field, t).components
    if not comps:
        raise GeometryError(f"level {t:.6g} is empty")
    best = min(comps, key=lambda c: c.project(point[None])[1][0])
    return best


def _on_level(index, p, t, tol):
    from .levelsets import _project_to_level

    d = index.distance(p[None])[0]
    if abs(d - t) > tol:
        return None
    if t == 0:
        return index.nearest(p[None])[0]
    q, _, _, _ = _project_to_level(index, p[None], t, 1e-12 * max(t, 1.0))
    return q[0]


def _gradient_step(index, p, amount):
    d, seg, t = index.query(p[None])
    foot = index.starts[seg[0]] + t[0] * index.delta[seg[0]]
    u = (p - foot) / np.hypot(*(p - foot))
    return p - amount * u


def square_piece(mesh, x1, y1, t1, t2, c0=None, field=None, tol=1e-3, strict=True):
    """Assemble the square piece D(x1, y1, x2, y2) on the upper sheet.

    ``x1``, ``y1`` must lie on the level ``t1`` (planar or lifted points).  The
    lower corners are the nearest points on level ``t2``.  ``c0`` defaults to
    the larger two-point constant of the two level curves.  Failed properties
    raise :class:`GeometryError` naming (i), (ii) or (iii); with
    ``strict=False`` a failed (iii) is recorded in ``checks`` instead.
    """
    from .gauges import two_point_constant
    from .levelsets import build_distance_field

    t1, t2 = float(t1), float(t2)
    if not 0 <= t2 < t1:
        raise DomelabError(f"need 0 <= t2 < t1, got t1={t1}, t2={t2}")
    D = mesh.domain.diameter
    atol = tol * D
    index = mesh.index
    p1, q1 = np.asarray(x1, float)[:2], np.asarray(y1, float)[:2]
    a1, b1 = _on_level(index, p1, t1, atol), _on_level(index, q1, t1, atol)
    if a1 is None or b1 is None:
        raise GeometryError(f"(i): x1 and y1 must lie on the level t1 = {t1:.6g}")
    a2, b2 = _gradient_step(index, a1, t1 - t2), _gradient_step(index, b1, t1 - t2)
    d2 = index.distance(np.array([a2, b2]))
    if np.max(np.abs(d2 - t2)) > atol:
        raise GeometryError(f"(ii): nearest points on level t2 = {t2:.6g} are off the level by {np.max(np.abs(d2 - t2)):.3g}")
    if field is None:
        h = min(D / 256, max(t2, t1 / 2) / 4)
        field = build_distance_field(mesh.domain, h, index=index)
    g1 = _level_component(field, t1, a1)
    g2 = _level_component(field, t2, a2)
    if c0 is None:
        c0 = max(two_point_constant(g).constant for g in (g1, g2) if g is not mesh.domain) if t2 > 0 else \
            two_point_constant(g1).constant
    snap_tol = 2 * LEVEL_SNAP * D / g1.diameter
    top = smaller_diameter_subarc(g1, a1, b1, tol=snap_tol).points()
    bottom = smaller_diameter_subarc(g2, a2, b2, tol=2 * LEVEL_SNAP * D / g2.diameter).points()
    top[0], top[-1] = a1, b1
    bottom[0], bottom[-1] = a2, b2
    poly = np.vstack([top, bottom[::-1]])
    pg = shapely.polygons(poly)
    if not pg.is_valid:
        raise GeometryError("square piece boundary is not a simple polygon")
    area = region_area(mesh, PlanarRegion(poly, UPPER))
    # diameter of the lifted patch: boundary, densified side segments and interior vertices
    sides = [a1 + np.linspace(0, 1, 65)[:, None] * (a2 - a1), b1 + np.linspace(0, 1, 65)[:, None] * (b2 - b1)]
    ring = np.vstack([poly] + sides)
    ring3 = mesh.lift(ring)
    up = np.flatnonzero(mesh.sheet >= 0)
    inner = up[shapely.contains_xy(pg, mesh.vertices[up, 0], mesh.vertices[up, 1])]
    cloud = np.vstack([ring3, mesh.vertices[inner]])
    diam = _diameter3(cloud)
    alpha = mesh.alpha
    q = t1 - t2 + t1 ** alpha - t2 ** alpha
    chord = float(np.hypot(*(a1 - b1)))
    slack = 1 + tol
    checks = {
        "i": True,
        "ii": True,
        "iii_lower": chord / (20 * c0) <= q * slack,
        "iii_middle": q <= chord / 3 * slack,
        "iii_upper": chord / 3 <= D / (10 * c0) * slack,
    }
    checks["iii"] = checks["iii_lower"] and checks["iii_middle"] and checks["iii_upper"]
    if strict and not checks["iii"]:
        failed = [k for k in ("iii_lower", "iii_middle", "iii_upper") if not checks[k]]
        raise GeometryError(f"(iii): comparability fails ({', '.join(failed)}); "
                            f"q={q:.6g}, |x1-y1|={chord:.6g}, C0={c0:.6g}")
    z1, z2 = t1 ** alpha, t2 ** alpha
    return SquarePiece(np.r_[a1, z1], np.r_[b1, z1], np.r_[a2, z2], np.r_[b2, z2], t1, t2, poly, area, diam,
                       float(c0), checks)


LEVEL_SNAP = 1e-5


def _diameter3(points):
    from scipy.spatial import ConvexHull
    from scipy.spatial.distance import pdist

    if len(points) > 64:
        try:
            points = points[ConvexHull(points).vertices]
        except Exception:  # flat or degenerate cloud
            pass
    return float(pdist(points).max())


def points_on_level(mesh, t, chord, field=None, start=None):
    """Two points of the level ``t`` at planar distance ``chord``.

    ``x1`` is the level-curve vertex nearest ``start`` (default: the first
    vertex); ``y1`` is the first point forward along the curve at that distance.
    """
    from .levelsets import build_distance_field

    if field is None:
        field = build_distance_field(mesh.domain, min(mesh.domain.diameter / 256, t / 4), index=mesh.index)
    g = _level_component(field, t, np.zeros(2) if start is None else np.asarray(start, float))
    v = g.vertices
    k = 0 if start is None else int(np.argmin(np.hypot(*(v - np.asarray(start, float)).T)))
    v = np.roll(v, -k, axis=0)
    dist = np.hypot(*(v - v[0]).T)
    j = int(np.argmax(dist >= chord))
    if dist[j] < chord:
        raise GeometryError(f"level {t:.6g} has no points at distance {chord:.6g}")
    # solve on segment [j-1, j] for the exact chord
    a, b = v[j - 1], v[j]
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.hypot(*(a + mid * (b - a) - v[0])) < chord:
            lo = mid
        else:
            hi = mid
    return v[0], a + 0.5 * (lo + hi) * (b - a), field


class DomeSurface(BaseEstimator):
    """Estimator wrapper: ``fit`` meshes the dome of a domain, ``transform`` lifts planar points."""

    def __init__(self, alpha=0.5, h=1 / 128, h_min=None, grade=1.0):
        self.alpha = alpha
        self.h = h
        self.h_min = h_min
        self.grade = grade

    def fit(self, X, y=None):
        self.mesh_ = build_dome(X, self.alpha, self.h, self.h_min, self.grade)
        self.area_ = self.mesh_.total_area
        log.info("DomeSurface fit: alpha=%g h=%g area=%.6g", self.alpha, self.h, self.area_)
        return self

    def transform(self, X):
        return self.mesh_.lift(check_points(X))
