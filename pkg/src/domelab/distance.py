"""Exact point-to-polyline distances.

Candidate segments are found with a k-d tree over sample points placed along
every segment (spacing ``s``).  The nearest segment of a query at distance
``d`` owns a sample within ``d + s/2``, so once the k-th nearest sample is
farther than ``best + s/2`` the candidate set is complete and the minimum is
exact.  Queries that fail the test are retried with a larger k.
"""

import numpy as np
import shapely
from scipy.spatial import cKDTree

from .curves import PolyCurve


class SegmentIndex:
    """Nearest-segment queries against a fixed polyline."""

    def __init__(self, curve, spacing=None):
        if not isinstance(curve, PolyCurve):
            raise TypeError("SegmentIndex needs a PolyCurve")
        self.curve = curve
        self.starts = np.ascontiguousarray(curve.segment_starts)
        self.ends = np.ascontiguousarray(curve.segment_ends)
        self.delta = self.ends - self.starts
        self.len2 = np.einsum("ij,ij->i", self.delta, self.delta)
        seg = curve.segment_lengths
        s = float(np.median(seg)) if spacing is None else float(spacing)
        counts = np.maximum(1, np.ceil(seg / s).astype(np.int64))
        owner = np.repeat(np.arange(len(seg)), counts)
        first = np.repeat(np.cumsum(counts) - counts, counts)
        frac = (np.arange(len(owner)) - first + 0.5) / counts[owner]
        self.samples = self.starts[owner] + frac[:, None] * self.delta[owner]
        self.owner = owner
        self.half_gap = 0.5 * float(np.max(seg / counts))
        self.tree = cKDTree(self.samples)
        self._polygon = None

    def _exact(self, q, cand):
        a = self.starts[cand]
        d = self.delta[cand]
        rel = q[:, None, :] - a
        t = np.clip(np.einsum("qkj,qkj->qk", rel, d) / self.len2[cand], 0.0, 1.0)
        dx = rel[..., 0] - t * d[..., 0]
        dy = rel[..., 1] - t * d[..., 1]
        dist = np.hypot(dx, dy)
        k = np.argmin(dist, axis=1)
        rows = np.arange(len(q))
        return dist[rows, k], cand[rows, k], t[rows, k]

    def query(self, points, chunk=200_000):
        """Distance, nearest segment index and segment fraction for each point."""
        q = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        n = len(q)
        dist = np.empty(n)
        seg = np.empty(n, dtype=np.int64)
        frac = np.empty(n)
        total = len(self.samples)
        for lo in range(0, n, chunk):
            block = q[lo:lo + chunk]
            todo = np.arange(len(block))
            k = min(8, total)
            while len(todo):
                sd, si = self.tree.query(block[todo], k=k)
                if k == 1:
                    sd, si = sd[:, None], si[:, None]
                d, s, t = self._exact(block[todo], self.owner[si])
                done = (sd[:, -1] > d + self.half_gap) | (k >= total)
                rows = lo + todo[done]
                dist[rows], seg[rows], frac[rows] = d[done], s[done], t[done]
                todo = todo[~done]
                k = min(4 * k, total)
        return dist, seg, frac

    def distance(self, points):
        return self.query(points)[0]

    def nearest(self, points):
        """Nearest boundary points, shape (n, 2)."""
        _, s, t = self.query(points)
        return self.starts[s] + t[:, None] * self.delta[s]

    def inside(self, points):
        if self._polygon is None:
            self._polygon = shapely.polygons(self.curve.vertices)
            shapely.prepare(self._polygon)
        q = np.atleast_2d(points)
        return shapely.contains_xy(self._polygon, q[:, 0], q[:, 1])

    def signed_distance(self, points):
        """Distance to the curve, positive inside the enclosed region."""
        if not self.curve.closed:
            raise ValueError("signed distance needs a closed curve")
        d = self.distance(points)
        return np.where(self.inside(points), d, -d)


def brute_force_distance(points, curve):
    """Reference O(points x segments) distance, used by tests."""
    q = np.atleast_2d(points)
    a = curve.segment_starts
    d = curve.segment_ends - a
    rel = q[:, None, :] - a[None]
    t = np.clip(np.einsum("qkj,kj->qk", rel, d) / np.einsum("kj,kj->k", d, d), 0, 1)
    return np.min(np.hypot(rel[..., 0] - t * d[:, 0], rel[..., 1] - t * d[:, 1]), axis=1)
