"""Edge subarcs of deep snowflakes without explicit geometry.

A diam-partition of an edge subarc at step 12 has on the order of 10^7
pieces, far beyond explicit polylines.  Homogeneity makes it unnecessary:
the edge subarc at step ``n`` is a chain of ``4**(b-n)`` congruent blocks
(edge subarcs at step ``b``), so a partition built inside one block, with
absolute piece band ``[tau/2, tau]``, repeats verbatim in every block.

Inside a block, the curve is represented by elementary edge subarcs at a
level ``e`` whose diameters are at most ``tau/8``.  Each element carries the
convex hull of its own limit arc (similarity image of a chord-normalised
template refined a few steps further; vertices of a truncation lie on the
limit curve, so these hulls are inner approximations).  Pieces are runs of
consecutive elements and their diameters are hull-union diameters.
"""

from functools import lru_cache

import numpy as np

from ._validation import PartitionError, ResolutionError, check_fraction, check_int, check_positive
from .curves import _hull_indices, point_set_diameter
from .partition import PartitionSummary, t_sequence
from .snowflake import edge_length_analytic, refine, step_kinds

DIAMETER_STEPS = 8
DECORATION_STEPS = 6
BLOCK_PIECES = 16
ELEMENT_FRACTION = 8
MAX_ELEMENTS = 4 ** 8


@lru_cache(maxsize=4096)
def _template(spec_key, m, steps):
    """Chord-normalised truncation of an edge subarc at step ``m``."""
    spec = spec_key
    kinds = tuple(step_kinds(spec, m + 1, m + steps))
    return refine(np.array([0.0, 1.0], dtype=np.complex128), False, list(kinds), spec.p)


@lru_cache(maxsize=4096)
def template_hull(spec, m, steps=DECORATION_STEPS):
    z = _template(spec, m, steps)
    pts = np.c_[z.real, z.imag]
    h = pts[_hull_indices(pts)]
    return h[:, 0] + 1j * h[:, 1]


@lru_cache(maxsize=4096)
def diameter_ratio(spec, m, steps=DIAMETER_STEPS):
    """diam(edge subarc) / edge length for edges of step ``m``."""
    z = _template(spec, m, steps)
    return point_set_diameter(np.c_[z.real, z.imag])


def _spec_key(spec):
    return spec.with_depth(0)


class EdgeSubarc:
    """The limit subarc spanned by one edge of step ``step``.

    All edges of a step are congruent, so the object stands for any of them.
    """

    def __init__(self, spec, step, *, block_pieces=BLOCK_PIECES, max_elements=MAX_ELEMENTS):
        self.spec = _spec_key(spec)
        self.step = check_int(step, "step", 0)
        self.block_pieces = check_int(block_pieces, "block_pieces", 1)
        self.max_elements = check_int(max_elements, "max_elements", 4)
        self.chord = edge_length_analytic(self.spec, self.step)
        self.diameter = diameter_ratio(self.spec, self.step) * self.chord
        self.start, self.end = 0.0, 1.0

    def __repr__(self):
        return f"EdgeSubarc(step={self.step}, diam={self.diameter:.6g})"

    def level_diameter(self, m):
        return diameter_ratio(self.spec, m) * edge_length_analytic(self.spec, m)

    def _levels(self, tau):
        b = self.step
        while self.level_diameter(b + 1) >= self.block_pieces * tau:
            b += 1
        e = b
        while self.level_diameter(e) > tau / ELEMENT_FRACTION:
            e += 1
        if 4 ** (e - b) > self.max_elements:
            raise ResolutionError(f"block needs {4 ** (e - b)} elements (limit {self.max_elements})")
        return b, e

    def _elements(self, b, e):
        """Decorated elements of one block in block-chord units, shape (K, h, 2)."""
        z = _template(self.spec, b, e - b)
        hull = template_hull(self.spec, e)
        a, c = z[:-1, None], z[1:, None]
        w = a + (c - a) * hull[None, :]
        return np.stack([w.real, w.imag], axis=-1)

    def _greedy(self, P, T):
        """Greedy runs of elements with union diameter at most T."""
        K = len(P)
        cuts, diams = [0], []
        i = 0
        guess = 4

        def g(i, j):
            return point_set_diameter(P[i:j + 1].reshape(-1, 2))

        while i < K:
            lo, hi = i - 1, None
            step = max(1, guess // 2)
            while True:
                j = min(lo + step, K - 1)
                if g(i, j) <= T:
                    lo = j
                    if j == K - 1:
                        break
                    step *= 2
                else:
                    hi = j
                    break
            if hi is not None:
                while hi - lo > 1:
                    mid = (lo + hi) // 2
                    if g(i, mid) <= T:
                        lo = mid
                    else:
                        hi = mid
            if lo < i:
                raise ResolutionError("an element exceeds the piece size")
            diams.append(g(i, lo))
            cuts.append(lo + 1)
            guess = lo + 1 - i
            i = lo + 1
        return cuts, diams

    def _block_partition(self, P, lo_abs, hi_abs, scale):
        lo, hi = lo_abs / scale, hi_abs / scale
        for t in t_sequence():
            T = lo + (hi - lo) * (2 * t - 1)
            cuts, d = self._greedy(P, T)
            if min(d) >= lo and max(d) <= hi:
                return cuts, d
        if len(d) < 2:
            raise PartitionError("block too small for the requested band")
        # merge the remainder into the last piece, rebalance if too large
        start = cuts[-3]
        merged = point_set_diameter(P[start:].reshape(-1, 2))
        if merged <= hi:
            cuts = cuts[:-2] + [cuts[-1]]
            d = d[:-2] + [merged]
        else:
            best = None
            for c in range(start + 1, len(P)):
                left = point_set_diameter(P[start:c].reshape(-1, 2))
                right = point_set_diameter(P[c:].reshape(-1, 2))
                if best is None or abs(left - right) < best[0]:
                    best = (abs(left - right), c, left, right)
            _, c, left, right = best
            cuts = cuts[:-2] + [c, cuts[-1]]
            d = d[:-2] + [left, right]
        if min(d) < lo * (1 - 1e-12) or max(d) > hi * (1 + 1e-12):
            raise PartitionError("no element-aligned cut keeps the last pieces in band")
        return cuts, d

    def delta_partition_summary(self, delta):
        """Summary of a delta-partition of this edge subarc (tiled by congruent blocks)."""
        delta = check_fraction(delta, "delta")
        tau = delta * self.diameter
        b, e = self._levels(tau)
        scale = edge_length_analytic(self.spec, b)
        while True:
            try:
                _, d = self._block_partition(self._elements(b, e), 0.5 * tau, tau, scale)
                break
            except PartitionError:
                # finer elements give the rebalancing cut more room
                e += 1
                if 4 ** (e - b) > 4 * self.max_elements:
                    raise
        copies = 4 ** (b - self.step)
        d = np.asarray(d) * scale
        return PartitionSummary(copies * len(d), copies * float(np.sum(d)), float(d.min()), float(d.max()),
                                self.diameter, delta)

    def covering_count(self, size):
        """Greedy number of consecutive pieces of diameter at most ``size`` covering the arc."""
        size = check_positive(size, "size")
        if size >= self.diameter:
            return 1
        b, e = self._levels(size)
        P = self._elements(b, e)
        scale = edge_length_analytic(self.spec, b)
        cuts, _ = self._greedy(P, size / scale)
        return 4 ** (b - self.step) * (len(cuts) - 1)
