"""Homogeneous (N, p) snowflakes.

Start from a regular N-gon (counter-clockwise) and, at every step, replace
every edge by the same similarity copy of one of two four-segment arcs:

* ``bump``: a symmetric tent with four sides of length ``p * l`` and apex
  height ``l * sqrt(p - 1/4)`` on the outer side of the edge;
* ``flat``: four collinear quarters.

A schedule decides which arc step ``k`` (k >= 1) uses.  Because every edge of
a step is replaced identically, all edges of ``S_k`` have the same length and
every edge subarc is congruent to every other of the same step.  Lengths are
therefore available from an O(k) recursion.
"""

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._validation import BudgetError, ConfigError, DomelabError, check_fraction, check_int
from .curves import ArcRef, PolyCurve

DEFAULT_MAX_VERTICES = 1 << 24
SCHEDULE_KINDS = ("powers_of_ten", "squares", "constant_bump", "constant_flat", "explicit")
NORMALIZATIONS = ("diameter_half", "unit_side", "unit_perimeter")


@dataclass(frozen=True)
class Schedule:
    """Which steps use the bump arc."""

    kind: str
    steps: tuple = ()

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise DomelabError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "explicit":
            steps = tuple(sorted({check_int(s, "schedule step", 1) for s in self.steps}))
            object.__setattr__(self, "steps", steps)

    def is_bump(self, k):
        if k < 1:
            return False
        if self.kind == "constant_bump":
            return True
        if self.kind == "constant_flat":
            return False
        if self.kind == "squares":
            return math.isqrt(k) ** 2 == k
        if self.kind == "powers_of_ten":
            if k < 10:
                return False
            while k % 10 == 0:
                k //= 10
            return k == 1
        return k in self.steps

    def bump_count(self, k):
        """Number of bump steps among 1..k."""
        if k < 1:
            return 0
        if self.kind == "constant_bump":
            return k
        if self.kind == "constant_flat":
            return 0
        if self.kind == "squares":
            return math.isqrt(k)
        if self.kind == "powers_of_ten":
            count, q = 0, 10
            while q <= k:
                count, q = count + 1, q * 10
            return count
        return sum(1 for s in self.steps if s <= k)

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "explicit":
            d["steps"] = list(self.steps)
        return d

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, str):
            return cls(d)
        return cls(d["kind"], tuple(d.get("steps", ())))


@dataclass(frozen=True)
class SnowflakeSpec:
    """Parameters of a homogeneous snowflake truncation."""

    n_sides: int = 4
    p: float = 1 / 3
    schedule: Schedule = field(default_factory=lambda: Schedule("constant_bump"))
    depth: int = 4
    normalization: str = "diameter_half"

    def __post_init__(self):
        check_int(self.n_sides, "n_sides", 4)
        check_fraction(self.p, "p", 0.25, 0.5)
        check_int(self.depth, "depth", 0)
        if isinstance(self.schedule, (str, dict)):
            object.__setattr__(self, "schedule", Schedule.from_dict(self.schedule))
        if self.normalization not in NORMALIZATIONS:
            raise DomelabError(f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}")

    def with_depth(self, depth):
        return SnowflakeSpec(self.n_sides, self.p, self.schedule, depth, self.normalization)

    @property
    def radius(self):
        N = self.n_sides
        if self.normalization == "diameter_half":
            return 0.25 / math.sin((N // 2) * math.pi / N)
        if self.normalization == "unit_side":
            return 1.0 / (2 * math.sin(math.pi / N))
        return 1.0 / (2 * N * math.sin(math.pi / N))

    @property
    def side0(self):
        return 2 * self.radius * math.sin(math.pi / self.n_sides)

    def step_factor(self, k):
        return self.p if self.schedule.is_bump(k) else 0.25

    def to_dict(self):
        return {
            "n_sides": self.n_sides,
            "p": self.p,
            "schedule": self.schedule.to_dict(),
            "depth": self.depth,
            "normalization": self.normalization,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                n_sides=d.get("n_sides", 4),
                p=d["p"],
                schedule=Schedule.from_dict(d.get("schedule", {"kind": "constant_bump"})),
                depth=d.get("depth", 4),
                normalization=d.get("normalization", "diameter_half"),
            )
        except KeyError as exc:
            raise ConfigError(exc.args[0], "missing required field") from None
        except DomelabError as exc:
            raise ConfigError("snowflake", str(exc)) from None

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


PRECISIONS = {"double": np.complex128, "extended": np.clongdouble}


def _generator_offsets(kind, p, dtype=np.complex128):
    if kind == "flat":
        return np.array([0.0, 0.25, 0.5, 0.75], dtype=dtype)
    if kind != "bump":
        raise DomelabError(f"generator kind must be 'bump' or 'flat', got {kind!r}")
    real = np.empty(0, dtype=dtype).real.dtype.type
    h = np.sqrt(max(real(p) - real(0.25), real(0)))
    # apex to the right of the direction of travel: outward for a CCW polygon
    out = np.array([0.0, p, 0.5, 1.0 - p], dtype=dtype)
    out[2] -= 1j * h
    return out


def generator_arc(kind, p, chord=((0.0, 0.0), (1.0, 0.0))):
    """Five-point polyline replacing ``chord`` (apex on the right of a -> b)."""
    a = complex(*chord[0])
    b = complex(*chord[1])
    if a == b:
        raise DomelabError("generator chord is degenerate")
    if kind == "bump":
        check_fraction(p, "p", 0.25, 0.5, closed=True)
    w = np.append(_generator_offsets(kind, p), 1.0)
    z = a + (b - a) * w
    return np.c_[z.real, z.imag]


def refine(z, closed, kinds, p):
    """Apply generator steps ``kinds`` to the complex vertex array ``z`` (in its own precision)."""
    for kind in kinds:
        off = _generator_offsets(kind, p, z.dtype)
        if closed:
            a, b = z, np.roll(z, -1)
        else:
            a, b = z[:-1], z[1:]
        d = b - a
        out = np.empty(4 * len(a) + (0 if closed else 1), dtype=z.dtype)
        for j in range(4):
            out[j:4 * len(a):4] = a + off[j] * d
        if not closed:
            out[-1] = z[-1]
        z = out
    return z


def initial_polygon(spec):
    N = spec.n_sides
    theta = -math.pi / 2 - math.pi / N + 2 * math.pi * np.arange(N) / N
    return spec.radius * np.exp(1j * theta)


def step_kinds(spec, first, last):
    return ["bump" if spec.schedule.is_bump(k) else "flat" for k in range(first, last + 1)]


def _check_budget(count, max_vertices):
    if count > max_vertices:
        raise BudgetError(
            f"{count} vertices exceed the budget of {max_vertices}; lower the depth or raise max_vertices"
        )


def generate(spec, max_vertices=DEFAULT_MAX_VERTICES, validate=True):
    """The closed truncation ``S_depth`` as a :class:`PolyCurve`.

    The curve's ``resolution`` is set to its edge length.
    """
    _check_budget(spec.n_sides * 4 ** spec.depth, max_vertices)
    z = refine(initial_polygon(spec), True, step_kinds(spec, 1, spec.depth), spec.p)
    return PolyCurve(np.c_[z.real, z.imag], closed=True, resolution=edge_length_analytic(spec, spec.depth),
                     validate=validate)


def generate_side(spec, side=1, max_vertices=DEFAULT_MAX_VERTICES, precision="double"):
    """Vertices of the arc grown from one side of ``S_0`` (open, 4**depth + 1 points).

    ``precision="extended"`` runs the refinement in long double.  Double
    coordinates of size 1 hold deep edges (about 4**-depth long) only to a
    relative accuracy near ``4**depth * 1e-16``.
    """
    if precision not in PRECISIONS:
        raise DomelabError(f"precision must be one of {sorted(PRECISIONS)}, got {precision!r}")
    _check_budget(4 ** spec.depth + 1, max_vertices)
    z0 = initial_polygon(spec)
    i = side - 1
    z = np.array([z0[i], z0[(i + 1) % spec.n_sides]], dtype=PRECISIONS[precision])
    z = refine(z, False, step_kinds(spec, 1, spec.depth), spec.p)
    return np.c_[z.real, z.imag]


def log_edge_length(spec, n):
    """Natural log of the common edge length of ``S_n``."""
    b = spec.schedule.bump_count(n)
    return math.log(spec.side0) + b * math.log(spec.p) - (n - b) * math.log(4.0)


def edge_length_analytic(spec, n):
    """Common edge length of ``S_n``: side0 times p per bump step and 1/4 per flat step."""
    check_int(n, "step", 0)
    return math.exp(log_edge_length(spec, n))


def perimeter_analytic(spec, n):
    return spec.n_sides * 4 ** n * edge_length_analytic(spec, n)


def k0(spec, n, kmax=None):
    """Least k >= 1 with every edge of ``S_{n+k}`` no longer than (edge length of ``S_n``) squared."""
    target = 2 * log_edge_length(spec, n)
    kmax = kmax if kmax is not None else 64 * (n + 1) + 64
    for k in range(1, kmax + 1):
        if log_edge_length(spec, n + k) <= target:
            return k
    raise DomelabError(f"no k <= {kmax} satisfies the squared-length condition at step {n}")


@dataclass(frozen=True)
class EdgeAddress:
    """Edge word: a side index in 1..N followed by child digits in 1..4."""

    word: tuple

    def __post_init__(self):
        w = tuple(int(x) for x in self.word)
        if not w:
            raise DomelabError("edge address needs at least the side index")
        if any(d < 1 or d > 4 for d in w[1:]):
            raise DomelabError(f"child digits must lie in 1..4, got {w}")
        object.__setattr__(self, "word", w)

    @property
    def step(self):
        return len(self.word) - 1

    def index(self, n_sides):
        """Position of the edge in the counter-clockwise edge list of its step."""
        if not 1 <= self.word[0] <= n_sides:
            raise DomelabError(f"side index must lie in 1..{n_sides}, got {self.word[0]}")
        idx = self.word[0] - 1
        for d in self.word[1:]:
            idx = 4 * idx + (d - 1)
        return idx


def subarc_of_edge(spec, address, total_depth=None, curve=None):
    """ArcRef on the depth-``total_depth`` truncation spanning the descendants of an edge."""
    if not isinstance(address, EdgeAddress):
        address = EdgeAddress(address)
    d = spec.depth if total_depth is None else total_depth
    if address.step > d:
        raise DomelabError(f"address of step {address.step} is deeper than the truncation depth {d}")
    idx = address.index(spec.n_sides)
    if curve is None:
        curve = generate(spec.with_depth(d))
    per = 4 ** (d - address.step)
    if curve.n_segments != spec.n_sides * 4 ** d:
        raise DomelabError("curve depth does not match SnowflakeSpec.depth")
    cum = curve.cumulative_length
    return ArcRef(curve, float(cum[idx * per]), float(cum[(idx + 1) * per]))


def edge_endpoints(spec, address):
    """Endpoints of edge ``address`` at its own step, from an O(step) descent."""
    if not isinstance(address, EdgeAddress):
        address = EdgeAddress(address)
    z0 = initial_polygon(spec)
    i = address.index(spec.n_sides) // 4 ** address.step
    a, b = z0[i], z0[(i + 1) % spec.n_sides]
    for k, digit in enumerate(address.word[1:], start=1):
        w = np.append(_generator_offsets("bump" if spec.schedule.is_bump(k) else "flat", spec.p), 1.0)
        a, b = a + (b - a) * w[digit - 1], a + (b - a) * w[digit]
    return np.array([a.real, a.imag]), np.array([b.real, b.imag])


@lru_cache(maxsize=256)
def _chord_template(p, kinds):
    z = refine(np.array([0.0, 1.0], dtype=np.complex128), False, list(kinds), p)
    return z
