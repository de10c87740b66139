import math

import numpy as np
import pytest

from domelab._validation import PartitionError, ResolutionError
from domelab.curves import PolyCurve, regular_polygon
from domelab.partition import (
    DeltaPartitioner,
    Partition,
    build_delta_partition,
    covering_constant,
    covering_count,
    dyadic_subarcs,
    m_index,
    refine,
    t_sequence,
    weak_chord_arc_scan,
)
from domelab.snowflake import SnowflakeSpec, generate
from oracles import brute_diameter, greedy_cover_count

SEGMENT = PolyCurve([[0, 0], [1, 0]], closed=False)

# frozen: M of a 0.01-partition of the unit-radius 2048-gon (close to pi = perimeter / diameter)
POLYGON_M = 3.1415628


def random_star(rng, n=None):
    n = n or int(rng.integers(8, 80))
    th = np.sort(rng.uniform(0, 2 * np.pi, n))
    th += np.arange(n) * 1e-9  # keep angles distinct
    r = 1 + 0.5 * rng.random(n)
    return PolyCurve(np.c_[r * np.cos(th), r * np.sin(th)])


def test_segment_quarter_partition():
    part = build_delta_partition(SEGMENT.whole(), 0.25)
    d = part.diameters
    assert np.all((d >= 0.125 - 1e-15) & (d <= 0.25 + 1e-15))
    assert len(part) == 5
    assert m_index(SEGMENT.whole(), part) == pytest.approx(1.0)


def test_polygon_m_index_near_pi():
    c = regular_polygon(2048)
    s = build_delta_partition(c.whole(), 0.01).summary()
    assert s.band_ok()
    assert s.m_index == pytest.approx(POLYGON_M, rel=1e-6)


def test_piece_diameters_match_brute_force():
    c = generate(SnowflakeSpec(p=0.4, depth=4))
    part = build_delta_partition(c.whole(), 0.1)
    for piece, d in zip(part.pieces, part.diameters):
        assert d == pytest.approx(brute_diameter(piece.points()), rel=1e-12)


def test_reverse_partition_is_independent():
    c = generate(SnowflakeSpec(p=0.4, depth=5))
    fwd = build_delta_partition(c.whole(), 0.05)
    rev = build_delta_partition(c.whole(), 0.05, reverse=True)
    assert fwd.summary().band_ok() and rev.summary().band_ok()
    assert not np.array_equal(fwd.breaks, rev.breaks)


def test_resolution_guard():
    c = generate(SnowflakeSpec(p=0.4, depth=2))
    with pytest.raises(ResolutionError):
        build_delta_partition(c.whole(), 1e-3)


def test_partition_validation():
    arc = SEGMENT.whole()
    with pytest.raises(PartitionError):
        Partition(arc, [0.0, 0.6, 0.5, 1.0])
    with pytest.raises(PartitionError):
        Partition(arc, [0.0, 0.5, 0.9])


def test_t_sequence_starts_with_three_quarters():
    seq = list(t_sequence())
    assert seq[0] == 0.75 and len(seq) == 8
    assert all(0.5 < t <= 1 for t in seq)


@pytest.mark.parametrize("seed", range(200))
def test_partition_sandwich_and_refinement(seed):
    rng = np.random.default_rng(seed)
    c = random_star(rng)
    delta = float(rng.uniform(0.05, 0.6))
    part = build_delta_partition(c.whole(), delta)
    s = part.summary()
    assert s.band_ok()
    assert 0.5 * s.size * delta * (1 - 1e-12) <= s.m_index <= s.size * delta * (1 + 1e-12)
    subs = [build_delta_partition(p, float(rng.uniform(0.2, 0.9))) for p in part.pieces]
    fine = refine(part, subs)
    assert np.sum(fine.diameters) >= np.sum(part.diameters) * (1 - 1e-12)


def test_refine_rejects_mismatched_pieces():
    part = build_delta_partition(SEGMENT.whole(), 0.5)
    with pytest.raises(PartitionError):
        refine(part, [part])


def test_covering_constant_stable_across_depths():
    vals = []
    for depth in (5, 6):
        c = generate(SnowflakeSpec(p=0.3, depth=depth))
        vals.append(max(covering_constant(build_delta_partition(c.whole(), d).summary())
                        for d in (0.25, 0.125)))
    assert vals[1] == pytest.approx(vals[0], rel=1e-3)


def test_covering_count_matches_oracle():
    c = regular_polygon(96)
    arc = c.arc(0.0, 2.0)
    pts = arc.points()
    assert covering_count(arc, 0.3) <= greedy_cover_count(pts, 0.3)


def test_weak_chord_arc_scan_on_circle():
    rep = weak_chord_arc_scan(regular_polygon(2048), m0=10.0, per_level=3, levels=3)
    assert rep.passed
    assert 1.0 <= rep.max_index <= math.pi / 2 + 0.05
    assert rep.to_csv().splitlines()[0] == "subarc_id,start,end,diam,pieces,m_index,pass"


def test_wca_scan_flags_unresolved_rows():
    spec = SnowflakeSpec(p=0.4, depth=3)
    subs = dyadic_subarcs(generate(spec), per_level=1, levels=6)
    rep = weak_chord_arc_scan(generate(spec), subarcs=subs)
    assert any(r.flag for r in rep.rows)


def test_estimator():
    est = DeltaPartitioner(delta=0.25).fit(SEGMENT)
    assert est.m_index_ == pytest.approx(1.0)
    assert est.transform()[0] == 0.0
    assert est.get_params() == {"delta": 0.25, "reverse": False}
