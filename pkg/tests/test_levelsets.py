import math

import numpy as np
import pytest
import shapely

from domelab._validation import DomelabError, GeometryError
from domelab.curves import PolyCurve, regular_polygon
from domelab.levelsets import (
    build_distance_field,
    distant_level_chord_arc,
    distant_level_set,
    extract_level_curve,
    level_grid,
    level_subarc,
    lqc_scan,
    nesting_holds,
)
from domelab.snowflake import SnowflakeSpec, generate
from oracles import stadium_chord_arc

SQUARE = PolyCurve([[0, 0], [1, 0], [1, 1], [0, 1]])
# two unit squares joined by a thin neck of width 0.1
DUMBBELL = PolyCurve([[0, 0], [1, 0], [1, 0.45], [1.5, 0.45], [1.5, 0], [2.5, 0], [2.5, 1],
                      [1.5, 1], [1.5, 0.55], [1, 0.55], [1, 1], [0, 1]])


@pytest.fixture(scope="module")
def square_field():
    return build_distance_field(SQUARE, 1 / 200)


@pytest.fixture(scope="module")
def disk():
    c = regular_polygon(2048)
    return c, build_distance_field(c, 1 / 128)


def test_square_level_diameter(square_field):
    lc = extract_level_curve(square_field, 0.1)
    assert lc.is_jordan
    assert lc.curve.diameter == pytest.approx(0.8 * math.sqrt(2), abs=1e-3)


def test_square_level_against_negative_buffer(square_field):
    for eps in (0.05, 0.2, 0.35):
        ref = shapely.Polygon(SQUARE.vertices).buffer(-eps, join_style="mitre")
        got = shapely.Polygon(extract_level_curve(square_field, eps).curve.vertices)
        assert got.symmetric_difference(ref).area < 1e-5


def test_disk_level_radius(disk):
    c, f = disk
    r = np.hypot(*extract_level_curve(f, 0.25).curve.vertices.T)
    # the polygon's inradius is cos(pi/2048) instead of 1
    assert np.abs(r - 0.75).max() < 1e-3


def test_level_vertices_sit_on_level(disk):
    c, f = disk
    v = extract_level_curve(f, 0.4).curve.vertices
    np.testing.assert_allclose(f.value_at(v), 0.4, atol=1e-6 * c.diameter)


def test_empty_above_inradius(square_field):
    assert extract_level_curve(square_field, 0.6).is_empty


def test_dumbbell_splits_past_the_neck():
    f = build_distance_field(DUMBBELL, 1 / 128)
    assert extract_level_curve(f, 0.03).is_jordan
    lc = extract_level_curve(f, 0.1)
    assert len(lc.components) == 2
    with pytest.raises(GeometryError):
        lc.curve
    rep = lqc_scan(DUMBBELL, 0.1, levels=3, field=f)
    # just below the neck half-width the level is one pinched curve
    first = rep.violations[0]
    assert first["components"] == 1 and first["two_point_constant"] > 10
    assert [v["components"] for v in rep.violations[1:]] == [2, 2]
    assert rep.eps0_passing == 0.0


def test_lqc_scan_on_square(square_field):
    rep = lqc_scan(SQUARE, 0.2, levels=3, field=square_field)
    assert not rep.violations
    assert rep.eps0_passing == pytest.approx(0.2)
    # every inner square has the square's two-point constant
    assert rep.max_constant == pytest.approx(1.1441228056353686, rel=1e-3)
    assert rep.to_csv().splitlines()[0] == "epsilon,components,two_point_constant"


def test_level_grid_is_geometric():
    assert level_grid(0.4, 3) == pytest.approx([0.1, 0.2, 0.4])


def test_field_spacing_guard():
    with pytest.raises(DomelabError):
        build_distance_field(SQUARE, 0.1)


def test_level_subarc_bottom_side(square_field):
    sigma = SQUARE.arc(0.0, 1.0)
    r = level_subarc(SQUARE, sigma, 0.1, field=square_field)
    assert r.connected and not r.is_empty
    np.testing.assert_allclose(r.points[:, 1], 0.1, atol=1e-6)


def test_level_subarc_corner(square_field):
    sigma = SQUARE.arc(0.5, 1.5)
    r = level_subarc(SQUARE, sigma, 0.1, field=square_field)
    assert r.connected
    assert r.points[:, 0].max() == pytest.approx(0.9, abs=1e-6)
    assert r.points[:, 1].min() == pytest.approx(0.1, abs=1e-6)


@pytest.fixture(scope="module")
def snowflake_field():
    c = generate(SnowflakeSpec(p=0.3, depth=4, normalization="unit_side"))
    return c, build_distance_field(c, 2.0 ** -10)


@pytest.mark.parametrize("eps", [2.0 ** -6, 2.0 ** -8])
def test_level_subarc_snowflake(snowflake_field, eps):
    c, f = snowflake_field
    lc = extract_level_curve(f, eps)
    rng = np.random.default_rng(7)
    for _ in range(10):
        a = rng.uniform(0, c.length)
        r = level_subarc(c, c.arc(a, a + rng.uniform(0.05, 0.5) * c.length), eps, level=lc, field=f)
        assert r.connected


def test_nesting(snowflake_field):
    _, f = snowflake_field
    assert nesting_holds(f, 2.0 ** -8, 2.0 ** -6)
    assert nesting_holds(build_distance_field(DUMBBELL, 1 / 128), 0.03, 0.1)


def test_level_of_level_on_convex_fixture(square_field):
    inner = extract_level_curve(square_field, 0.1).curve
    f2 = build_distance_field(inner, 1 / 200)
    a = shapely.Polygon(extract_level_curve(f2, 0.15).curve.vertices)
    b = shapely.Polygon(extract_level_curve(square_field, 0.25).curve.vertices)
    assert a.symmetric_difference(b).area < 1e-5


def test_distant_level_of_segment_is_stadium():
    seg = PolyCurve([[0, 0], [1, 0]], closed=False)
    got = distant_level_chord_arc(seg, 3.1, n_rays=4096)
    assert got == pytest.approx(stadium_chord_arc(3.1), rel=1e-3)


def test_distant_level_of_tiny_arc_is_circle():
    arc = PolyCurve([[0, 0], [1e-6, 0], [1e-6, 1e-6]], closed=False)
    assert distant_level_chord_arc(arc, 1.0, n_rays=4096) == pytest.approx(math.pi / 2, rel=1e-3)
    c = distant_level_set(arc, 1.0)
    assert c.closed and c.n_vertices == 1024


def test_distant_level_precondition():
    seg = PolyCurve([[0, 0], [1, 0]], closed=False)
    with pytest.raises(DomelabError):
        distant_level_set(seg, 2.9)


def test_distant_level_constants_share_a_bound():
    c = generate(SnowflakeSpec(p=0.4, depth=5))
    rng = np.random.default_rng(3)
    vals = []
    for _ in range(10):
        a = rng.uniform(0, c.length)
        sigma = c.arc(a, a + rng.uniform(0.02, 0.6) * c.length)
        vals.append(distant_level_chord_arc(sigma, 3.05 * sigma.to_curve().diameter, n_rays=512))
    assert max(vals) < 2.0
