import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from domelab._validation import GeometryError
from domelab.curves import (
    ArcRef,
    PolyCurve,
    diameter,
    point_set_diameter,
    read_curve_csv,
    regular_polygon,
    smaller_diameter_subarc,
    write_curve_csv,
)
from oracles import both_subarc_diameters, brute_diameter

SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]


def test_square_basics():
    c = PolyCurve(SQUARE)
    assert c.n_vertices == 4 and c.n_segments == 4
    assert c.length == 4.0
    assert c.signed_area() == pytest.approx(1.0)
    assert c.diameter == pytest.approx(math.sqrt(2))
    assert c.is_simple()


def test_duplicate_closing_vertex_is_dropped():
    c = PolyCurve(SQUARE + [[0, 0]])
    assert c.n_vertices == 4


def test_repeated_vertex_rejected():
    with pytest.raises(GeometryError):
        PolyCurve([[0, 0], [1, 0], [1, 0], [0, 1]])


def test_vertices_are_read_only():
    c = PolyCurve(SQUARE)
    with pytest.raises(ValueError):
        c.vertices[0, 0] = 5.0


def test_bowtie_is_not_simple():
    with pytest.raises(GeometryError):
        PolyCurve([[0, 0], [1, 1], [1, 0], [0, 1]])


def test_point_at_wraps_on_closed_curves():
    c = PolyCurve(SQUARE)
    np.testing.assert_allclose(c.point_at(4.5), [0.5, 0.0])
    np.testing.assert_allclose(c.point_at(2.5), [0.5, 1.0])


def test_snap_rejects_far_points():
    c = PolyCurve(SQUARE)
    assert c.snap([0.5, 0.0]) == pytest.approx(0.5)
    with pytest.raises(GeometryError):
        c.snap([0.5, 0.5])


def test_open_curve_arc_params():
    c = PolyCurve([[0, 0], [1, 0], [2, 0]], closed=False)
    assert c.length == 2.0
    arc = c.arc(0.5, 1.5)
    np.testing.assert_allclose(arc.points(), [[0.5, 0], [1, 0], [1.5, 0]])


@given(st.integers(min_value=2, max_value=3000), st.integers(min_value=0, max_value=2 ** 31))
@settings(max_examples=40, deadline=None)
def test_point_set_diameter_matches_brute_force(n, seed):
    pts = np.random.default_rng(seed).normal(size=(n, 2))
    assert point_set_diameter(pts) == pytest.approx(brute_diameter(pts), rel=1e-12)


def test_point_set_diameter_collinear_and_repeated():
    pts = np.c_[np.linspace(0, 3, 200), np.zeros(200)]
    assert point_set_diameter(np.vstack([pts, pts])) == pytest.approx(3.0)


def test_diameter_pair_is_returned():
    pts = np.array([[0, 0], [3, 4], [1, 1]], float)
    d, (i, j) = point_set_diameter(pts, return_pair=True)
    assert d == 5.0 and {i, j} == {0, 1}


def test_degenerate_arc_diameter_raises():
    c = PolyCurve(SQUARE)
    with pytest.raises(Exception):
        diameter(ArcRef(c, 1.0, 1.0))


@pytest.mark.parametrize("seed", range(10))
def test_smaller_diameter_subarc_matches_both_arcs(seed):
    rng = np.random.default_rng(seed)
    n = 60
    r = 1 + 0.3 * rng.random(n)
    th = np.sort(rng.uniform(0, 2 * np.pi, n))
    v = np.c_[r * np.cos(th), r * np.sin(th)]
    c = PolyCurve(v)
    i, j = sorted(rng.choice(n, 2, replace=False))
    arc = smaller_diameter_subarc(c, v[i], v[j])
    fwd, back = both_subarc_diameters(v, i, j)
    assert diameter(arc) == pytest.approx(min(fwd, back), rel=1e-12)
    np.testing.assert_allclose(arc.points()[0], v[i])


def test_tie_returns_forward_arc():
    # antipodal vertices of a regular 360-gon: both arcs have the same diameter
    c = regular_polygon(360)
    x, y = c.vertices[0], c.vertices[180]
    arc = smaller_diameter_subarc(c, x, y)
    assert arc.forward
    assert arc.start == pytest.approx(0.0, abs=1e-12)


def test_arc_complement_covers_curve():
    c = regular_polygon(12)
    arc = c.arc(1.0, 2.5)
    comp = arc.complement()
    assert arc.length + comp.length == pytest.approx(c.length)


def test_csv_round_trip(tmp_path):
    c = regular_polygon(7, radius=2.5, phase=0.3)
    path = write_curve_csv(c, tmp_path / "c.csv")
    assert json.loads((tmp_path / "c.csv.json").read_text()) == {"closed": True}
    back = read_curve_csv(path)
    np.testing.assert_array_equal(back.vertices, c.vertices)
    assert back.closed
    assert path.read_bytes().count(b"\r") == 0


def test_regular_polygon_is_counter_clockwise():
    c = regular_polygon(5)
    assert c.signed_area() > 0
