import math

import numpy as np
import pytest
from sklearn.base import clone

from domelab._validation import DomelabError, GeometryError
from domelab.curves import PolyCurve, regular_polygon
from domelab.distance import SegmentIndex
from domelab.dome import (
    BOUNDARY,
    LOWER,
    UPPER,
    Ball,
    DomeSurface,
    HalfSpace,
    PlanarRegion,
    Whole,
    build_dome,
    drop_collinear,
    dyadic_radii,
    llc1,
    llc2,
    llc_scan,
    region_area,
    regularity_scan,
    square_piece,
)
from domelab.snowflake import SnowflakeSpec, generate
from oracles import cone_area, disk_dome_area

SQUARE = PolyCurve([[0, 0], [1, 0], [1, 1], [0, 1]])
DISK = regular_polygon(512)


@pytest.fixture(scope="module")
def cone():
    return build_dome(DISK, 1.0, 1 / 48)


@pytest.fixture(scope="module")
def roof():
    return build_dome(SQUARE, 1.0, 1 / 96)


@pytest.fixture(scope="module")
def steep():
    return build_dome(DISK, 0.5, 1 / 48)


@pytest.fixture(scope="module")
def flat():
    return build_dome(DISK, 2.0, 1 / 48)


def test_cone_area(cone):
    assert cone.total_area == pytest.approx(cone_area(), rel=0.01)


def test_roof_area(roof):
    assert roof.total_area == pytest.approx(2 * math.sqrt(2), rel=0.01)


def test_steep_disk_area_against_quadrature(steep):
    assert steep.total_area == pytest.approx(disk_dome_area(0.5), rel=0.015)


def test_flat_disk_area_against_quadrature(flat):
    assert flat.total_area == pytest.approx(disk_dome_area(2.0), rel=0.01)


@pytest.mark.parametrize("name", ["cone", "roof", "steep", "flat"])
def test_mesh_invariants(request, name):
    m = request.getfixturevalue(name)
    assert m.euler_characteristic == 2
    # every edge borders exactly two triangles
    f = m.triangles
    e = np.sort(np.vstack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
    _, count = np.unique(e, axis=0, return_counts=True)
    assert set(count) == {2}
    d = SegmentIndex(m.domain).distance(m.vertices[:, :2])
    np.testing.assert_allclose(np.abs(m.vertices[:, 2]), d ** m.alpha, atol=1e-6 * m.domain.diameter)
    up = m.vertices[m.sheet == UPPER]
    low = m.vertices[m.sheet == LOWER]
    np.testing.assert_array_equal(np.lexsort(up[:, :2].T), np.lexsort(low[:, :2].T))
    np.testing.assert_array_equal(up[:, :2], low[:, :2])
    np.testing.assert_array_equal(up[:, 2], -low[:, 2])
    assert np.all(m.vertices[m.sheet == BOUNDARY, 2] == 0)


def test_half_the_area_above_the_plane(steep):
    assert region_area(steep, HalfSpace([0, 0, 1])) == pytest.approx(steep.total_area / 2, rel=1e-12)


def test_whole_region_is_total_area(cone):
    assert region_area(cone, Whole()) == pytest.approx(cone.total_area, rel=1e-12)


def test_ball_on_roof_is_a_flat_disk(roof):
    # a 3-ball meets a plane in a disk of the same radius, whatever the tilt
    for r in (0.05, 0.1, 0.2):
        assert region_area(roof, Ball([0.5, 0.25, 0.25], r)) == pytest.approx(math.pi * r * r, rel=0.03)


def test_ball_areas_grow_with_radius(steep):
    c = [0.9, 0.0, 0.1 ** 0.5]
    areas = [region_area(steep, Ball(c, r)) for r in (0.05, 0.1, 0.2, 0.4)]
    assert all(a < b for a, b in zip(areas, areas[1:]))


def test_planar_region_on_upper_sheet(cone):
    a = region_area(cone, PlanarRegion([[0, 0], [2, 0], [2, 2], [0, 2]], UPPER))
    # the first quadrant holds a quarter of the upper cone
    assert a == pytest.approx(cone_area() / 8, rel=0.01)


def test_callable_predicate(cone):
    def inside(p):
        return p[..., 2] > 0.5

    # cone z > 1/2 is a cone over the disk of radius 1/2
    assert region_area(cone, inside) == pytest.approx(math.sqrt(2) * math.pi / 4, rel=0.01)


def test_preconditions():
    with pytest.raises(DomelabError):
        build_dome(SQUARE, 0.0, 1 / 96)
    with pytest.raises(DomelabError):
        build_dome(SQUARE, 1.0, 1 / 32)
    with pytest.raises(GeometryError):
        build_dome(PolyCurve([[0, 0], [1, 1], [1, 0], [0, 1]], validate=False), 1.0, 1 / 96)


def test_clockwise_domain_is_reoriented():
    m = build_dome(PolyCurve(SQUARE.vertices[::-1]), 1.0, 1 / 96)
    assert m.total_area == pytest.approx(2 * math.sqrt(2), rel=0.01)


def test_drop_collinear_keeps_the_point_set():
    c = PolyCurve([[0, 0], [0.5, 0], [1, 0], [1, 1], [0, 1]])
    assert drop_collinear(c).n_vertices == 4


def test_snowflake_dome_is_a_sphere():
    c = generate(SnowflakeSpec(p=0.3, depth=3, normalization="unit_side"))
    m = build_dome(c, 0.5, c.diameter / 80)
    assert m.euler_characteristic == 2


def test_obj_export(tmp_path, cone):
    path = cone.to_obj(tmp_path / "d.obj")
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    v = [ln for ln in lines if ln.startswith("v ")]
    f = [ln for ln in lines if ln.startswith("f ")]
    assert len(v) == len(cone.vertices) and len(f) == len(cone.triangles)
    idx = np.array([[int(x) for x in ln.split()[1:]] for ln in f])
    assert idx.min() == 1 and idx.max() == len(cone.vertices)


def test_regularity_on_cone(cone):
    rep = regularity_scan(cone, per_stratum=4, eps0=0.25)
    assert 1 <= rep.constant < 5
    assert {r["stratum"] for r in rep.rows} == {"interior", "near-boundary", "on-boundary"}
    assert rep.to_csv().splitlines()[0] == "center_id,stratum,r,area,ratio"
    assert max(rep.per_radius.values()) == rep.constant


def test_small_radii_are_flagged(cone):
    rep = regularity_scan(cone, centers=[0], radii=[0.25, cone.h], eps0=0.25)
    assert [r["flagged"] for r in rep.rows] == [False, True]
    assert rep.constant == rep.rows[0]["ratio"]


def test_dyadic_radii_bounds(cone):
    radii = dyadic_radii(cone)
    assert radii[0] == 0.5 and radii[-1] >= 4 * cone.h
    assert all(a == 2 * b for a, b in zip(radii, radii[1:]))


def test_llc_is_one_on_a_smooth_patch(cone):
    x = cone.lift([[0.5, 0.0]])[0]
    assert llc1(cone, x, 0.1) == (1.0, False)
    assert llc2(cone, x, 0.1) == (1.0, False)


def test_llc_separates_cusp_from_steep_edge(steep, flat):
    hi = llc_scan(flat, n_centers=4)
    lo = llc_scan(steep, n_centers=4)
    assert hi.capped and hi.lambda1 >= 100
    assert not lo.capped and lo.lambda1 < 20
    assert lo.to_csv().splitlines()[0] == "sample_id,r,lambda1,lambda2"


def test_square_piece_on_cone(cone):
    th = math.asin(0.375)
    x1 = 0.8 * np.array([math.cos(-th), math.sin(-th)])
    y1 = 0.8 * np.array([math.cos(th), math.sin(th)])
    sp = square_piece(cone, x1, y1, 0.2, 0.1)
    # planar annular sector between radii 0.8 and 0.9 spanning angle 2 th, lifted at slope 1
    expected = math.sqrt(2) * th * (0.9 ** 2 - 0.8 ** 2)
    assert sp.area == pytest.approx(expected, rel=0.01)
    assert all(sp.checks.values())
    assert sp.c0 == pytest.approx(1.0, abs=1e-3)
    np.testing.assert_allclose(np.hypot(*sp.x2[:2]), 0.9, atol=1e-3)
    assert sp.ratio > 0


def test_square_piece_rejects_bad_levels(cone):
    with pytest.raises(DomelabError):
        square_piece(cone, [0.8, 0], [0, 0.8], 0.2, 0.2)
    with pytest.raises(GeometryError, match=r"^\(i\)"):
        square_piece(cone, [0.5, 0], [0, 0.5], 0.2, 0.1)
    th = math.asin(0.375)
    x1 = 0.8 * np.array([math.cos(-th), math.sin(-th)])
    y1 = 0.8 * np.array([math.cos(th), math.sin(th)])
    with pytest.raises(GeometryError, match=r"^\(iii\)"):
        square_piece(cone, x1, y1, 0.2, 0.19)
    assert not square_piece(cone, x1, y1, 0.2, 0.19, strict=False).checks["iii"]


def test_estimator():
    est = DomeSurface(alpha=1.0, h=1 / 96)
    assert clone(est).get_params()["h"] == 1 / 96
    est.fit(SQUARE)
    assert est.area_ == pytest.approx(2 * math.sqrt(2), rel=0.01)
    np.testing.assert_allclose(est.transform([[0.5, 0.5], [0.5, 0.1]])[:, 2], [0.5, 0.1])
