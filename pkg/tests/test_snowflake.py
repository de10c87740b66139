import json
import math

import numpy as np
import pytest

from domelab._validation import BudgetError, ConfigError, DomelabError
from domelab.snowflake import (
    EdgeAddress,
    Schedule,
    SnowflakeSpec,
    edge_endpoints,
    edge_length_analytic,
    generate,
    generate_side,
    generator_arc,
    k0,
    perimeter_analytic,
    subarc_of_edge,
)


def test_schedules():
    assert [k for k in range(1, 200) if Schedule("powers_of_ten").is_bump(k)] == [10, 100]
    assert [k for k in range(1, 30) if Schedule("squares").is_bump(k)] == [1, 4, 9, 16, 25]
    assert Schedule("explicit", (3, 1)).steps == (1, 3)
    assert Schedule("squares").bump_count(24) == 4
    assert Schedule("powers_of_ten").bump_count(1000) == 3
    assert not Schedule("constant_flat").is_bump(5)


def test_unknown_schedule_rejected():
    with pytest.raises(DomelabError):
        Schedule("fibonacci")


def test_spec_validation():
    with pytest.raises(DomelabError):
        SnowflakeSpec(p=0.6)
    with pytest.raises(DomelabError):
        SnowflakeSpec(n_sides=3)
    with pytest.raises(DomelabError):
        SnowflakeSpec(normalization="unit_area")


def test_spec_json_round_trip():
    spec = SnowflakeSpec(n_sides=6, p=0.3, schedule=Schedule("explicit", (2, 5)), depth=3, normalization="unit_side")
    back = SnowflakeSpec.from_json(json.dumps(spec.to_dict()))
    assert back == spec


def test_spec_missing_p_is_config_error():
    with pytest.raises(ConfigError) as exc:
        SnowflakeSpec.from_dict({"depth": 3})
    assert exc.value.field == "p"


def test_generator_arc_shape():
    bump = generator_arc("bump", 1 / 3)
    seg = np.hypot(*np.diff(bump, axis=0).T)
    np.testing.assert_allclose(seg, 1 / 3 * np.ones(4) * [1, 1, 1, 1], rtol=1e-12)
    np.testing.assert_allclose(bump[[0, -1]], [[0, 0], [1, 0]])
    assert bump[2, 1] < 0  # apex on the right of the chord
    flat = generator_arc("flat", 0.4)
    np.testing.assert_allclose(flat[:, 1], 0)


def test_bump_at_quarter_is_flat():
    np.testing.assert_allclose(generator_arc("bump", 0.25), generator_arc("flat", 0.25), atol=1e-15)


@pytest.mark.parametrize("norm, check", [
    ("diameter_half", lambda c: c.diameter == pytest.approx(0.5)),
    ("unit_side", lambda c: c.length == pytest.approx(4.0)),
    ("unit_perimeter", lambda c: c.length == pytest.approx(1.0)),
])
def test_initial_normalization(norm, check):
    assert check(generate(SnowflakeSpec(p=0.3, depth=0, normalization=norm)))


def test_vertex_count_and_simplicity():
    spec = SnowflakeSpec(n_sides=5, p=0.45, depth=4)
    c = generate(spec)
    assert c.n_vertices == 5 * 4 ** 4
    assert c.is_simple()
    assert c.signed_area() > 0


def test_bumps_point_outward():
    c0 = generate(SnowflakeSpec(p=0.4, depth=0))
    c1 = generate(SnowflakeSpec(p=0.4, depth=1))
    assert abs(c1.signed_area()) > abs(c0.signed_area())


def test_perimeter_matches_analytic():
    for spec in (SnowflakeSpec(p=0.3, depth=6), SnowflakeSpec(p=0.45, schedule="squares", depth=7)):
        c = generate(spec)
        assert c.length == pytest.approx(perimeter_analytic(spec, spec.depth), rel=1e-11)


def test_max_vertices_guard():
    with pytest.raises(BudgetError):
        generate(SnowflakeSpec(depth=9), max_vertices=1000)


def test_generate_side_is_one_quarter():
    spec = SnowflakeSpec(p=0.35, depth=3)
    side = generate_side(spec, 1)
    c = generate(spec)
    np.testing.assert_allclose(side[:-1], c.vertices[: 4 ** 3])


def test_edge_address_and_endpoints():
    spec = SnowflakeSpec(p=0.4, depth=3)
    addr = EdgeAddress((2, 3, 1))
    assert addr.step == 2
    assert addr.index(4) == (1 * 4 + 2) * 4 + 0
    a, b = edge_endpoints(spec, addr)
    c = generate(spec.with_depth(2))
    i = addr.index(4)
    np.testing.assert_allclose(a, c.vertices[i], atol=1e-15)
    np.testing.assert_allclose(b, c.vertices[(i + 1) % c.n_vertices], atol=1e-15)
    assert math.dist(a, b) == pytest.approx(edge_length_analytic(spec, 2))


def test_subarc_of_edge_spans_descendants():
    spec = SnowflakeSpec(p=0.4, depth=4)
    arc = subarc_of_edge(spec, (1, 2))
    assert arc.length == pytest.approx(4 ** 3 * edge_length_analytic(spec, 4))
    a, b = edge_endpoints(spec, (1, 2))
    np.testing.assert_allclose(arc.endpoints()[0], a, atol=1e-14)
    np.testing.assert_allclose(arc.endpoints()[1], b, atol=1e-14)


def test_bad_edge_address():
    with pytest.raises(DomelabError):
        EdgeAddress((1, 5))


def test_k0_small_cases():
    spec = SnowflakeSpec(p=1 / 3, schedule="constant_flat", normalization="diameter_half")
    # flat steps divide by 4: squaring needs k with 4^-k <= edge_n
    n = 2
    e = edge_length_analytic(spec, n)
    assert k0(spec, n) == math.ceil(-math.log(e) / math.log(4) - 1e-12)


def test_extended_precision_side_matches_double():
    spec = SnowflakeSpec(p=0.45, schedule=Schedule("squares"), depth=5, normalization="unit_side")
    ext = generate_side(spec, precision="extended")
    assert ext.dtype == np.longdouble
    np.testing.assert_allclose(ext.astype(float), generate_side(spec), atol=1e-14)
    with pytest.raises(DomelabError):
        generate_side(spec, precision="quad")
