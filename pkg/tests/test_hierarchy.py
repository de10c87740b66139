import numpy as np
import pytest

from domelab._validation import ResolutionError
from domelab.curves import diameter
from domelab.hierarchy import EdgeSubarc, diameter_ratio
from domelab.partition import build_delta_partition, covering_count
from domelab.snowflake import Schedule, SnowflakeSpec, edge_length_analytic, generate, subarc_of_edge

SPECS = [
    SnowflakeSpec(p=0.4, schedule=Schedule("squares"), depth=9),
    SnowflakeSpec(p=0.3, depth=9),
    SnowflakeSpec(p=0.45, schedule=Schedule("squares"), depth=9),
]


@pytest.fixture(scope="module", params=SPECS, ids=["sq-0.4", "bump-0.3", "sq-0.45"])
def explicit(request):
    spec = request.param
    return spec, generate(spec, validate=False)


@pytest.mark.parametrize("step", [1, 2])
def test_edge_subarc_matches_explicit_geometry(explicit, step):
    spec, curve = explicit
    arc = subarc_of_edge(spec, (1,) + (1,) * step, curve=curve)
    e = EdgeSubarc(spec, step)
    D = diameter(arc)
    assert e.diameter == pytest.approx(D, rel=1e-6)
    for delta in (0.1, 0.03):
        explicit_m = build_delta_partition(arc, delta).summary().m_index
        s = e.delta_partition_summary(delta)
        assert s.band_ok(rtol=1e-9)
        # two valid delta-partitions need not agree exactly; they stay close in practice
        assert s.m_index == pytest.approx(explicit_m, rel=0.15)
        ce = covering_count(arc, delta * D)
        ch = e.covering_count(delta * e.diameter)
        assert abs(ch - ce) <= max(1, 0.1 * ce)


def test_diameter_ratio_of_flat_steps_is_one():
    spec = SnowflakeSpec(p=0.4, schedule=Schedule("constant_flat"), depth=0)
    assert diameter_ratio(spec, 3) == pytest.approx(1.0)


def test_deep_step_without_geometry():
    spec = SnowflakeSpec(p=0.45, schedule=Schedule("squares"), depth=12)
    e = EdgeSubarc(spec, 12)
    assert e.chord == pytest.approx(edge_length_analytic(spec, 12))
    s = e.delta_partition_summary(e.diameter)
    assert s.band_ok(rtol=1e-9)
    assert s.size >= 1 / e.diameter


def test_element_budget_guard():
    e = EdgeSubarc(SnowflakeSpec(p=0.4, depth=0), 1, max_elements=4)
    with pytest.raises(ResolutionError):
        e.delta_partition_summary(1e-4)


def test_covering_count_is_one_above_diameter():
    e = EdgeSubarc(SnowflakeSpec(p=0.4, depth=0), 2)
    assert e.covering_count(2 * e.diameter) == 1
    assert np.isfinite(e.diameter)
