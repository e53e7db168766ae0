import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besovcap.content import (Covering, Gauge, annulus_radius, candidate_balls,
                              compare_capacity_content, covering_cost, hausdorff_content,
                              hausdorff_cost, netrusov_content, prune_candidates)
from besovcap.gradient import BesovParams
from besovcap.space import Ball, MetricMeasureSpace, generate

LINE4 = generate("line-grid", {"n": 4})
ROOT = Gauge.power(0.5)


def test_gauge_parse_and_describe():
    assert Gauge.parse("pow:0.5") == Gauge.power(0.5)
    t = Gauge.parse("table:0.5=0.5,1=1,4=2")
    assert t.describe() == "table:0.5=0.5,1=1,4=2"
    assert t(np.array([0.25, 0.5, 2.0, 8.0])) == pytest.approx([0.25, 0.5, math.sqrt(2), 2 * math.sqrt(2)])
    for bad in ("pow:-1", "table:1=1", "table:2=1,1=2", "table:1=2,2=1", "cube:3"):
        with pytest.raises(ValueError):
            Gauge.parse(bad)


def test_gauge_admissibility():
    assert Gauge.power(0.4).admissible(0.5, 1)
    assert not Gauge.power(0.5).admissible(0.5, 1)
    assert not Gauge.parse("table:0.5=0.5,1=1,4=2").admissible(0.5, 2)
    assert Gauge.parse("table:0.5=0.7,1=1,4=1.3").admissible(0.5, 2)


def test_cost_examples():
    sp = MetricMeasureSpace(np.array([[0, 10.0], [10.0, 0]]), np.array([3.0, 4.0]))
    one = Gauge.power(0.0)
    assert covering_cost(sp, Covering.of([Ball(0, 1.0)]), one, 1.0) == 3.0
    # different classes combine as an l^2 sum, same class adds first
    assert covering_cost(sp, Covering.of([Ball(0, 1.0), Ball(1, 0.25)]), one, 2.0) == 5.0
    assert covering_cost(sp, Covering.of([Ball(0, 1.0), Ball(1, 1.0)]), one, 2.0) == 7.0
    assert hausdorff_cost(sp, Covering.of([Ball(0, 1.0), Ball(1, 0.25)]), 0.0) == 7.0
    with pytest.raises(ValueError):
        covering_cost(sp, Covering.of([]), one, 0.0)


def test_isolated_singleton_costs_its_weight():
    sp = MetricMeasureSpace(np.array([[0, 10.0], [10.0, 0]]), np.array([2.0, 1.0]))
    assert netrusov_content(sp, [0], ROOT, 1.0, R=1.0).value == 2.0


def test_single_point_unbounded_radius():
    sp = MetricMeasureSpace(np.zeros((1, 1)), np.array([3.0]))
    res = netrusov_content(sp, [0], ROOT, 1.0)
    assert res.value == 3.0 and res.covering.to_json() == [{"center": 0, "radius": 1.0, "class": 0}]


def test_line_fixtures():
    res = netrusov_content(LINE4, [0, 3], ROOT, 1.0, R=1.0)
    assert res.value == 2.0 and res.complete
    assert [b.center for b in res.covering.balls] == [0, 3]
    for theta in (1.0, 0.5):
        res = netrusov_content(LINE4, [0, 3], ROOT, theta)
        assert res.value == pytest.approx(1.6329931618554523, rel=1e-15)
        assert res.covering.to_json() == [{"center": 0, "radius": 6.0, "class": -2}]


def test_result_covers_and_json():
    sp = generate("random-cloud", {"n": 9}, seed=3)
    res = netrusov_content(sp, [1, 4, 7], ROOT, 0.5, R=0.5)
    assert res.covering.covers(sp, [1, 4, 7])
    assert res.value == pytest.approx(covering_cost(sp, res.covering, ROOT, 0.5), rel=1e-12)
    assert res.to_json()["method"] == "exact"
    with pytest.raises(ValueError):
        netrusov_content(sp, [0], ROOT, 1.0, method="magic")


def test_pruning_keeps_an_optimum():
    sp = generate("random-cloud", {"n": 7}, seed=11)
    raw = candidate_balls(sp, range(7), ROOT, R=1.0)
    kept = prune_candidates(raw)
    assert 0 < len(kept) <= len(raw)
    assert {(c.mask, c.cls) for c in kept} <= {(c.mask, c.cls) for c in raw}


def _cloud(seed, n=8):
    return generate("random-cloud", {"n": n}, seed=seed)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_greedy_never_beats_exact(seed):
    sp = _cloud(seed)
    rng = np.random.default_rng(seed)
    E = np.flatnonzero(rng.random(8) < 0.5)
    E = E if E.size else np.array([0])
    ex = netrusov_content(sp, E, ROOT, 0.5, R=1.0)
    gr = netrusov_content(sp, E, ROOT, 0.5, R=1.0, method="greedy")
    assert ex.complete and ex.value <= gr.value * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_monotone_in_set(seed):
    sp = _cloud(seed, 7)
    rng = np.random.default_rng(seed)
    big = np.sort(rng.choice(7, size=4, replace=False))
    small = big[:2]
    assert netrusov_content(sp, small, ROOT, 1.0, R=1.0).value <= \
        netrusov_content(sp, big, ROOT, 1.0, R=1.0).value * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_hausdorff_relations(seed):
    sp = _cloud(seed, 6)
    E = [0, 2, 4]
    h = hausdorff_content(sp, E, 0.5, R=1.0).value
    assert netrusov_content(sp, E, ROOT, 1.0, R=1.0).value == pytest.approx(h, rel=1e-12)
    assert h <= netrusov_content(sp, E, ROOT, 0.5, R=1.0).value * (1 + 1e-12)


@pytest.mark.parametrize("lam", [0.5, 2.0, 7.0])
def test_scales_with_measure(lam):
    sp = _cloud(5, 7)
    heavy = MetricMeasureSpace(sp.dist, lam * sp.weight)
    a = netrusov_content(sp, [0, 3, 5], ROOT, 0.5, R=1.0).value
    assert netrusov_content(heavy, [0, 3, 5], ROOT, 0.5, R=1.0).value == pytest.approx(lam * a, rel=1e-12)


def test_annulus():
    x0, R0 = annulus_radius(LINE4, [0])
    assert x0 == 0 and R0 == pytest.approx(0.125)
    assert annulus_radius(LINE4, range(4)) is None


def test_compare_whole_space_and_singleton():
    sp = generate("cantor", {"level": 3})
    rows = compare_capacity_content(sp, BesovParams(.5, 1, 1), {"all": range(sp.n), "one": [0]})
    whole, single = rows
    assert whole.cap == pytest.approx(1.0) and whole.ratio54 == pytest.approx(1.0)
    assert whole.nh_lower is None and whole.status.endswith("annulus-unmet")
    assert single.status == "ok" and single.cutoff_ok
    assert single.ratio54 == pytest.approx(3.079201435678004, rel=1e-6)
    assert single.nh_lower == pytest.approx(0.13273234482282034, rel=1e-6)


def test_compare_rejects_bad_parameters():
    sp = generate("line-grid", {"n": 4})
    with pytest.raises(ValueError):
        compare_capacity_content(sp, BesovParams(.5, 1, 1), {"a": [0]}, d=0.5)
    with pytest.raises(ValueError):
        compare_capacity_content(sp, BesovParams(.5, 1, 1), {"a": [0]}, R=2.0)
    with pytest.raises(ValueError):
        compare_capacity_content(sp, BesovParams(1.0, 1, 1), {"a": [0]})
