import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besovcap.median import (check_median_properties, check_partition, gamma_median, greedy_net,
                             median_convolution, median_spread, partition_of_unity, remark_45_check,
                             weighted_gamma_median, weighted_median_spread)
from besovcap.space import MetricMeasureSpace, generate

LINE4 = generate("line-grid", {"n": 4})


def test_constant_field():
    for g in (0.01, 0.3, 0.5):
        assert gamma_median(LINE4, np.full(4, 2.5), None, g) == 2.5


def test_four_values():
    u = np.array([1.0, 2.0, 3.0, 4.0])
    assert gamma_median(LINE4, u, [0, 1, 2, 3], 0.5) == 3.0
    assert gamma_median(LINE4, u, [0, 1, 2, 3], 0.25) == 4.0


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        gamma_median(LINE4, np.zeros(4), [], 0.5)
    with pytest.raises(ValueError):
        gamma_median(LINE4, np.zeros(4), None, 0.6)


def _brute_median(values, weights, gamma):
    total = weights.sum()
    return min(a for a in values if weights[values > a].sum() < gamma * total)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(-5, 5), st.floats(0.1, 3.0)), min_size=1, max_size=9),
       st.floats(0.01, 0.5))
def test_median_matches_definition(pairs, gamma):
    v = np.array([float(a) for a, _ in pairs])
    w = np.array([b for _, b in pairs])
    assert weighted_gamma_median(v, w, gamma) == _brute_median(v, w, gamma)


@settings(max_examples=150)
@given(st.lists(st.tuples(st.integers(-8, 8), st.floats(0.1, 3.0)), min_size=1, max_size=7),
       st.floats(0.02, 0.5))
def test_spread_is_infimum_over_constants(pairs, gamma):
    v = np.array([float(a) for a, _ in pairs])
    w = np.array([b for _, b in pairs])
    spread = weighted_median_spread(v, w, gamma)
    cs = np.linspace(-9, 9, 18 * 8 + 1)     # includes every half-integer
    brute = min(weighted_gamma_median(np.abs(v - c), w, gamma) for c in cs)
    assert spread == pytest.approx(brute, abs=1e-12)


def test_spread_needs_non_adjacent_midpoint():
    # optimum centre 1.5 lies between the non-adjacent values 0 and 3
    v = np.array([0.0, 1.0, 2.0, 3.0, 10.0])
    w = np.ones(5)
    assert weighted_median_spread(v, w, 0.25) == 1.5


def test_property_c_on_line():
    u = np.array([0.3, -1.0, 2.0, 0.5])
    mA = gamma_median(LINE4, u, [0, 1], 0.5)
    mB = gamma_median(LINE4, u, [0, 1, 2, 3], 0.25)
    assert mA <= mB


def test_property_g_constant():
    for p in (0.5, 1, 3):
        for g in (0.1, 0.5):
            assert gamma_median(LINE4, np.ones(4), None, g) <= (1 / g) ** (1 / p)


def test_property_suite_frozen_counts():
    rep = check_median_properties(generate("random-cloud", {"n": 6}, seed=1), 300, seed=4)
    assert all(rep[k]["failed"] == 0 for k in "abcdefgh")
    assert rep["a"]["passed"] == 300


def test_remark_examples():
    two = generate("line-grid", {"n": 2})
    assert remark_45_check(two, np.array([3.0, 3.0]), None, 0.5) == (0.0, 0.0)
    lhs, rhs = remark_45_check(two, np.array([1.0, 0.0]), None, 0.5)
    assert (lhs, rhs) == (1.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_remark_factor_two(seed):
    rng = np.random.default_rng(seed)
    sp = generate("random-cloud", {"n": 8}, seed=seed)
    u = rng.normal(size=8)
    A = np.flatnonzero(rng.random(8) < 0.7)
    lhs, rhs = remark_45_check(sp, u, A if A.size else [0], float(rng.uniform(0.01, 0.5)))
    assert lhs <= rhs


def test_partition_small_scale_is_indicator():
    sp = generate("random-cloud", {"n": 7}, seed=5)
    pu = partition_of_unity(sp, sp.d_min / 3)
    assert np.array_equal(pu.centers, np.arange(7))
    assert np.array_equal(pu.phi, np.eye(7))


def test_partition_single_point():
    sp = MetricMeasureSpace(np.zeros((1, 1)), np.ones(1))
    pu = partition_of_unity(sp, 1.0)
    assert pu.phi.tolist() == [[1.0]]


def test_partition_line_net_and_cover():
    pu = partition_of_unity(LINE4, 1.0)
    assert check_partition(LINE4, pu) == []
    assert greedy_net(LINE4, 1.0).tolist() == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        partition_of_unity(LINE4, 0.0)


@pytest.mark.parametrize("r", [0.05, 0.1, 0.2, 0.4, 1.0])
def test_partition_contract_on_cloud(r):
    sp = generate("random-cloud", {"n": 20}, seed=9)
    assert check_partition(sp, partition_of_unity(sp, r)) == []


def test_convolution_constant_and_indicator():
    sp = generate("square-grid", {"side": 3, "spacing": 0.3})
    assert np.allclose(median_convolution(sp, np.full(9, -2.0), 0.4, 0.5), -2.0)
    chi = (np.arange(9) % 2).astype(float)
    out = median_convolution(sp, chi, 0.4, 0.3)
    assert out.min() >= -1e-12 and out.max() <= 1 + 1e-12


def test_convolution_identity_below_separation():
    sp = generate("random-cloud", {"n": 10}, seed=2)
    u = np.random.default_rng(0).normal(size=10)
    assert np.array_equal(median_convolution(sp, u, sp.d_min * 0.49, 0.5), u)


def test_convolution_frozen_value():
    out = median_convolution(LINE4, np.array([0.0, 1.0, 4.0, 9.0]), 1.5, 0.5)
    assert out.tolist() == pytest.approx([2.2, 2.5, 2.8, 4.0])
