import numpy as np
import pytest

from besovcap.capacity import capacity_of
from besovcap.content import Gauge, netrusov_content
from besovcap.gradient import BesovParams
from besovcap.oracle import OracleCapExceeded, OracleConfig, brute_capacity, brute_content, oracle_candidates
from besovcap.space import MetricMeasureSpace, euclidean_dist, generate

P11 = BesovParams(0.5, 1, 1)
P22 = BesovParams(0.5, 2, 2)


def two_point(d):
    return MetricMeasureSpace(euclidean_dist(np.array([[0.0], [d]])), np.ones(2))


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(u_grid_step=0)
    with pytest.raises(ValueError):
        OracleConfig(max_points=0)


@pytest.mark.parametrize("d", [1.0, 1.9])
def test_two_point_closed_form(d):
    assert brute_capacity(two_point(d), [0], P11) == pytest.approx(min(2.0, 1 + d ** -0.5), rel=1e-9)


def test_whole_space():
    sp = generate("random-cloud", {"n": 4}, seed=2)
    assert brute_capacity(sp, range(4), P22) == pytest.approx(sp.weight.sum(), rel=1e-12)


def test_equilateral():
    sp = MetricMeasureSpace(1.0 - np.eye(3), np.ones(3))
    assert brute_capacity(sp, [0], P11) == 2.0
    assert brute_capacity(sp, [0], P22) == pytest.approx(2.6666666666666665, rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("params", [P11, P22, BesovParams(0.3, 2, 1)])
def test_capacity_agrees_with_solver(seed, params):
    sp = generate("random-cloud", {"n": 3}, seed=seed)
    brute = brute_capacity(sp, [0], params)
    solver = capacity_of(sp, [0], params).value
    assert solver <= brute * (1 + 1e-6)
    assert brute <= solver * (1 + 1e-5)


def test_capacity_caps():
    with pytest.raises(OracleCapExceeded):
        brute_capacity(generate("line-grid", {"n": 5}), [0], P11)
    with pytest.raises(ValueError):
        brute_capacity(two_point(1.0), [0], BesovParams(.5, 1.5, 1))


def test_content_fixture():
    sp = generate("line-grid", {"n": 4})
    assert brute_content(sp, [0, 3], Gauge.power(0.5), 1.0, R=1.0) == 2.0
    assert brute_content(sp, [0, 3], Gauge.power(0.5), 0.5) == pytest.approx(1.6329931618554523)


@pytest.mark.parametrize("seed", range(6))
def test_content_agrees_with_search(seed):
    sp = generate("random-cloud", {"n": 4}, seed=seed)
    g = Gauge.power(0.5)
    for theta, R in ((1.0, 1.0), (0.5, 0.5), (0.5, float("inf"))):
        brute = brute_content(sp, [0, 1, 3], g, theta, R, OracleConfig(max_candidates=28))
        assert netrusov_content(sp, [0, 1, 3], g, theta, R).value == pytest.approx(brute, rel=1e-12)


def test_content_cap():
    sp = generate("random-cloud", {"n": 12}, seed=0)
    assert len(oracle_candidates(sp, range(12), Gauge.power(0.5))) > 2
    with pytest.raises(OracleCapExceeded):
        brute_content(sp, range(12), Gauge.power(0.5), 0.5, config=OracleConfig(max_candidates=2))
