import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besovcap.gradient import (BesovParams, GradientSequence, besov_norm, canonical_gradient,
                               check_gradient, derived_poincare_gradient, elementary_inequality,
                               leibniz_gradients, lipschitz_norm_bound, lp_norm, lq_norm,
                               minimal_gradient, minimal_gradient_sequence, mixed_norm,
                               summing_constant, summing_lemma_check)
from besovcap.space import MetricMeasureSpace, generate


def pair(w=(1.0, 1.0), d=1.0):
    return MetricMeasureSpace(np.array([[0, d], [d, 0.0]]), np.array(w, dtype=float))


def test_params_validation():
    P = BesovParams(0.5, 4, 2)
    assert P.s_prime == 0.25 and P.theta == 0.5 and P.p_tilde == 1.0
    for bad in [dict(s=0, p=1), dict(s=.5, p=0), dict(s=.5, p=1, q=0),
                dict(s=.5, p=1, s_prime=.5), dict(s=.5, p=1, gamma=.6)]:
        with pytest.raises(ValueError):
            BesovParams(**bad)
    with pytest.raises(ValueError):
        BesovParams(1.0, 1).require_fractional()
    assert BesovParams(.5, 1, math.inf).to_json()["q"] == "inf"


def test_check_gradient_reports_slack():
    sp = pair()
    G = GradientSequence(2)
    G[-1] = [0.2, 0.2]
    (v,) = check_gradient(sp, [0.0, 1.0], G, 0.5)
    assert (v.i, v.j, v.k) == (0, 1, -1)
    assert v.slack == pytest.approx(0.6)
    G[-1] = [0.5, 0.5]
    assert check_gradient(sp, [0.0, 1.0], G, 0.5) == []


def test_negative_entries_flagged():
    G = GradientSequence(2)
    G[-1] = [2.0, -0.1]
    assert any(v.i == v.j == 1 for v in check_gradient(pair(), [0, 1], G, 0.5))


def test_canonical_two_points():
    assert canonical_gradient(pair(), [0, 1], 0.5).to_json() == {"-1": [0.5, 0.5]}


def test_minimal_p1_puts_mass_on_light_point():
    sol = minimal_gradient(pair((1, 3)), [0, 1], 0.5, 1, -1)
    assert sol.g.tolist() == [1.0, 0.0] and sol.cost == 1.0 and sol.exact


def test_minimal_p2_weighted_split():
    sol = minimal_gradient(pair((1, 3)), [0, 1], 0.5, 2, -1)
    assert sol.g == pytest.approx([0.75, 0.25], abs=1e-7)
    assert sol.cost == pytest.approx(0.75, abs=1e-7)


@pytest.mark.parametrize("Q", [0.5, 1.0, 3.0])
def test_minimal_p2_equal_weights(Q):
    sol = minimal_gradient(pair(), [0, Q], 1.0, 2, -1)
    assert sol.cost == pytest.approx(Q * Q / 2, rel=1e-6)


def test_concave_exponent_not_exact():
    assert not minimal_gradient(pair((1, 3)), [0, 1], 0.5, 0.5, -1).exact


def test_absent_scale_is_zero():
    sol = minimal_gradient(pair(), [0, 1], 0.5, 1, 7)
    assert sol.cost == 0 and sol.exact


def test_norm_helpers():
    assert lq_norm([3, 4], 2) == 5.0
    assert lq_norm([3, 4], math.inf) == 4.0
    assert lq_norm([], 2) == 0.0
    sp = pair()
    G = GradientSequence(2)
    G[0] = [1, 1]
    assert mixed_norm(sp, G, 2, 1) == pytest.approx(math.sqrt(2))
    assert lp_norm(sp, [-3, 4], 2) == 5.0


@pytest.mark.parametrize("mode", ["minimal", "canonical"])
def test_besov_norm_two_points(mode):
    assert besov_norm(pair(), [1, 0], BesovParams(.5, 1, 1), mode).as_tuple() == (1.0, 1.0, 2.0)


def test_besov_norm_unknown_mode():
    with pytest.raises(ValueError):
        besov_norm(pair(), [1, 0], BesovParams(.5, 1, 1), "bogus")


@pytest.mark.parametrize("p", [0.5, 1, 2, 3])
def test_constant_function_norm(p):
    sp = generate("random-cloud", {"n": 6}, seed=3)
    nrm = besov_norm(sp, np.ones(6), BesovParams(.5, p, 2))
    assert nrm.grad_part == 0
    assert nrm.lp_part == pytest.approx(sp.weight.sum() ** (1 / p))


def _cloud_and_field(seed, n=6):
    sp = generate("random-cloud", {"n": n}, seed=seed)
    return sp, np.random.default_rng(seed).normal(size=n)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1.0, 1.5, 2.0]))
def test_minimal_is_feasible_and_beats_canonical(seed, p):
    sp, u = _cloud_and_field(seed)
    G, exact = minimal_gradient_sequence(sp, u, 0.5, p)
    assert exact and check_gradient(sp, u, G, 0.5) == []
    P = BesovParams(.5, p, 1)
    assert besov_norm(sp, u, P).total <= besov_norm(sp, u, P, "canonical").total * (1 + 1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_norm_is_homogeneous(seed, lam):
    sp, u = _cloud_and_field(seed, 5)
    P = BesovParams(.5, 1, 1)
    assert besov_norm(sp, lam * u, P).total == pytest.approx(lam * besov_norm(sp, u, P).total, rel=1e-6)


def test_gradient_json_round_trip():
    sp, u = _cloud_and_field(1)
    G = canonical_gradient(sp, u, 0.5)
    assert GradientSequence.from_json(G.to_json(), sp.n).to_json() == G.to_json()
    with pytest.raises(ValueError):
        GradientSequence.from_json({"0": [1.0]}, 2)


def test_derived_gradient_single_scale():
    P = BesovParams(0.5, 1, 1, s_prime=0.25)
    H = GradientSequence(1)
    H[0] = [2.0]
    G = derived_poincare_gradient(MetricMeasureSpace(np.zeros((1, 1)), np.ones(1)),
                                  H, P, window=[-1, 0, 1, 2, 3])
    # g_k = 2**(k s') h_0 for k <= 2, nothing beyond
    for k in (-1, 0, 1, 2):
        assert G[k][0] == pytest.approx(2.0 * 2 ** (k * 0.25))
    assert 3 not in G.per_scale


def test_leibniz_trivial_multipliers():
    sp, u = _cloud_and_field(2)
    Gu = canonical_gradient(sp, u, 0.5)
    rho, h = leibniz_gradients(sp, u, Gu, np.zeros(sp.n), 1.0, 0.5)
    assert all(np.all(rho[k] == 0) and np.all(h[k] == 0) for k in rho.scales)
    rho, h = leibniz_gradients(sp, u, Gu, np.ones(sp.n), 0.0, 0.5)
    assert check_gradient(sp, u, rho, 0.5) == []
    with pytest.raises(ValueError):
        leibniz_gradients(sp, u, Gu, np.arange(sp.n) * 100.0, 1.0, 0.5)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_leibniz_product_gradient(seed):
    sp, u = _cloud_and_field(seed)
    phi = np.clip(1 - sp.dist[0], 0, None)
    Gu = canonical_gradient(sp, u, 0.5)
    rho, h = leibniz_gradients(sp, u, Gu, phi, 1.0, 0.5)
    assert check_gradient(sp, u * phi, rho, 0.5) == []
    assert check_gradient(sp, u * phi, h, 0.5) == []


def test_lipschitz_bound_line():
    sp = generate("line-grid", {"n": 4})
    phi = np.array([1.0, 0.5, 0.0, 0.0])
    lhs, rhs = lipschitz_norm_bound(sp, phi, 0.5, [0, 1], BesovParams(.5, 2, 4))
    assert lhs <= rhs
    with pytest.raises(ValueError):
        lipschitz_norm_bound(sp, phi, 0.5, [0], BesovParams(.5, 2, 4))


@settings(max_examples=100)
@given(st.lists(st.floats(0, 5), min_size=1, max_size=6), st.floats(0.05, 1.0))
def test_elementary_inequality(a, beta):
    lhs, rhs = elementary_inequality(a, beta)
    assert lhs <= rhs * (1 + 1e-9) + 1e-12


def test_summing_bound_cases():
    assert summing_lemma_check(2, 1, {})["lhs"] == 0
    spike = summing_lemma_check(2, 1, {0: 1.0})
    assert spike["lhs"] == pytest.approx(3.0) and spike["ok"]
    assert summing_constant(2, 1) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        summing_constant(1, 1)
    with pytest.raises(ValueError):
        summing_lemma_check(2, 1, {0: -1.0})


@settings(max_examples=100)
@given(st.floats(1.1, 8), st.floats(0.2, 4),
       st.dictionaries(st.integers(-6, 6), st.floats(0, 10), max_size=6))
def test_summing_bound_holds(a, b, c):
    assert summing_lemma_check(a, b, c)["ok"]
