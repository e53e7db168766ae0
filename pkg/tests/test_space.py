import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besovcap.space import (InvalidSpaceError, MetricMeasureSpace, doubling_constant, dyadic_scale,
                            generate, load_space, pair_scale, radius_class, space_from_json, validate)


def space(D, w=None):
    D = np.asarray(D, dtype=float)
    return MetricMeasureSpace(D, np.ones(len(D)) if w is None else w)


def test_valid_two_point():
    assert validate(space([[0, 1], [1, 0]])) == []


def test_symmetry_violation_is_named():
    out = validate(space([[0, 1], [2, 0]]))
    assert any(v.startswith("symmetry") and "[0][1]" in v for v in out)


def test_triangle_violation_is_named():
    out = validate(space([[0, 1, 5], [1, 0, 1], [5, 1, 0]]))
    assert any(v.startswith("triangle") and "(0,1,2)" in v for v in out)


def test_nonpositive_weight_and_separation():
    out = validate(MetricMeasureSpace(np.array([[0.0, 0.0], [0.0, 0.0]]), np.array([1.0, 0.0])))
    assert any(v.startswith("separation") for v in out)
    assert any(v.startswith("weight") for v in out)


@pytest.mark.parametrize("d,k", [(1.0, -1), (0.1, 3), (0.5, 0), (0.25, 1), (2.0, -2), (1.9, -1)])
def test_pair_scale_examples(d, k):
    assert pair_scale(space([[0, d], [d, 0]]), 0, 1) == k


def test_pair_scale_rejects_coincident():
    with pytest.raises(ValueError, match="no scale for coincident points"):
        pair_scale(space([[0, 1], [1, 0]]), 0, 0)


@given(st.floats(min_value=1e-9, max_value=1e9, allow_nan=False))
def test_dyadic_cell_contains_distance(d):
    k = dyadic_scale(d)
    assert 2.0 ** (-k - 1) <= d < 2.0 ** (-k)


@given(st.floats(min_value=1e-6, max_value=1e6))
def test_radius_class_cell(r):
    i = radius_class(r)
    assert 2.0 ** (-i) <= r < 2.0 ** (-i + 1)


def test_doubling_examples():
    assert doubling_constant(space([[0.0]])) == 1.0
    assert doubling_constant(space([[0, 1], [1, 0]])) == 2.0
    for n in (3, 5, 9, 17):
        c = doubling_constant(generate("line-grid", {"n": n}))
        assert 1.0 <= c <= 4.0


def test_doubling_matches_brute_enumeration():
    sp = generate("random-cloud", {"n": 9}, seed=2)
    best = 1.0
    for x in range(sp.n):
        for r in np.concatenate([sp.dist[x], sp.dist[x] / 2, sp.dist[x] * (1 + 1e-9), sp.dist[x] / 2 * (1 + 1e-9)]):
            if r > 0:
                best = max(best, sp.ball_measure(x, 2 * r) / sp.ball_measure(x, r))
    assert doubling_constant(sp) == pytest.approx(best, rel=1e-12)


def test_line_grid_generator():
    sp = generate("line-grid", {"n": 4, "spacing": 1})
    assert np.array_equal(sp.dist, np.abs(np.arange(4)[:, None] - np.arange(4)[None, :]))
    assert np.array_equal(sp.weight, np.ones(4))


def test_cantor_generator():
    sp = generate("cantor", {"level": 1})
    assert np.allclose(sp.coords.ravel(), [0, 1 / 3, 2 / 3, 1])
    assert np.allclose(sp.weight, 0.25)
    assert generate("cantor", {"level": 3}).n == 16
    with pytest.raises(ValueError):
        generate("cantor", {"level": -1})


def test_random_cloud_is_deterministic():
    a = generate("random-cloud", {"n": 16}, seed=7)
    b = generate("random-cloud", {"n": 16}, seed=7)
    assert np.array_equal(a.dist, b.dist) and np.array_equal(a.weight, b.weight)


def test_graph_metric_shortest_paths():
    sp = generate("graph-metric", {"n": 3, "edges": [[0, 1, 1.0], [1, 2, 2.0]]})
    assert sp.dist[0, 2] == 3.0
    with pytest.raises(ValueError, match="disconnected"):
        generate("graph-metric", {"n": 3, "edges": [[0, 1, 1.0]]})


@pytest.mark.parametrize("kind,params", [
    ("line-grid", {"n": 7, "spacing": 0.3}), ("square-grid", {"side": 3}), ("cantor", {"level": 2}),
    ("random-cloud", {"n": 12, "dim": 3}), ("graph-metric", {"n": 4, "edges": [[0, 1, 1], [1, 2, 1], [2, 3, 1]]}),
])
def test_generators_validate(kind, params):
    assert validate(generate(kind, params, seed=1)) == []


def test_json_formats(tmp_path):
    docs = [
        {"dist": [[0, 1], [1, 0]], "weights": [1, 2]},
        {"coords": [[0, 0], [3, 4]], "metric": "euclidean", "weights": [1, 1]},
        {"edges": [[0, 1, 2.5]], "n": 2, "weights": [1, 1], "metric": "graph"},
        {"generator": {"kind": "line-grid", "params": {"n": 2}}},
    ]
    expect = [1.0, 5.0, 2.5, 1.0]
    for doc, d in zip(docs, expect):
        path = tmp_path / "s.json"
        path.write_text(json.dumps(doc))
        assert load_space(str(path)).dist[0, 1] == d
    with pytest.raises(InvalidSpaceError):
        space_from_json({"dist": [[0, 1], [2, 0]], "weights": [1, 1]})


def test_roundtrip_to_json():
    sp = generate("random-cloud", {"n": 5}, seed=3)
    back = space_from_json(json.loads(json.dumps(sp.to_json())))
    assert np.array_equal(back.dist, sp.dist) and np.array_equal(back.weight, sp.weight)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12))
def test_scales_and_balls_on_random_spaces(seed, n):
    sp = generate("random-cloud", {"n": n}, seed=seed)
    for k, pairs in sp.scale_pairs.items():
        assert np.all(2.0 ** (-k - 1) <= pairs.d) and np.all(pairs.d < 2.0 ** (-k))
    assert sum(p.i.size for p in sp.scale_pairs.values()) == n * (n - 1) // 2
    x = seed % n
    radii = np.sort(np.concatenate([sp.dist[x], [1e-9, 10.0]]))
    sizes = [sp.members(x, r).size for r in radii]
    assert sizes == sorted(sizes)
    assert all(sp.ball_measure(x, r) >= sp.weight[x] for r in radii if r > 0)
