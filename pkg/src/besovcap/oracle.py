"""Brute-force references for capacity and cocontent on tiny instances.

Nothing here calls the main solvers.  Capacity is searched on a grid of
values for the free points, with every per-scale gradient problem solved in
closed form over all active sets, then refined by zooming around the best
grid point.  Content is an exhaustive scan of all subsets of candidate balls.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .space import MetricMeasureSpace, RADIUS_BUMP, radius_class


class OracleCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    u_grid_step: float = 1 / 64
    max_points: int = 4
    max_candidates: int = 20
    zoom_rounds: int = 6

    def __post_init__(self):
        if not 0 < self.u_grid_step <= 1:
            raise ValueError("u_grid_step must lie in (0, 1]")
        if self.max_points < 1 or self.max_candidates < 1:
            raise ValueError("caps must be at least 1")


# --------------------------------------------------------------------------
# capacity


def _scale_groups(space: MetricMeasureSpace):
    """Pairs grouped by dyadic scale, from the raw distance matrix."""
    groups = {}
    for i, j in itertools.combinations(range(space.n), 2):
        d = space.dist[i, j]
        k = math.floor(-math.log2(d))
        while 2.0 ** (-k) <= d:
            k -= 1
        while 2.0 ** (-k - 1) > d:
            k += 1
        groups.setdefault(k, []).append((i, j, d))
    return groups


def _dual_vertices(pairs, w):
    """Vertices of ``{lam >= 0 : sum_{pairs at x} lam <= w_x}``; the LP value is ``max lam.Q``."""
    m = len(pairs)
    A = np.zeros((len(w), m))
    for t, (i, j, _) in enumerate(pairs):
        A[i, t] = A[j, t] = 1.0
    rows = np.vstack([A, -np.eye(m)])
    rhs = np.concatenate([w, np.zeros(m)])
    verts = []
    for pick in itertools.combinations(range(rows.shape[0]), m):
        M = rows[list(pick)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        lam = np.linalg.solve(M, rhs[list(pick)])
        if np.all(rows @ lam <= rhs + 1e-12):
            verts.append(np.maximum(lam, 0.0))
    return np.array(verts)


def _active_set_maps(pairs, w):
    """For each independent tight set ``T``: the linear map ``Q_T -> g`` minimizing
    ``sum w g^2`` on ``{g_i + g_j = Q_ij, (i, j) in T}``."""
    n, m = len(w), len(pairs)
    A = np.zeros((n, m))
    for t, (i, j, _) in enumerate(pairs):
        A[i, t] = A[j, t] = 1.0
    Winv = np.diag(1 / w)
    maps = []
    for size in range(1, min(m, n) + 1):
        for T in itertools.combinations(range(m), size):
            AT = A[:, list(T)]
            if np.linalg.matrix_rank(AT) < size:
                continue
            K = Winv @ AT @ np.linalg.inv(AT.T @ Winv @ AT)
            maps.append((list(T), K))
    return A, maps


def _scale_values(U, pairs, s, w, p, prepared):
    """``min sum w g^p`` over feasible ``g`` for every row of ``U`` (p in {1, 2})."""
    Q = np.stack([np.abs(U[:, i] - U[:, j]) / d ** s for i, j, d in pairs], axis=1)
    if p == 1:
        return (Q @ prepared.T).max(axis=1)
    A, maps = prepared
    best = np.full(U.shape[0], np.inf)
    best[np.all(Q == 0, axis=1)] = 0.0
    for T, K in maps:
        g = Q[:, T] @ K.T
        ok = np.all(g @ A >= Q - 1e-10 * (1 + Q), axis=1)
        cost = (np.maximum(g, 0) ** 2 * w).sum(axis=1)
        best = np.where(ok, np.minimum(best, cost), best)
    return best


def _objective(U, space, groups, prepared, s, p, q):
    w = space.weight
    lp = (U ** p * w).sum(axis=1) ** (1 / p)
    per_scale = [_scale_values(U, pairs, s, w, p, prepared[k]) ** (1 / p) for k, pairs in groups.items()]
    if not per_scale:
        return lp ** p
    S = np.stack(per_scale, axis=1)
    grad = S.max(axis=1) if q == math.inf else (S ** q).sum(axis=1) ** (1 / q)
    return (lp + grad) ** p


def brute_capacity(space: MetricMeasureSpace, E, params, config: OracleConfig = OracleConfig()) -> float:
    """Grid-plus-zoom minimum of ``(||u||_p + ||(g_k)||_{l^q(L^p)})^p`` over admissible ``u``."""
    if space.n > config.max_points:
        raise OracleCapExceeded(f"brute capacity is capped at {config.max_points} points")
    if params.p not in (1, 2):
        raise ValueError("the capacity oracle handles p in {1, 2}")
    s, p, q = params.s, params.p, params.q
    E = np.unique(np.asarray(E, dtype=int))
    free = np.setdiff1d(np.arange(space.n), E)
    groups = _scale_groups(space)
    prepared = {k: (_dual_vertices(pairs, space.weight) if p == 1 else _active_set_maps(pairs, space.weight))
                for k, pairs in groups.items()}

    def evaluate(vals):
        U = np.ones((vals.shape[0], space.n))
        U[:, free] = vals
        return _objective(U, space, groups, prepared, s, p, q)

    if free.size == 0:
        return float(evaluate(np.zeros((1, 0)))[0])
    step = config.u_grid_step
    axis = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    grid = np.array(list(itertools.product(axis, repeat=free.size)))
    vals = evaluate(grid)
    best_u, best = grid[int(np.argmin(vals))], float(vals.min())
    for _ in range(config.zoom_rounds):
        local = np.linspace(-step, step, 9)
        pts = np.clip(best_u + np.array(list(itertools.product(local, repeat=free.size))), 0.0, 1.0)
        v = evaluate(pts)
        if v.min() < best:
            best_u, best = pts[int(np.argmin(v))], float(v.min())
        step /= 4
    return best


# --------------------------------------------------------------------------
# content


def oracle_candidates(space: MetricMeasureSpace, E, gauge, R=math.inf) -> List[Tuple[int, float, int, float, int]]:
    """``(center, radius, class, ratio, E-mask)`` for every useful radius: the
    cheapest per (coverage, class), minus those beaten within their class."""
    E = [int(e) for e in np.unique(np.asarray(E, dtype=int))]
    cap = float(R) if math.isfinite(R) else (2 * space.diameter if space.diameter > 0 else 1.0)
    off = space.dist[~np.eye(space.n, dtype=bool)]
    dmin = float(off.min()) if off.size else 1.0
    bottom = radius_class(min(dmin, cap)) + 2
    best = {}
    for x in range(space.n):
        radii = {cap} | {float(d) for d in space.dist[x] if 0 < d < cap}
        radii |= {2.0 ** (1 - i) * (1 - RADIUS_BUMP) for i in range(radius_class(cap) + 1, bottom + 1)}
        for r in sorted(radii):
            inside = space.dist[x] < r
            mask = sum(1 << t for t, e in enumerate(E) if inside[e])
            if not mask:
                continue
            ratio = float(space.weight[inside].sum()) / float(gauge(r))
            key = (mask, radius_class(r))
            if key not in best or ratio < best[key][3]:
                best[key] = (x, r, key[1], ratio, mask)
    pool = list(best.values())
    # a ball is useless if a same-class ball covers at least as much for no more cost
    keep = [a for a in pool
            if not any(b is not a and b[2] == a[2] and a[4] & ~b[4] == 0 and b[3] <= a[3]
                       and (b[3] < a[3] or b[4] != a[4]) for b in pool)]
    return sorted(keep, key=lambda c: (c[2], c[0], c[1]))


def brute_content(space: MetricMeasureSpace, E, gauge, theta: float, R=math.inf,
                  config: OracleConfig = OracleConfig()) -> float:
    """Minimum cost over every subset of candidate balls that covers ``E``."""
    cands = oracle_candidates(space, E, gauge, R)
    full = (1 << len(np.unique(np.asarray(E, dtype=int)))) - 1
    # any cover costs at least its dearest ball, so balls dearer than a known
    # cover (cheapest ball per point) can never appear in an optimum
    pick = {}
    for t, c in enumerate(cands):
        for e in range(full.bit_length()):
            if c[4] >> e & 1 and (e not in pick or c[3] < cands[pick[e]][3]):
                pick[e] = t
    upper = {}
    for t in set(pick.values()):
        upper[cands[t][2]] = upper.get(cands[t][2], 0.0) + cands[t][3]
    bound = sum(v ** theta for v in upper.values()) ** (1 / theta)
    cands = [c for c in cands if c[3] <= bound * (1 + 1e-12)]
    m = len(cands)
    if m > config.max_candidates:
        raise OracleCapExceeded(f"{m} candidates exceed the cap of {config.max_candidates}")
    classes = sorted({c[2] for c in cands})
    col = {c: t for t, c in enumerate(classes)}

    def tables(part):
        N = 1 << len(part)
        cover = np.zeros(N, dtype=np.int64)
        sums = np.zeros((N, len(classes)))
        for b, (_, _, cl, ratio, mask) in enumerate(part):
            lo = 1 << b
            cover[lo:2 * lo] = cover[:lo] | mask
            sums[lo:2 * lo] = sums[:lo]
            sums[lo:2 * lo, col[cl]] += ratio
        return cover, sums

    low = min(m, 16)
    cover_lo, sums_lo = tables(cands[:low])
    cover_hi, sums_hi = tables(cands[low:])
    winner, win_cost = None, math.inf
    for h in range(cover_hi.size):
        ok = np.flatnonzero((cover_lo | cover_hi[h]) == full)
        if ok.size == 0:
            continue
        costs = ((sums_lo[ok] + sums_hi[h]) ** theta).sum(axis=1) ** (1 / theta)
        t = int(np.argmin(costs))
        if costs[t] < win_cost:
            winner, win_cost = int(ok[t]) | (h << low), float(costs[t])
    # recompute the winning subset's cost ball by ball
    per_class = {}
    for b in range(m):
        if winner >> b & 1:
            per_class[cands[b][2]] = per_class.get(cands[b][2], 0.0) + cands[b][3]
    return sum(v ** theta for _, v in sorted(per_class.items())) ** (1 / theta)
