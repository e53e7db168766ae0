"""Besov capacity of subsets of a finite metric measure space.

Every subset of a finite space is open, so the admissible class is
``{u : u = 1 on E, 0 <= u <= 1}``.  For ``p, q >= 1`` the Besov norm is a
convex function of ``u`` jointly with the gradient sequence, and the
problem is solved in one convex program (a linear program when
``p = q = 1``).  The solver output is then re-evaluated with the exact
per-scale minimal gradients, alongside a fixed list of warm starts, and the
smallest certified value wins.  Other exponents fall back to a
deterministic pattern search and only claim an upper bound.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .content import Covering, Gauge, netrusov_content
from .gradient import (BesovParams, GradientSequence, SolverError, besov_norm, check_gradient,
                       lipschitz_violations)
from .space import MetricMeasureSpace, radius_class

log = logging.getLogger(__name__)

STATUSES = ("converged", "iteration-cap", "upper-bound-only")


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 100_000
    restarts: int = 3
    seed: int = 0
    allow_empty: bool = False
    cutoff_start: bool = True
    max_evals: int = 400      # objective evaluations in the nonconvex pattern search

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")


@dataclass(frozen=True)
class CapacityProblem:
    space: MetricMeasureSpace
    E: Sequence[int]
    params: BesovParams
    solver: Optional[SolverConfig] = None

    def __post_init__(self):
        E = np.unique(np.asarray(self.E, dtype=int))
        if E.size and (E.min() < 0 or E.max() >= self.space.n):
            raise ValueError(f"set indices out of range for a space with {self.space.n} points")
        object.__setattr__(self, "E", E)
        if self.solver is None:
            object.__setattr__(self, "solver", SolverConfig())


@dataclass
class CapacityResult:
    value: float
    minimizer_u: np.ndarray
    minimizer_G: GradientSequence
    lower_bound: float
    status: str
    iterations: int = 0
    final_step: Optional[float] = None
    lp_part: float = 0.0
    grad_part: float = 0.0
    starts: Dict[str, float] = field(default_factory=dict)
    winner: str = ""

    def to_json(self) -> dict:
        return {"value": self.value, "minimizer_u": self.minimizer_u.tolist(),
                "minimizer_G": self.minimizer_G.to_json(), "lower_bound": self.lower_bound,
                "status": self.status, "iterations": self.iterations, "final_step": self.final_step,
                "lp_part": self.lp_part, "grad_part": self.grad_part, "starts": self.starts,
                "winner": self.winner}


def evaluate_admissible(space: MetricMeasureSpace, u, params: BesovParams) -> float:
    """Objective ``||u||_{N}^p`` with exact per-scale minimal gradients."""
    return besov_norm(space, u, params, "minimal").total ** params.p


# --------------------------------------------------------------------------
# cutoff functions


def cutoff_admissible(space: MetricMeasureSpace, covering: Covering, i: int) -> np.ndarray:
    """``max(0, 1 - 2**i dist(x, U_i))`` with ``U_i`` the union of the class-``i`` balls."""
    members = np.zeros(space.n, dtype=bool)
    for b in covering.balls:
        if radius_class(b.radius) == i:
            members |= space.ball_mask(b.center, b.radius)
    if not members.any():
        warnings.warn(f"covering has no ball of class {i}; cutoff is identically zero")
        return np.zeros(space.n)
    dist = space.dist[:, members].min(axis=1)
    return np.maximum(0.0, 1.0 - math.ldexp(1.0, i) * dist)


def covering_cutoff(space: MetricMeasureSpace, covering: Covering) -> np.ndarray:
    """Pointwise max of the class cutoffs; admissible for any set the covering covers."""
    u = np.zeros(space.n)
    for i in covering.classes:
        u = np.maximum(u, cutoff_admissible(space, covering, i))
    return u


def cutoff_is_lipschitz(space: MetricMeasureSpace, covering: Covering, i: int) -> bool:
    return not lipschitz_violations(space, cutoff_admissible(space, covering, i), math.ldexp(1.0, i))


# --------------------------------------------------------------------------
# convex joint solve


def _layout(space: MetricMeasureSpace, E: np.ndarray):
    in_E = np.zeros(space.n, dtype=bool)
    in_E[E] = True
    free = np.flatnonzero(~in_E)
    col = -np.ones(space.n, dtype=int)
    col[free] = np.arange(free.size)
    return in_E, free, col


def _joint_lp(space, E, params):
    """``p = q = 1``: minimize ``sum w u + sum_k sum_x w g_k`` as one LP."""
    in_E, free, col = _layout(space, E)
    w, s = space.weight, params.s
    f = free.size
    blocks = []                                  # (scale pairs, column offset of g_k)
    offset = f
    for k, sp in space.scale_pairs.items():
        keep = ~(in_E[sp.i] & in_E[sp.j])
        if keep.any():
            blocks.append((sp, keep, offset))
            offset += space.n
    c = np.zeros(offset)
    c[:f] = w[free]
    for _, _, off in blocks:
        c[off:off + space.n] = w
    rows, cols, vals, rhs = [], [], [], []
    r = 0
    for sp, keep, off in blocks:
        for i, j, d in zip(sp.i[keep], sp.j[keep], sp.d[keep]):
            inv = d ** -s
            for sign in (1.0, -1.0):
                # sign*(u_i - u_j)/d^s - g_i - g_j <= 0, constants moved right
                b = 0.0
                for x, sx in ((i, sign), (j, -sign)):
                    if in_E[x]:
                        b -= sx * inv
                    else:
                        rows.append(r); cols.append(col[x]); vals.append(sx * inv)
                rows += [r, r]; cols += [off + i, off + j]; vals += [-1.0, -1.0]
                rhs.append(b)
                r += 1
    bounds = [(0.0, 1.0)] * f + [(0.0, None)] * (offset - f)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(r, offset)) if r else None
    res = linprog(c, A_ub=A, b_ub=np.array(rhs) if r else None, bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverError(f"joint linear program failed ({res.message})")
    u = np.ones(space.n)
    u[free] = np.clip(res.x[:f], 0.0, 1.0)
    return u, int(getattr(res, "nit", 0) or 0)


def _joint_conic(space, E, params, tol):
    import cvxpy as cp

    in_E, free, col = _layout(space, E)
    w, s, p, q = space.weight, params.s, params.p, params.q
    uf = cp.Variable(free.size)
    P = sparse.csr_matrix((np.ones(free.size), (free, np.arange(free.size))), shape=(space.n, free.size))
    u = P @ uf + in_E.astype(float)
    wp = w ** (1 / p)
    cons = [uf >= 0, uf <= 1]
    parts = []
    for k, sp in space.scale_pairs.items():
        keep = ~(in_E[sp.i] & in_E[sp.j])
        if not keep.any():
            continue
        ii, jj, dd = sp.i[keep], sp.j[keep], sp.d[keep]
        g = cp.Variable(space.n, nonneg=True)
        D = sparse.csr_matrix((np.concatenate([dd ** -s, -dd ** -s]),
                               (np.tile(np.arange(ii.size), 2), np.concatenate([ii, jj]))),
                              shape=(ii.size, space.n))
        cons += [cp.abs(D @ u) <= g[ii] + g[jj]]
        parts.append(cp.pnorm(cp.multiply(wp, g), p))
    lp = cp.pnorm(cp.multiply(wp, u), p)
    grad = cp.norm(cp.hstack(parts), q) if parts else 0
    prob = cp.Problem(cp.Minimize(lp + grad), cons)
    try:
        prob.solve(solver="CLARABEL", tol_gap_rel=min(tol, 1e-8), tol_feas=1e-9)
    except (cp.error.SolverError, TypeError):
        prob.solve(solver="CLARABEL")
    if uf.value is None or prob.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"joint conic program ended with status {prob.status}")
    out = np.ones(space.n)
    out[free] = np.clip(np.asarray(uf.value), 0.0, 1.0)
    iters = prob.solver_stats.num_iters if prob.solver_stats else 0
    return out, int(iters or 0)


# --------------------------------------------------------------------------
# nonconvex fallback


def _pattern_search(space, E, params, u0, max_evals):
    """Coordinate pattern search on the free values, ascending index, halving steps."""
    free = np.setdiff1d(np.arange(space.n), E)
    u = u0.copy()
    best = evaluate_admissible(space, u, params)
    evals, step = 1, 0.5
    while step >= 1 / 64 and evals < max_evals:
        improved = False
        for x in free:
            for delta in (-step, step):
                trial = u.copy()
                trial[x] = min(1.0, max(0.0, u[x] + delta))
                if trial[x] == u[x]:
                    continue
                val = evaluate_admissible(space, trial, params)
                evals += 1
                if val < best:
                    u, best, improved = trial, val, True
                    break
            if evals >= max_evals:
                break
        if not improved:
            step /= 2
    return u, evals, step


# --------------------------------------------------------------------------


def _warm_starts(space, E, params, config, coverings, extra_starts):
    chi = np.zeros(space.n)
    chi[E] = 1.0
    starts = [("one", np.ones(space.n)), ("indicator", chi)]
    if config.cutoff_start and not coverings and params.s < 1:
        cov = netrusov_content(space, E, Gauge.power(params.s * params.p), params.theta, 1.0,
                               "greedy").covering
        starts.append(("cutoff", covering_cutoff(space, cov)))
    starts = starts[:max(config.restarts, 1)]
    for t, cov in enumerate(coverings or []):
        if not cov.covers(space, E):
            raise ValueError("warm-start covering does not cover the set")
        starts.append((f"cutoff{t}", covering_cutoff(space, cov)))
    for t, u in enumerate(extra_starts or []):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if u.shape != (space.n,):
            raise ValueError("extra start has the wrong length")
        u[E] = 1.0
        starts.append((f"extra{t}", u))
    return starts


def capacity(problem: CapacityProblem, coverings: Optional[Sequence[Covering]] = None,
             extra_starts: Optional[Sequence[np.ndarray]] = None) -> CapacityResult:
    """Besov capacity ``C^s_{p,q}(E)`` as a certified upper bound.

    ``coverings`` supply cutoff warm starts (by default one greedy cover is
    computed); ``extra_starts`` are admissible functions for supersets, used
    to make comparisons between nested sets exact.
    """
    space, E, params, config = problem.space, problem.E, problem.params, problem.solver
    if E.size == 0:
        if not config.allow_empty:
            raise ValueError("capacity of empty set is 0 by convention")
        return CapacityResult(0.0, np.zeros(space.n), GradientSequence(space.n), 0.0, "converged")
    convex = params.p >= 1 and params.q >= 1
    starts = _warm_starts(space, E, params, config, coverings, extra_starts)
    iterations, final_step = 0, None
    status = "converged" if convex else "upper-bound-only"
    if E.size == space.n:
        pass
    elif convex:
        try:
            if params.p == 1 and params.q == 1:
                u, iterations = _joint_lp(space, E, params)
            else:
                u, iterations = _joint_conic(space, E, params, config.tol)
            starts.append(("joint", u))
        except SolverError as exc:
            log.warning("joint solve failed, keeping warm starts: %s", exc)
            status = "iteration-cap"
    else:
        vals = [evaluate_admissible(space, u, params) for _, u in starts]
        u0 = starts[int(np.argmin(vals))][1]
        u, iterations, final_step = _pattern_search(space, E, params, u0, config.max_evals)
        starts.append(("pattern", u))

    scores: Dict[str, float] = {}
    best = None
    for name, u in starts:
        norm = besov_norm(space, u, params, "minimal")
        val = norm.total ** params.p
        scores[name] = val
        if best is None or val < best[0]:
            best = (val, name, u, norm)
    val, name, u, norm = best
    if not norm.exact:
        status = "upper-bound-only"
    if check_gradient(space, u, norm.gradient, params.s) or np.any(u[E] != 1.0) \
            or u.min() < 0 or u.max() > 1:
        raise SolverError("returned minimizer failed the admissibility check")
    return CapacityResult(val, u, norm.gradient, space.measure(E), status, iterations, final_step,
                          norm.lp_part, norm.grad_part, scores, name)


def capacity_of(space: MetricMeasureSpace, E, params: BesovParams, **kw) -> CapacityResult:
    config = kw.pop("config", None)
    return capacity(CapacityProblem(space, E, params, config), **kw)


# --------------------------------------------------------------------------
# order properties


def _random_subset(rng, n, lo=1, hi=None):
    hi = n if hi is None else hi
    size = int(rng.integers(lo, hi + 1))
    return np.sort(rng.choice(n, size=size, replace=False))


def check_monotonicity(space: MetricMeasureSpace, params: BesovParams, trials: int, seed: int,
                       config: Optional[SolverConfig] = None) -> dict:
    """Nested ``E1 <= E2``: the ``E2`` minimizer is admissible for ``E1``, so the
    reported values are monotone exactly; the plain solve is also compared."""
    rng = np.random.default_rng(seed)
    failures, plain_gap, witnesses = 0, 0.0, []
    for _ in range(trials):
        E2 = _random_subset(rng, space.n)
        E1 = np.sort(rng.choice(E2, size=int(rng.integers(1, E2.size + 1)), replace=False))
        r2 = capacity_of(space, E2, params, config=config)
        r1 = capacity_of(space, E1, params, config=config, extra_starts=[r2.minimizer_u])
        if not r1.value <= r2.value:
            failures += 1
            witnesses.append({"E1": E1.tolist(), "E2": E2.tolist(), "v1": r1.value, "v2": r2.value})
        plain = capacity_of(space, E1, params, config=config).value
        plain_gap = max(plain_gap, (plain - r2.value) / r2.value)
        for r, E in ((r1, E1), (r2, E2)):
            if not space.measure(E) <= r.value + 1e-9 * space.total_mass:
                failures += 1
                witnesses.append({"E": E.tolist(), "value": r.value, "measure": space.measure(E)})
    return {"trials": trials, "failures": failures, "max_plain_excess": plain_gap,
            "witnesses": witnesses[:5]}


def check_subadditivity(space: MetricMeasureSpace, params: BesovParams, trials: int, seed: int,
                        family_size: int = 3, config: Optional[SolverConfig] = None) -> dict:
    """Empirical constant ``max C(union)^r / sum C(E_i)^r`` with ``r = min(1, q/p)``."""
    rng = np.random.default_rng(seed)
    r = params.theta
    rhos = []
    for _ in range(trials):
        family = [_random_subset(rng, space.n, 1, max(1, space.n // 3)) for _ in range(family_size)]
        union = np.unique(np.concatenate(family))
        top = capacity_of(space, union, params, config=config).value ** r
        rhos.append(top / sum(capacity_of(space, E, params, config=config).value ** r for E in family))
    return {"trials": trials, "exponent": r, "constant": float(max(rhos)) if rhos else None,
            "finite": bool(np.all(np.isfinite(rhos)))}


def check_decreasing_compacts(space: MetricMeasureSpace, params: BesovParams, trials: int, seed: int,
                              config: Optional[SolverConfig] = None) -> dict:
    """A decreasing chain that stabilizes: values are monotone along the chain
    (via minimizer reuse) and equal the value of the intersection once stable."""
    rng = np.random.default_rng(seed)
    failures, witnesses = 0, []
    for _ in range(trials):
        chain = [np.arange(space.n)]
        while chain[-1].size > 1 and rng.random() < 0.8:
            cur = chain[-1]
            chain.append(np.sort(rng.choice(cur, size=int(rng.integers(1, cur.size)), replace=False)))
        chain += [chain[-1]] * 2
        values, prev_u = [], None
        for K in chain:
            res = capacity_of(space, K, params, config=config,
                              extra_starts=None if prev_u is None else [prev_u])
            values.append(res.value)
            prev_u = res.minimizer_u
        limit = capacity_of(space, chain[-1], params, config=config,
                            extra_starts=[capacity_of(space, chain[-4], params, config=config).minimizer_u]
                            if len(chain) >= 4 else None).value
        monotone = all(b <= a for a, b in zip(values, values[1:]))
        if not monotone or values[-1] != min(values[-3:]) or not limit <= values[-3]:
            failures += 1
            witnesses.append({"values": values, "limit": limit})
    return {"trials": trials, "failures": failures, "witnesses": witnesses[:5]}


def check_outer(space: MetricMeasureSpace, params: BesovParams, trials: int, seed: int,
                config: Optional[SolverConfig] = None) -> dict:
    """On a finite space every set is open, so outer regularity reduces to
    monotonicity: ``value(E) <= value(U)`` for supersets, with equality at ``U = E``."""
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(trials):
        E = _random_subset(rng, space.n, 1, max(1, space.n // 2))
        rest = np.setdiff1d(np.arange(space.n), E)
        supersets = [E] + [np.union1d(E, rng.choice(rest, size=m, replace=False))
                           for m in range(1, min(3, rest.size) + 1)]
        vals = []
        for U in supersets:
            rU = capacity_of(space, U, params, config=config)
            vals.append(capacity_of(space, E, params, config=config,
                                    extra_starts=[rU.minimizer_u]).value)
            if not vals[-1] <= rU.value:
                failures += 1
        base = capacity_of(space, E, params, config=config).value
        if min(vals) > base:
            failures += 1
    return {"trials": trials, "failures": failures,
            "note": "every subset of a finite space is open; outer regularity is monotonicity"}
