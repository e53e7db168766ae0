"""Fractional s-gradients, mixed l^q(L^p) norms and Hajlasz-Besov norms.

A pair ``(x, y)`` with ``2**(-k-1) <= d(x, y) < 2**(-k)`` is controlled at
scale ``k``: ``|u(x) - u(y)| <= d(x, y)**s * (g_k(x) + g_k(y))``.  On a
finite space with positive weights the exceptional null set is empty, so
the inequality is checked on every pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .space import MetricMeasureSpace

GRADIENT_TOL = 1e-12


class SolverError(RuntimeError):
    """A convex solve failed; ``best`` carries the best feasible iterate."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float
    q: float = 1.0
    s_prime: Optional[float] = None
    gamma: float = 0.5

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"s must be positive, got {self.s!r}")
        if not 0 < self.p < math.inf:
            raise ValueError(f"p must lie in (0, inf), got {self.p!r}")
        if not self.q > 0:
            raise ValueError(f"q must lie in (0, inf], got {self.q!r}")
        if self.s_prime is None:
            object.__setattr__(self, "s_prime", self.s / 2)
        if not 0 < self.s_prime < self.s:
            raise ValueError(f"s_prime must lie in (0, s), got {self.s_prime!r}")
        if not 0 < self.gamma <= 0.5:
            raise ValueError(f"gamma must lie in (0, 1/2], got {self.gamma!r}")

    @property
    def p_tilde(self) -> float:
        return min(1.0, self.p)

    @property
    def theta(self) -> float:
        """Exponent ``min(1, q/p)`` of r-subadditivity and the upper content bound."""
        return min(1.0, self.q / self.p)

    def require_fractional(self):
        if not self.s < 1:
            raise ValueError(f"capacity/content comparison requires s < 1, got s={self.s!r}")

    def to_json(self) -> dict:
        return {"s": self.s, "p": self.p, "q": _jsonable(self.q), "s_prime": self.s_prime,
                "gamma": self.gamma}


def _jsonable(x: float):
    return "inf" if x == math.inf else x


@dataclass
class GradientSequence:
    """Per-scale nonnegative fields; scales not stored are identically zero."""

    n: int
    per_scale: Dict[int, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, k: int) -> np.ndarray:
        g = self.per_scale.get(k)
        return np.zeros(self.n) if g is None else g

    def __setitem__(self, k: int, g) -> None:
        self.per_scale[int(k)] = np.asarray(g, dtype=float)

    @property
    def scales(self) -> List[int]:
        return sorted(self.per_scale)

    def copy(self) -> "GradientSequence":
        return GradientSequence(self.n, {k: g.copy() for k, g in self.per_scale.items()})

    def is_nonnegative(self) -> bool:
        return all(np.all(g >= 0) for g in self.per_scale.values())

    def to_json(self) -> Dict[str, list]:
        return {str(k): self.per_scale[k].tolist() for k in self.scales}

    @classmethod
    def from_json(cls, doc: Dict[str, list], n: int) -> "GradientSequence":
        G = cls(n)
        for k, vals in doc.items():
            if len(vals) != n:
                raise ValueError(f"scale {k}: expected {n} values, got {len(vals)}")
            G[int(k)] = vals
        return G

    @classmethod
    def zeros(cls, n: int) -> "GradientSequence":
        return cls(n)


@dataclass(frozen=True)
class Violation:
    i: int
    j: int
    k: int
    slack: float

    def as_dict(self) -> dict:
        return {"i": self.i, "j": self.j, "k": self.k, "slack": self.slack}


def difference_quotients(space: MetricMeasureSpace, u, s: float, k: int) -> np.ndarray:
    sp = space.scale_pairs[k]
    u = np.asarray(u, dtype=float)
    return np.abs(u[sp.i] - u[sp.j]) / sp.d ** s


def check_gradient(space: MetricMeasureSpace, u, G: GradientSequence, s: float,
                   tol: float = GRADIENT_TOL) -> List[Violation]:
    """All pairs where the pointwise gradient inequality fails by more than ``tol``."""
    u = np.asarray(u, dtype=float)
    out: List[Violation] = []
    for k, sp in space.scale_pairs.items():
        g = G[k]
        lhs = np.abs(u[sp.i] - u[sp.j])
        rhs = sp.d ** s * (g[sp.i] + g[sp.j])
        bad = np.flatnonzero(lhs > rhs + tol)
        for b in bad:
            out.append(Violation(int(sp.i[b]), int(sp.j[b]), k, float(lhs[b] - rhs[b])))
    for k, g in G.per_scale.items():
        if np.any(g < 0):
            x = int(np.flatnonzero(g < 0)[0])
            out.append(Violation(x, x, k, float(-g[x])))
    return out


def canonical_gradient(space: MetricMeasureSpace, u, s: float) -> GradientSequence:
    """Half the largest difference quotient at each scale: always feasible."""
    G = GradientSequence(space.n)
    for k, sp in space.scale_pairs.items():
        Q = difference_quotients(space, u, s, k) / 2
        g = np.zeros(space.n)
        np.maximum.at(g, sp.i, Q)
        np.maximum.at(g, sp.j, Q)
        G[k] = g
    return G


def _repair(sp, Q: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Raise ``g`` until every pair constraint ``g_i + g_j >= Q`` holds exactly."""
    g = np.maximum(g, 0.0)
    short = Q - (g[sp.i] + g[sp.j])
    for b in np.flatnonzero(short > 0):
        i, j = sp.i[b], sp.j[b]
        deficit = Q[b] - (g[i] + g[j])
        if deficit > 0:
            bump = deficit * (1 + 1e-12) + 1e-300
            if g[i] <= g[j]:
                g[i] += bump
            else:
                g[j] += bump
    return g


def _lp_scale(sp, Q, w):
    """``min sum w g`` subject to ``g_i + g_j >= Q``, ``g >= 0`` (HiGHS)."""
    nodes = sp.nodes
    loc = {int(x): t for t, x in enumerate(nodes)}
    m = len(Q)
    A = np.zeros((m, nodes.size))
    A[np.arange(m), [loc[int(i)] for i in sp.i]] = -1.0
    A[np.arange(m), [loc[int(j)] for j in sp.j]] = -1.0
    res = linprog(w[nodes], A_ub=A, b_ub=-Q, bounds=(0, None), method="highs")
    if res.status != 0:
        raise SolverError(f"scale {sp.k}: linear program failed ({res.message})")
    g = np.zeros(w.size)
    g[nodes] = res.x
    return g


def _conic_scale(sp, Q, w, p):
    import cvxpy as cp

    nodes = sp.nodes
    loc = {int(x): t for t, x in enumerate(nodes)}
    ii = np.array([loc[int(i)] for i in sp.i])
    jj = np.array([loc[int(j)] for j in sp.j])
    scale = float(Q.max())
    x = cp.Variable(nodes.size, nonneg=True)
    obj = cp.sum(cp.multiply(w[nodes], cp.power(x, p)))
    prob = cp.Problem(cp.Minimize(obj), [x[ii] + x[jj] >= Q / scale])
    try:
        prob.solve(solver="CLARABEL")
    except cp.error.SolverError as exc:
        raise SolverError(f"scale {sp.k}: conic solve failed ({exc})")
    if x.value is None or prob.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"scale {sp.k}: conic solve ended with status {prob.status}")
    g = np.zeros(w.size)
    g[nodes] = np.asarray(x.value) * scale
    return g


def _pcost(w, g, p):
    return float((w * g ** p).sum())


@dataclass
class ScaleSolution:
    g: np.ndarray
    cost: float          # sum_x w(x) g(x)^p
    exact: bool


def minimal_gradient(space: MetricMeasureSpace, u, s: float, p: float, k: int,
                     max_iter: int = 50) -> ScaleSolution:
    """Cheapest ``g_k`` in ``L^p`` among those controlling every pair at scale ``k``.

    ``p == 1`` is a linear program, ``p > 1`` a smooth convex program. For
    ``p < 1`` the objective is concave; the result is the best of the
    canonical field and a reweighted-LP descent started from it, and is
    flagged as an upper bound only.
    """
    w = space.weight
    n = space.n
    if k not in space.scale_pairs:
        return ScaleSolution(np.zeros(n), 0.0, True)
    sp = space.scale_pairs[k]
    Q = difference_quotients(space, u, s, k)
    if not np.any(Q > 0):
        return ScaleSolution(np.zeros(n), 0.0, True)
    canon = np.zeros(n)
    np.maximum.at(canon, sp.i, Q / 2)
    np.maximum.at(canon, sp.j, Q / 2)
    best, best_cost = canon, _pcost(w, canon, p)
    if p >= 1:
        g = _lp_scale(sp, Q, w) if p == 1 else _conic_scale(sp, Q, w, p)
        g = _repair(sp, Q, g)
        c = _pcost(w, g, p)
        if c <= best_cost:
            best, best_cost = g, c
        return ScaleSolution(best, best_cost, True)
    # concave cost: majorize g**p by its tangent and solve the weighted LP
    g = canon.copy()
    delta = 1e-9 * float(Q.max())
    for _ in range(max_iter):
        lin_w = p * w * (g + delta) ** (p - 1)
        g = _repair(sp, Q, _lp_scale(sp, Q, lin_w))
        c = _pcost(w, g, p)
        if c < best_cost * (1 - 1e-12):
            best, best_cost = g, c
        else:
            break
    return ScaleSolution(best, best_cost, False)


def minimal_gradient_sequence(space: MetricMeasureSpace, u, s: float, p: float
                              ) -> Tuple[GradientSequence, bool]:
    G = GradientSequence(space.n)
    exact = True
    for k in space.active_scales:
        sol = minimal_gradient(space, u, s, p, k)
        G[k] = sol.g
        exact &= sol.exact
    return G, exact


def lp_norm(space: MetricMeasureSpace, f, p: float) -> float:
    f = np.abs(np.asarray(f, dtype=float))
    return float((space.weight * f ** p).sum()) ** (1 / p)


def lq_norm(a: Sequence[float], q: float) -> float:
    a = np.abs(np.asarray(a, dtype=float))
    if a.size == 0:
        return 0.0
    if q == math.inf:
        return float(a.max())
    return float((a ** q).sum()) ** (1 / q)


def mixed_norm(space: MetricMeasureSpace, G: GradientSequence, p: float, q: float) -> float:
    """``l^q`` norm over scales of the per-scale ``L^p`` norms."""
    return lq_norm([lp_norm(space, G[k], p) for k in G.scales], q)


@dataclass
class BesovNorm:
    lp_part: float
    grad_part: float
    gradient: GradientSequence
    exact: bool

    @property
    def total(self) -> float:
        return self.lp_part + self.grad_part

    def as_tuple(self):
        return self.lp_part, self.grad_part, self.total


def besov_norm(space: MetricMeasureSpace, u, params: BesovParams, mode: str = "minimal") -> BesovNorm:
    """``||u||_{L^p} + ||(g_k)||_{l^q(L^p)}`` with the gradient built per ``mode``.

    With ``mode="minimal"`` and ``p >= 1`` the per-scale problems are solved
    exactly; since the mixed norm is increasing in every per-scale norm this
    realizes the infimum over all fractional gradients.
    """
    if mode == "canonical":
        G, exact = canonical_gradient(space, u, params.s), False
    elif mode == "minimal":
        G, exact = minimal_gradient_sequence(space, u, params.s, params.p)
    else:
        raise ValueError(f"unknown gradient mode {mode!r}")
    return BesovNorm(lp_norm(space, u, params.p), mixed_norm(space, G, params.p, params.q), G, exact)


# --------------------------------------------------------------------------
# lattice and calculus rules


def max_gradient(Gu: GradientSequence, Gv: GradientSequence) -> GradientSequence:
    return sup_gradient([Gu, Gv])


def sup_gradient(Gs: Sequence[GradientSequence]) -> GradientSequence:
    if not Gs:
        raise ValueError("supremum of an empty family")
    n = Gs[0].n
    out = GradientSequence(n)
    for k in sorted(set().union(*(G.per_scale for G in Gs))):
        out[k] = np.max([G[k] for G in Gs], axis=0)
    return out


def derived_poincare_gradient(space: MetricMeasureSpace, H: GradientSequence,
                              params: BesovParams, window: Optional[Iterable[int]] = None
                              ) -> GradientSequence:
    """``g_k = (sum_{j >= k-2} 2**((k-j) s' p~) h_j**p)**(1/p)`` on the scale window."""
    p, sp_, pt = params.p, params.s_prime, params.p_tilde
    if window is None:
        window = space.scale_window()
    js = H.scales
    out = GradientSequence(H.n)
    for k in window:
        acc = np.zeros(H.n)
        for j in js:
            if j >= k - 2:
                acc += 2.0 ** ((k - j) * sp_ * pt) * H[j] ** p
        if np.any(acc > 0):
            out[k] = acc ** (1 / p)
    return out


def lipschitz_violations(space: MetricMeasureSpace, phi, L: float, tol: float = 1e-12):
    phi = np.asarray(phi, dtype=float)
    diff = np.abs(phi[:, None] - phi[None, :])
    return [(int(i), int(j)) for i, j in np.argwhere(diff > L * space.dist + tol) if i < j]


def leibniz_gradients(space: MetricMeasureSpace, u, Gu: GradientSequence, phi, L: float, s: float
                      ) -> Tuple[GradientSequence, GradientSequence]:
    """Gradients ``(rho, h)`` of the product ``u * phi`` for a bounded L-Lipschitz ``phi``."""
    if not 0 < s < 1:
        raise ValueError("the Leibniz rule needs 0 < s < 1")
    phi = np.asarray(phi, dtype=float)
    u = np.asarray(u, dtype=float)
    bad = lipschitz_violations(space, phi, L)
    if bad:
        i, j = bad[0]
        raise ValueError(f"phi is not {L}-Lipschitz: |phi({i}) - phi({j})| > L d({i},{j})")
    sup = float(np.abs(phi).max()) if phi.size else 0.0
    supp = (phi != 0).astype(float)
    au = np.abs(u)
    rho = GradientSequence(space.n)
    h = GradientSequence(space.n)
    for k in sorted(set(space.active_scales) | set(Gu.scales)):
        rho[k] = (Gu[k] * sup + 2.0 ** (k * (s - 1)) * L * au) * supp
        h[k] = (Gu[k] + 2.0 ** (s * k + 2) * au) * sup * supp
    return rho, h


def lipschitz_norm_bound(space: MetricMeasureSpace, phi, L: float, F, params: BesovParams):
    """``(||phi||_N, (1 + ||phi||_inf)(1 + L**s) mu(F)**(1/p))`` for phi supported in F."""
    params.require_fractional()
    phi = np.asarray(phi, dtype=float)
    F = np.asarray(F)
    mask = np.zeros(space.n, dtype=bool)
    mask[F.astype(int) if F.dtype != bool else np.flatnonzero(F)] = True
    if np.any(phi[~mask] != 0):
        raise ValueError("phi is not supported in F")
    bad = lipschitz_violations(space, phi, L)
    if bad:
        raise ValueError(f"phi is not {L}-Lipschitz at pair {bad[0]}")
    lhs = besov_norm(space, phi, params, "minimal").total
    rhs = (1 + float(np.abs(phi).max())) * (1 + L ** params.s) * space.measure(mask) ** (1 / params.p)
    return lhs, rhs


# --------------------------------------------------------------------------
# scalar inequalities


def elementary_inequality(a, beta: float) -> Tuple[float, float]:
    """``(sum a, (sum a**beta)**(1/beta))``; the first never exceeds the second for beta <= 1."""
    a = np.asarray(a, dtype=float)
    return float(a.sum()), float((a ** beta).sum()) ** (1 / beta)


def summing_constant(a: float, b: float) -> float:
    """Explicit constant for the discrete convolution bound with kernel ``a**-|m|``.

    With ``t = min(1, b)`` and ``S = sum_m a**(-t |m|) = (1 + a**-t)/(1 - a**-t)``
    the constant is ``S**(b/t)``: for ``b <= 1`` apply the elementary
    inequality termwise, for ``b > 1`` apply Hoelder with the kernel split
    as ``a**(-|m|/b') a**(-|m|/b)``.
    """
    if not a > 1 or not b > 0:
        raise ValueError("summing bound needs a > 1 and b > 0")
    t = min(1.0, b)
    r = a ** (-t)
    return ((1 + r) / (1 - r)) ** (b / t)


def summing_lemma_check(a: float, b: float, c: Dict[int, float]) -> dict:
    """Both sides of ``sum_k (sum_j a**-|j-k| c_j)**b <= C sum_j c_j**b`` evaluated exactly.

    ``c`` maps integer indices to nonnegative values. Outside the support
    the inner sums decay geometrically, so the two infinite tails are
    summed in closed form.
    """
    if not a > 1 or not b > 0:
        raise ValueError("summing bound needs a > 1 and b > 0")
    items = {int(j): float(v) for j, v in c.items() if v != 0}
    if any(v < 0 for v in items.values()):
        raise ValueError("c must be nonnegative")
    C = summing_constant(a, b)
    if not items:
        return {"lhs": 0.0, "rhs": 0.0, "constant": C, "ok": True}
    js = np.array(sorted(items))
    cs = np.array([items[j] for j in js])
    lo, hi = int(js[0]), int(js[-1])
    ks = np.arange(lo, hi + 1)
    inner = (a ** (-np.abs(js[None, :] - ks[:, None])) * cs[None, :]).sum(axis=1)
    lhs = float((inner ** b).sum())
    tail = a ** (-b) / (1 - a ** (-b))
    lhs += inner[-1] ** b * tail + inner[0] ** b * tail
    rhs = float((cs ** b).sum())
    return {"lhs": lhs, "rhs": rhs, "constant": C, "ok": lhs <= C * rhs * (1 + 1e-12)}


# --------------------------------------------------------------------------
# median Poincare inequality


def poincare_ratios(space: MetricMeasureSpace, u, params: BesovParams,
                    H: Optional[GradientSequence] = None) -> np.ndarray:
    """Ratios ``inf_c m(|u - c|, B(x, 2**-k)) / (2**-ks (avg_{B(x, 2**(1-k))} g_k**p)**(1/p))``.

    ``g`` is the derived gradient built from ``H`` (canonical by default).
    Returns one ratio per point and active scale; ``0/0`` counts as 0 and a
    positive numerator over a zero denominator as ``inf``.
    """
    from .median import weighted_median_spread

    u = np.asarray(u, dtype=float)
    if H is None:
        H = canonical_gradient(space, u, params.s)
    G = derived_poincare_gradient(space, H, params)
    w = space.weight
    out = []
    for k in space.active_scales:
        gk = G[k] ** params.p
        for x in range(space.n):
            inner = space.dist[x] < 2.0 ** -k
            outer = space.dist[x] < 2.0 ** (1 - k)
            lhs = weighted_median_spread(u[inner], w[inner], params.gamma)
            avg = float((w[outer] * gk[outer]).sum() / w[outer].sum())
            rhs = 2.0 ** (-k * params.s) * avg ** (1 / params.p)
            if rhs > 0:
                out.append(lhs / rhs)
            else:
                out.append(0.0 if lhs == 0 else math.inf)
    return np.array(out)
