"""Netrusov-Hausdorff cocontent and codimension-d Hausdorff content.

Both are infima over coverings of ``E`` by open balls.  On a finite space
the membership of ``B(x, r)`` only changes when ``r`` crosses a distance
from ``x``, and the dyadic class of a ball only changes at powers of two.
Within a fixed membership interval ``(d_t, d_{t+1}]`` and a fixed class the
cheapest radius is the largest one, because the gauge is increasing.  The
candidate family therefore holds, per center and membership interval, the
top radius of the interval (attained, balls are open) and the top of every
lower class meeting the interval (approached from below by a relative
``1e-9``).  Classes are considered down to two below the class of the
minimal distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from .space import RADIUS_BUMP, Ball, MetricMeasureSpace, radius_class

DEFAULT_NODE_LIMIT = 2 ** 20


@dataclass(frozen=True)
class Gauge:
    """Increasing gauge ``phi``: a power ``t**d`` or a monotone sample table.

    Tables interpolate linearly in log-log coordinates and extrapolate with
    the power law of the first and last segments.
    """

    kind: str
    d: float = 0.0
    ts: Tuple[float, ...] = ()
    vals: Tuple[float, ...] = ()

    @classmethod
    def power(cls, d: float) -> "Gauge":
        if not d >= 0:
            raise ValueError(f"power gauge needs d >= 0, got {d!r}")
        return cls("power", d=float(d))

    @classmethod
    def table(cls, ts: Sequence[float], vals: Sequence[float]) -> "Gauge":
        ts, vals = tuple(map(float, ts)), tuple(map(float, vals))
        if len(ts) < 2 or len(ts) != len(vals):
            raise ValueError("table gauge needs at least two (t, phi) samples")
        if any(b <= a for a, b in zip(ts, ts[1:])) or ts[0] <= 0:
            raise ValueError("table gauge abscissae must be positive and strictly increasing")
        if any(v <= 0 for v in vals) or any(b < a for a, b in zip(vals, vals[1:])):
            raise ValueError("table gauge values must be positive and nondecreasing")
        return cls("table", ts=ts, vals=vals)

    @classmethod
    def parse(cls, text: str) -> "Gauge":
        """``pow:0.5`` or ``table:0.1=0.3,1=1,2=1.5``."""
        kind, _, body = text.partition(":")
        if kind in ("pow", "power"):
            return cls.power(float(body))
        if kind == "table":
            pairs = [item.split("=") for item in body.split(",") if item]
            return cls.table([float(a) for a, _ in pairs], [float(b) for _, b in pairs])
        raise ValueError(f"cannot parse gauge {text!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            return t ** self.d
        lt, lv = np.log(self.ts), np.log(self.vals)
        x = np.log(t)
        out = np.interp(x, lt, lv)
        lo_slope = (lv[1] - lv[0]) / (lt[1] - lt[0])
        hi_slope = (lv[-1] - lv[-2]) / (lt[-1] - lt[-2])
        out = np.where(x < lt[0], lv[0] + lo_slope * (x - lt[0]), out)
        out = np.where(x > lt[-1], lv[-1] + hi_slope * (x - lt[-1]), out)
        return np.exp(out)

    def admissible(self, s: float, p: float, a: float = 1.0, shells: int = 60) -> bool:
        """Whether ``int_0^a phi(t)**(-1/p) t**(s-1) dt`` is finite.

        Power gauges: exactly ``d < s p``.  Tables: dyadic shell integrals
        must decay geometrically over the last shells.
        """
        if self.kind == "power":
            return self.d < s * p
        f = lambda t: float(self(t)) ** (-1 / p) * t ** (s - 1)
        parts = []
        for m in range(shells):
            hi = a * 2.0 ** -m
            val, _ = quad(f, hi / 2, hi)
            parts.append(val)
        ratios = np.array(parts[-6:][1:]) / np.array(parts[-6:][:-1])
        return bool(np.all(ratios < 0.999))

    def describe(self) -> str:
        if self.kind == "power":
            return f"pow:{self.d:g}"
        return "table:" + ",".join(f"{t:g}={v:g}" for t, v in zip(self.ts, self.vals))


@dataclass(frozen=True)
class Covering:
    balls: Tuple[Ball, ...]

    @classmethod
    def of(cls, balls) -> "Covering":
        return cls(tuple(sorted((Ball(int(b.center), float(b.radius)) for b in balls),
                                key=lambda b: (b.center, b.radius))))

    @property
    def classes(self) -> Dict[int, List[int]]:
        out: Dict[int, List[int]] = {}
        for t, b in enumerate(self.balls):
            out.setdefault(radius_class(b.radius), []).append(t)
        return dict(sorted(out.items()))

    def union_mask(self, space: MetricMeasureSpace, cls: Optional[int] = None) -> np.ndarray:
        mask = np.zeros(space.n, dtype=bool)
        for t, b in enumerate(self.balls):
            if cls is None or radius_class(b.radius) == cls:
                mask |= space.ball_mask(b.center, b.radius)
        return mask

    def covers(self, space: MetricMeasureSpace, E) -> bool:
        return bool(np.all(self.union_mask(space)[np.asarray(E, dtype=int)]))

    def to_json(self) -> List[dict]:
        return [{"center": b.center, "radius": b.radius, "class": radius_class(b.radius)}
                for b in self.balls]


@dataclass
class ContentResult:
    value: float
    covering: Covering
    method: str              # "exact" or "greedy"
    complete: bool = True    # False if branch-and-bound hit its node limit
    candidates: int = 0
    nodes: int = 0
    gap: Optional[float] = None

    def to_json(self) -> dict:
        return {"value": self.value, "method": self.method, "complete": self.complete,
                "candidates": self.candidates, "nodes": self.nodes, "gap": self.gap,
                "covering": self.covering.to_json()}


def _class_sums(space, balls, gauge):
    sums: Dict[int, float] = {}
    for b in balls:
        sums[radius_class(b.radius)] = sums.get(radius_class(b.radius), 0.0) + \
            space.ball_measure(b.center, b.radius) / float(gauge(b.radius))
    return sums


def _aggregate(sums: Dict[int, float], theta: float) -> float:
    if not sums:
        return 0.0
    return sum(v ** theta for _, v in sorted(sums.items())) ** (1 / theta)


def covering_cost(space: MetricMeasureSpace, covering: Covering, gauge: Gauge, theta: float) -> float:
    """``[sum_i (sum_{j in I_i} mu(B_j)/phi(r_j))**theta]**(1/theta)``."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    return _aggregate(_class_sums(space, covering.balls, gauge), theta)


def hausdorff_cost(space: MetricMeasureSpace, covering: Covering, d: float) -> float:
    return float(sum(space.ball_measure(b.center, b.radius) / b.radius ** d for b in covering.balls))


# --------------------------------------------------------------------------
# candidate balls


@dataclass(frozen=True)
class Candidate:
    center: int
    radius: float
    cls: int
    ratio: float      # mu(B) / phi(r)
    mask: int         # bitmask over positions in E


def radius_cap(space: MetricMeasureSpace, R: float) -> float:
    if math.isfinite(R):
        if not R > 0:
            raise ValueError("R must be positive")
        return float(R)
    return 2 * space.diameter if space.diameter > 0 else 1.0


def candidate_balls(space: MetricMeasureSpace, E, gauge: Gauge, R: float = math.inf,
                    classless: bool = False) -> List[Candidate]:
    """Pruned candidate family (see module docstring)."""
    E = np.asarray(E, dtype=int)
    pos = {int(e): t for t, e in enumerate(E)}
    r_cap = radius_cap(space, R)
    i_bottom = radius_class(min(space.d_min, r_cap)) + 2
    raw: List[Candidate] = []
    for x in range(space.n):
        row = space.dist[x]
        levels = np.unique(row)                     # 0 = levels[0] < levels[1] < ...
        tops = np.append(levels[1:], math.inf)
        for lo, hi in zip(levels, tops):
            top = min(hi, r_cap)
            if not top > lo:
                continue
            radii = [top]
            if not classless:
                c = radius_class(top)
                for i in range(c + 1, i_bottom + 1):
                    r = math.ldexp(1.0, 1 - i) * (1 - RADIUS_BUMP)
                    if r <= lo:
                        break
                    radii.append(r)
            for r in radii:
                members = np.flatnonzero(row < r)
                mask = 0
                for y in members:
                    t = pos.get(int(y))
                    if t is not None:
                        mask |= 1 << t
                if mask == 0:
                    continue
                ratio = float(space.weight[members].sum()) / float(gauge(r))
                raw.append(Candidate(x, float(r), radius_class(r), ratio, mask))
    return prune_candidates(raw, classless)


def prune_candidates(raw: Sequence[Candidate], classless: bool = False) -> List[Candidate]:
    """Drop candidates another same-class candidate beats on coverage and cost."""
    key = (lambda c: 0) if classless else (lambda c: c.cls)
    best: Dict[Tuple[int, int], Candidate] = {}
    for c in raw:
        k = (key(c), c.mask)
        if k not in best or c.ratio < best[k].ratio:
            best[k] = c
    pool = sorted(best.values(), key=lambda c: (key(c), c.ratio, c.center, c.radius))
    kept: List[Candidate] = []
    for a in pool:
        dominated = any(key(b) == key(a) and (a.mask | b.mask) == b.mask and b.ratio <= a.ratio
                        for b in kept)
        if not dominated:
            kept.append(a)
    return sorted(kept, key=lambda c: (c.cls, c.center, c.radius))


# --------------------------------------------------------------------------
# search


def _cost_with(sums: Dict[int, float], c: Candidate, theta: float, classless: bool) -> float:
    k = 0 if classless else c.cls
    trial = dict(sums)
    trial[k] = trial.get(k, 0.0) + c.ratio
    return _aggregate(trial, theta)


def _greedy(cands: List[Candidate], full: int, theta: float, classless: bool) -> List[int]:
    chosen: List[int] = []
    sums: Dict[int, float] = {}
    covered = 0
    while covered != full:
        base = _aggregate(sums, theta)
        best, best_score = None, -1.0
        for t, c in enumerate(cands):
            new = bin(c.mask & ~covered).count("1")
            if not new:
                continue
            marginal = _cost_with(sums, c, theta, classless) - base
            score = new / marginal if marginal > 0 else math.inf
            if score > best_score:
                best, best_score = t, score
        c = cands[best]
        chosen.append(best)
        covered |= c.mask
        k = 0 if classless else c.cls
        sums[k] = sums.get(k, 0.0) + c.ratio
    # prune redundant balls, most expensive first
    for t in sorted(chosen, key=lambda t: -cands[t].ratio):
        rest = [u for u in chosen if u != t]
        cov = 0
        for u in rest:
            cov |= cands[u].mask
        if cov == full:
            chosen = rest
    return sorted(chosen)


def _selection_cost(cands, chosen, theta, classless):
    sums: Dict[int, float] = {}
    for t in chosen:
        k = 0 if classless else cands[t].cls
        sums[k] = sums.get(k, 0.0) + cands[t].ratio
    return _aggregate(sums, theta)


def _branch_and_bound(cands: List[Candidate], full: int, theta: float, classless: bool,
                      incumbent: List[int], node_limit: int):
    m_bits = full.bit_length()
    covering_of = [[t for t, c in enumerate(cands) if c.mask >> e & 1] for e in range(m_bits)]
    for lst in covering_of:
        lst.sort(key=lambda t: (cands[t].ratio, t))
    best = list(incumbent)
    best_cost = _selection_cost(cands, best, theta, classless)
    nodes = 0
    complete = True

    def recurse(covered: int, chosen: List[int], sums: Dict[int, float]):
        nonlocal best, best_cost, nodes, complete
        nodes += 1
        if nodes > node_limit:
            complete = False
            return
        cost = _aggregate(sums, theta)
        if cost >= best_cost:
            return
        if covered == full:
            best, best_cost = sorted(chosen), cost
            return
        # branch on the uncovered element with the fewest covering candidates
        e = min((e for e in range(m_bits) if not covered >> e & 1),
                key=lambda e: (len(covering_of[e]), e))
        for t in covering_of[e]:
            if t in chosen:
                continue
            c = cands[t]
            k = 0 if classless else c.cls
            sums[k] = sums.get(k, 0.0) + c.ratio
            chosen.append(t)
            recurse(covered | c.mask, chosen, sums)
            chosen.pop()
            sums[k] -= c.ratio
            if sums[k] <= 0 and not any((0 if classless else cands[u].cls) == k for u in chosen):
                del sums[k]
            if not complete:
                return

    recurse(0, [], {})
    return best, nodes, complete


def _search(space, E, gauge, theta, R, method, classless, node_limit) -> ContentResult:
    E = np.unique(np.asarray(E, dtype=int))
    if E.size == 0:
        raise ValueError("content of an empty set is not defined here")
    if not theta > 0:
        raise ValueError("theta must be positive")
    if method not in ("exact", "greedy"):
        raise ValueError(f"unknown method {method!r}")
    cands = candidate_balls(space, E, gauge, R, classless)
    full = (1 << E.size) - 1
    chosen = _greedy(cands, full, theta, classless)
    nodes, complete = 0, True
    greedy_cost = _selection_cost(cands, chosen, theta, classless)
    if method == "exact":
        chosen, nodes, complete = _branch_and_bound(cands, full, theta, classless, chosen, node_limit)
    cov = Covering.of(Ball(cands[t].center, cands[t].radius) for t in chosen)
    value = hausdorff_cost(space, cov, gauge.d) if classless else covering_cost(space, cov, gauge, theta)
    gap = greedy_cost / value if method == "exact" and value > 0 else None
    return ContentResult(value, cov, method, complete, len(cands), nodes, gap)


def netrusov_content(space: MetricMeasureSpace, E, gauge: Gauge, theta: float, R: float = math.inf,
                     method: str = "exact", node_limit: int = DEFAULT_NODE_LIMIT) -> ContentResult:
    """Netrusov-Hausdorff cocontent of ``E`` over the candidate ball family.

    ``method="exact"`` runs branch-and-bound seeded with the greedy cover and
    is exact over the candidate family when ``complete`` is true.
    """
    return _search(space, E, gauge, theta, R, method, False, node_limit)


def hausdorff_content(space: MetricMeasureSpace, E, d: float, R: float = math.inf,
                      method: str = "exact", node_limit: int = DEFAULT_NODE_LIMIT) -> ContentResult:
    """Codimension-``d`` Hausdorff content: ``inf sum mu(B_j) / r_j**d``."""
    return _search(space, E, Gauge.power(d), 1.0, R, method, True, node_limit)


# --------------------------------------------------------------------------
# capacity versus content


def annulus_radius(space: MetricMeasureSpace, E) -> Optional[Tuple[int, float]]:
    """Smallest ``R`` (with its center) such that ``E`` lies in ``B(x0, R)`` and
    ``B(x0, 8R) \\ B(x0, 4R)`` is nonempty; ``None`` if no center works."""
    E = np.asarray(E, dtype=int)
    best = None
    for x0 in range(space.n):
        row = space.dist[x0]
        rE = float(row[E].max())
        for z in range(space.n):
            dz = float(row[z])
            R0 = max(rE, dz / 8) * (1 + RADIUS_BUMP)
            if R0 > 0 and 4 * R0 <= dz < 8 * R0 and rE < R0:
                if best is None or R0 < best[1]:
                    best = (x0, R0)
    return best


@dataclass
class CompareRow:
    set_id: str
    size: int
    cap: float
    nh_upper: float
    nh_lower: Optional[float]
    ratio54: float
    ratio55: Optional[float]
    status: str
    cutoff_bound: float = math.nan
    cutoff_ok: bool = True
    annulus_R: Optional[float] = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def compare_capacity_content(space: MetricMeasureSpace, params, family: Dict[str, Sequence[int]],
                             R: float = 1.0, d: Optional[float] = None, dilation: float = 5.0,
                             method: str = "exact", config=None) -> List[CompareRow]:
    """Capacity against the upper and lower cocontent bounds for every set in ``family``.

    The upper comparison uses the power gauge ``t**(sp)`` with exponent
    ``min(1, q/p)`` and radius bound ``R <= 1``; the lower one uses
    ``t**d`` (``d < sp``) with exponent ``q/p`` and radius ``dilation * R0``
    where ``R0`` is the annulus radius of the set.  Every covering found for
    the upper bound is handed to the capacity solver as a warm start, and the
    capacity is checked against the norm of its cutoff function.
    """
    from .capacity import CapacityProblem, capacity, covering_cutoff, evaluate_admissible

    params.require_fractional()
    if R > 1:
        raise ValueError("the upper comparison needs R <= 1")
    sp_ = params.s * params.p
    if d is None:
        d = 0.4 * sp_
    lower_gauge = Gauge.power(d)
    if not lower_gauge.admissible(params.s, params.p):
        raise ValueError(f"gauge t**{d} is not admissible: need d < s p = {sp_}")
    upper_gauge = Gauge.power(sp_)
    rows = []
    for set_id, E in family.items():
        E = np.unique(np.asarray(E, dtype=int))
        upper = netrusov_content(space, E, upper_gauge, params.theta, R, method)
        greedy = netrusov_content(space, E, upper_gauge, params.theta, R, "greedy")
        coverings = [upper.covering, greedy.covering]
        res = capacity(CapacityProblem(space, E, params, config), coverings=coverings)
        cut_vals = [evaluate_admissible(space, covering_cutoff(space, cv), params) for cv in coverings]
        cutoff_bound = min(cut_vals)
        status = "ok" if upper.complete else "nh-upper-incomplete"
        ann = annulus_radius(space, E)
        nh_lower = ratio55 = None
        ann_R = None
        if ann is None:
            status += ";annulus-unmet"
        else:
            ann_R = ann[1]
            low = netrusov_content(space, E, lower_gauge, params.q / params.p, dilation * ann_R, method)
            nh_lower = low.value
            ratio55 = nh_lower / res.value
            if not low.complete:
                status += ";nh-lower-incomplete"
        rows.append(CompareRow(str(set_id), int(E.size), res.value, upper.value, nh_lower,
                               res.value / upper.value, ratio55, status, cutoff_bound,
                               all(res.value <= v for v in cut_vals), ann_R))
    return rows
