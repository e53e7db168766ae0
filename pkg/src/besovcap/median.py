"""gamma-medians, their property suite, and the discrete median convolution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .space import MetricMeasureSpace


def _check_gamma(gamma: float) -> None:
    if not 0 < gamma <= 0.5:
        raise ValueError(f"gamma must lie in (0, 1/2], got {gamma!r}")


def _as_index(space: MetricMeasureSpace, A) -> np.ndarray:
    if A is None:
        return np.arange(space.n)
    idx = np.asarray(A)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    idx = idx.astype(int).ravel()
    if idx.size == 0:
        raise ValueError("gamma-median of an empty set")
    return idx


def _grouped(values: np.ndarray, weights: np.ndarray):
    """Distinct sorted values with the total weight sitting on each."""
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    distinct, start = np.unique(v, return_index=True)
    mass = np.add.reduceat(w, start)
    return distinct, mass


def _mass_above(mass: np.ndarray) -> np.ndarray:
    # above[t] = total weight on values strictly greater than distinct[t]
    rev = np.cumsum(mass[::-1])[::-1]
    return np.concatenate([rev[1:], [0.0]])


def _mass_below(mass: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(mass)[:-1]])


def weighted_gamma_median(values, weights, gamma: float) -> float:
    """``inf{a : mu({v > a}) < gamma * mu}`` for a finite weighted sample.

    The infimum is attained at one of the sample values, so a single sorted
    scan is exact.
    """
    _check_gamma(gamma)
    values = np.asarray(values, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("gamma-median of an empty set")
    distinct, mass = _grouped(values, weights)
    threshold = gamma * float(weights.sum())
    above = _mass_above(mass)
    t = int(np.flatnonzero(above < threshold)[0])
    return float(distinct[t])


def gamma_median(space: MetricMeasureSpace, u, A, gamma: float) -> float:
    """gamma-median of ``u`` over the point subset ``A`` (indices or a mask)."""
    idx = _as_index(space, A)
    u = np.asarray(u, dtype=float)
    return weighted_gamma_median(u[idx], space.weight[idx], gamma)


def weighted_median_spread(values, weights, gamma: float) -> float:
    """``inf_c`` of the gamma-median of ``|v - c|``, computed exactly.

    For a fixed ``c`` the median of ``|v - c|`` is the least half-length ``a``
    such that the weight outside ``[c - a, c + a]`` is below ``gamma * mu``.
    Minimizing over ``c`` therefore asks for the shortest interval with data
    endpoints leaving less than that weight outside.
    """
    _check_gamma(gamma)
    values = np.asarray(values, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("gamma-median of an empty set")
    distinct, mass = _grouped(values, weights)
    threshold = gamma * float(weights.sum())
    below = _mass_below(mass)
    above = _mass_above(mass)
    best = np.inf
    m = distinct.size
    for lo in range(m):
        # above is nonincreasing, so the admissible right endpoints form a suffix
        ok = np.flatnonzero(below[lo] + above[lo:] < threshold)
        if ok.size:
            hi = lo + int(ok[0])
            best = min(best, (distinct[hi] - distinct[lo]) / 2)
    return float(best)


def median_spread(space: MetricMeasureSpace, u, A, gamma: float) -> float:
    idx = _as_index(space, A)
    u = np.asarray(u, dtype=float)
    return weighted_median_spread(u[idx], space.weight[idx], gamma)


def remark_45_check(space: MetricMeasureSpace, u, A, gamma: float):
    """Return ``(lhs, rhs)`` for the factor-two median oscillation bound.

    ``lhs`` is the median of ``|u - m(u)|`` and ``rhs`` is twice the
    infimum over constants ``c`` of the median of ``|u - c|``.
    """
    idx = _as_index(space, A)
    u = np.asarray(u, dtype=float)
    w = space.weight[idx]
    m = weighted_gamma_median(u[idx], w, gamma)
    lhs = weighted_gamma_median(np.abs(u[idx] - m), w, gamma)
    rhs = 2 * weighted_median_spread(u[idx], w, gamma)
    return lhs, rhs


# --------------------------------------------------------------------------
# property suite


@dataclass
class PropertyTally:
    passed: int = 0
    failed: int = 0
    skipped: int = 0
    witnesses: List[dict] = None

    def __post_init__(self):
        if self.witnesses is None:
            self.witnesses = []

    def record(self, ok: bool, witness: dict, keep: int = 5):
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            if len(self.witnesses) < keep:
                self.witnesses.append(witness)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "failed": self.failed, "skipped": self.skipped,
                "witnesses": self.witnesses}


MEDIAN_PROPERTIES = ("a", "b", "c", "d", "e", "f", "g", "h")
# Slack on the measure ratio C >= mu(B)/mu(A) used by property (c).
_C_SLACK = 1 + 1e-9


def _random_subset(rng, n, min_size=1):
    size = int(rng.integers(min_size, n + 1))
    return np.sort(rng.choice(n, size=size, replace=False))


def check_median_properties(space: MetricMeasureSpace, trials: int, seed: int = 0,
                            negative_scaling: bool = True) -> Dict[str, dict]:
    """Randomized check of the monotonicity, scaling and Chebyshev properties of medians.

    Each trial draws ``u``, ``v >= u``, nested ``A`` in ``B``, a shift ``c``,
    a scale ``c >= 0`` and an exponent ``p``, then asserts properties
    (a)-(g) and the finite-space form of (h): for ``r`` below the minimal
    distance the median over ``B(x, r)`` equals ``u(x)``.

    Negative scalings are tallied separately under ``"e_negative"``; they
    are reported, not asserted.
    """
    rng = np.random.default_rng(seed)
    n = space.n
    tallies = {k: PropertyTally() for k in MEDIAN_PROPERTIES}
    neg = PropertyTally()
    r_small = space.d_min / 2 if n > 1 else 1.0
    for t in range(trials):
        u = rng.normal(size=n) * rng.choice([0.1, 1.0, 10.0])
        if rng.random() < 0.2:
            u = np.round(u)  # ties
        gamma = float(rng.uniform(1e-3, 0.5))
        gamma2 = float(rng.uniform(gamma, 0.5))
        B = _random_subset(rng, n)
        A = np.sort(rng.choice(B, size=int(rng.integers(1, B.size + 1)), replace=False))
        mA = gamma_median(space, u, A, gamma)

        # (a)
        m2 = gamma_median(space, u, A, gamma2)
        tallies["a"].record(mA >= m2, {"trial": t, "gamma": gamma, "gamma2": gamma2, "m": mA, "m2": m2})
        # (b)
        v = u + np.abs(rng.normal(size=n)) * (rng.random(n) < 0.5)
        mv = gamma_median(space, v, A, gamma)
        tallies["b"].record(mA <= mv, {"trial": t, "mu": mA, "mv": mv})
        # (c)
        C = space.measure(B) / space.measure(A) * _C_SLACK
        mB = gamma_median(space, u, B, gamma / C)
        tallies["c"].record(mA <= mB, {"trial": t, "C": C, "mA": mA, "mB": mB})
        # (d)
        c = float(rng.normal() * 5)
        md = gamma_median(space, u + c, A, gamma)
        tallies["d"].record(md == mA + c, {"trial": t, "c": c, "lhs": md, "rhs": mA + c})
        # (e), c >= 0
        c = float(rng.choice([0.0, rng.uniform(0, 5)]))
        me = gamma_median(space, c * u, A, gamma)
        tallies["e"].record(me == c * mA, {"trial": t, "c": c, "lhs": me, "rhs": c * mA})
        if negative_scaling:
            cn = -float(rng.uniform(0.1, 5))
            mn = gamma_median(space, cn * u, A, gamma)
            neg.record(mn == cn * mA, {"trial": t, "c": cn, "lhs": mn, "rhs": cn * mA})
        # (f)
        mabs = gamma_median(space, np.abs(u), A, gamma)
        tallies["f"].record(abs(mA) <= mabs, {"trial": t, "m": mA, "m_abs": mabs})
        # (g)
        p = float(rng.choice([0.25, 0.5, 1.0, 2.0, rng.uniform(0.1, 4)]))
        w = space.weight[A]
        avg = float((w * np.abs(u[A]) ** p).sum() / w.sum())
        bound = (avg / gamma) ** (1 / p)
        tallies["g"].record(mabs <= bound * (1 + 1e-12) + 1e-12,
                            {"trial": t, "p": p, "m_abs": mabs, "bound": bound})
        # (h)
        x = int(rng.integers(n))
        mh = gamma_median(space, u, space.ball_mask(x, r_small), gamma)
        tallies["h"].record(mh == u[x], {"trial": t, "x": x, "median": mh, "u": float(u[x])})
    out = {k: tallies[k].as_dict() for k in MEDIAN_PROPERTIES}
    if negative_scaling:
        out["e_negative"] = neg.as_dict()
    return out


# --------------------------------------------------------------------------
# partition of unity and median convolution


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    scale: float
    centers: np.ndarray
    phi: np.ndarray          # phi[i, x]
    overlap: int             # max number of enlarged balls 2B_i containing a point

    @property
    def lipschitz_bound(self) -> float:
        # |phi_i(x) - phi_i(y)| <= (2 * overlap / r) d(x, y)
        return 2 * self.overlap / self.scale


def greedy_net(space: MetricMeasureSpace, r: float) -> np.ndarray:
    """Maximal ``r``-separated set chosen in ascending index order."""
    centers: List[int] = []
    for x in range(space.n):
        if not centers or np.all(space.dist[x, centers] >= r):
            centers.append(x)
    return np.array(centers, dtype=int)


def partition_of_unity(space: MetricMeasureSpace, r: float) -> PartitionOfUnity:
    if not r > 0:
        raise ValueError(f"partition scale must be positive, got {r!r}")
    centers = greedy_net(space, r)
    d = space.dist[centers]                       # (m, n)
    psi = np.clip((2 * r - d) / r, 0.0, 1.0)
    total = psi.sum(axis=0)
    phi = psi / total
    overlap = int((d < 2 * r).sum(axis=0).max())
    return PartitionOfUnity(float(r), centers, phi, overlap)


def check_partition(space: MetricMeasureSpace, pu: PartitionOfUnity, tol: float = 1e-12) -> List[str]:
    """Violations of the partition-of-unity contract (empty when it holds)."""
    out = []
    r, phi = pu.scale, pu.phi
    d = space.dist[pu.centers]
    if np.any(phi < 0) or np.any(phi > 1 + tol):
        out.append("range: phi outside [0, 1]")
    if np.any(phi[d >= 2 * r] != 0):
        out.append("support: phi nonzero outside 2B_i")
    inner = d < r
    if np.any(phi[inner] < 1 / pu.overlap - tol):
        out.append("lower bound: phi < 1/overlap on B_i")
    if np.any(np.abs(phi.sum(axis=0) - 1) > tol):
        out.append("sum: partition does not sum to one")
    for a, c in enumerate(pu.centers):
        for b in pu.centers[a + 1:]:
            if space.dist[c, b] < r:
                out.append(f"net: centers {c} and {b} closer than r")
    if np.any(d.min(axis=0) >= r):
        out.append("cover: some point is not within r of a center")
    L = pu.lipschitz_bound
    diff = np.abs(phi[:, :, None] - phi[:, None, :])
    if np.any(diff > L * space.dist[None] + tol):
        i, x, y = np.argwhere(diff > L * space.dist[None] + tol)[0]
        out.append(f"lipschitz: phi[{i}] between {x} and {y} exceeds {L:.6g}-Lipschitz")
    return out


def ball_medians(space: MetricMeasureSpace, u, centers, r: float, gamma: float) -> np.ndarray:
    return np.array([gamma_median(space, u, space.ball_mask(int(c), r), gamma) for c in centers])


def median_convolution(space: MetricMeasureSpace, u, r: float, gamma: float,
                       pu: PartitionOfUnity = None) -> np.ndarray:
    """Discrete gamma-median convolution ``sum_i m(B_i) phi_i`` at scale ``r``."""
    _check_gamma(gamma)
    if pu is None:
        pu = partition_of_unity(space, r)
    m = ball_medians(space, u, pu.centers, pu.scale, gamma)
    return m @ pu.phi


def convolution_errors(space: MetricMeasureSpace, u, gamma: float, levels: Sequence[int]) -> np.ndarray:
    """Sup-norm distance between ``u`` and its convolution at radius ``2**-i`` per level."""
    u = np.asarray(u, dtype=float)
    return np.array([np.max(np.abs(median_convolution(space, u, 2.0 ** -i, gamma) - u))
                     for i in levels])
