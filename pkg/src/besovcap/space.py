"""Finite metric measure spaces.

A space is a dense distance matrix plus strictly positive point weights.
Balls are open, ``B(x, r) = {y : d(x, y) < r}``, everywhere in the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

TRIANGLE_TOL = 1e-12
RADIUS_BUMP = 1e-9

GENERATOR_KINDS = ("line-grid", "square-grid", "cantor", "random-cloud", "graph-metric")


class InvalidSpaceError(ValueError):
    """Raised when a space fails validation at load or construction time."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("invalid metric measure space: " + "; ".join(self.violations[:5]))


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    dist: np.ndarray
    weight: np.ndarray
    coords: Optional[np.ndarray] = None
    name: str = field(default="space", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dist", np.asarray(self.dist, dtype=float))
        object.__setattr__(self, "weight", np.asarray(self.weight, dtype=float).ravel())
        if self.coords is not None:
            object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))
        self.dist.setflags(write=False)
        self.weight.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.weight.shape[0])

    @property
    def total_mass(self) -> float:
        return float(self.weight.sum())

    @cached_property
    def d_min(self) -> float:
        """Smallest positive distance (inf for a single point)."""
        if self.n < 2:
            return math.inf
        iu = np.triu_indices(self.n, 1)
        return float(self.dist[iu].min())

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.n > 1 else 0.0

    @cached_property
    def scale_matrix(self) -> np.ndarray:
        """Integer dyadic scale of every pair; the diagonal holds a sentinel."""
        k = np.full((self.n, self.n), np.iinfo(np.int64).min, dtype=np.int64)
        iu, ju = np.triu_indices(self.n, 1)
        ks = dyadic_scales(self.dist[iu, ju])
        k[iu, ju] = ks
        k[ju, iu] = ks
        k.setflags(write=False)
        return k

    @cached_property
    def scale_pairs(self) -> Dict[int, "ScalePairs"]:
        """Pairs ``i < j`` grouped by dyadic scale, in ascending scale order."""
        if self.n < 2:
            return {}
        iu, ju = np.triu_indices(self.n, 1)
        ks = self.scale_matrix[iu, ju]
        out = {}
        for k in np.unique(ks):
            sel = ks == k
            out[int(k)] = ScalePairs(int(k), iu[sel], ju[sel], self.dist[iu[sel], ju[sel]])
        return out

    @property
    def active_scales(self) -> List[int]:
        return sorted(self.scale_pairs)

    def scale_window(self) -> range:
        """Scales on which gradient sequences are stored: active ones widened by the
        ``j >= k - 2`` lookback and the ``[m - 4, m - 1]`` annulus window."""
        ks = self.active_scales
        if not ks:
            return range(0)
        return range(ks[0] - 3, ks[-1] + 3)

    def members(self, x: int, r: float) -> np.ndarray:
        return np.flatnonzero(self.dist[x] < r)

    def ball_mask(self, x: int, r: float) -> np.ndarray:
        return self.dist[x] < r

    def measure(self, points) -> float:
        idx = np.asarray(points)
        if idx.dtype == bool:
            return float(self.weight[idx].sum())
        return float(self.weight[idx.astype(int)].sum()) if idx.size else 0.0

    def ball_measure(self, x: int, r: float) -> float:
        return float(self.weight[self.dist[x] < r].sum())

    def with_weights(self, weight) -> "MetricMeasureSpace":
        return MetricMeasureSpace(self.dist, weight, self.coords, self.name)

    def to_json(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {"dist": self.dist.tolist(), "weights": self.weight.tolist()}
        if self.coords is not None:
            doc["coords"] = self.coords.tolist()
        return doc


@dataclass(frozen=True, eq=False)
class ScalePairs:
    k: int
    i: np.ndarray
    j: np.ndarray
    d: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        return np.union1d(self.i, self.j)


@dataclass(frozen=True)
class Ball:
    center: int
    radius: float

    def members(self, space: MetricMeasureSpace) -> np.ndarray:
        return space.members(self.center, self.radius)

    def measure(self, space: MetricMeasureSpace) -> float:
        return space.ball_measure(self.center, self.radius)


def dyadic_scale(d: float) -> int:
    """The unique ``k`` with ``2**(-k-1) <= d < 2**(-k)``."""
    if not d > 0 or not math.isfinite(d):
        raise ValueError(f"dyadic scale needs a positive finite distance, got {d!r}")
    k = -math.floor(math.log2(d)) - 1
    # log2 may round across an exact power of two
    while d < math.ldexp(1.0, -k - 1):
        k += 1
    while d >= math.ldexp(1.0, -k):
        k -= 1
    return k


def dyadic_scales(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.size == 0:
        return np.zeros(0, dtype=np.int64)
    k = (-np.floor(np.log2(d)) - 1).astype(np.int64)
    lo = np.ldexp(1.0, (-k - 1).astype(np.int32))
    k = np.where(d < lo, k + 1, k)
    hi = np.ldexp(1.0, (-k).astype(np.int32))
    k = np.where(d >= hi, k - 1, k)
    return k


def radius_class(r: float) -> int:
    """Covering class ``i`` with ``2**(-i) <= r < 2**(-i+1)``."""
    return dyadic_scale(r) + 1


def pair_scale(space: MetricMeasureSpace, i: int, j: int) -> int:
    if i == j:
        raise ValueError("no scale for coincident points")
    return dyadic_scale(float(space.dist[i, j]))


def validate(space: MetricMeasureSpace) -> List[str]:
    """Return the list of axiom violations; empty iff ``space`` is valid."""
    out: List[str] = []
    D, w = space.dist, space.weight
    n = w.shape[0]
    if D.ndim != 2 or D.shape != (n, n):
        return [f"shape: dist is {D.shape}, weights has length {n}"]
    if n == 0:
        return ["size: space has no points"]
    if not np.all(np.isfinite(D)):
        bad = np.argwhere(~np.isfinite(D))[0]
        out.append(f"finite: dist[{bad[0]}][{bad[1]}] is not finite")
    for i in np.flatnonzero(np.diag(D) != 0):
        out.append(f"identity: dist[{i}][{i}] = {D[i, i]!r} != 0")
    asym = np.argwhere(np.triu(D != D.T, 1))
    for i, j in asym:
        out.append(f"symmetry: dist[{i}][{j}] = {D[i, j]!r} != dist[{j}][{i}] = {D[j, i]!r}")
    off = ~np.eye(n, dtype=bool)
    for i, j in np.argwhere(off & ~(D > 0)):
        if i < j:
            out.append(f"separation: dist[{i}][{j}] = {D[i, j]!r} is not positive")
    if np.all(np.isfinite(D)):
        # slack[i, k, j] = D[i, j] - D[i, k] - D[k, j]
        for k in range(n):
            slack = D - (D[:, [k]] + D[[k], :]) - TRIANGLE_TOL
            for i, j in np.argwhere(slack > 0):
                if i < j:
                    out.append(
                        f"triangle: dist[{i}][{j}] = {D[i, j]!r} > dist[{i}][{k}] + dist[{k}][{j}]"
                        f" = {D[i, k] + D[k, j]!r} at ({i},{k},{j})"
                    )
    for i in np.flatnonzero(~(w > 0) | ~np.isfinite(w)):
        out.append(f"weight: weight[{i}] = {w[i]!r} is not strictly positive and finite")
    return out


def check_space(space: MetricMeasureSpace) -> MetricMeasureSpace:
    problems = validate(space)
    if problems:
        raise InvalidSpaceError(problems)
    return space


def critical_radii(space: MetricMeasureSpace, x: int) -> np.ndarray:
    d = space.dist[x][space.dist[x] > 0]
    base = np.concatenate([d, d / 2])
    return np.unique(np.concatenate([base, base * (1 + RADIUS_BUMP)]))


def doubling_constant(space: MetricMeasureSpace) -> float:
    """Least ``c_d`` with ``mu(B(x, 2r)) <= c_d mu(B(x, r))`` over all realizable balls."""
    best = 1.0
    for x in range(space.n):
        radii = critical_radii(space, x)
        if radii.size == 0:
            continue
        row = space.dist[x]
        w = space.weight
        inner = ((row[None, :] < radii[:, None]) * w).sum(axis=1)
        outer = ((row[None, :] < 2 * radii[:, None]) * w).sum(axis=1)
        best = max(best, float((outer / inner).max()))
    return best


def euclidean_dist(coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    diff = coords[:, None, :] - coords[None, :, :]
    D = np.sqrt((diff ** 2).sum(axis=-1))
    return (D + D.T) / 2


def graph_dist(n: int, edges) -> np.ndarray:
    if n < 1:
        raise ValueError("graph needs n >= 1")
    rows, cols, vals = [], [], []
    for e in edges:
        i, j, w = int(e[0]), int(e[1]), float(e[2])
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"bad edge {list(e)!r}")
        if not w > 0:
            raise ValueError(f"edge weight must be positive, got {w!r}")
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    G = csr_matrix((vals, (rows, cols)), shape=(n, n))
    D = shortest_path(G, method="D", directed=False)
    if not np.all(np.isfinite(D)):
        raise ValueError("graph is disconnected")
    return D


def _weights(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "unit":
        return np.ones(n)
    if kind == "random":
        return rng.uniform(0.5, 1.5, size=n)
    raise ValueError(f"unknown weight scheme {kind!r}")


def cantor_points(level: int) -> np.ndarray:
    """Endpoints of the ``2**level`` intervals of the middle-thirds construction."""
    if level < 0:
        raise ValueError("cantor level must be >= 0")
    intervals = [(0.0, 1.0)]
    for _ in range(level):
        nxt = []
        for a, b in intervals:
            t = (b - a) / 3
            nxt += [(a, a + t), (b - t, b)]
        intervals = nxt
    return np.array(sorted({v for iv in intervals for v in iv}))


def generate(kind: str, params: Optional[Dict[str, Any]] = None, seed: int = 0) -> MetricMeasureSpace:
    """Deterministic space generators.

    Parameters
    ----------
    kind : str
        One of ``line-grid``, ``square-grid``, ``cantor``, ``random-cloud``,
        ``graph-metric``.
    params : dict
        ``line-grid``: ``n``, ``spacing`` (1). ``square-grid``: ``side``,
        ``spacing`` (1). ``cantor``: ``level``, ``mass`` (1). ``random-cloud``:
        ``n``, ``dim`` (2), ``weights`` (``"random"`` or ``"unit"``).
        ``graph-metric``: ``n``, ``edges`` as ``[i, j, w]`` triples.
        Every kind except ``cantor`` accepts ``weights``.
    seed : int
        Seeds the point cloud and random weights.
    """
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    wkind = params.get("weights", "unit" if kind != "random-cloud" else "random")
    if kind == "line-grid":
        n = int(params.get("n", 8))
        h = float(params.get("spacing", 1.0))
        if n < 1 or not h > 0:
            raise ValueError("line-grid needs n >= 1 and spacing > 0")
        coords = h * np.arange(n, dtype=float)[:, None]
        D = np.abs(coords - coords.T)
        space = MetricMeasureSpace(D, _weights(wkind, n, rng), coords, f"line-grid-{n}")
    elif kind == "square-grid":
        m = int(params.get("side", 4))
        h = float(params.get("spacing", 1.0))
        if m < 1 or not h > 0:
            raise ValueError("square-grid needs side >= 1 and spacing > 0")
        xs, ys = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        coords = h * np.stack([xs.ravel(), ys.ravel()], axis=1).astype(float)
        space = MetricMeasureSpace(euclidean_dist(coords), _weights(wkind, m * m, rng), coords,
                                   f"square-grid-{m}")
    elif kind == "cantor":
        level = int(params.get("level", 2))
        mass = float(params.get("mass", 1.0))
        pts = cantor_points(level)
        coords = pts[:, None]
        w = np.full(pts.size, mass / pts.size)
        space = MetricMeasureSpace(np.abs(coords - coords.T), w, coords, f"cantor-{level}")
    elif kind == "random-cloud":
        n = int(params.get("n", 16))
        dim = int(params.get("dim", 2))
        if n < 1 or dim < 1:
            raise ValueError("random-cloud needs n >= 1 and dim >= 1")
        coords = rng.uniform(0.0, 1.0, size=(n, dim))
        space = MetricMeasureSpace(euclidean_dist(coords), _weights(wkind, n, rng), coords,
                                   f"random-cloud-{n}-s{seed}")
    elif kind == "graph-metric":
        n = int(params["n"])
        D = graph_dist(n, params.get("edges", []))
        space = MetricMeasureSpace(D, _weights(wkind, n, rng), None, f"graph-{n}")
    else:
        raise ValueError(f"unknown generator kind {kind!r}; expected one of {GENERATOR_KINDS}")
    return check_space(space)


def space_from_json(doc: Dict[str, Any]) -> MetricMeasureSpace:
    """Build and validate a space from its JSON document form."""
    if "generator" in doc:
        g = doc["generator"]
        return generate(g["kind"], g.get("params", {}), int(g.get("seed", 0)))
    weights = doc.get("weights")
    coords = None
    if "dist" in doc:
        D = np.asarray(doc["dist"], dtype=float)
    elif "coords" in doc:
        metric = doc.get("metric", "euclidean")
        if metric != "euclidean":
            raise ValueError(f"unsupported coordinate metric {metric!r}")
        coords = np.asarray(doc["coords"], dtype=float)
        D = euclidean_dist(coords)
    elif "edges" in doc:
        if doc.get("metric", "graph") != "graph":
            raise ValueError("edge lists require metric 'graph'")
        D = graph_dist(int(doc["n"]), doc["edges"])
    else:
        raise ValueError("space document needs one of 'dist', 'coords' or 'edges'")
    if weights is None:
        raise ValueError("space document needs 'weights'")
    return check_space(MetricMeasureSpace(D, weights, coords, doc.get("name", "space")))


def load_space(path: str) -> MetricMeasureSpace:
    with open(path) as fh:
        return space_from_json(json.load(fh))
