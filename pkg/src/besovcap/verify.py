"""Property suites run by ``besovcap verify``.

Each suite returns a dict with a ``tag`` naming the property family it
exercises, a ``passed`` flag covering the hard assertions only, empirical
constants, and up to a few failure witnesses.  Reports contain no timing
information, so identical inputs give byte-identical JSON.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .capacity import (CapacityProblem, SolverConfig, capacity, capacity_of, check_decreasing_compacts,
                       check_monotonicity, check_outer, check_subadditivity, cutoff_is_lipschitz)
from .content import (Covering, Gauge, compare_capacity_content, covering_cost, hausdorff_cost,
                      netrusov_content)
from .gradient import (BesovParams, GradientSequence, besov_norm, canonical_gradient, check_gradient,
                       derived_poincare_gradient, elementary_inequality, leibniz_gradients,
                       lipschitz_norm_bound, max_gradient, minimal_gradient_sequence, poincare_ratios,
                       summing_lemma_check, sup_gradient)
from .median import (check_median_properties, check_partition, convolution_errors, median_convolution,
                     partition_of_unity, remark_45_check)
from .space import MetricMeasureSpace, generate

SUITES = ("median", "gradient", "capacity", "content", "compare", "oracle")
MEDIAN_ASSERTED = ("a", "b", "c", "d", "e", "f", "g", "h")


def jsonable(x):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def dumps(report) -> str:
    return json.dumps(jsonable(report), sort_keys=True, indent=2) + "\n"


def space_digest(space: MetricMeasureSpace) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(space.dist, dtype=float).tobytes())
    h.update(np.ascontiguousarray(space.weight, dtype=float).tobytes())
    return h.hexdigest()


def random_field(rng: np.random.Generator, n: int, t: int, space: Optional[MetricMeasureSpace] = None
                 ) -> np.ndarray:
    """Cycles through Gaussian fields, ball indicators, random indicators and random signs.

    Without ``space`` the ball indicator is replaced by a single spike.
    """
    kind = t % 4
    if kind == 0:
        return rng.normal(size=n)
    if kind == 1:
        x = int(rng.integers(n))
        if space is None or n == 1:
            u = np.zeros(n)
            u[x] = 1.0
            return u
        row = space.dist[x]
        r = float(rng.choice(row[row > 0]))
        return (row <= r).astype(float)
    if kind == 2:
        return (rng.random(n) < rng.random()).astype(float)
    return rng.choice([-1.0, 1.0], size=n)


def _suite(tag: str, checks: Dict[str, dict], constants: Optional[dict] = None) -> dict:
    witnesses = {k: v["witnesses"][:3] for k, v in checks.items() if v.get("witnesses")}
    return {"tag": tag, "passed": all(c["passed"] for c in checks.values()),
            "checks": {k: {kk: vv for kk, vv in v.items() if kk != "witnesses"} for k, v in checks.items()},
            "constants": constants or {}, "witnesses": witnesses}


def _count(failures: List) -> dict:
    return {"passed": not failures, "failures": len(failures), "witnesses": failures[:3]}


# --------------------------------------------------------------------------


def median_suite(space, params, seed, trials, **_):
    checks = {}
    props = check_median_properties(space, trials, seed)
    for key, tally in props.items():
        entry = {"passed": tally["failed"] == 0 if key in MEDIAN_ASSERTED else True,
                 "failures": tally["failed"], "trials": tally["passed"] + tally["failed"],
                 "witnesses": tally["witnesses"], "asserted": key in MEDIAN_ASSERTED}
        checks[f"property_{key}"] = entry
    rng = np.random.default_rng(seed)
    fails, worst = [], 0.0
    for t in range(trials):
        u = random_field(rng, space.n, t, space)
        A = np.flatnonzero(rng.random(space.n) < 0.5)
        if A.size == 0:
            A = np.array([0])
        lhs, rhs = remark_45_check(space, u, A, params.gamma)
        worst = max(worst, lhs / rhs if rhs > 0 else 0.0)
        if lhs > rhs * (1 + 1e-12) + 1e-15:
            fails.append({"trial": t, "lhs": lhs, "rhs": rhs})
    checks["spread_factor_two"] = _count(fails)
    fails = []
    small = space.d_min / 2 * 0.99
    for t in range(max(1, trials // 10)):
        u = random_field(rng, space.n, t, space)
        if not np.array_equal(median_convolution(space, u, small, params.gamma), u):
            fails.append({"trial": t})
    checks["convolution_identity"] = _count(fails)
    fails = []
    levels = list(range(math.ceil(-math.log2(space.d_min)), math.ceil(-math.log2(space.d_min)) + 4))
    for t in range(max(1, trials // 10)):
        u = space.coords[:, 0] if space.coords is not None else space.dist[int(rng.integers(space.n))]
        u = u * rng.uniform(0.5, 2.0)
        errs = convolution_errors(space, u, params.gamma, levels)
        if np.any(np.diff(errs) > 1e-12):
            fails.append({"trial": t, "errors": errs.tolist()})
    checks["convolution_monotone"] = _count(fails)
    pu = partition_of_unity(space, space.d_min)
    checks["partition_of_unity"] = _count(check_partition(space, pu))
    return _suite("median", checks, {"spread_ratio_max": worst, "overlap": pu.overlap})


def gradient_suite(space, params, seed, trials, fault=None, **_):
    rng = np.random.default_rng(seed)
    s = params.s
    names = ("canonical", "minimal", "max", "sup", "derived", "leibniz_rho", "leibniz_h")
    fails = {k: [] for k in names}
    ratios, bound_ratio = [], 0.0
    for t in range(trials):
        u = random_field(rng, space.n, t, space)
        v = random_field(rng, space.n, t + 1, space)
        Gu = canonical_gradient(space, u, s)
        if fault == "gradient" and t == 0 and Gu.scales:
            k0 = Gu.scales[0]
            Gu[k0] = Gu[k0] * 0.25
        Gv = canonical_gradient(space, v, s)
        cases = {"canonical": (u, Gu)}
        if params.p >= 1 and t % 5 == 0:
            cases["minimal"] = (u, minimal_gradient_sequence(space, u, s, params.p)[0])
        cases["max"] = (np.maximum(u, v), max_gradient(Gu, Gv))
        w = random_field(rng, space.n, t + 2, space)
        cases["sup"] = (np.maximum.reduce([u, v, w]),
                        sup_gradient([Gu, Gv, canonical_gradient(space, w, s)]))
        cases["derived"] = (u, derived_poincare_gradient(space, Gu, params))
        if s < 1:
            L = float(rng.uniform(0.5, 4.0))
            x0 = int(rng.integers(space.n))
            phi = np.maximum(0.0, 1.0 - L * space.dist[x0])
            rho, h = leibniz_gradients(space, u, Gu, phi, L, s)
            cases["leibniz_rho"] = (u * phi, rho)
            cases["leibniz_h"] = (u * phi, h)
            if t % 10 == 0 and params.p >= 1:
                F = np.flatnonzero(phi != 0)
                lhs, rhs = lipschitz_norm_bound(space, phi, L, F, params)
                bound_ratio = max(bound_ratio, lhs / rhs)
        for name, (f, G) in cases.items():
            bad = check_gradient(space, f, G, s)
            if bad:
                fails[name].append({"trial": t, "violation": bad[0].as_dict()})
        if t % 5 == 0:
            ratios.append(float(np.max(poincare_ratios(space, u, params))))
    checks = {f"feasible_{k}": _count(v) for k, v in fails.items()}
    a = float(rng.uniform(1.1, 4.0))
    b = float(rng.uniform(0.3, 3.0))
    fl = []
    for t in range(trials):
        c = {int(j): float(x) for j, x in enumerate(rng.exponential(size=int(rng.integers(1, 8))))}
        res = summing_lemma_check(a, b, c)
        if not res["ok"]:
            fl.append({"a": a, "b": b, "lhs": res["lhs"], "rhs": res["rhs"]})
        arr = rng.exponential(size=5)
        beta = float(rng.uniform(0.1, 1.0))
        lo, hi = elementary_inequality(arr, beta)
        if lo > hi * (1 + 1e-12):
            fl.append({"beta": beta, "sum": lo, "power_sum": hi})
    checks["summing_and_elementary"] = _count(fl)
    poincare = float(max(ratios)) if ratios else 0.0
    checks["poincare_bounded"] = {"passed": math.isfinite(poincare), "constant": poincare}
    return _suite("gradient", checks, {"poincare": poincare, "lipschitz_bound_ratio": bound_ratio})


def capacity_suite(space, params, seed, trials, **_):
    checks, consts = {}, {}
    res = capacity_of(space, np.arange(space.n), params)
    checks["pinch"] = {"passed": abs(res.value - space.total_mass) <= 1e-6 * space.total_mass,
                       "value": res.value, "mass": space.total_mass}
    mono = check_monotonicity(space, params, trials, seed)
    checks["monotone_and_lower_bound"] = {"passed": mono["failures"] == 0, **mono}
    sub = check_subadditivity(space, params, trials, seed)
    checks["subadditivity"] = {"passed": sub["finite"], **sub}
    consts["subadditivity"] = sub["constant"]
    dec = check_decreasing_compacts(space, params, max(1, trials // 2), seed)
    checks["decreasing_compacts"] = {"passed": dec["failures"] == 0, **dec}
    out = check_outer(space, params, max(1, trials // 2), seed)
    checks["outer"] = {"passed": out["failures"] == 0, **out}
    return _suite("capacity", checks, consts)


def content_suite(space, params, seed, trials, **_):
    rng = np.random.default_rng(seed)
    gauge = Gauge.power(params.s * params.p)
    theta = params.theta
    fails = {k: [] for k in ("greedy_above_exact", "monotone_in_set", "theta_one_identity",
                             "scaling", "hausdorff_below")}
    gaps = []
    for t in range(trials):
        E2 = np.flatnonzero(rng.random(space.n) < 0.4)
        if E2.size == 0:
            E2 = np.array([int(rng.integers(space.n))])
        E1 = E2[: max(1, E2.size // 2)]
        ex2 = netrusov_content(space, E2, gauge, theta, 1.0)
        gr2 = netrusov_content(space, E2, gauge, theta, 1.0, "greedy")
        ex1 = netrusov_content(space, E1, gauge, theta, 1.0)
        gaps.append(gr2.value / ex2.value)
        if ex2.complete and gr2.value < ex2.value * (1 - 1e-12):
            fails["greedy_above_exact"].append({"trial": t, "greedy": gr2.value, "exact": ex2.value})
        if ex1.complete and ex2.complete and ex1.value > ex2.value * (1 + 1e-12):
            fails["monotone_in_set"].append({"trial": t, "small": ex1.value, "large": ex2.value})
        cov = ex2.covering
        d = params.s * params.p
        n1 = covering_cost(space, cov, gauge, 1.0)
        h = hausdorff_cost(space, cov, d)
        if abs(n1 - h) > 1e-12 * max(1.0, h):
            fails["theta_one_identity"].append({"trial": t, "netrusov": n1, "hausdorff": h})
        th = float(rng.uniform(0.2, 1.0))
        if h > covering_cost(space, cov, gauge, th) * (1 + 1e-12):
            fails["hausdorff_below"].append({"trial": t, "theta": th})
        lam = float(rng.choice([0.5, 2.0, 4.0]))
        scaled = space.with_weights(space.weight * lam)
        sc = netrusov_content(scaled, E2, gauge, theta, 1.0)
        if abs(sc.value - lam * ex2.value) > 1e-12 * lam * ex2.value:
            fails["scaling"].append({"trial": t, "lambda": lam, "value": sc.value, "base": ex2.value})
    checks = {k: _count(v) for k, v in fails.items()}
    return _suite("content", checks, {"greedy_over_exact_max": max(gaps) if gaps else None})


def singleton_family(space: MetricMeasureSpace) -> Dict[str, List[int]]:
    return {f"pt{x}": [x] for x in range(space.n)}


def compare_suite(space, params, seed, trials, family=None, **_):
    if family is None:
        family = singleton_family(space)
        family["all"] = list(range(space.n))
    rows = compare_capacity_content(space, params, family)
    r54 = [r.ratio54 for r in rows]
    r55 = [r.ratio55 for r in rows if r.ratio55 is not None]
    cut_fail = [{"set": r.set_id, "cap": r.cap, "cutoff": r.cutoff_bound} for r in rows if not r.cutoff_ok]
    checks = {
        "cutoff_dominates": _count(cut_fail),
        "upper_ratio_bounded": {"passed": bool(np.all(np.isfinite(r54))), "max": max(r54)},
        "lower_ratio_bounded": {"passed": bool(np.all(np.isfinite(r55))),
                                "max": max(r55) if r55 else None, "skipped": len(rows) - len(r55)},
    }
    return _suite("compare", checks, {"upper_ratio_max": max(r54), "lower_ratio_max": max(r55) if r55 else None,
                                      "rows": [r.as_dict() for r in rows]})


def oracle_suite(space, params, seed, trials, **_):
    from .oracle import OracleCapExceeded, OracleConfig, brute_capacity, brute_content

    rng = np.random.default_rng(seed)
    cap_fail, cont_fail, worst = [], [], 0.0
    cfg = OracleConfig(max_candidates=28)
    p = params.p if params.p in (1, 2) else 1
    P = BesovParams(params.s, p, params.q if params.q in (1, 2) else 1, gamma=params.gamma)
    for t in range(trials):
        n = int(rng.integers(2, 5))
        small = generate("random-cloud", {"n": n, "dim": 2}, seed=int(rng.integers(2 ** 31)))
        E = np.sort(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False))
        a = capacity_of(small, E, P).value
        b = brute_capacity(small, E, P)
        worst = max(worst, abs(a - b) / b)
        if abs(a - b) > 1e-2 * b:
            cap_fail.append({"trial": t, "solver": a, "oracle": b})
        g = Gauge.power(P.s * P.p)
        try:
            ref = brute_content(small, E, g, P.theta, 1.0, cfg)
        except OracleCapExceeded:
            continue
        val = netrusov_content(small, E, g, P.theta, 1.0).value
        if abs(val - ref) > 1e-12 * max(1.0, ref):
            cont_fail.append({"trial": t, "exact": val, "oracle": ref})
    return _suite("oracle", {"capacity": _count(cap_fail), "content": _count(cont_fail)},
                  {"capacity_rel_err_max": worst})


SUITE_FUNCS: Dict[str, Callable] = {
    "median": median_suite, "gradient": gradient_suite, "capacity": capacity_suite,
    "content": content_suite, "compare": compare_suite, "oracle": oracle_suite,
}

DEFAULT_TRIALS = {"median": 200, "gradient": 50, "capacity": 4, "content": 10, "compare": 1, "oracle": 5}


def verify(space: MetricMeasureSpace, params: BesovParams, suites: Sequence[str] = SUITES, seed: int = 0,
           trials: Optional[Dict[str, int]] = None, threads: int = 1, fault: Optional[str] = None,
           family=None) -> dict:
    """Run the named suites and assemble a deterministic report."""
    unknown = [s for s in suites if s not in SUITE_FUNCS]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}")
    counts = dict(DEFAULT_TRIALS, **(trials or {}))

    def run(name):
        return SUITE_FUNCS[name](space, params, seed, counts[name], fault=fault, family=family)

    ordered = list(dict.fromkeys(suites))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, ordered))
    else:
        results = [run(name) for name in ordered]
    report = {
        "space": {"name": space.name, "n": space.n, "sha256": space_digest(space)},
        "params": params.to_json(), "seed": seed, "fault": fault,
        "trials": {k: counts[k] for k in ordered},
        "suites": dict(zip(ordered, results)),
    }
    report["passed"] = all(r["passed"] for r in results)
    return jsonable(report)
