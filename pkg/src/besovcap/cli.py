"""Command line front end: ``besovcap <command> ...``.

Every JSON output embeds a manifest (command, configuration, seed, input
hashes, tool version).  Wall time is written to stderr only so that
outputs stay byte-identical across repeated runs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from importlib import metadata
from typing import Dict, List, Optional, Sequence

import numpy as np

from .capacity import CapacityProblem, SolverConfig, capacity
from .content import Gauge, compare_capacity_content, hausdorff_content, netrusov_content
from .gradient import BesovParams, GradientSequence, besov_norm, check_gradient
from .median import gamma_median, median_convolution
from .space import GENERATOR_KINDS, generate, load_space
from .verify import SUITES, dumps, jsonable, space_digest, verify

EXCLUDED_FROM_MANIFEST = {"out", "csv", "func", "threads"}


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.1.0"


def _sha256_file(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def manifest(args: argparse.Namespace, inputs: Dict[str, str]) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in EXCLUDED_FROM_MANIFEST}
    return {"command": args.command, "config": jsonable(config), "seed": getattr(args, "seed", None),
            "inputs": inputs, "version": tool_version()}


def emit(doc: dict, out: Optional[str]) -> None:
    text = dumps(doc)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def parse_set(text: str) -> List[int]:
    text = text.strip()
    if not text:
        return []
    return [int(t) for t in text.split(",")]


def parse_floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split(",")])


def parse_q(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def parse_kv(items: Sequence[str]) -> dict:
    out = {}
    for item in items or []:
        key, _, val = item.partition("=")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def _field(args, n: int) -> np.ndarray:
    if args.u_file:
        with open(args.u_file) as fh:
            doc = json.load(fh)
        u = np.asarray(doc["u"] if isinstance(doc, dict) else doc, dtype=float)
    else:
        u = parse_floats(args.u)
    if u.shape != (n,):
        raise SystemExit(f"error: field has {u.size} values, space has {n} points")
    return u


def _space(args):
    inputs = {}
    if getattr(args, "space", None):
        inputs["space"] = _sha256_file(args.space)
        space = load_space(args.space)
    elif getattr(args, "gen", None):
        space = generate(args.gen, parse_kv(args.param), args.gen_seed)
    else:
        raise SystemExit("error: give --space FILE or --gen KIND")
    inputs["space_sha256"] = space_digest(space)
    return space, inputs


def _params(args) -> BesovParams:
    return BesovParams(args.s, args.p, parse_q(args.q), args.s_prime, args.gamma)


# --------------------------------------------------------------------------
# commands


def cmd_gen(args):
    space = generate(args.kind, parse_kv(args.param), args.seed)
    doc = space.to_json()
    doc["manifest"] = manifest(args, {"space_sha256": space_digest(space)})
    emit(doc, args.out)
    return 0


def cmd_median(args):
    space, inputs = _space(args)
    u = _field(args, space.n)
    A = parse_set(args.set) if args.set else list(range(space.n))
    value = gamma_median(space, u, A, args.gamma)
    emit({"manifest": manifest(args, inputs), "median": value, "set": A, "gamma": args.gamma}, args.out)
    return 0


def cmd_convolve(args):
    space, inputs = _space(args)
    u = _field(args, space.n)
    v = median_convolution(space, u, args.r, args.gamma)
    emit({"manifest": manifest(args, inputs), "u": u, "convolved": v,
          "sup_error": float(np.max(np.abs(v - u)))}, args.out)
    return 0


def cmd_gradient(args):
    space, inputs = _space(args)
    u = _field(args, space.n)
    params = _params(args)
    norm = besov_norm(space, u, params, args.mode)
    violations = check_gradient(space, u, norm.gradient, params.s)
    emit({"manifest": manifest(args, inputs), "gradient": norm.gradient.to_json(),
          "lp_part": norm.lp_part, "grad_part": norm.grad_part, "total": norm.total,
          "exact": norm.exact, "violations": [v.as_dict() for v in violations]}, args.out)
    return 0 if not violations else 1


def cmd_capacity(args):
    space, inputs = _space(args)
    params = _params(args)
    config = SolverConfig(tol=args.tol, seed=args.seed, allow_empty=args.allow_empty)
    res = capacity(CapacityProblem(space, parse_set(args.set), params, config))
    emit({"manifest": manifest(args, inputs), "result": res.to_json()}, args.out)
    return 0


def cmd_content(args):
    space, inputs = _space(args)
    E = parse_set(args.set)
    R = parse_q(args.R)
    if args.hausdorff is not None:
        res = hausdorff_content(space, E, args.hausdorff, R, args.method)
    else:
        res = netrusov_content(space, E, Gauge.parse(args.gauge), args.theta, R, args.method)
    emit({"manifest": manifest(args, inputs), "result": res.to_json()}, args.out)
    return 0


COMPARE_COLUMNS = ("set_id", "cap", "nh_upper", "nh_lower", "ratio54", "ratio55", "status")


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in columns})
    return buf.getvalue()


def cmd_compare(args):
    space, inputs = _space(args)
    params = _params(args)
    if args.family:
        inputs["family"] = _sha256_file(args.family)
        with open(args.family) as fh:
            family = json.load(fh)
        if isinstance(family, list):
            family = {str(t): E for t, E in enumerate(family)}
    else:
        family = {f"pt{x}": [x] for x in range(space.n)}
    rows = [r.as_dict() for r in compare_capacity_content(space, params, family, args.R, args.d, args.c,
                                                          args.method)]
    text = rows_to_csv(rows, COMPARE_COLUMNS)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(text)
    if args.out:
        emit({"manifest": manifest(args, inputs), "rows": rows}, args.out)
    if not args.csv and not args.out:
        sys.stdout.write(text)
    return 0


def cmd_verify(args):
    space, inputs = _space(args)
    params = _params(args)
    suites = SUITES if args.suites in (None, "all") else tuple(s.strip() for s in args.suites.split(","))
    unknown = [s for s in suites if s not in SUITES]
    if unknown:
        print(f"error: unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}",
              file=sys.stderr)
        return 2
    trials = {k: int(v) for k, v in parse_kv(args.trials).items()}
    report = verify(space, params, suites, args.seed, trials, args.threads, args.inject_fault)
    report["manifest"] = manifest(args, inputs)
    emit(report, args.out)
    if args.csv:
        rows = [{"suite": name, "check": check, "passed": body["passed"]}
                for name, suite in report["suites"].items() for check, body in suite["checks"].items()]
        with open(args.csv, "w") as fh:
            fh.write(rows_to_csv(rows, ("suite", "check", "passed")))
    for name, suite in report["suites"].items():
        print(f"{name}: {'pass' if suite['passed'] else 'FAIL'}", file=sys.stderr)
    return 0 if report["passed"] else 1


# --------------------------------------------------------------------------


def _add_space(p):
    p.add_argument("--space", help="space JSON file")
    p.add_argument("--gen", choices=GENERATOR_KINDS, help="generate the space instead of loading it")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="generator parameter (repeatable)")
    p.add_argument("--gen-seed", type=int, default=0)


def _add_field(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--u", help="comma separated field values")
    g.add_argument("--u-file", help="JSON file with a list or {'u': [...]}")


def _add_params(p, s=0.5, p_=1.0):
    p.add_argument("--s", type=float, default=s)
    p.add_argument("--p", type=float, default=p_)
    p.add_argument("--q", default="1", help="a positive number or 'inf'")
    p.add_argument("--s-prime", type=float, default=None)
    p.add_argument("--gamma", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="besovcap", description="Besov capacity and cocontent on finite spaces")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a space")
    p.add_argument("kind", choices=GENERATOR_KINDS)
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("median", help="gamma-median of a field over a set")
    _add_space(p)
    _add_field(p)
    p.add_argument("--set", help="comma separated indices (default: all points)")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_median)

    p = sub.add_parser("convolve", help="discrete median convolution")
    _add_space(p)
    _add_field(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_convolve)

    p = sub.add_parser("gradient", help="fractional gradient and Besov norm of a field")
    _add_space(p)
    _add_field(p)
    _add_params(p)
    p.add_argument("--mode", choices=("canonical", "minimal"), default="minimal")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradient)

    p = sub.add_parser("capacity", help="Besov capacity of a set")
    _add_space(p)
    p.add_argument("--set", required=True)
    _add_params(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-empty", action="store_true", help="return 0 for the empty set")
    p.add_argument("--out")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("content", help="Netrusov-Hausdorff cocontent or Hausdorff content")
    _add_space(p)
    p.add_argument("--set", required=True)
    p.add_argument("--gauge", default="pow:0.5", help="pow:D or table:t=v,...")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--R", default="1", help="radius bound, a number or 'inf'")
    p.add_argument("--method", choices=("exact", "greedy"), default="exact")
    p.add_argument("--hausdorff", type=float, default=None, metavar="D",
                   help="compute the codimension-D Hausdorff content instead")
    p.add_argument("--out")
    p.set_defaults(func=cmd_content)

    p = sub.add_parser("compare", help="capacity against the two content bounds")
    _add_space(p)
    _add_params(p)
    p.add_argument("--family", help="JSON: {id: [indices]} or a list of index lists (default: singletons)")
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--d", type=float, default=None, help="lower gauge exponent (default 0.4 s p)")
    p.add_argument("--c", type=float, default=5.0, help="radius dilation for the lower bound")
    p.add_argument("--method", choices=("exact", "greedy"), default="exact")
    p.add_argument("--csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="run the property suites")
    _add_space(p)
    _add_params(p)
    p.add_argument("--suites", default="all", help=f"comma separated subset of {','.join(SUITES)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", action="append", default=[], metavar="SUITE=N")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--inject-fault", choices=("gradient",), default=None)
    p.add_argument("--csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        code = args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    print(f"wall time: {time.perf_counter() - start:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
