"""Command-line interface: ``pricer {solve,eval,derandomize,uniform,discretize,gap}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import jsonio
from .curve import PricingCurve, choices, payments, revenue, value_price_csv, verify_ic_ir
from .distribution import InvalidDistribution, QuantileOracle, ValueDistribution, discretize
from .lottery import (AdaptiveMechanism, MechanismError, SingleLotterySchedule, derandomize,
                      evaluate_adaptive, make_gap_instance, revenue_single, thresholds)
from .solver import (SolverError, brute_force_reference, solve_enum, solve_optimal,
                     uniform_closed_form)

log = logging.getLogger("pricer")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

_LN = re.compile(r"^\s*([0-9.eE+-]*)\s*\*?\s*ln\s*\(?\s*([0-9.eE+]+)\s*\)?\s*$")


class InputError(ValueError):
    pass


def parse_time(text: str) -> float:
    """Accept a float or ``[a]ln<k>`` such as ``ln2`` or ``2ln2``."""
    m = _LN.match(text)
    try:
        if m:
            coef = float(m.group(1)) if m.group(1) not in ("", "+") else 1.0
            T = coef * math.log(float(m.group(2)))
        else:
            T = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad time limit {text!r}") from None
    if not (T >= 0 and math.isfinite(T)):
        raise argparse.ArgumentTypeError("time limit must be finite and >= 0")
    return T


def _positive_float(text: str) -> float:
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return x


def _positive_int(text: str) -> int:
    x = int(text)
    if x < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return x


@dataclass
class RunConfig:
    command: str
    out: Path | None
    seed: int


def _read_json(path: str):
    try:
        return jsonio.load(path)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def load_distribution(path: str, k: int | None = None) -> ValueDistribution:
    """Discrete JSON, or a continuous family discretized upward with ``k`` points."""
    obj = _read_json(path)
    if not isinstance(obj, dict):
        raise InputError(f"{path}: expected a JSON object")
    if "family" in obj:
        if k is None:
            raise InputError("continuous distributions need --k")
        return discretize(QuantileOracle.from_json(obj), k).upper
    return ValueDistribution.from_json(obj)


def _emit(obj, out: Path | None) -> None:
    text = jsonio.dumps(obj)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args, cfg: RunConfig) -> int:
    dist = load_distribution(args.dist, args.k)
    T = args.time_limit
    sol = solve_enum(dist, T) if args.enum else solve_optimal(dist, T, method=args.method)
    report = verify_ic_ir(sol.assignment, sol.horizon)
    out = sol.to_json()
    out["ic_ir_ok"] = report.passed
    out["method"] = "enum" if args.enum else args.method
    if args.enum:
        out["table"] = [row.to_json() for row in sol.table]
    if args.oracle is not None:
        out["oracle"] = {"delta": args.oracle, "revenue": brute_force_reference(dist, T, args.oracle)}
    _emit(out, cfg.out)
    return EXIT_OK


def _load_curve(obj) -> PricingCurve:
    if "curve" in obj and isinstance(obj["curve"], dict):
        obj = obj["curve"]
    try:
        return PricingCurve.from_json(obj)
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed curve: {exc}") from None


def cmd_eval(args, cfg: RunConfig) -> int:
    obj = _read_json(args.mechanism)
    dist = load_distribution(args.dist, args.k)
    if not isinstance(obj, dict):
        raise InputError("expected a JSON object")
    if "branches" in obj:
        out = {"kind": "adaptive", **evaluate_adaptive(AdaptiveMechanism.from_json(obj), dist).to_json()}
    elif "timestamps" in obj:
        sched = SingleLotterySchedule.from_json(obj)
        th = thresholds(sched)
        out = {"kind": "lottery", "revenue": revenue_single(sched, dist),
               "thresholds": th.levels.tolist(),
               "payments": [th.payment(v) for v in dist.values]}
    else:
        curve = _load_curve(obj)
        idx = choices(curve, dist.values)
        pay = payments(curve, dist.values)
        out = {"kind": "curve", "revenue": revenue(curve, dist),
               "decisions": [{"v": float(v), "buys": bool(j >= 0),
                              "t": curve.posts[j].t if j >= 0 else None,
                              "p": float(p) if j >= 0 else None}
                             for v, j, p in zip(dist.values, idx, pay)]}
    _emit(out, cfg.out)
    return EXIT_OK


def cmd_derandomize(args, cfg: RunConfig) -> int:
    obj = _read_json(args.mechanism)
    if not isinstance(obj, dict):
        raise InputError("expected a JSON object")
    sched = SingleLotterySchedule.from_json(obj)
    mix = derandomize(sched, mode=args.mode, samples=args.samples, seed=cfg.seed)
    out = {"mode": mix.mode, "thresholds": thresholds(sched).levels.tolist(),
           "curves": mix.to_json(), "n_curves": len(mix)}
    if mix.mode == "montecarlo":
        out["samples"] = mix.samples
        out["seed"] = cfg.seed
    if args.dist:
        dist = load_distribution(args.dist, args.k)
        rev, err = mix.revenue(dist)
        out.update(revenue=rev, stderr=err, schedule_revenue=revenue_single(sched, dist))
    _emit(out, cfg.out)
    return EXIT_OK


def cmd_uniform(args, cfg: RunConfig) -> int:
    sol = uniform_closed_form(args.time_limit)
    v, pv, t, pt = sol.sample(args.samples)
    out = {"horizon": sol.horizon, "revenue": sol.revenue,
           "breakpoints": {"x": sol.x, "y": sol.y, "z": sol.z}, "top_price": sol.top_price}
    vp = value_price_csv(v, np.where(np.isinf(pv), np.nan, pv))
    tp = "t,p\n" + "".join(f"{a:.12g},{b:.12g}\n" for a, b in zip(t, pt))
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "value_price.csv").write_text(vp)
        (d / "time_price.csv").write_text(tp)
        out["files"] = ["value_price.csv", "time_price.csv"]
    else:
        out["value_price"] = [[a, None if math.isinf(b) else b] for a, b in zip(v, pv)]
        out["time_price"] = [[a, b] for a, b in zip(t, pt)]
    _emit(out, cfg.out)
    return EXIT_OK


def cmd_discretize(args, cfg: RunConfig) -> int:
    obj = _read_json(args.continuous)
    if not isinstance(obj, dict):
        raise InputError("expected a JSON object")
    pair = discretize(QuantileOracle.from_json(obj), args.k)
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        jsonio.dump(pair.lower.to_json(), d / "lower.json")
        jsonio.dump(pair.upper.to_json(), d / "upper.json")
        out = {"k": pair.k, "max_value": pair.max_value, "files": ["lower.json", "upper.json"]}
    else:
        out = {"k": pair.k, "max_value": pair.max_value,
               "lower": pair.lower.to_json(), "upper": pair.upper.to_json()}
    _emit(out, cfg.out)
    return EXIT_OK


def cmd_gap(args, cfg: RunConfig) -> int:
    inst = make_gap_instance(args.n)
    pricing = solve_optimal(inst.dist, inst.horizon)
    adaptive = evaluate_adaptive(inst.mechanism, inst.dist)
    bound_p = math.log(args.n) + 1.1
    bound_a = 0.3 * args.n
    out = {"n": args.n, "horizon": inst.horizon,
           "distribution": inst.dist.to_json(), "mechanism": inst.mechanism.to_json(),
           "pricing_revenue": pricing.revenue, "pricing_bound": bound_p,
           "adaptive_revenue": adaptive.revenue, "adaptive_bound": bound_a,
           "pricing_ok": pricing.revenue <= bound_p, "adaptive_ok": adaptive.revenue >= bound_a}
    _emit(out, cfg.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("-o", "--out", help="write JSON here instead of stdout")
    common.add_argument("--seed", type=int, default=None,
                        help="random seed (default: $PRICER_SEED or 0)")
    ap = argparse.ArgumentParser(prog="pricer", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="optimal pricing curve for a distribution")
    p.add_argument("dist")
    p.add_argument("--time-limit", "-T", type=parse_time, required=True)
    p.add_argument("--enum", action="store_true", help="enumerate all groupings")
    p.add_argument("--oracle", type=_positive_float, metavar="DELTA",
                   help="also run the grid search with this resolution (n <= 3)")
    p.add_argument("--method", choices=("fast", "direct"), default="fast")
    p.add_argument("--k", type=_positive_int, help="points for continuous families")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", parents=[common], help="revenue of a curve, lottery schedule or adaptive mechanism")
    p.add_argument("mechanism")
    p.add_argument("dist")
    p.add_argument("--k", type=_positive_int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("derandomize", parents=[common], help="mixture of pricing curves for a lottery schedule")
    p.add_argument("mechanism")
    p.add_argument("--mode", choices=("auto", "exhaustive", "montecarlo"), default="auto")
    p.add_argument("--samples", type=_positive_int, default=10000)
    p.add_argument("--dist", help="also report mixture revenue on this distribution")
    p.add_argument("--k", type=_positive_int)
    p.set_defaults(func=cmd_derandomize)

    p = sub.add_parser("uniform", parents=[common], help="closed-form optimum for U[0,1]")
    p.add_argument("--time-limit", "-T", type=parse_time, required=True)
    p.add_argument("--samples", type=_positive_int, default=201)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_uniform)

    p = sub.add_parser("discretize", parents=[common], help="lower/upper quantile discretizations")
    p.add_argument("continuous")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("gap", parents=[common], help="adaptive vs pricing revenue on the gap instance")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_gap)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    seed = args.seed
    if seed is None:
        env = os.environ.get("PRICER_SEED")
        try:
            seed = int(env) if env else 0
        except ValueError:
            print(f"error: PRICER_SEED={env!r} is not an integer", file=sys.stderr)
            return EXIT_INPUT
    cfg = RunConfig(args.command, Path(args.out) if args.out else None, seed)
    try:
        return args.func(args, cfg)
    except (SolverError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, InvalidDistribution, MechanismError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
