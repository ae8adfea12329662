"""Command-line entry point.

Numeric results go to stdout as JSON (CSV for ``frontier``), a one-line
summary goes to stderr. Exit codes: 0 success, 1 domain error, 2 usage or
input error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import audit as audit_mod
from . import bounds, compose, divergence, mechanism, properties, tradeoff
from .core import QpuffError, as_state, load_channel, load_json, matrix_from_dict
from .framework import PrivacyBudget, check_qpp, framework_from_dict

EXIT_OK, EXIT_DOMAIN, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Unreadable or malformed input file or argument."""


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _load(loader, path):
    try:
        return loader(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _state(path):
    return _load(lambda p: as_state(matrix_from_dict(load_json(p))), path)


def _channel(path):
    return _load(load_channel, path)


def _framework(path):
    base = os.path.dirname(os.path.abspath(path))

    def ref(p):
        return as_state(matrix_from_dict(load_json(os.path.join(base, p))))

    return _load(lambda p: framework_from_dict(load_json(p), state_loader=ref), path)


def _pairs(path):
    """A JSON list of ``[rho, sigma]`` matrix objects."""
    def read(p):
        return [(matrix_from_dict(a), matrix_from_dict(b)) for a, b in load_json(p)]
    return _load(read, path)


def _budget_arg(text: str) -> PrivacyBudget:
    try:
        eps, delta = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"budget must be 'eps,delta', got {text!r}") from exc
    return PrivacyBudget(eps, delta)


def _floats(text: str) -> list:
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            return np.linspace(float(lo), float(hi), int(n)).tolist()
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'a,b,c' or 'lo:hi:n', got {text!r}") from exc


# ---------------------------------------------------------------------------
# verbs


def _divergence(args):
    rho, sigma = _state(args.rho), _state(args.sigma)
    kind = args.kind
    if kind == "dl":
        v = divergence.dl_divergence(rho, sigma, args.delta, args.method)
        out = {"value": v.value, "method": v.method, "gap": v.gap}
    elif kind == "dl_lower":
        v = divergence.dl_divergence_underline(rho, sigma, args.delta, args.method)
        out = {"value": v.value, "method": v.method}
    elif kind == "dmax":
        v = divergence.dmax(rho, sigma, args.method)
        out = {"value": v.value, "method": v.method}
    elif kind == "smooth":
        out = {"value": divergence.dmax_smooth(rho, sigma, args.delta).value}
    elif kind == "hockey":
        out = {"value": divergence.hockey_stick(rho, sigma, args.gamma)}
    elif kind == "thompson":
        out = {"value": divergence.thompson(rho, sigma)}
    elif kind == "petz":
        out = {"value": divergence.renyi_petz(rho, sigma, args.alpha)}
    elif kind == "sandwiched":
        out = {"value": divergence.renyi_sandwiched(rho, sigma, args.alpha)}
    else:
        out = {"value": divergence.relative_entropy(rho, sigma)}
    out["kind"] = kind
    return out, f"{kind} = {out['value']:.6g}"


def _check(args):
    f, a = _framework(args.framework), _channel(args.channel)
    rep = check_qpp(f, a, PrivacyBudget(args.eps, args.delta), slack=args.slack, threads=args.threads)
    return rep.to_dict(), f"{'holds' if rep.holds else 'fails'}; min eps {rep.min_eps:.6g}, min delta {rep.min_delta:.6g}"


def _calibrate(args):
    f = _framework(args.framework)
    pre = _channel(args.pre) if args.pre else None
    budget = PrivacyBudget(args.eps, args.delta)
    plan = mechanism.calibrate_eps(f, pre, args.eps) if args.delta == 0 else mechanism.calibrate_eps_delta(f, pre, budget)
    if args.tighten:
        plan = mechanism.tighten(f, pre, budget, plan)
    a = plan.mechanism(pre)
    out = {"plan": plan.to_dict(), "check": check_qpp(f, a, budget, threads=args.threads).to_dict()}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(a.to_dict(), fh)
        out["channel"] = args.out
    return out, f"p = {plan.p:.6g} (K = {plan.K:.6g}, {plan.formula})"


def _compose(args):
    bs = args.budget
    if args.verify:
        rep = compose.verify_rule(args.verify, instances=args.instances, seed=args.seed, threads=args.threads)
        return rep.to_dict(), f"{args.verify}: {'pass' if rep.passed else 'FAIL'} on {len(rep.instances)} instances"
    if not bs:
        raise InputError("give at least one --budget eps,delta")
    rule = args.rule
    if rule == "product":
        res = [compose.parallel_product(bs)]
    elif rule == "joint":
        if len(bs) != 2:
            raise InputError("joint composition takes exactly two budgets")
        res = list(compose.parallel_joint(*bs))
    elif rule == "adaptive":
        if len(bs) != 2:
            raise InputError("adaptive composition takes exactly two budgets")
        res = [compose.adaptive(bs[0], bs[1], args.y_size)]
    elif rule == "convex":
        probs = args.probs or [1 / len(bs)] * len(bs)
        res = [compose.convex_combination(bs, probs)]
    else:
        if len(bs) != 1:
            raise InputError("post-processing takes exactly one budget")
        res = [compose.post_process(bs[0])]
    out = {"results": [r.to_dict() for r in res]}
    return out, "; ".join(f"{r.rule}: ({r.budget.eps:.6g}, {r.budget.delta:.6g})" for r in res)


def _utility(args):
    a = _channel(args.channel)
    res = tradeoff.utility(a)
    out = res.to_dict()
    if args.compare:
        out["diamond_distance"] = tradeoff.diamond_distance(a, _channel(args.compare))
    return out, f"utility = {res.utility:.6g}"


def _frontier(args):
    rows = tradeoff.frontier(args.eps_grid, ks=args.K, d=args.d)
    text = tradeoff.frontier_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return None, f"{len(rows)} frontier rows"


def _audit(args):
    a = _channel(args.channel)
    cfg = audit_mod.AuditConfig(PrivacyBudget(args.eps, args.delta), _pairs(args.pairs),
                                alpha=args.alpha, beta=args.beta, seed=args.seed, exact=args.exact)
    rep = audit_mod.audit(a, cfg)
    out = rep.to_dict()
    if args.trials:
        out["type1"] = audit_mod.type1_curve(a, cfg, trials=args.trials, threads=args.threads).to_dict()
    return out, f"{rep.decision}: statistic {rep.statistic:.6g} vs threshold {rep.threshold:.6g}"


def _bounds(args):
    if args.verify:
        rep = bounds.verify_bounds(args.verify, seed=args.seed, threads=args.threads)
        out = {k: v for k, v in rep.to_dict().items() if k != "statements"}
        return out, f"bounds {'hold' if rep.passed else 'VIOLATED'} (min slack {rep.min_slack:.3g})"
    budget = PrivacyBudget(args.eps, args.delta)
    out = {"budget": budget.to_dict(), "trace_norm": bounds.trace_norm_bound(budget)}
    if args.delta == 0:
        out["renyi"] = bounds.renyi_bound(args.eps, args.alpha)
        out["relative_entropy"] = bounds.relative_entropy_bound(args.eps)
        out["fairness"] = bounds.fairness_from_qpp(args.eps)
    try:
        out["holevo"] = bounds.holevo_bounds(args.eps, args.delta, args.d)
    except QpuffError as exc:
        out["holevo"] = None
        out["holevo_note"] = str(exc)
    if args.eps_prime is not None:
        out["converted"] = bounds.strength_convert(budget, args.eps_prime).to_dict()
    if args.chain_delta is not None:
        out["chain"] = bounds.variant_chain(args.eps, args.alpha, args.chain_delta, args.K)
    return out, f"trace-norm bound {out['trace_norm']:.6g}"


def _selftest(args):
    n = args.instances
    parts = {}
    for s in properties.SUITES:
        parts[s] = properties.run_suite(s, n, seed=args.seed).to_dict()
    for r in compose.RULES:
        rep = compose.verify_rule(r, instances=max(1, n // 4), seed=args.seed, threads=args.threads)
        parts[f"compose.{r}"] = {"passed": rep.passed, "instances": len(rep.instances)}
    rep = bounds.verify_bounds(n, seed=args.seed, iid_instances=1, threads=args.threads)
    parts["bounds"] = {"passed": rep.passed, "min_slack": rep.min_slack}
    ok = all(p["passed"] for p in parts.values())
    out = {"passed": ok, "suites": parts}
    if not ok:
        raise _Failed(out, "selftest failed")
    return out, f"selftest passed ({len(parts)} suites)"


class _Failed(Exception):
    def __init__(self, payload, message):
        super().__init__(message)
        self.payload = payload


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random draw")
    common.add_argument("--tol", type=float, default=None, help="solver tolerance (default 1e-8)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    p = argparse.ArgumentParser(prog="qpuff", description="Quantum pufferfish privacy toolkit.")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("divergence", parents=[common], help="evaluate a divergence between two states")
    s.add_argument("--kind", default="dl", choices=["dl", "dl_lower", "dmax", "smooth", "hockey", "thompson",
                                                    "petz", "sandwiched", "relative"])
    s.add_argument("--rho", required=True)
    s.add_argument("--sigma", required=True)
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--alpha", type=float, default=2.0)
    s.add_argument("--method", default="spectral", choices=["spectral", "sdp"])
    s.set_defaults(fn=_divergence)

    s = sub.add_parser("check", parents=[common], help="verify a channel against a framework")
    s.add_argument("--framework", required=True)
    s.add_argument("--channel", required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--slack", type=float, default=1e-7)
    s.set_defaults(fn=_check)

    s = sub.add_parser("calibrate", parents=[common], help="calibrate a depolarizing mechanism")
    s.add_argument("--framework", required=True)
    s.add_argument("--pre", help="channel applied before depolarizing")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--tighten", action="store_true", help="bisect p against the checker")
    s.add_argument("--out", help="write the calibrated channel here")
    s.set_defaults(fn=_calibrate)

    s = sub.add_parser("compose", parents=[common], help="compose privacy budgets")
    s.add_argument("--rule", default="product", choices=["product", "joint", "adaptive", "convex", "post_process"])
    s.add_argument("--budget", type=_budget_arg, action="append", default=[], help="eps,delta (repeatable)")
    s.add_argument("--probs", type=_floats)
    s.add_argument("--y-size", type=int, default=1)
    s.add_argument("--verify", choices=compose.RULES, help="check a rule on random channels instead")
    s.add_argument("--instances", type=int, default=20)
    s.set_defaults(fn=_compose)

    s = sub.add_parser("utility", parents=[common], help="utility of a channel")
    s.add_argument("--channel", required=True)
    s.add_argument("--compare", help="also report the diamond distance to this channel")
    s.set_defaults(fn=_utility)

    s = sub.add_parser("frontier", parents=[common], help="privacy-utility frontier of depolarization (CSV)")
    s.add_argument("--eps-grid", type=_floats, default=_floats("0.1:3:30"))
    s.add_argument("--K", type=_floats, default=[0.25, 0.5, 1.0])
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--out")
    s.set_defaults(fn=_frontier)

    s = sub.add_parser("audit", parents=[common], help="hypothesis-test audit of a channel")
    s.add_argument("--channel", required=True)
    s.add_argument("--pairs", required=True, help="JSON list of [rho, sigma] matrices")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--beta", type=float, default=0.1)
    s.add_argument("--exact", action="store_true")
    s.add_argument("--trials", type=int, default=0, help="also estimate the type-I rate")
    s.set_defaults(fn=_audit)

    s = sub.add_parser("bounds", parents=[common], help="consequences of a privacy budget")
    s.add_argument("--eps", type=float, default=1.0)
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--alpha", type=float, default=2.0)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--eps-prime", type=float)
    s.add_argument("--chain-delta", type=float)
    s.add_argument("--K", type=float)
    s.add_argument("--verify", type=int, default=0, help="check the bounds on this many random channels")
    s.set_defaults(fn=_bounds)

    s = sub.add_parser("selftest", parents=[common], help="run the invariant suites")
    s.add_argument("--instances", type=int, default=8)
    s.set_defaults(fn=_selftest)
    return p


@contextmanager
def _solver_tol(tol):
    if tol is None:
        yield
        return
    old = os.environ.get("QPUFF_SOLVER_TOL")
    os.environ["QPUFF_SOLVER_TOL"] = repr(tol)
    try:
        yield
    finally:
        if old is None:
            os.environ.pop("QPUFF_SOLVER_TOL", None)
        else:
            os.environ["QPUFF_SOLVER_TOL"] = old


def _emit(payload):
    if payload is not None:
        json.dump(_jsonable(payload), sys.stdout, indent=2, allow_nan=False)
        sys.stdout.write("\n")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        with _solver_tol(args.tol):
            payload, summary = args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _Failed as exc:
        _emit(exc.payload)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (QpuffError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _emit(payload)
    print(summary, file=sys.stderr)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
