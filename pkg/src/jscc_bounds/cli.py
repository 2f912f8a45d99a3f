"""``jscc-bounds`` command line.

Inputs come from a JSON ``--config`` file; selected fields can be
overridden by flags.  Results are printed (or written to ``--out``) as JSON
with sorted keys, except ``sweep`` which emits CSV.

Exit status: 0 member/feasible/passed, 1 not found/violated, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .correlation import (
    PropertyReport,
    ace_maximal_correlation,
    correlation_report,
    gaussian_maximal_correlation_mc,
    random_markov,
    random_pmf,
    verify_dpi,
    verify_lemma_chain,
    verify_tensorization,
)
from .discrete import (
    Channel,
    SearchConfig,
    capacity_region_common_message,
    certify_inner_point,
    check_lossless_admissible,
    dsc_inner_check,
    hamming,
    noiseless_mac,
    useless_mac,
    validate_certificate,
)
from .errors import BoundsError, ValidationError
from .gaussian import GaussianProblem
from .hybrid import HybridParams, evaluate_hybrid, optimize_hybrid
from .outer import OuterGrid, outer_membership, symmetric_outer_min_distortion
from .pmf import JointPmf
from .search import Objective
from .sweep import SweepSpec, rows_to_csv, run_sweep
from .uncoded import UncodedGains, optimize_uncoded, simulate_uncoded, uncoded_distortions

EXIT_OK, EXIT_NO, EXIT_INPUT = 0, 1, 2
SUITES = ("lemma-chain", "dpi", "tensorization", "gaussian")


class InputError(Exception):
    pass


# ------------------------------------------------------------------ output

def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(args, text: str):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------ inputs

def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise InputError("config must be a JSON object")
    return data


DEFAULT_PROBLEM = {"rho01": 0.8, "rho02": 0.8, "rho12": 0.3, "p1": 1.0, "p2": 1.0}


def _problem(args, cfg: dict) -> GaussianProblem:
    data = {**DEFAULT_PROBLEM, **cfg.get("problem", {})}
    for key in ("rho01", "rho02", "rho12", "p1", "p2"):
        if getattr(args, key, None) is not None:
            data[key] = getattr(args, key)
    if getattr(args, "power", None) is not None:
        data["p1"] = data["p2"] = args.power
    return GaussianProblem.from_dict(data)


def _get(args, cfg: dict, key: str, default=None):
    val = getattr(args, key, None)
    if val is not None:
        return val
    return cfg.get(key, default)


def _number(value, name: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number") from None


def _pmf(data) -> JointPmf:
    if not isinstance(data, dict):
        raise ValidationError("pmf must be an object with 'alphabets' and 'table'")
    return JointPmf.from_dict(data)


def _channel(data) -> Channel:
    if isinstance(data, str):
        named = {"noiseless": noiseless_mac, "useless": useless_mac}
        if data not in named:
            raise ValidationError(f"unknown channel {data!r}")
        return named[data]()
    if not isinstance(data, dict):
        raise ValidationError("channel must be a name or an object with a 'table'")
    return Channel.from_dict(data)


def _distortions(cfg: dict, source: JointPmf):
    n1, n2 = source.table.shape
    d1 = np.asarray(cfg.get("dist1", hamming(n1)), dtype=float)
    d2 = np.asarray(cfg.get("dist2", hamming(n2)), dtype=float)
    return d1, d2


def _search_config(args, cfg: dict) -> SearchConfig:
    data = dict(cfg.get("search", {}))
    data.setdefault("seed", args.seed)
    try:
        return SearchConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad search options: {exc}") from None


def _objective(cfg: dict) -> Objective:
    data = cfg.get("objective", {})
    try:
        return Objective(**{k: (tuple(v) if k == "targets" else v) for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad objective: {exc}") from None


# ------------------------------------------------------------------ subcommands

def cmd_sweep(args, cfg):
    data = dict(cfg)
    if args.budget is not None:
        data["budget"] = args.budget
    if args.curves:
        data["curves"] = args.curves.split(",")
    data["seed"] = args.seed
    spec = SweepSpec.from_dict(data)
    rows = run_sweep(spec, threads=args.threads)
    _emit(args, rows_to_csv(rows, timing=args.timing))
    return EXIT_OK if all(r.error is None for r in rows) else EXIT_NO


def cmd_inner_hybrid(args, cfg):
    problem = _problem(args, cfg)
    budget = int(_get(args, cfg, "budget", 3000))
    targets = _targets(args, cfg)
    objective = _objective(cfg)
    if targets is not None and "objective" not in cfg:
        objective = Objective("target", targets=targets)
    if "params" in cfg:
        params = HybridParams.from_dict(cfg["params"])
        ev = evaluate_hybrid(params, problem)
        ok = ev.feasible and _meets(ev.d1, ev.d2, targets)
        _emit(args, dumps({"found": ok, "params": params.to_dict(), "evaluation": ev.to_dict()}))
        return EXIT_OK if ok else EXIT_NO
    if budget < 1:
        _emit(args, dumps({"found": False, "reason": "evaluation budget is zero"}))
        return EXIT_NO
    opt = optimize_hybrid(problem, budget, args.seed, objective, threads=args.threads,
                          uncoded_resolution=int(cfg.get("uncoded_resolution", 41)))
    ev = opt.evaluation
    ok = opt.found and ev.feasible and _meets(ev.d1, ev.d2, targets)
    _emit(args, dumps({"found": ok, "params": opt.params.to_dict(), "evaluation": ev.to_dict(),
                       "evaluations": opt.evaluations, "starts": opt.starts,
                       "diagnostics": opt.diagnostics}))
    return EXIT_OK if ok else EXIT_NO


def cmd_inner_uncoded(args, cfg):
    problem = _problem(args, cfg)
    targets = _targets(args, cfg)
    if "gains" in cfg:
        gains = UncodedGains.from_dict(cfg["gains"])
        d1, d2 = uncoded_distortions(gains, problem)
    else:
        res = int(_get(args, cfg, "resolution", 41))
        opt = optimize_uncoded(problem, res, _objective(cfg))
        gains, d1, d2 = opt.gains, opt.d1, opt.d2
    ok = gains.within_power(problem) and _meets(d1, d2, targets)
    _emit(args, dumps({"found": ok, "gains": gains.to_dict(), "d1": d1, "d2": d2}))
    return EXIT_OK if ok else EXIT_NO


def cmd_outer(args, cfg):
    problem = _problem(args, cfg)
    grid = OuterGrid(**cfg.get("grid", {}))
    if args.symmetric:
        d = symmetric_outer_min_distortion(problem, grid, float(cfg.get("tol", 1e-8)))
        _emit(args, dumps({"d_min": d, "problem": problem.to_dict()}))
        return EXIT_OK
    targets = _targets(args, cfg)
    if targets is None:
        raise ValidationError("outer needs --d1 and --d2 (or --symmetric)")
    verdict = outer_membership(targets[0], targets[1], problem, grid)
    _emit(args, dumps(verdict.to_dict()))
    return EXIT_OK if verdict.member else EXIT_NO


def cmd_discrete_certify(args, cfg):
    source = _pmf(cfg.get("source"))
    dist1, dist2 = _distortions(cfg, source)
    targets = _targets(args, cfg)
    if targets is None:
        raise ValidationError("discrete-certify needs target distortions d1, d2")
    search = _search_config(args, cfg)
    if "rates" in cfg:
        r1, r2 = (_number(r, "rate") for r in cfg["rates"])
        cert = dsc_inner_check(source, r1, r2, targets[0], targets[1], dist1, dist2, search)
        check_kw = {"rates": (r1, r2)}
    else:
        channel = _channel(cfg.get("channel"))
        cert = certify_inner_point(source, channel, targets[0], targets[1], dist1, dist2,
                                   search)
        check_kw = {"channel": channel}
    if cert is None:
        _emit(args, dumps({"found": False, "search_limits": search.to_dict()}))
        return EXIT_NO
    check = validate_certificate(cert, source, dist1, dist2, targets, **check_kw)
    _emit(args, dumps({"found": True, "certificate": cert.to_dict(), "revalidated": check.valid}))
    return EXIT_OK if check.valid else EXIT_NO


def cmd_lossless_check(args, cfg):
    source = _pmf(cfg.get("source"))
    channel = _channel(cfg.get("channel"))
    wit = check_lossless_admissible(source, channel, int(cfg.get("max_w", 2)),
                                    _search_config(args, cfg))
    _emit(args, dumps({"admissible": wit is not None,
                       "witness": None if wit is None else wit.to_dict()}))
    return EXIT_OK if wit is not None else EXIT_NO


def cmd_capacity_cm(args, cfg):
    channel = _channel(cfg.get("channel", "noiseless"))
    region = capacity_region_common_message(channel, int(cfg.get("grid_resolution", 4)),
                                            int(cfg.get("max_w", 2)),
                                            int(cfg.get("max_points", 20000)), args.seed)
    out = {"corner_points_nats": region.corner_points(), "polytopes": len(region.bounds)}
    code = EXIT_OK
    if "rates" in cfg:
        rates = [_number(r, "rate") for r in cfg["rates"]]
        if len(rates) != 3:
            raise ValidationError("rates must be (R0, R1, R2)")
        inside = region.contains(rates, float(cfg.get("slack", 0.0)))
        out["contains"] = inside
        code = EXIT_OK if inside else EXIT_NO
    _emit(args, dumps(out))
    return code


def cmd_correlation(args, cfg):
    pmf = _pmf(cfg.get("pmf"))
    a = cfg.get("a", pmf.names[0])
    b = cfg.get("b", pmf.names[1] if len(pmf.names) > 1 else pmf.names[0])
    given = list(cfg.get("given", []))
    try:
        rep = correlation_report(pmf, a, b, given).to_dict()
        if cfg.get("ace", False):
            rep["ace_maximal"] = ace_maximal_correlation(pmf, a, b, seed=args.seed)
    except KeyError as exc:
        raise ValidationError(str(exc)) from None
    _emit(args, dumps(rep))
    return EXIT_OK


def _merge(into: PropertyReport, other: PropertyReport) -> PropertyReport:
    into.instances += other.instances
    for k, v in other.worst.items():
        into.worst[k] = min(into.worst.get(k, math.inf), v)
    for k, v in other.violations.items():
        into.violations[k] = into.violations.get(k, 0) + v
    return into


def run_properties(suite: str, count: int, seed: int, tol: float = 1e-9,
                   samples: int = 1_000_000) -> PropertyReport:
    """Run one property suite on ``count`` seeded random instances."""
    if count < 1:
        raise ValidationError("count must be at least 1")
    if suite not in SUITES:
        raise ValidationError(f"unknown suite {suite!r}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, SUITES.index(suite)]))
    if suite == "lemma-chain":
        pmfs = [random_pmf((3, 3, 3), ("W0", "W1", "W2"), rng) for _ in range(count)]
        return verify_lemma_chain(pmfs, tol)
    if suite == "dpi":
        rep = verify_dpi([random_markov(rng) for _ in range(count)], tol)
        # equality cases: identical channels from (Y, W), and binary Y without W
        eq = [random_markov(rng, identical=True) for _ in range(max(1, count // 5))]
        eq += [random_markov(rng, ny=2, nw=1, identical=True) for _ in range(max(1, count // 5))]
        return _merge(rep, verify_dpi(eq, tol, check_equality=True))
    if suite == "tensorization":
        rep = PropertyReport(tol=tol)
        for _ in range(count):
            shape = tuple(int(k) for k in rng.integers(2, 4, 2))
            res = verify_tensorization(random_pmf(shape, ("W1", "W2"), rng), 2)
            rep.instances += 1
            rep.record("tensorization", -abs(res.margin))
        return rep
    rep = PropertyReport(tol=0.0)
    for k, rho in enumerate((0.2, 0.5, 0.8)):
        for i in range(count):
            est = gaussian_maximal_correlation_mc(rho, samples, seed=seed + 1000 * k + i)
            rep.instances += 1
            rep.record(f"gaussian_rho_{rho}", 0.02 - abs(est - rho))
    return rep


def cmd_properties(args, cfg):
    suite = _get(args, cfg, "suite")
    count = int(_get(args, cfg, "count", 100))
    report = run_properties(suite, count, args.seed, float(cfg.get("tol", 1e-9)),
                            int(_get(args, cfg, "samples", 1_000_000)))
    _emit(args, dumps({"suite": suite, "seed": args.seed, **report.to_dict()}))
    return EXIT_OK if report.passed else EXIT_NO


def cmd_simulate(args, cfg):
    problem = _problem(args, cfg)
    n = int(_get(args, cfg, "samples", 1_000_000))
    if n < 1:
        raise ValidationError("samples must be at least 1")
    if "gains" in cfg:
        gains = UncodedGains.from_dict(cfg["gains"])
    else:
        gains = optimize_uncoded(problem, int(cfg.get("resolution", 41))).gains
    sim = simulate_uncoded(problem, gains, n, args.seed)
    d1, d2 = uncoded_distortions(gains, problem)
    _emit(args, dumps({"gains": gains.to_dict(), "closed_form": [d1, d2],
                       "simulated": [sim.d1, sim.d2], "stderr": [sim.stderr1, sim.stderr2],
                       "samples": n}))
    return EXIT_OK


def _targets(args, cfg):
    d1 = _get(args, cfg, "d1")
    d2 = _get(args, cfg, "d2")
    if d1 is None and d2 is None:
        return None
    if d1 is None or d2 is None:
        raise ValidationError("give both d1 and d2")
    return (_number(d1, "d1"), _number(d2, "d2"))


def _meets(d1, d2, targets) -> bool:
    return targets is None or (d1 <= targets[0] and d2 <= targets[1])


# ------------------------------------------------------------------ parser

def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=default(None), help="JSON input file")
    p.add_argument("--seed", type=int, default=default(None))
    p.add_argument("--out", default=default(None), help="output path (default stdout)")
    p.add_argument("--threads", type=int, default=default(1))


def _problem_flags(p: argparse.ArgumentParser):
    for key in ("rho01", "rho02", "rho12", "p1", "p2"):
        p.add_argument(f"--{key}", type=float)
    p.add_argument("--power", type=float, help="set p1 = p2")


def _target_flags(p: argparse.ArgumentParser):
    p.add_argument("--d1", type=float)
    p.add_argument("--d2", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jscc-bounds",
                                     description="Distortion bounds for sending correlated "
                                                 "sources over a multiple access channel.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    p = sub.add_parser("sweep", parents=[common], help="power sweep of all curves (CSV)")
    p.add_argument("--budget", type=int)
    p.add_argument("--curves", help="comma-separated curve names")
    p.add_argument("--timing", action="store_true", help="fill the seconds column")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("inner-hybrid", parents=[common], help="hybrid coding inner bound")
    _problem_flags(p)
    _target_flags(p)
    p.add_argument("--budget", type=int)
    p.set_defaults(func=cmd_inner_hybrid)

    p = sub.add_parser("inner-uncoded", parents=[common], help="uncoded inner bound")
    _problem_flags(p)
    _target_flags(p)
    p.add_argument("--resolution", type=int)
    p.set_defaults(func=cmd_inner_uncoded)

    p = sub.add_parser("outer", parents=[common], help="outer bound membership")
    _problem_flags(p)
    _target_flags(p)
    p.add_argument("--symmetric", action="store_true", help="report the minimal symmetric D")
    p.set_defaults(func=cmd_outer)

    p = sub.add_parser("discrete-certify", parents=[common], help="discrete inner certificate")
    _target_flags(p)
    p.set_defaults(func=cmd_discrete_certify)

    p = sub.add_parser("lossless-check", parents=[common], help="lossless admissibility search")
    p.set_defaults(func=cmd_lossless_check)

    p = sub.add_parser("capacity-cm", parents=[common], help="MAC region with common message")
    p.set_defaults(func=cmd_capacity_cm)

    p = sub.add_parser("correlation", parents=[common], help="correlation measures of a pmf")
    p.set_defaults(func=cmd_correlation)

    p = sub.add_parser("properties", parents=[common], help="randomized property suites")
    p.add_argument("--suite", choices=SUITES)
    p.add_argument("--count", type=int)
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_properties)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo of the uncoded scheme")
    _problem_flags(p)
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.seed is None:
            args.seed = int(cfg.get("seed", 0))
        return args.func(args, cfg)
    except (InputError, BoundsError, KeyError, TypeError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
