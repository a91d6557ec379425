"""Command-line entry point: ``lqnash solve|verify|generate|rates``.

Exit codes: 0 success, 1 certificate failed, 2 parse or usage error,
3 initialization rejected or infeasible instance, 4 non-convergence,
5 invariant violation.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from . import io as lqio
from .diagnostics import nash_certificate
from .errors import (
    ConfigError,
    InfeasibleError,
    InitializationError,
    InvariantViolation,
    LQNashError,
    NonConvergenceError,
)
from .outer import SolverConfig, solve_nash
from .rates import RATE_COLUMNS, run_rates

EXIT_OK, EXIT_CERT, EXIT_PARSE, EXIT_INIT, EXIT_NONCONV, EXIT_INVARIANT = range(6)

log = logging.getLogger("lqnash")


def _setup_logging():
    level = os.environ.get("LQNASH_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def _config(args):
    doc = {}
    if getattr(args, "config", None):
        doc = lqio.load_json(args.config)
        if not isinstance(doc, dict):
            raise lqio.ParseError("config must be a JSON object")
    for key in ("method", "leader", "init", "tol", "max_outer", "max_inner", "inner_method", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            doc[key] = v
    if getattr(args, "aggressive", False):
        doc["aggressive_stepsize"] = True
    if isinstance(doc.get("init"), list):
        doc["init"] = np.array(doc["init"], dtype=float)
    unknown = set(doc) - set(SolverConfig.__dataclass_fields__)
    if unknown:
        raise lqio.ParseError(f"unknown config keys {sorted(unknown)}")
    return SolverConfig(**doc)


def _write_trace(path, trace, fixed_clock):
    if trace is not None:
        lqio.atomic_write_text(path, lqio.trace_to_csv(trace, fixed_clock))


def cmd_solve(args):
    game = lqio.load_instance(args.instance)
    cfg = _config(args)
    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, "trace.csv")
    try:
        sol = solve_nash(game, cfg)
    except (NonConvergenceError, InvariantViolation) as exc:
        _write_trace(trace_path, exc.trace, args.fixed_clock)
        raise
    lqio.atomic_write_text(os.path.join(args.out, "solution.json"), lqio.dumps_json(lqio.solution_to_dict(sol)))
    _write_trace(trace_path, sol.trace, args.fixed_clock)
    print(json.dumps(sol.certificate.to_dict()))
    return EXIT_OK if sol.certificate.passed else EXIT_CERT


def cmd_verify(args):
    game = lqio.load_instance(args.instance)
    K, L = lqio.load_policy(args.policy, game)
    cert = nash_certificate(game, K, L, tol=args.tol)
    doc = {k: (v if not isinstance(v, float) or np.isfinite(v) else None) for k, v in cert.to_dict().items()}
    print(json.dumps(doc))
    return EXIT_OK if cert.passed else EXIT_CERT


def cmd_generate(args):
    if args.scalar_preset:
        game = lqio.PRESETS[args.scalar_preset]()
    else:
        if min(args.n, args.m1, args.m2) < 1:
            raise ConfigError("--n, --m1 and --m2 must be at least 1")
        game = lqio.generate_instance(args.n, args.m1, args.m2, args.seed, args.indefinite_at_ne)
    text = lqio.dumps_json(lqio.game_to_dict(game))
    if args.out == "-":
        sys.stdout.write(text)
    else:
        lqio.atomic_write_text(args.out, text)
    return EXIT_OK


def cmd_rates(args):
    game = lqio.load_instance(args.instance)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in ("ng", "qn")]
    if bad or not methods:
        raise ConfigError(f"--methods accepts ng and qn, got {args.methods!r}")
    rows, summaries = run_rates(game, methods, tol=args.tol, max_outer=args.max_outer)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RATE_COLUMNS)
    for m, j, c, e, g in rows:
        w.writerow([m, j, repr(float(c)), repr(float(e)), repr(float(g))])
    lqio.atomic_write_text(args.out, buf.getvalue())
    summary = [s.to_dict() for s in summaries]
    lqio.atomic_write_text(os.path.splitext(args.out)[0] + "_summary.json", lqio.dumps_json(summary))
    print(json.dumps(summary))
    return EXIT_OK if all(s.converged for s in summaries) else EXIT_NONCONV


def build_parser():
    p = argparse.ArgumentParser(prog="lqnash", description="Nash equilibria of zero-sum LQ dynamic games.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run a leader loop and certify the result")
    s.add_argument("instance")
    s.add_argument("--config", help="JSON file with solver settings; flags override it")
    s.add_argument("--method", choices=["ng", "qn"])
    s.add_argument("--leader", choices=["L", "K"])
    s.add_argument("--init", choices=["zero", "bootstrap"])
    s.add_argument("--tol", type=float)
    s.add_argument("--max-outer", dest="max_outer", type=int)
    s.add_argument("--max-inner", dest="max_inner", type=int)
    s.add_argument("--inner-method", dest="inner_method", choices=["gradient", "ng", "qn"])
    s.add_argument("--aggressive", action="store_true", help="use eta = 1/lambda_max(O)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", default=".", help="directory for solution.json and trace.csv")
    s.add_argument("--fixed-clock", action="store_true", help="write wall_ms as 0 for byte-identical traces")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="certify a policy pair")
    v.add_argument("instance")
    v.add_argument("policy")
    v.add_argument("--tol", type=float, default=1e-8)
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("generate", help="write a random or preset instance")
    g.add_argument("--n", type=int, default=3)
    g.add_argument("--m1", type=int, default=1)
    g.add_argument("--m2", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--indefinite-at-ne", dest="indefinite_at_ne", action="store_true")
    g.add_argument("--scalar-preset", dest="scalar_preset", choices=sorted(lqio.PRESETS))
    g.add_argument("--out", default="-", help="output path, '-' for stdout")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("rates", help="per-iteration errors and fitted rates")
    r.add_argument("instance")
    r.add_argument("--methods", default="ng,qn")
    r.add_argument("--out", default="rates.csv")
    r.add_argument("--tol", type=float, default=1e-10)
    r.add_argument("--max-outer", dest="max_outer", type=int, default=500)
    r.set_defaults(func=cmd_rates)
    return p


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (lqio.ParseError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InitializationError as exc:
        print(f"error: initialization check '{exc.check}' failed: {exc}", file=sys.stderr)
        return EXIT_INIT
    except InfeasibleError as exc:
        print(f"error: infeasible instance: {exc}", file=sys.stderr)
        return EXIT_INIT
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except InvariantViolation as exc:
        print(f"error: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except LQNashError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
