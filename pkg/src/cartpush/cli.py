"""Command-line entry point: ``cartpush simulate | identify | benchmark``.

Exit codes: 0 success, 1 benchmark criteria failed, 2 bad input
(config, trace schema, unknown suite), 3 runtime failure. Errors print a
single line ``cartpush: <reason>: <detail>`` to stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import config as cfgmod
from .benchmark import SUITES, format_table, run_suite
from .errors import CartPushError, ConfigError, InsufficientDataError
from .estimation import CartIdentifier
from .metrics import compute_metrics
from .simulation import run_scenario
from .traces import TraceSchemaError, read_trace, write_trace

OUTPUT_ROOT_ENV = "CARTPUSH_OUTPUT_ROOT"
EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("cartpush")


class CliError(Exception):
    def __init__(self, reason, detail, code):
        super().__init__(detail)
        self.reason = reason
        self.code = code


def _out_dir(arg, command):
    if arg:
        return arg
    root = os.environ.get(OUTPUT_ROOT_ENV, "cartpush-out")
    return os.path.join(root, command)


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=lambda o: o.item() if isinstance(o, np.generic) else str(o))
        fh.write("\n")


def _load_config(path):
    try:
        return cfgmod.load(path)
    except ConfigError as exc:
        raise CliError("config-error", str(exc), EXIT_INPUT) from None
    except OSError as exc:
        raise CliError("config-error", f"cannot read {path}: {exc.strerror}", EXIT_INPUT) from None


def cmd_simulate(args):
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario, seed=args.seed))
    out = _out_dir(args.out, "simulate")
    os.makedirs(out, exist_ok=True)
    try:
        trace = run_scenario(cfg.scenario, cfg.cart, cfg.ballbot, cfg.ekf, cfg.controller)
        metrics = compute_metrics(trace)
    except (CartPushError, ValueError, ArithmeticError) as exc:
        raise CliError("simulation-error", str(exc), EXIT_RUNTIME) from None
    write_trace(trace, os.path.join(out, "trace.csv"))
    _write_json(os.path.join(out, "metrics.json"), metrics)
    with open(os.path.join(out, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(cfgmod.dumps(cfg))
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(cfgmod.to_json(cfg) + "\n")
    log.info("wrote %s", out)
    return EXIT_OK


def cmd_identify(args):
    cfg = _load_config(args.config) if args.config else cfgmod.SimConfig()
    try:
        data = read_trace(args.trace, min_rows=1)
    except TraceSchemaError as exc:
        raise CliError("schema-error", str(exc), EXIT_INPUT) from None
    except OSError as exc:
        raise CliError("schema-error", f"cannot read {args.trace}: {exc.strerror}", EXIT_INPUT) from None
    except InsufficientDataError as exc:
        raise CliError("insufficient-data", str(exc), EXIT_RUNTIME) from None
    X = np.column_stack([data[k] for k in ("t", "x", "y", "theta", "v_x", "omega", "f_p", "tau")])
    template = cfg.cart
    try:
        ident = CartIdentifier(noise=cfg.ekf, template=template).fit(X)
    except InsufficientDataError as exc:
        raise CliError("insufficient-data", str(exc), EXIT_RUNTIME) from None
    except (CartPushError, ValueError, ArithmeticError) as exc:
        raise CliError("identification-error", str(exc), EXIT_RUNTIME) from None
    out = _out_dir(args.out, "identify")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "estimates.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "phi1", "phi2", "phi3", "phi4", "phi5"))
        for row in ident.history_:
            w.writerow([format(v, ".17g") for v in row])
    p = ident.params_
    _write_json(os.path.join(out, "params.json"), {
        "m_w": p.m_w, "p_x": p.p_x, "p_y": p.p_y, "I_w": p.I_w, "mu": p.mu, "sigma": p.sigma,
        "phi": list(ident.phi_), "degenerate_updates": ident.n_degenerate_,
    })
    print(f"m_w={p.m_w:.4f} p_x={p.p_x:.4f} p_y={p.p_y:.4f} I_w={p.I_w:.4f} sigma={p.sigma:.5f}")
    return EXIT_OK


def cmd_benchmark(args):
    if args.suite not in SUITES:
        raise CliError("unknown-suite", f"{args.suite!r} (choose from {', '.join(SUITES)})", EXIT_INPUT)
    out = os.path.join(_out_dir(args.out, "benchmark"), args.suite) if not args.out else args.out
    os.makedirs(out, exist_ok=True)
    try:
        rows, metrics = run_suite(args.suite, out, workers=args.workers, seed=args.seed)
    except (CartPushError, ValueError, ArithmeticError) as exc:
        raise CliError("simulation-error", str(exc), EXIT_RUNTIME) from None
    table = format_table(rows)
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    _write_json(os.path.join(out, "report.json"), {"rows": rows, "metrics": metrics})
    print(table)
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_FAILED


def build_parser():
    p = argparse.ArgumentParser(prog="cartpush", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one configured scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("identify", help="replay the estimator over a recorded trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--out")
    s.add_argument("--config", help="optional config for [ekf] settings and [cart] geometry")
    s.set_defaults(func=cmd_identify)

    s = sub.add_parser("benchmark", help="run a canned scenario suite")
    s.add_argument("--suite", required=True)
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"cartpush: {exc.reason}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
