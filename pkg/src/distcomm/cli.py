"""Command line front end.

Subcommands consume one JSON config document and emit CSV (stdout or --out):

  rd        R(D) curve for the configured source          (columns D,R)
  exponent  random-coding exponent vs typicality window   (eps,value)
  simulate  per-trial records                             (trial,message,...)
  sweep     error estimates along one axis                (axis_value,...)
  certify   block-distortion certificate                  (n,trials,...)
  serve     run the HTTP service

Exit codes: 0 success, 2 configuration error, 3 component error.
"""
from __future__ import annotations

import argparse
import sys

from .config import build_experiment, load_config
from .errors import ConfigError
from .harness import (certify_table, exponent_table, format_csv, rd_table,
                      simulate_table, sweep_table)

_DEFAULT_RD_POINTS = 33
_DEFAULT_EPS_VALUES = [0.0, 0.01, 0.02, 0.05, 0.1]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distcomm",
        description="reliable-bits-over-distortion-attackers experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("rd", "exponent", "simulate", "sweep", "certify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None,
                       help="override master_seed")
        p.add_argument("--trials", type=int, default=None,
                       help="override trial count")
        p.add_argument("--out", default=None, help="CSV output path")
        p.add_argument("--quiet", action="store_true")
    serve = sub.add_parser("serve")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _run_subcommand(args) -> str:
    model = load_config(args.config)
    if args.seed is not None:
        model = model.model_copy(update={"master_seed": args.seed})
    if args.trials is not None:
        model = model.model_copy(update={"trials": args.trials})
    cfg = build_experiment(model)

    if args.command == "rd":
        header, rows = rd_table(cfg, model.points or _DEFAULT_RD_POINTS)
    elif args.command == "exponent":
        header, rows = exponent_table(
            cfg, model.eps_values or _DEFAULT_EPS_VALUES)
    elif args.command == "simulate":
        header, rows = simulate_table(cfg)
    elif args.command == "sweep":
        if model.sweep is None:
            raise ConfigError("sweep subcommand needs a 'sweep' config section")
        header, rows = sweep_table(cfg, model.sweep.axis, model.sweep.values)
    elif args.command == "certify":
        header, rows = certify_table(cfg)
    else:  # pragma: no cover
        raise ConfigError(f"unknown subcommand {args.command!r}")
    return format_csv(header, rows)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import app
        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    try:
        csv_text = _run_subcommand(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # component failures
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(csv_text)
        if not args.quiet:
            print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(csv_text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
