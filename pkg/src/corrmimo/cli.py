"""Command-line front end: ``corrmimo run | reproduce | selftest``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments, selftest

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _cmd_run(args) -> int:
    try:
        cfg = experiments.load_config(args.config)
        rows = experiments.run_config(cfg)
    except experiments.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except experiments.NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = Path(args.out) if args.out else None
    if out is None:
        out = Path(cfg.output) if cfg.output else Path(args.config).with_suffix(".csv")
    meta = {
        "experiment": cfg.experiment,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "mutual_info_unit": "bits",
        "source_config": Path(args.config).name,
    }
    experiments.write_outputs(rows, out, meta)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    try:
        rows = experiments.figure_rows(args.figure, args.trials, args.seed)
    except experiments.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) / f"{args.figure}.csv"
    experiments.write_outputs(rows, out, experiments.figure_metadata(args.figure, args.trials, args.seed))
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    return selftest.run_suites()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrmimo", description="Correlated MIMO precoding simulations")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a JSON experiment config")
    r.add_argument("config")
    r.add_argument("--out", help="CSV path (default: config 'output' or <config>.csv)")
    r.set_defaults(func=_cmd_run)

    rp = sub.add_parser("reproduce", help="emit the sweep CSV for one figure")
    rp.add_argument("figure", help="fig1, fig2, fig3, fig4a or fig4b")
    rp.add_argument("--trials", type=int, default=10_000)
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--out", default=".")
    rp.set_defaults(func=_cmd_reproduce)

    s = sub.add_parser("selftest", help="run the fast invariant suite")
    s.set_defaults(func=_cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
