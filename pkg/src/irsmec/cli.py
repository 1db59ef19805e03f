"""Command line: ``irsmec run | oracle-check | plot-data``.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses as dc
import logging
import sys

from .errors import ConfigError
from .harness import (ExperimentConfig, emit_plot_data, load_config, oracle_check, parse_seeds,
                      parse_solvers, run_experiment)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def build_parser():
    ap = argparse.ArgumentParser(prog="irsmec", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="solve every (seed, solver) pair and write CSVs")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seeds", help="e.g. 0-19 or 1,2,3")
    run.add_argument("--solvers", help="comma-separated subset of solver names")
    orc = sub.add_parser("oracle-check", help="GDMSG vs exhaustive oracle on a tiny instance")
    orc.add_argument("--config", required=True)
    orc.add_argument("--seeds")
    plot = sub.add_parser("plot-data", help="emit per-panel TSV files from metrics.csv")
    plot.add_argument("--in", dest="in_dir", required=True)
    plot.add_argument("--out")
    return ap


def _apply_overrides(cfg: ExperimentConfig, args):
    if getattr(args, "seeds", None):
        cfg = dc.replace(cfg, seeds=parse_seeds(args.seeds))
    if getattr(args, "solvers", None):
        cfg = dc.replace(cfg, solvers=parse_solvers(args.solvers))
    return cfg.validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            cfg = _apply_overrides(load_config(args.config), args)
            out = run_experiment(cfg, args.out)
            print(f"wrote {out / 'metrics.csv'} and {out / 'trace.csv'}")
        elif args.command == "oracle-check":
            cfg = _apply_overrides(load_config(args.config), args)
            rows = oracle_check(cfg)
            print("seed\toracle\tgdmsg\tnear_optimal")
            for seed, u_o, u_g, ok in rows:
                print(f"{seed}\t{u_o:.6g}\t{u_g:.6g}\t{ok}")
            hits = sum(r[3] for r in rows)
            print(f"near-optimal in {hits}/{len(rows)} seeds")
        else:
            for path in emit_plot_data(args.in_dir, args.out):
                print(f"wrote {path}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
