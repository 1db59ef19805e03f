"""Run every solver on the default config and emit cumulative-metric panels.

    python3 scripts/ordering.py --config configs/default.ini --out results/ordering
"""
import argparse
import dataclasses as dc
import logging

from irsmec.harness import (PANELS, cumulative_table, emit_plot_data, load_config, parse_seeds,
                            read_metrics, run_experiment)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/default.ini")
    ap.add_argument("--out", default="results/ordering")
    ap.add_argument("--seeds", help="override, e.g. 0-4")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    cfg = load_config(args.config)
    if args.seeds:
        cfg = dc.replace(cfg, seeds=parse_seeds(args.seeds))
    out = run_experiment(cfg, args.out)
    emit_plot_data(out)
    rows = read_metrics(out)
    print(f"{'solver':8s} " + " ".join(f"{m:>10s}" for m in PANELS))
    tables = {m: cumulative_table(rows, m) for m in PANELS}
    for s in cfg.solvers:
        print(f"{s:8s} " + " ".join(f"{tables[m][s][:, -1].mean():10.2f}" for m in PANELS))


if __name__ == "__main__":
    main()
