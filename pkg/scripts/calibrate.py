"""Sweep unset economic/scenario knobs and report the paired solver ordering."""
import argparse
import dataclasses as dc
import time

import numpy as np

from irsmec import ChannelParams, GameParams, ScenarioConfig, SolverConfig, SystemConfig, realize, solve
from irsmec.diffusion import DiffusionConfig

COMPARED = ("dopsra", "ergops", "rpsgora", "ropsra")


def ordering(system, seeds, cfg, gdm):
    stats = {}
    for seed in seeds:
        inst = realize(system, seed)
        res = {s: solve(s, inst, system, cfg, gdm, seed).outcome for s in ("gdmsg",) + COMPARED}
        for s, o in res.items():
            stats.setdefault(s, []).append([o.delay.sum(), o.energy.sum(), o.qoe.sum(), o.revenue.sum(),
                                            o.failed.sum(), (o.action == 2).sum()])
    arr = {s: np.array(v) for s, v in stats.items()}
    g = arr["gdmsg"]
    wins = {"delay": min((g[:, 0] < arr[s][:, 0]).sum() for s in COMPARED),
            "qoe": min((g[:, 2] > arr[s][:, 2]).sum() for s in COMPARED),
            "rev": min((g[:, 3] > arr[s][:, 3]).sum() for s in COMPARED),
            "energy": (arr["ergops"][:, 1] <= g[:, 1]).sum()}
    return wins, {s: a.mean(0).round(2) for s, a in arr.items()}


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--iters", type=int, default=100)
    ap.add_argument("--batch", type=int, default=8)
    ap.add_argument("--tau", type=float, default=1.0)
    ap.add_argument("--patience", type=int, default=None)
    ap.add_argument("--set", nargs="*", default=[], help="section.field=value")
    a = ap.parse_args()
    parts = {"scenario": ScenarioConfig(), "channel": ChannelParams(), "game": GameParams()}
    for item in a.set:
        key, val = item.split("=")
        sec, fld = key.split(".")
        parts[sec] = dc.replace(parts[sec], **{fld: eval(val)})
    system = SystemConfig(parts["scenario"], parts["channel"], game=parts["game"])
    t = time.time()
    wins, means = ordering(system, range(a.seeds), SolverConfig(iterations=a.iters, patience=a.patience or a.iters),
                           DiffusionConfig(batch=a.batch, temperature=a.tau))
    print(wins, f"{time.time()-t:.0f}s")
    for s, m in means.items():
        print(f"  {s:8s} delay,E,qoe,rev,fail,off = {m}")
