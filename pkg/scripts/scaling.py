"""Wall time of GDMSG at a fixed iteration budget as V and N grow."""
import argparse
import dataclasses as dc

import numpy as np

from irsmec import DiffusionConfig, ScenarioConfig, SolverConfig, SystemConfig, realize
from irsmec.solvers import gdmsg_solve, solver_rng


def timed(v, n, iters, repeats):
    system = SystemConfig(dc.replace(ScenarioConfig(), num_vehicles=v, num_slots=n, task_prob=1.0))
    inst = realize(system, 0)
    cfg = SolverConfig(iterations=iters, patience=iters)
    return min(gdmsg_solve(inst, system, cfg, DiffusionConfig(), solver_rng(0)).wall_time
               for _ in range(repeats))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--vehicles", default="3,6,12,24")
    ap.add_argument("--slots", default="10,20,40")
    ap.add_argument("--iters", type=int, default=15)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    vs = [int(x) for x in args.vehicles.split(",")]
    ns = [int(x) for x in args.slots.split(",")]
    print("V\tN\tseconds")
    tv = []
    for v in vs:
        tv.append(timed(v, 20, args.iters, args.repeats))
        print(f"{v}\t20\t{tv[-1]:.3f}")
    for n in ns:
        print(f"6\t{n}\t{timed(6, n, args.iters, args.repeats):.3f}")
    slope, icpt = np.polyfit(vs, tv, 1)
    resid = np.asarray(tv) - (slope * np.asarray(vs) + icpt)
    r2 = 1 - resid @ resid / np.sum((tv - np.mean(tv)) ** 2)
    print(f"linear fit in V: {slope:.4f} s/vehicle + {icpt:.3f} s, R^2 = {r2:.3f}")


if __name__ == "__main__":
    main()
