"""Gap between GDMSG and the exhaustive oracle on tiny instances (V, K in {1, 2}, N = 1)."""
import argparse
import dataclasses as dc

import numpy as np

from irsmec import DiffusionConfig, ScenarioConfig, SolverConfig, SystemConfig, realize, solve
from irsmec.harness import near_optimal


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--grid", type=int, default=8)
    args = ap.parse_args()
    cfg = SolverConfig(phase_grid=args.grid, resource_grid=args.grid,
                       oracle_phase_grid=args.grid, oracle_resource_grid=args.grid)
    print("seed\tV\tK\toracle\tgdmsg\trel_gap\tnear_optimal")
    hits, gaps = 0, []
    for seed in range(args.seeds):
        v, k = 1 + seed % 2, 1 + (seed // 2) % 2
        system = SystemConfig(dc.replace(ScenarioConfig(), num_vehicles=v, num_elements=k, num_slots=1))
        inst = realize(system, seed)
        u_o = solve("oracle", inst, system, cfg, DiffusionConfig(), seed).utility
        u_g = solve("gdmsg", inst, system, cfg, DiffusionConfig(), seed).utility
        gap = (u_o - u_g) / max(abs(u_o), 1e-12)
        ok = near_optimal(u_g, u_o)
        hits += ok
        gaps.append(gap)
        print(f"{seed}\t{v}\t{k}\t{u_o:.4f}\t{u_g:.4f}\t{gap:.4f}\t{ok}")
    print(f"near-optimal in {hits}/{args.seeds}; median gap {np.median(gaps):.4f}, max {np.max(gaps):.4f}")


if __name__ == "__main__":
    main()
