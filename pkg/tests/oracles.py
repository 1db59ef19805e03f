"""Slow, loop-based reference implementations used as test oracles.

They deliberately avoid the vectorized code paths of the package and are
written straight from the model formulas.
"""
import cmath
import math

import numpy as np


def gain_loop(h_ib, h_ir, h_rb, theta):
    """||h_ib + sum_k h_ir[k] e^{j theta_k} h_rb[k, :]||^2 for one vehicle."""
    total = 0.0
    for s in range(len(h_ib)):
        acc = complex(h_ib[s])
        for k in range(len(h_ir)):
            acc += h_ir[k] * cmath.exp(1j * theta[k]) * h_rb[k][s]
        total += abs(acc) ** 2
    return total


def sinr_loop(i, powers, gains, noise):
    interf = sum(powers[j] * gains[j] for j in range(len(gains)) if j != i)
    return powers[i] * gains[i] / (interf + noise)


def beta_hand(t, T, bmin, bmax):
    return 1.0 - math.exp(-bmin / T - (2 * t - 1) / (2 * T * T) * (bmax - bmin))


def mlp_loop(params, x, activation="tanh"):
    """Straight-line dense network: explicit sums, one neuron at a time."""
    h = list(map(float, x))
    for layer, (w, b) in enumerate(params):
        out = []
        for j in range(w.shape[1]):
            z = b[j] + sum(h[i] * w[i, j] for i in range(len(h)))
            if layer < len(params) - 1:
                z = math.tanh(z) if activation == "tanh" else max(z, 0.0)
            out.append(z)
        h = out
    return np.array(h)


def slot_outcome_loop(system, inst, n, action, theta, alloc):
    """Per-vehicle scoring of one slot, with the drop-and-recompute rule.

    Returns lists (action, failed, delay, energy, qoe, revenue).
    """
    sc, ch, cp, g = system.scenario, system.channel, system.compute, system.game
    v = inst.num_vehicles
    gains = [gain_loop(inst.h_ib[n, i], inst.h_ir[n, i], inst.h_rb[n], theta) for i in range(v)]
    act = [int(action[i]) if inst.present[n, i] else 0 for i in range(v)]

    def delays(act):
        out = []
        powers = [sc.tx_power if a == 2 else 0.0 for a in act]
        for i in range(v):
            cyc = inst.data[n, i] * inst.intensity[n, i]
            if act[i] == 1:
                out.append((cyc / sc.vehicle_compute, 0.0, 0.0))
            elif act[i] == 2:
                s = sinr_loop(i, powers, gains, ch.noise_power) if ch.interference else \
                    powers[i] * gains[i] / ch.noise_power
                r = ch.bandwidth / v * math.log2(1 + s)
                if r <= 0 or alloc[i] <= 0:
                    out.append((math.inf, 0.0, 0.0))
                    continue
                tt = inst.data[n, i] / r
                out.append((tt + cyc / alloc[i], sc.tx_power * tt, cp.bs_kappa * alloc[i] ** 2 * cyc))
            else:
                out.append((math.inf, 0.0, 0.0))
        return out

    d = delays(act)
    failed = [bool(inst.present[n, i] and not d[i][0] <= inst.deadline[n, i]) for i in range(v)]
    if any(failed):
        act = [0 if failed[i] else act[i] for i in range(v)]
        d = delays(act)
    res = ([], failed, [], [], [], [])
    for i in range(v):
        cyc = inst.data[n, i] * inst.intensity[n, i] if inst.present[n, i] else 0.0
        e_loc = sc.vehicle_kappa * sc.vehicle_compute ** 2 * cyc
        res[0].append(act[i])
        if act[i] == 1:
            t = d[i][0]
            res[2].append(t)
            res[3].append(e_loc)
            res[4].append(g.w_vehicle * math.log(g.c + inst.deadline[n, i] - t) - (1 - g.w_vehicle) * e_loc)
            res[5].append(0.0)
        elif act[i] == 2:
            t, e_tr, e_cp = d[i]
            res[2].append(t)
            res[3].append(e_tr + e_cp)
            cost = e_tr + g.budget - alloc[i] * g.price
            res[4].append(g.w_vehicle * math.log(g.c + inst.deadline[n, i] - t) - (1 - g.w_vehicle) * cost)
            res[5].append(g.w_bs * (alloc[i] * g.price - g.min_price) - (1 - g.w_bs) * e_cp)
        else:
            res[2].append(inst.deadline[n, i] if failed[i] else 0.0)
            res[3].append(0.0)
            res[4].append(g.w_vehicle * math.log(g.c) if inst.present[n, i] else 0.0)
            res[5].append(0.0)
    return res


def own_utility_loop(system, inst, n, i, action, theta, alloc):
    """Vehicle i's utility if it plays action[i] against the others' actions (None if infeasible)."""
    out = slot_outcome_loop(system, inst, n, action, theta, alloc)
    if out[1][i] or out[0][i] == 0:
        return None
    return out[4][i]


def numerical_grad(f, arrays, h=1e-5):
    """Central differences of scalar f() w.r.t. every entry of the given arrays (modified in place)."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = a[idx]
            a[idx] = old + h
            fp = f()
            a[idx] = old - h
            fm = f()
            a[idx] = old
            g[idx] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def max_rel_err(analytic, numeric, floor=1e-8):
    worst = 0.0
    for a, b in zip(analytic, numeric):
        err = np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
        worst = max(worst, float(err.max()))
    return worst
