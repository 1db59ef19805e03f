"""Stackelberg utilities, constraint checking and follower best response.

Actions are integer codes: ``NONE`` (no task, or a task dropped because no
action meets its deadline), ``LOCAL`` and ``OFFLOAD``. The vectorized
helpers (`evaluate`, `best_response`) accept arbitrary leading batch axes in
front of the (slot, vehicle) axes so that many candidate strategies can be
scored in one call.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import TWO_PI, channel_gains, rate, sinr_from_gains
from .errors import ConfigError, DomainError

NONE, LOCAL, OFFLOAD = 0, 1, 2


@dataclass(frozen=True)
class GameParams:
    w_vehicle: float = 0.5
    w_bs: float = 0.5
    c: float = 1.0
    price: float = 3e-8        # currency per Hz
    budget: float = 10.0       # G_i^max
    min_price: float = 1.0     # G_b^min

    def validate(self):
        for name in ("w_vehicle", "w_bs"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(name, "weight must lie in [0, 1]")
        if not self.c > 0:
            raise ConfigError("c", "must be > 0")
        if self.price < 0:
            raise ConfigError("price", "must be >= 0")
        return self


# -- scalar utility pieces -------------------------------------------------

def task_revenue(deadline, delay, c):
    arg = c + np.asarray(deadline) - np.asarray(delay)
    if np.any(arg <= 0):
        raise DomainError("deadline violated: log argument is not positive")
    return np.log(arg)


def task_cost(action, local_energy=0.0, offload_energy=0.0, alloc=0.0, price=0.0, budget=0.0):
    if action == LOCAL:
        return local_energy
    if action == OFFLOAD:
        return offload_energy + (budget - alloc * price)
    raise DomainError(f"no cost branch for action {action}")


def vehicle_utility(w, revenue, action, local_energy=0.0, tran_energy=0.0,
                    alloc=0.0, price=0.0, budget=0.0):
    """Offload branch charges transmission energy only; BS compute energy is the BS's."""
    if action == LOCAL:
        cost = local_energy
    elif action == OFFLOAD:
        cost = tran_energy + budget - alloc * price
    else:
        raise DomainError(f"no utility branch for action {action}")
    return w * revenue - (1.0 - w) * cost


def bs_utility(w_b, alloc, price, min_price, comp_energy):
    return w_b * (np.asarray(alloc) * price - min_price) - (1.0 - w_b) * np.asarray(comp_energy)


def total_utility(qoe, revenue, w_vehicle, w_bs):
    return w_vehicle * qoe + w_bs * revenue


def reward(u_now, u_prev):
    return u_now - u_prev if u_now > u_prev else 0.0


# -- decisions and vectorized evaluation ------------------------------------

@dataclass
class Decision:
    action: np.ndarray                  # (N, V) codes
    theta: np.ndarray                   # (N, K) radians
    alloc: np.ndarray                   # (N, V) Hz
    failed: np.ndarray = None           # (N, V) tasks dropped at their deadline

    def __post_init__(self):
        self.action = np.asarray(self.action, dtype=np.int8)
        if self.failed is None:
            self.failed = np.zeros(self.action.shape, bool)

    def offload_onehot(self):
        """(N, V, 2) binary matrix [local, offload]."""
        return np.stack([self.action == LOCAL, self.action == OFFLOAD], axis=-1).astype(int)


@dataclass
class Outcome:
    action: np.ndarray      # settled actions
    failed: np.ndarray
    delay: np.ndarray
    energy: np.ndarray
    qoe: np.ndarray
    revenue: np.ndarray
    w_vehicle: float
    w_bs: float

    @property
    def slot_utility(self):
        return total_utility(self.qoe.sum(-1), self.revenue.sum(-1), self.w_vehicle, self.w_bs)

    @property
    def utility(self):
        return self.slot_utility.sum(-1)


def _local_terms(system, inst):
    sc = system.scenario
    t = inst.cycles / sc.vehicle_compute
    e = sc.vehicle_kappa * sc.vehicle_compute**2 * inst.cycles
    return t, e


def _offload_terms(system, inst, gains, offloading, alloc):
    """Transmission delay/energy, compute delay/energy for every vehicle as if offloading,
    with interference from the vehicles flagged in ``offloading``."""
    sc, ch, cp = system.scenario, system.channel, system.compute
    powers = sc.tx_power * np.asarray(offloading, float)
    s = sinr_from_gains(gains, powers, ch.noise_power, ch.interference)
    r = rate(ch.bandwidth, inst.num_vehicles, s)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t_tran = np.where(r > 0, inst.data / np.where(r > 0, r, 1.0), np.inf)
        t_comp = np.where(alloc > 0, inst.cycles / np.where(alloc > 0, alloc, 1.0), np.inf)
    e_tran = sc.tx_power * t_tran
    e_comp = cp.bs_kappa * np.asarray(alloc) ** 2 * inst.cycles
    return t_tran, t_comp, e_tran, e_comp


def evaluate(system, inst, action, theta, alloc, gains=None) -> Outcome:
    """Score a (possibly batched) decision.

    Tasks whose chosen action misses the deadline, or that have no action, are
    dropped: recorded with delay T^max, zero energy and revenue ln(c). Dropped
    offloaders do not transmit, so interference is recomputed once without
    them (which can only raise the remaining rates).
    """
    g = system.game
    if gains is None:
        gains = channel_gains(inst.h_ib, inst.h_ir, inst.h_rb, theta)
    alloc = np.asarray(alloc, dtype=float)
    present = inst.present
    action = np.where(present, action, NONE)
    t_loc, e_loc = _local_terms(system, inst)

    def chosen_delay(act):
        t_tran, t_comp, e_tran, e_comp = _offload_terms(system, inst, gains, act == OFFLOAD, alloc)
        t = np.where(act == LOCAL, t_loc, np.where(act == OFFLOAD, t_tran + t_comp, np.inf))
        return t, e_tran, e_comp

    t, e_tran, e_comp = chosen_delay(action)
    failed = present & ~(t <= inst.deadline)
    if failed.any():
        action = np.where(failed, NONE, action)
        t, e_tran, e_comp = chosen_delay(action)
    local = action == LOCAL
    off = action == OFFLOAD
    ok = local | off
    delay = np.where(ok, t, np.where(failed, inst.deadline, 0.0))
    energy = np.where(local, e_loc, 0.0) + np.where(off, e_tran + e_comp, 0.0)
    slack = np.where(ok, g.c + inst.deadline - np.where(ok, t, 0.0), g.c)
    log_rev = np.log(slack)
    cost = np.where(local, e_loc, 0.0) + np.where(off, e_tran + g.budget - alloc * g.price, 0.0)
    qoe = np.where(present, g.w_vehicle * log_rev - (1.0 - g.w_vehicle) * cost, 0.0)
    revenue = np.where(off, bs_utility(g.w_bs, alloc, g.price, g.min_price, e_comp), 0.0)
    return Outcome(action.astype(np.int8), failed, delay, energy, qoe, revenue, g.w_vehicle, g.w_bs)


def best_response(system, inst, gains, alloc, max_rounds=None):
    """Sequential best-response dynamics of the vehicles for fixed phases and allocation.

    Each vehicle picks the deadline-feasible action with the higher own utility
    (ties go to local); with no feasible action the task is dropped. Offloaders
    interfere with each other, so the sweep repeats until no vehicle changes
    or ``max_rounds`` sweeps have run.
    """
    sc, ch, g = system.scenario, system.channel, system.game
    v = inst.num_vehicles
    max_rounds = 2 * v if max_rounds is None else max_rounds
    shape = np.broadcast_shapes(np.shape(gains), np.shape(alloc))
    alloc = np.broadcast_to(np.asarray(alloc, float), shape)
    pg = sc.tx_power * np.broadcast_to(gains, shape)
    present = inst.present
    t_loc, e_loc = _local_terms(system, inst)
    local_ok = present & (t_loc <= inst.deadline)
    with np.errstate(invalid="ignore", divide="ignore"):
        u_loc = g.w_vehicle * np.log(np.where(local_ok, g.c + inst.deadline - t_loc, 1.0)) \
            - (1.0 - g.w_vehicle) * e_loc
    action = np.broadcast_to(np.where(local_ok, LOCAL, NONE), shape).astype(np.int8).copy()
    width = ch.bandwidth / v
    others = [np.arange(v) != i for i in range(v)]
    for _ in range(max_rounds):
        changed = False
        for i in range(v):
            if not present[..., i].any():
                continue
            offl = action == OFFLOAD
            interf = (pg[..., others[i]] * offl[..., others[i]]).sum(-1) if ch.interference else 0.0
            s = pg[..., i] / (interf + ch.noise_power)
            r = width * np.log2(1.0 + s)
            a_i = alloc[..., i]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_tran = inst.data[..., i] / r
                t_off = t_tran + np.where(a_i > 0, inst.cycles[..., i] / np.where(a_i > 0, a_i, 1.0), np.inf)
                off_ok = present[..., i] & (a_i > 0) & (r > 0) & (t_off <= inst.deadline[..., i])
                u_off = g.w_vehicle * np.log(np.where(off_ok, g.c + inst.deadline[..., i] - t_off, 1.0)) \
                    - (1.0 - g.w_vehicle) * (sc.tx_power * t_tran + g.budget - a_i * g.price)
            lok = local_ok[..., i]
            pick_off = off_ok & (~lok | (u_off > u_loc[..., i]))
            new = np.where(pick_off, OFFLOAD, np.where(lok, LOCAL, NONE)).astype(np.int8)
            if not changed and np.any(new != action[..., i]):
                changed = True
            action[..., i] = new
        if not changed:
            break
    return action


def check_alloc(system, alloc):
    """Leader feasibility: 0 <= f <= f_max per vehicle and total offer <= f_max per slot."""
    fmax = system.compute.bs_compute_max
    alloc = np.asarray(alloc, float)
    tol = 1e-9 * fmax
    return bool(np.all(alloc >= 0) and np.all(alloc <= fmax + tol)
                and np.all(alloc.sum(-1) <= fmax + tol))


def follower_response(alloc, system, inst, theta_candidates):
    """Followers' reply to a leader allocation.

    For each slot the phase vector is picked among ``theta_candidates``
    (shape (C, N, K)) to maximize the summed vehicle utility under the
    vehicles' best responses. Returns (action, theta), each indexed by slot.
    """
    if not check_alloc(system, alloc):
        raise DomainError("leader allocation violates the resource constraints")
    cands = np.mod(np.asarray(theta_candidates, float), TWO_PI)
    if cands.ndim == 2:
        cands = cands[None]
    gains = channel_gains(inst.h_ib, inst.h_ir, inst.h_rb, cands)      # (C, N, V)
    act = best_response(system, inst, gains, alloc)
    out = evaluate(system, inst, act, cands, alloc, gains=gains)
    score = out.qoe.sum(-1)                                             # (C, N)
    best = np.argmax(score, axis=0)
    slots = np.arange(inst.num_slots)
    return out.action[best, slots], cands[best, slots]


# -- constraints -------------------------------------------------------------

@dataclass
class ConstraintCheck:
    passed: bool
    violations: list = field(default_factory=list)


@dataclass
class ConstraintReport:
    checks: dict

    def feasible(self, exclude=()):
        return all(c.passed for name, c in self.checks.items() if name not in exclude)

    def __str__(self):
        return ", ".join(f"{k}:{'ok' if c.passed else len(c.violations)}"
                         for k, c in self.checks.items())


def _check(mask):
    idx = [tuple(int(x) for x in ix) for ix in np.argwhere(mask)]
    return ConstraintCheck(not idx, idx)


def check_constraints(decision: Decision, inst, system) -> ConstraintReport:
    """Report violations per constraint: binary, one_hot, deadline, task_present,
    alloc_bounds, capacity and phase_range, each with the offending indices."""
    fmax = system.compute.bs_compute_max
    tol = 1e-9 * fmax
    act = decision.action
    valid = np.isin(act, (NONE, LOCAL, OFFLOAD))
    onehot = decision.offload_onehot()
    checks = {
        "binary": _check(~valid | ~np.isin(onehot, (0, 1)).all(-1)),
        "one_hot": _check(~valid | (onehot.sum(-1) > 1)),
    }
    gains = channel_gains(inst.h_ib, inst.h_ir, inst.h_rb, decision.theta)
    t_loc, _ = _local_terms(system, inst)
    t_tran, t_comp, _, _ = _offload_terms(system, inst, gains, act == OFFLOAD, decision.alloc)
    t = np.where(act == LOCAL, t_loc, np.where(act == OFFLOAD, t_tran + t_comp, 0.0))
    checks["deadline"] = _check((act != NONE) & ~(t <= inst.deadline * (1 + 1e-12)))
    checks["task_present"] = _check(((act != NONE) | decision.failed) & ~inst.present)
    alloc = np.asarray(decision.alloc, float)
    checks["alloc_bounds"] = _check((alloc < 0) | (alloc > fmax + tol))
    used = np.where(act == OFFLOAD, alloc, 0.0).sum(-1)
    checks["capacity"] = _check(used > fmax + tol)
    th = np.asarray(decision.theta, float)
    checks["phase_range"] = _check(~((th >= 0) & (th < TWO_PI)))
    return ConstraintReport(checks)
