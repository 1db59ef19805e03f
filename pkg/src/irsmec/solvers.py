"""GDMSG and the benchmark policies.

Every solver returns a `SolveResult` whose decision has already been settled
by `game.evaluate`: tasks that would miss their deadline are recorded as
failed (action NONE) rather than silently dropped.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .channel import TWO_PI, channel_gains
from .diffusion import (Denoiser, DiffusionConfig, EliteBuffer, build_schedule, decode_batch,
                        latent_size, reverse_sample, train_step)
from .errors import ConfigError, DomainError, SizeGuardError
from .game import LOCAL, NONE, OFFLOAD, Decision, Outcome, best_response, evaluate, reward

SOLVER_NAMES = ("gdmsg", "ropsra", "rpsgora", "ergops", "dopsra", "oracle")


@dataclass(frozen=True)
class SolverConfig:
    iterations: int = 300
    epsilon: float = 1e-2
    patience: int = 20
    phase_grid: int | None = None
    resource_grid: int | None = None
    oracle_phase_grid: int = 8
    oracle_resource_grid: int = 8
    drl_episodes: int = 200
    drl_hidden: tuple = (64, 64)
    drl_lr: float = 3e-4
    drl_clip: float = 0.2
    drl_epochs: int = 4
    drl_gamma: float = 0.0
    drl_lambda: float = 0.95
    drl_init_log_std: float = 0.0

    def validate(self):
        if self.iterations < 1:
            raise ConfigError("iterations", "must be >= 1")
        if not self.epsilon > 0:
            raise ConfigError("epsilon", "must be > 0")
        if self.patience < 1:
            raise ConfigError("patience", "must be >= 1")
        for name in ("phase_grid", "resource_grid"):
            val = getattr(self, name)
            if val is not None and val < 2:
                raise ConfigError(name, "grid sizes must be >= 2")
        for name in ("oracle_phase_grid", "oracle_resource_grid"):
            if getattr(self, name) < 2:
                raise ConfigError(name, "grid sizes must be >= 2")
        if self.drl_episodes < 1:
            raise ConfigError("drl_episodes", "must be >= 1")
        return self


@dataclass
class SolveResult:
    solver: str
    decision: Decision
    outcome: Outcome
    utility_trace: list = field(default_factory=list)
    reward_trace: list = field(default_factory=list)
    iterations: int = 1
    wall_time: float = 0.0

    @property
    def utility(self):
        return float(self.outcome.utility)


def settle(system, inst, action, theta, alloc):
    out = evaluate(system, inst, action, theta, alloc)
    alloc = np.where(out.action == OFFLOAD, alloc, 0.0)
    return Decision(out.action, np.asarray(theta, float), alloc, out.failed), out


def equal_split(action, fmax):
    off = action == OFFLOAD
    count = off.sum(-1, keepdims=True)
    return np.where(off, fmax / np.maximum(count, 1), 0.0)


def _check_instance(inst):
    if inst.num_slots < 1 or inst.num_vehicles < 1:
        raise DomainError("instance has no slots or no vehicles")
    if not (np.all(inst.deadline[inst.present] > 0) and np.all(inst.cycles[inst.present] > 0)):
        raise DomainError("present tasks need positive size, intensity and deadline")


# -- GDMSG loop ----------------------------------------------------------------

def _gdm_loop(name, inst, system, cfg: SolverConfig, gdm: DiffusionConfig, rng,
              freeze=None, reward_fn=reward):
    """Leader-follower search loop shared by GDMSG, RPSGORA (freeze='phase') and ERGOPS (freeze='alloc').

    Per iteration: draw a batch of latents by reverse diffusion, decode the
    leader allocation (and phase candidates), let vehicles best-respond, score
    every slot, keep the best decision seen per slot (slots are separable) and
    train the denoiser on the elite buffer.
    """
    cfg.validate()
    gdm.validate()
    _check_instance(inst)
    start = time.perf_counter()
    n, v, k = inst.num_slots, inst.num_vehicles, inst.num_elements
    fmax = system.compute.bs_compute_max
    width = latent_size(v, k)
    dim = n * width
    sched = build_schedule(gdm.steps, gdm.beta_min, gdm.beta_max)
    den = Denoiser(dim, rng, gdm.time_dim, gdm.hidden, gdm.activation)
    opt = nn.Adam(lr=gdm.lr)
    buf = EliteBuffer(gdm.buffer_size)
    fixed_theta = None
    if freeze == "phase":
        fixed_theta = np.random.default_rng(rng.integers(2**63)).uniform(0.0, TWO_PI, (n, k))

    best_u = np.full(n, -np.inf)
    best_x = np.zeros((n, width))
    best_act = np.zeros((n, v), np.int8)
    best_theta = np.zeros((n, k))
    best_alloc = np.zeros((n, v))
    slots = np.arange(n)
    u_prev, r_prev = 0.0, 0.0
    hits = 0
    u_trace, r_trace = [], []
    for j in range(1, cfg.iterations + 1):
        x = reverse_sample(den, sched, (gdm.batch, dim), rng)
        xs = x.reshape(gdm.batch, n, width)
        prop, theta, alloc = decode_batch(xs, inst.present, fmax, k, cfg.phase_grid, cfg.resource_grid)
        if fixed_theta is not None:
            theta = np.broadcast_to(fixed_theta, theta.shape)
        if freeze == "alloc":
            alloc = equal_split(prop, fmax)
        gains = channel_gains(inst.h_ib, inst.h_ir, inst.h_rb, theta)
        act = best_response(system, inst, gains, alloc)
        out = evaluate(system, inst, act, theta, alloc, gains=gains)
        su = out.slot_utility                                   # (B, N)
        bi = np.argmax(su, axis=0)
        cand = su[bi, slots]
        better = cand > best_u
        if better.any():
            idx = bi[better]
            s = slots[better]
            best_u[s] = cand[better]
            best_x[s] = xs[idx, s]
            best_act[s] = out.action[idx, s]
            best_theta[s] = theta[idx, s]
            best_alloc[s] = alloc[idx, s]
        u_now = float(best_u.sum())
        r_now = float(reward_fn(u_now, u_prev))
        u_trace.append(u_now)
        r_trace.append(r_now)
        hits = hits + 1 if abs(r_now - r_prev) < cfg.epsilon else 0
        r_prev, u_prev = r_now, u_now
        # with no task the objective is constant, so one pass settles it
        if hits >= cfg.patience or j == cfg.iterations or not inst.present.any():
            break
        buf.add(x, su.sum(-1))
        if better.any():
            buf.add(best_x.ravel(), u_now)
        for _ in range(gdm.train_steps):
            train_step(den, buf, sched, opt, rng, gdm.temperature)
    decision, outcome = settle(system, inst, best_act, best_theta, best_alloc)
    return SolveResult(name, decision, outcome, u_trace, r_trace, j, time.perf_counter() - start)


def gdmsg_solve(inst, system, cfg=SolverConfig(), gdm=DiffusionConfig(), rng=None, reward_fn=reward):
    rng = np.random.default_rng(0) if rng is None else rng
    return _gdm_loop("gdmsg", inst, system, cfg, gdm, rng, reward_fn=reward_fn)


def rpsgora(inst, system, cfg=SolverConfig(), gdm=DiffusionConfig(), rng=None):
    rng = np.random.default_rng(0) if rng is None else rng
    return _gdm_loop("rpsgora", inst, system, cfg, gdm, rng, freeze="phase")


def ergops(inst, system, cfg=SolverConfig(), gdm=DiffusionConfig(), rng=None):
    rng = np.random.default_rng(0) if rng is None else rng
    return _gdm_loop("ergops", inst, system, cfg, gdm, rng, freeze="alloc")


# -- random baseline ---------------------------------------------------------------

def ropsra(inst, system, rng=None):
    rng = np.random.default_rng(0) if rng is None else rng
    _check_instance(inst)
    start = time.perf_counter()
    n, v, k = inst.num_slots, inst.num_vehicles, inst.num_elements
    fmax = system.compute.bs_compute_max
    action = np.where(inst.present, rng.choice([LOCAL, OFFLOAD], size=(n, v)), NONE)
    theta = rng.uniform(0.0, TWO_PI, (n, k))
    weights = rng.exponential(1.0, (n, v)) * (action == OFFLOAD)
    total = weights.sum(-1, keepdims=True)
    alloc = np.where(total > 0, weights / np.where(total > 0, total, 1.0), 0.0) * fmax
    decision, outcome = settle(system, inst, action, theta, alloc)
    u = float(outcome.utility)
    return SolveResult("ropsra", decision, outcome, [u], [max(u, 0.0)], 1, time.perf_counter() - start)


# -- DRL baseline (PPO actor-critic) -----------------------------------------------

def slot_features(inst, system):
    """Per-slot observation: task descriptors and log channel strengths for each vehicle."""
    sc = system.scenario
    d_hi = sc.data_size_range[1]
    c_hi = sc.intensity_range[1]
    t_hi = sc.deadline_range[1]
    t_loc = inst.cycles / sc.vehicle_compute
    direct = (np.abs(inst.h_ib) ** 2).sum(-1)
    cascade = np.einsum("nvk,nk->nv", np.abs(inst.h_ir) ** 2, (np.abs(inst.h_rb) ** 2).sum(-1))
    p = inst.present.astype(float)
    feats = [
        p,
        p * inst.data / d_hi,
        p * inst.intensity / c_hi,
        p * inst.deadline / t_hi,
        p * np.clip(t_loc / np.maximum(inst.deadline, 1e-9), 0.0, 3.0),
        (np.log10(direct + 1e-30) + 10.0) / 3.0,
        (np.log10(cascade + 1e-30) + 12.0) / 3.0,
    ]
    x = np.concatenate(feats, axis=1)
    t = (np.arange(inst.num_slots) / max(inst.num_slots, 1))[:, None]
    return np.concatenate([x, t], axis=1)


class PPOAgent:
    """Gaussian policy over the per-slot latent plus a state-value critic."""

    def __init__(self, obs_dim, act_dim, rng, hidden=(64, 64), lr=3e-4, clip=0.2, init_log_std=0.0):
        self.actor_spec = nn.MlpSpec((obs_dim, *hidden, act_dim), "tanh")
        self.critic_spec = nn.MlpSpec((obs_dim, *hidden, 1), "tanh")
        self.actor = nn.init_params(self.actor_spec, rng, out_scale=0.1)
        self.critic = nn.init_params(self.critic_spec, rng)
        self.log_std = np.full(act_dim, init_log_std)
        self.clip = clip
        self.actor_opt = nn.Adam(lr=lr)
        self.critic_opt = nn.Adam(lr=lr)

    def mean(self, obs):
        return nn.forward(self.actor_spec, self.actor, obs)[0]

    def value(self, obs):
        return nn.forward(self.critic_spec, self.critic, obs)[0][..., 0]

    def log_prob(self, obs, act, mu=None):
        mu = self.mean(obs) if mu is None else mu
        std = np.exp(self.log_std)
        z = (act - mu) / std
        return (-0.5 * z * z - self.log_std - 0.5 * np.log(2 * np.pi)).sum(-1)

    def sample(self, obs, rng):
        mu = self.mean(obs)
        act = mu + np.exp(self.log_std) * rng.standard_normal(mu.shape)
        return act, self.log_prob(obs, act, mu)

    def policy_loss_and_grads(self, obs, act, logp_old, adv):
        """Clipped surrogate loss, gradients for actor params and log_std."""
        mu, cache = nn.forward(self.actor_spec, self.actor, obs)
        std = np.exp(self.log_std)
        z = (act - mu) / std
        logp = (-0.5 * z * z - self.log_std - 0.5 * np.log(2 * np.pi)).sum(-1)
        ratio = np.exp(logp - logp_old)
        lo, hi = 1.0 - self.clip, 1.0 + self.clip
        surr1 = ratio * adv
        surr2 = np.clip(ratio, lo, hi) * adv
        m = len(adv)
        loss = -float(np.mean(np.minimum(surr1, surr2)))
        active = (surr1 <= surr2) | ((ratio >= lo) & (ratio <= hi))
        dlogp = -(adv * ratio * active) / m
        dmu = dlogp[:, None] * z / std
        grads, _ = nn.backward(self.actor_spec, self.actor, cache, dmu)
        dlogstd = (dlogp[:, None] * (z * z - 1.0)).sum(0)
        return loss, grads, dlogstd

    def value_loss_and_grads(self, obs, target):
        out, cache = nn.forward(self.critic_spec, self.critic, obs)
        err = out[..., 0] - target
        loss = float(np.mean(err * err))
        grads, _ = nn.backward(self.critic_spec, self.critic, cache, (2.0 * err / len(err))[:, None])
        return loss, grads

    def update(self, obs, act, logp_old, adv, target, epochs):
        for _ in range(epochs):
            _, grads, dlogstd = self.policy_loss_and_grads(obs, act, logp_old, adv)
            self.actor_opt.step(self.actor + [[self.log_std]], grads + [[dlogstd]])
            _, vgrads = self.value_loss_and_grads(obs, target)
            self.critic_opt.step(self.critic, vgrads)


def _gae(rewards, values, gamma, lam):
    adv = np.zeros_like(rewards)
    last = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        nxt = values[t + 1] if t + 1 < len(rewards) else 0.0
        delta = rewards[t] + gamma * nxt - values[t]
        last = delta + gamma * lam * last
        adv[t] = last
    return adv


def dopsra(inst, system, cfg=SolverConfig(), rng=None, episodes=None):
    rng = np.random.default_rng(0) if rng is None else rng
    cfg.validate()
    _check_instance(inst)
    start = time.perf_counter()
    n, v, k = inst.num_slots, inst.num_vehicles, inst.num_elements
    fmax = system.compute.bs_compute_max
    obs = slot_features(inst, system)
    agent = PPOAgent(obs.shape[1], latent_size(v, k), rng, cfg.drl_hidden, cfg.drl_lr,
                     cfg.drl_clip, cfg.drl_init_log_std)
    episodes = cfg.drl_episodes if episodes is None else episodes
    r_mean, r_var, r_count = 0.0, 1.0, 0
    u_trace, r_trace = [], []
    u_prev = 0.0
    for _ in range(episodes):
        act, logp = agent.sample(obs, rng)
        prop, theta, alloc = decode_batch(act, inst.present, fmax, k)
        out = evaluate(system, inst, prop, theta, alloc)
        rewards = out.slot_utility
        # running reward statistics for critic targets
        for r in rewards:
            r_count += 1
            delta = r - r_mean
            r_mean += delta / r_count
            r_var += (delta * (r - r_mean) - r_var) / r_count
        scaled = (rewards - r_mean) / np.sqrt(r_var + 1e-8)
        values = agent.value(obs)
        adv = _gae(scaled, values, cfg.drl_gamma, cfg.drl_lambda)
        target = adv + values
        if len(adv) > 1:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        agent.update(obs, act, logp, adv, target, cfg.drl_epochs)
        u = float(rewards.sum())
        u_trace.append(u)
        r_trace.append(reward(u, u_prev))
        u_prev = u
    prop, theta, alloc = decode_batch(agent.mean(obs), inst.present, fmax, k)
    decision, outcome = settle(system, inst, prop, theta, alloc)
    res = SolveResult("dopsra", decision, outcome, u_trace, r_trace, episodes,
                      time.perf_counter() - start)
    res.agent = agent
    return res


# -- exhaustive oracle ---------------------------------------------------------------

ORACLE_LIMITS = {"vehicles": 3, "elements": 4, "slots": 2}


def _alloc_levels(count, grid):
    """All tuples of per-offloader levels in 1..grid with sum <= grid."""
    if count == 0:
        return [()]
    return [c for c in itertools.product(range(1, grid + 1), repeat=count) if sum(c) <= grid]


def brute_force_oracle(inst, system, phase_grid=8, resource_grid=8):
    v, k, n = inst.num_vehicles, inst.num_elements, inst.num_slots
    if v > ORACLE_LIMITS["vehicles"] or k > ORACLE_LIMITS["elements"] or n > ORACLE_LIMITS["slots"]:
        raise SizeGuardError(f"oracle limited to V<=3, K<=4, N<=2 (got V={v}, K={k}, N={n})")
    if phase_grid < 2 or resource_grid < 2:
        raise ConfigError("grid", "grid sizes must be >= 2")
    _check_instance(inst)
    start = time.perf_counter()
    fmax = system.compute.bs_compute_max
    step = TWO_PI / phase_grid
    phases = np.array(list(itertools.product(range(phase_grid), repeat=k)), float) * step
    act_out = np.zeros((n, v), np.int8)
    theta_out = np.zeros((n, k))
    alloc_out = np.zeros((n, v))
    for slot in range(n):
        sub = inst.slots([slot])
        tasks = np.flatnonzero(sub.present[0])
        theta_b = phases[:, None, :]                                  # (P, 1, K)
        gains = channel_gains(sub.h_ib, sub.h_ir, sub.h_rb, theta_b)  # (P, 1, V)
        best = (-np.inf, None)
        for choice in itertools.product((LOCAL, OFFLOAD), repeat=len(tasks)):
            action = np.zeros((1, v), np.int8)
            action[0, tasks] = choice
            offl = tasks[np.array(choice, int) == OFFLOAD] if len(tasks) else tasks
            for levels in _alloc_levels(len(offl), resource_grid):
                alloc = np.zeros((1, v))
                alloc[0, offl] = np.array(levels, float) / resource_grid * fmax
                out = evaluate(system, sub, action, theta_b, alloc, gains=gains)
                u = out.utility
                p = int(np.argmax(u))
                if u[p] > best[0]:
                    best = (float(u[p]), (action[0].copy(), phases[p].copy(), alloc[0].copy()))
        act_out[slot], theta_out[slot], alloc_out[slot] = best[1]
    decision, outcome = settle(system, inst, act_out, theta_out, alloc_out)
    return SolveResult("oracle", decision, outcome, [float(outcome.utility)], [0.0], 1,
                       time.perf_counter() - start)


# -- dispatch ------------------------------------------------------------------------

def solver_rng(seed):
    """Common random numbers: every solver on a seed starts from the same stream."""
    return np.random.default_rng([int(seed), 7919])


def solve(name, inst, system, cfg=SolverConfig(), gdm=DiffusionConfig(), seed=0):
    rng = solver_rng(seed)
    if name == "gdmsg":
        return gdmsg_solve(inst, system, cfg, gdm, rng)
    if name == "rpsgora":
        return rpsgora(inst, system, cfg, gdm, rng)
    if name == "ergops":
        return ergops(inst, system, cfg, gdm, rng)
    if name == "ropsra":
        return ropsra(inst, system, rng)
    if name == "dopsra":
        return dopsra(inst, system, cfg, rng)
    if name == "oracle":
        return brute_force_oracle(inst, system, cfg.oracle_phase_grid, cfg.oracle_resource_grid)
    raise ConfigError("solver", f"unknown solver {name!r}; choose from {', '.join(SOLVER_NAMES)}")
