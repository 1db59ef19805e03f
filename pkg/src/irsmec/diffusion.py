"""DDPM machinery for strategy generation.

Time indices run 1..T; index 0 of every schedule table holds the t = 0
convention (beta = 0, alpha_bar = 1).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .channel import TWO_PI
from .errors import ConfigError, DomainError
from .game import LOCAL, NONE, OFFLOAD, Decision


@dataclass(frozen=True)
class DiffusionConfig:
    steps: int = 20
    beta_min: float = 0.1
    beta_max: float = 10.0
    time_dim: int = 16
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    lr: float = 1e-3
    buffer_size: int = 64
    temperature: float = 100.0
    train_steps: int = 4
    batch: int = 64

    def validate(self):
        if self.steps < 1:
            raise ConfigError("steps", "must be >= 1")
        if not 0 < self.beta_min <= self.beta_max:
            raise ConfigError("beta_min", "need 0 < beta_min <= beta_max")
        for name in ("buffer_size", "batch", "time_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.train_steps < 0:
            raise ConfigError("train_steps", "must be >= 0")
        if not self.temperature > 0:
            raise ConfigError("temperature", "must be > 0")
        return self


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    beta_min: float
    beta_max: float
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    posterior_var: np.ndarray


def build_schedule(T, beta_min, beta_max) -> NoiseSchedule:
    if T < 1 or not 0 < beta_min <= beta_max:
        raise ConfigError("schedule", f"invalid T={T}, beta_min={beta_min}, beta_max={beta_max}")
    t = np.arange(1, T + 1)
    exponent = beta_min / T + (2 * t - 1) / (2 * T**2) * (beta_max - beta_min)
    betas = np.concatenate([[0.0], -np.expm1(-exponent)])
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    post = np.zeros(T + 1)
    post[1:] = (1.0 - alpha_bars[:-1]) / (1.0 - alpha_bars[1:]) * betas[1:]
    return NoiseSchedule(T, beta_min, beta_max, betas, alphas, alpha_bars, post)


def _check_t(t, sched):
    if not 1 <= t <= sched.T:
        raise DomainError(f"time step {t} outside [1, {sched.T}]")


def forward_sample(x0, t, eps, sched: NoiseSchedule):
    """Closed-form q(x_t | x_0). Only used for training targets and tests."""
    t = np.asarray(t)
    if np.any(t < 1) or np.any(t > sched.T):
        raise DomainError(f"time step outside [1, {sched.T}]")
    ab = sched.alpha_bars[t]
    if ab.ndim:
        ab = ab[..., None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def forward_step(x_prev, t, eps, sched: NoiseSchedule):
    """One transition of the noising chain q(x_t | x_{t-1})."""
    _check_t(t, sched)
    b = sched.betas[t]
    return np.sqrt(1.0 - b) * x_prev + np.sqrt(b) * eps


def predict_x0(x_t, eps_pred, t, sched: NoiseSchedule):
    ab = sched.alpha_bars[t]
    return (x_t - np.sqrt(1.0 - ab) * eps_pred) / np.sqrt(ab)


def posterior_mean(x_t, t, eps_pred, sched: NoiseSchedule):
    a, b, ab = sched.alphas[t], sched.betas[t], sched.alpha_bars[t]
    return (x_t - b / np.sqrt(1.0 - ab) * eps_pred) / np.sqrt(a)


def posterior_step(x_t, t, eps_pred, sched: NoiseSchedule, rng=None, deterministic=False):
    _check_t(t, sched)
    mu = posterior_mean(x_t, t, eps_pred, sched)
    if deterministic or t == 1:
        return mu
    return mu + np.sqrt(sched.posterior_var[t]) * rng.standard_normal(np.shape(x_t))


def time_embedding(t, dim):
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    args = t * freqs
    emb = np.concatenate([np.cos(args), np.sin(args)])
    if dim % 2:
        emb = np.concatenate([emb, [0.0]])
    return emb


class Denoiser:
    """Noise predictor eps(x_t, t): MLP on [x_t, sinusoidal embedding of t]."""

    def __init__(self, dim, rng, time_dim=16, hidden=(64, 64), activation="tanh", params=None):
        self.dim = dim
        self.time_dim = time_dim
        self.spec = nn.MlpSpec((dim + time_dim, *hidden, dim), activation)
        self.params = params if params is not None else nn.init_params(self.spec, rng, out_scale=0.1)
        self.calls = 0
        self._emb = {}

    def _inputs(self, x, t):
        t = np.asarray(t)
        x = np.atleast_2d(x)
        if t.ndim == 0:
            emb = self._emb.get(int(t))
            if emb is None:
                emb = self._emb[int(t)] = time_embedding(int(t), self.time_dim)
            emb = np.broadcast_to(emb, (x.shape[0], self.time_dim))
        else:
            emb = np.stack([time_embedding(int(s), self.time_dim) for s in t])
        return np.concatenate([x, emb], axis=1)

    def __call__(self, x, t):
        self.calls += 1
        squeeze = np.ndim(x) == 1
        out, _ = nn.forward(self.spec, self.params, self._inputs(x, t))
        return out[0] if squeeze else out

    def loss_and_grads(self, x_t, t, eps, weights):
        """Weighted denoising loss sum_m w_m * mean_d (eps_pred - eps)^2 and its gradients."""
        out, cache = nn.forward(self.spec, self.params, self._inputs(x_t, t))
        err = out - eps
        loss = float(np.sum(weights * np.mean(err * err, axis=1)))
        upstream = 2.0 * weights[:, None] * err / err.shape[1]
        grads, _ = nn.backward(self.spec, self.params, cache, upstream)
        return loss, grads


def reverse_sample(denoiser, sched: NoiseSchedule, dim, rng, deterministic=False):
    """Ancestral sampling x_T ~ N(0, I) -> x_0 with exactly T denoiser calls."""
    x = rng.standard_normal(dim)
    for t in range(sched.T, 0, -1):
        eps = denoiser(x, t)
        x = posterior_step(x, t, eps, sched, rng, deterministic)
    return x


def reward_weights(rewards, temperature=1.0):
    r = np.asarray(rewards, float) / temperature
    z = np.exp(r - r.max())
    return z / z.sum()


def train_step(denoiser, buffer, sched: NoiseSchedule, optimizer, rng, temperature=1.0):
    """One reward-weighted denoising regression step on the elite buffer."""
    x0s, rewards = buffer if isinstance(buffer, tuple) else (buffer.x, buffer.scores)
    if len(x0s) == 0:
        raise DomainError("elite buffer is empty")
    w = reward_weights(rewards, temperature)
    t = rng.integers(1, sched.T + 1, size=len(x0s))
    eps = rng.standard_normal(x0s.shape)
    x_t = forward_sample(x0s, t, eps, sched)
    loss, grads = denoiser.loss_and_grads(x_t, t, eps, w)
    optimizer.step(denoiser.params, grads)
    return loss


@dataclass
class EliteBuffer:
    capacity: int
    x: np.ndarray = None
    scores: np.ndarray = None

    def add(self, xs, scores):
        xs = np.atleast_2d(xs)
        scores = np.atleast_1d(np.asarray(scores, float))
        if self.x is None:
            self.x, self.scores = xs.copy(), scores.copy()
        else:
            self.x = np.concatenate([self.x, xs])
            self.scores = np.concatenate([self.scores, scores])
        keep = np.argsort(-self.scores, kind="stable")[: self.capacity]
        self.x, self.scores = self.x[keep], self.scores[keep]

    def __len__(self):
        return 0 if self.x is None else len(self.x)


# -- latent <-> strategy -------------------------------------------------------

def latent_size(num_vehicles, num_elements):
    """Per-slot latent width: 2 action logits per vehicle, K phases, V resource logits."""
    return 3 * num_vehicles + num_elements


def split_latent(x, num_vehicles, num_elements):
    v, k = num_vehicles, num_elements
    logits = x[..., : 2 * v].reshape(*x.shape[:-1], v, 2)
    phases = x[..., 2 * v: 2 * v + k]
    res = x[..., 2 * v + k: 3 * v + k]
    return logits, phases, res


def wrap_phase(theta):
    theta = np.mod(theta, TWO_PI)
    return np.where(theta >= TWO_PI, 0.0, theta)


def snap_phase(theta, grid):
    step = TWO_PI / grid
    return (np.rint(np.asarray(theta) / step) % grid) * step


def snap_fractions(frac, offloaders, grid):
    """Floor fractions to multiples of 1/grid; lift zeros to 1/grid while capacity remains."""
    levels = np.floor(frac * grid + 1e-9)
    levels = np.where(offloaders, levels, 0.0)
    zero = offloaders & (levels == 0)
    room = grid - levels.sum(-1, keepdims=True)
    lift = zero & (np.cumsum(zero, axis=-1) <= room)
    return (levels + lift) / grid


def decode_batch(x, present, fmax, num_elements, phase_grid=None, resource_grid=None):
    """Map latents of shape (..., N, L) to (action, theta, alloc) arrays."""
    v = present.shape[-1]
    logits, phases, res = split_latent(np.asarray(x, float), v, num_elements)
    want_off = logits[..., 1] > logits[..., 0]
    action = np.where(present, np.where(want_off, OFFLOAD, LOCAL), NONE).astype(np.int8)
    theta = wrap_phase(phases)
    if phase_grid:
        theta = snap_phase(theta, phase_grid)
    off = action == OFFLOAD
    z = np.where(off, res, -np.inf)
    zmax = np.max(z, axis=-1, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    e = np.exp(np.where(off, res - zmax, -np.inf))
    total = e.sum(-1, keepdims=True)
    frac = np.where(total > 0, e / np.where(total > 0, total, 1.0), 0.0)
    if resource_grid:
        frac = snap_fractions(frac, off, resource_grid)
    return action, theta, frac * fmax


def decode(x0, present, fmax, num_elements, phase_grid=None, resource_grid=None) -> Decision:
    """Latent (N, L) or flat (N*L,) -> a Decision for every slot."""
    present = np.atleast_2d(present)
    n, v = present.shape
    x = np.asarray(x0, float).reshape(n, latent_size(v, num_elements))
    action, theta, alloc = decode_batch(x, present, fmax, num_elements, phase_grid, resource_grid)
    return Decision(action, theta, alloc)
