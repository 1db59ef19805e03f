"""Small dense MLPs in numpy: forward, exact backward, Adam, checkpoint I/O."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

MAGIC = b"MLPW"
VERSION = 1
_ACT_CODES = {"tanh": 0, "relu": 1}


@dataclass(frozen=True)
class MlpSpec:
    layer_widths: tuple
    activation: str = "tanh"

    def __post_init__(self):
        if len(self.layer_widths) < 2 or min(self.layer_widths) < 1:
            raise ShapeError(f"bad layer widths {self.layer_widths}")
        if self.activation not in _ACT_CODES:
            raise ValueError(f"unknown activation {self.activation!r}")


def init_params(spec: MlpSpec, rng, out_scale=1.0):
    """Glorot-uniform weights, zero biases. ``out_scale`` shrinks the last layer."""
    params = []
    widths = spec.layer_widths
    for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        bound = np.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-bound, bound, (n_in, n_out))
        if i == len(widths) - 2:
            w *= out_scale
        params.append([w, np.zeros(n_out)])
    return params


def _act(name, z):
    return np.tanh(z) if name == "tanh" else np.maximum(z, 0.0)


def _act_grad(name, z, a):
    return 1.0 - a * a if name == "tanh" else (z > 0).astype(z.dtype)


def forward(spec: MlpSpec, params, x):
    """Returns (output, cache). ``x`` may be a vector or a (batch, width) array."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.layer_widths[0]:
        raise ShapeError(f"input width {x.shape[-1]} != {spec.layer_widths[0]}")
    acts = [x]
    pre = []
    h = x
    last = len(params) - 1
    for i, (w, b) in enumerate(params):
        z = h @ w + b
        pre.append(z)
        h = z if i == last else _act(spec.activation, z)
        acts.append(h)
    return h, (acts, pre)


def backward(spec: MlpSpec, params, cache, upstream):
    """Gradients of sum(upstream * output) w.r.t. every parameter, plus the input gradient."""
    acts, pre = cache
    delta = np.asarray(upstream, dtype=float)
    if delta.shape != acts[-1].shape:
        raise ShapeError(f"upstream gradient {delta.shape} != output {acts[-1].shape}")
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        if i != len(params) - 1:
            delta = delta * _act_grad(spec.activation, pre[i], acts[i + 1])
        h = acts[i]
        if h.ndim == 1:
            gw = np.outer(h, delta)
            gb = delta.copy()
        else:
            h2 = h.reshape(-1, h.shape[-1])
            d2 = delta.reshape(-1, delta.shape[-1])
            gw = h2.T @ d2
            gb = d2.sum(0)
        grads[i] = [gw, gb]
        delta = delta @ params[i][0].T
    return grads, delta


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params, grads):
        """In-place adaptive-moment update of a nested list of arrays."""
        flat_p = [p for layer in params for p in layer] if isinstance(params[0], list) else params
        flat_g = [g for layer in grads for g in layer] if isinstance(grads[0], list) else grads
        if not self.m:
            self.m = [np.zeros_like(p) for p in flat_p]
            self.v = [np.zeros_like(p) for p in flat_p]
        if len(self.m) != len(flat_p) or any(a.shape != p.shape for a, p in zip(self.m, flat_p)):
            raise ShapeError("optimizer state does not match parameter shapes")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for p, g, m, v in zip(flat_p, flat_g, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params


def save(path, spec: MlpSpec, params):
    widths = spec.layer_widths
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, len(widths), _ACT_CODES[spec.activation]))
        fh.write(struct.pack(f"<{len(widths)}I", *widths))
        for w, b in params:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError("not an MLP checkpoint")
    version, n, act = struct.unpack_from("<III", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 16
    widths = struct.unpack_from(f"<{n}I", blob, off)
    off += 4 * n
    activation = {v: k for k, v in _ACT_CODES.items()}[act]
    spec = MlpSpec(tuple(widths), activation)
    params = []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        w = np.frombuffer(blob, "<f8", n_in * n_out, off).reshape(n_in, n_out).copy()
        off += 8 * n_in * n_out
        b = np.frombuffer(blob, "<f8", n_out, off).copy()
        off += 8 * n_out
        params.append([w, b])
    if off != len(blob):
        raise ValueError("trailing bytes in checkpoint")
    return spec, params
