"""Fading channels, IRS reflection, SINR and FDMA uplink rate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, ShapeError
from .scenario import distances

TWO_PI = 2.0 * np.pi


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Large-scale channel constants, all in linear units.

    ``direct_loss`` is an extra power factor on the vehicle-BS link that
    models building penetration; 1.0 means an unobstructed direct path.
    """
    ref_pathloss: float = 0.01
    exp_ib: float = 3.0
    exp_ir: float = 2.5
    exp_rb: float = 2.2
    rician_factor: float = float(db_to_linear(3.0))
    bandwidth: float = 10e6
    noise_power: float = float(dbm_to_watts(-114.0))
    interference: bool = True
    direct_loss: float = 1e-4     # blockage on the direct vehicle-BS link

    def validate(self):
        if not self.ref_pathloss > 0:
            raise ConfigError("ref_pathloss", "must be > 0")
        for name in ("exp_ib", "exp_ir", "exp_rb"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "path-loss exponent must be > 0")
        if self.rician_factor < 0:
            raise ConfigError("rician_factor", "must be >= 0")
        if not self.bandwidth > 0:
            raise ConfigError("bandwidth", "must be > 0")
        if not self.noise_power > 0:
            raise ConfigError("noise_power", "must be > 0")
        if not 0 < self.direct_loss <= 1:
            raise ConfigError("direct_loss", "must lie in (0, 1]")
        return self


@dataclass
class ChannelRealization:
    h_ib: np.ndarray            # (V, S)
    h_ir: np.ndarray            # (V, K)
    h_rb: np.ndarray            # (K, S)
    theta: np.ndarray = None    # (K,)

    def __post_init__(self):
        if self.theta is None:
            self.theta = np.zeros(self.h_rb.shape[0])


def complex_gaussian(rng, shape):
    """i.i.d. circularly-symmetric CN(0, 1) entries."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def rayleigh_gain(d, alpha, rho, num_antennas, rng, small_scale=None):
    if np.any(np.asarray(d) < 1.0):
        raise DomainError(f"distance {d} below the 1 m reference distance")
    if small_scale is None:
        small_scale = complex_gaussian(rng, num_antennas)
    return np.sqrt(rho * np.power(d, -alpha)) * small_scale


def rician_gain(d, alpha, rho, gamma, los, rng, nlos=None):
    if gamma < 0:
        raise DomainError("Rician factor must be >= 0")
    if np.any(np.asarray(d) < 1.0):
        raise DomainError(f"distance {d} below the 1 m reference distance")
    los = np.asarray(los, dtype=complex)
    if nlos is None:
        nlos = complex_gaussian(rng, los.shape)
    mix = np.sqrt(gamma / (1.0 + gamma)) * los + np.sqrt(1.0 / (1.0 + gamma)) * nlos
    return np.sqrt(rho * np.power(d, -alpha)) * mix


def los_component(tx_pos, rx_pos, num_elements, axis=(1.0, 0.0, 0.0)):
    """Half-wavelength ULA response of an array at ``rx_pos`` seeing ``tx_pos``."""
    diff = np.asarray(tx_pos, dtype=float) - np.asarray(rx_pos, dtype=float)
    dist = np.linalg.norm(diff)
    if dist == 0:
        raise DomainError("coincident positions have no angle of arrival")
    cos_phi = float(np.dot(diff, axis)) / dist
    k = np.arange(num_elements)
    return np.exp(1j * np.pi * k * cos_phi)


def reflection_matrix(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta >= TWO_PI):
        raise DomainError("phase shifts must lie in [0, 2*pi)")
    return np.diag(np.exp(1j * theta))


def effective_channel(h_ib, h_ir, theta_mat, h_rb):
    h_ib = np.atleast_1d(np.asarray(h_ib))
    h_ir = np.atleast_1d(np.asarray(h_ir))
    theta_mat = np.atleast_2d(np.asarray(theta_mat))
    h_rb = np.atleast_2d(np.asarray(h_rb))
    k = h_ir.shape[-1]
    if theta_mat.shape != (k, k) or h_rb.shape[0] != k or h_ib.shape[-1] != h_rb.shape[1]:
        raise ShapeError(
            f"inconsistent shapes h_ib{h_ib.shape} h_ir{h_ir.shape} "
            f"theta{theta_mat.shape} h_rb{h_rb.shape}")
    return h_ib + h_ir @ theta_mat @ h_rb


def channel_gains(h_ib, h_ir, h_rb, theta):
    """||h_ib + h_ir diag(e^{j theta}) h_rb||^2 for every vehicle.

    Broadcasts over leading axes: h_ib (..., V, S), h_ir (..., V, K),
    h_rb (..., K, S), theta (..., K). Returns (..., V).
    """
    phase = np.exp(1j * np.asarray(theta))[..., None, :]
    cascaded = np.matmul(h_ir * phase, h_rb)
    eff = h_ib + cascaded
    return (eff.real**2 + eff.imag**2).sum(axis=-1)


def sinr_from_gains(gains, powers, noise_power, interference=True):
    """Per-vehicle SINR; vehicle j interferes with i through p_j * g_j."""
    received = np.asarray(powers) * np.asarray(gains)
    if interference:
        v = received.shape[-1]
        others = received @ (1.0 - np.eye(v))
    else:
        others = 0.0
    return received / (others + noise_power)


def sinr(i, powers, realization: ChannelRealization, noise_power, interference=True):
    theta = np.mod(realization.theta, TWO_PI)
    gains = channel_gains(realization.h_ib, realization.h_ir, realization.h_rb, theta)
    powers = np.asarray(powers, dtype=float)
    num = powers[i] * gains[i]
    interf = 0.0
    if interference:
        interf = sum(powers[j] * gains[j] for j in range(len(powers)) if j != i)
    return float(num / (interf + noise_power))


def rate(bandwidth, num_vehicles, delta):
    return bandwidth / num_vehicles * np.log2(1.0 + np.asarray(delta))


def realize_channels(state, params: ChannelParams, rng) -> ChannelRealization:
    """Draw one slot of small-scale fading for the current geometry."""
    cfg = state.config
    s, k = cfg.num_antennas, cfg.num_elements
    d_ib, d_ir, d_rb = distances(state)
    h_ib = np.stack([rayleigh_gain(d, params.exp_ib, params.ref_pathloss, s, rng) for d in d_ib])
    h_ib = h_ib * np.sqrt(params.direct_loss)
    h_ir = np.stack([
        rician_gain(d, params.exp_ir, params.ref_pathloss, params.rician_factor,
                    los_component(pos, state.irs, k), rng)
        for d, pos in zip(d_ir, state.positions)
    ])
    los_rb = np.outer(los_component(state.bs, state.irs, k), los_component(state.irs, state.bs, s))
    h_rb = rician_gain(d_rb, params.exp_rb, params.ref_pathloss, params.rician_factor, los_rb, rng)
    return ChannelRealization(h_ib, h_ir, h_rb)
