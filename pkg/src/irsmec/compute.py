"""Delay and energy accounting for local and offloaded execution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AccountingError, ConfigError, DomainError, InfeasibleOffloadError


@dataclass(frozen=True)
class ComputeParams:
    bs_compute_max: float = 5e9
    bs_kappa: float = 1e-26

    def validate(self):
        if not self.bs_compute_max > 0:
            raise ConfigError("bs_compute_max", "must be > 0")
        if self.bs_kappa < 0:
            raise ConfigError("bs_kappa", "must be >= 0")
        return self


def required_cycles(task) -> float:
    """CPU cycles a task needs: data size (bits) times intensity (cycles/bit)."""
    if not task.present:
        raise DomainError("no task present in this slot")
    if task.data_size <= 0 or task.intensity <= 0:
        raise DomainError("task data size and intensity must be positive")
    return task.data_size * task.intensity


def local_delay(cycles, f_local):
    return np.asarray(cycles) / f_local


def local_energy(cycles, f_local, kappa):
    return kappa * f_local**2 * np.asarray(cycles)


def offload_delay(data_bits, rate, cycles, f_alloc):
    if np.any(np.asarray(rate) <= 0) or np.any(np.asarray(f_alloc) <= 0):
        raise InfeasibleOffloadError("offloading needs a positive rate and allocation")
    return np.asarray(data_bits) / rate + np.asarray(cycles) / f_alloc


def offload_energy(tx_power, t_tran, cycles, f_alloc, kappa_bs):
    """Returns (transmission energy at the vehicle, computation energy at the BS)."""
    return tx_power * np.asarray(t_tran), kappa_bs * np.asarray(f_alloc) ** 2 * np.asarray(cycles)


@dataclass(frozen=True)
class BranchRecord:
    """Delay/energy of one (vehicle, slot); at most one branch may be nonzero."""
    local_delay: float = 0.0
    local_energy: float = 0.0
    offload_delay: float = 0.0
    offload_energy: float = 0.0


def totals(records) -> tuple[float, float]:
    t_total = 0.0
    e_total = 0.0
    for rec in records:
        local_used = rec.local_delay != 0 or rec.local_energy != 0
        offload_used = rec.offload_delay != 0 or rec.offload_energy != 0
        if local_used and offload_used:
            raise AccountingError(f"both branches charged in {rec}")
        t_total += rec.local_delay + rec.offload_delay
        e_total += rec.local_energy + rec.offload_energy
    return t_total, e_total
