"""Geometry, vehicle mobility and per-slot task arrivals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

REFERENCE_DISTANCE = 1.0  # d0, metres


@dataclass(frozen=True)
class ScenarioConfig:
    num_vehicles: int = 6
    num_antennas: int = 4
    num_elements: int = 16
    num_slots: int = 20
    slot_duration: float = 1.0
    area: tuple[float, float] = (100.0, 100.0)
    bs_position: tuple[float, float, float] = (80.0, 40.0, 0.0)
    irs_position: tuple[float, float, float] = (0.0, 0.0, 50.0)
    task_prob: float = 0.8
    data_size_range: tuple[float, float] = (1e5, 3e5)
    intensity_range: tuple[float, float] = (1000.0, 2000.0)
    deadline_range: tuple[float, float] = (0.1, 10.0)
    vehicle_compute: float = 1e9
    tx_power: float = 1.0
    vehicle_kappa: float = 1e-27
    speed_range: tuple[float, float] = (5.0, 15.0)
    accel_range: tuple[float, float] = (-0.5, 0.5)

    def validate(self):
        for name in ("num_vehicles", "num_antennas", "num_elements", "num_slots"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be >= 1")
        if not self.slot_duration > 0:
            raise ConfigError("slot_duration", "must be > 0")
        if len(self.area) != 2 or min(self.area) < 0:
            raise ConfigError("area", "expected two non-negative extents")
        for name in ("bs_position", "irs_position"):
            pos = getattr(self, name)
            if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
                raise ConfigError(name, "expected a finite 3-vector")
        if not 0.0 <= self.task_prob <= 1.0:
            raise ConfigError("task_prob", "must lie in [0, 1]")
        for name in ("data_size_range", "intensity_range", "deadline_range",
                     "speed_range", "accel_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(name, f"min {lo} exceeds max {hi}")
        for name in ("data_size_range", "intensity_range", "deadline_range"):
            if getattr(self, name)[0] <= 0:
                raise ConfigError(name, "must be strictly positive")
        if self.speed_range[0] < 0:
            raise ConfigError("speed_range", "speeds must be >= 0")
        for name in ("vehicle_compute", "tx_power"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be > 0")
        if self.vehicle_kappa < 0:
            raise ConfigError("vehicle_kappa", "must be >= 0")
        return self


@dataclass(frozen=True)
class VehicleState:
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray


@dataclass(frozen=True)
class Task:
    present: bool
    data_size: float = 0.0
    intensity: float = 0.0
    deadline: float = 0.0


@dataclass(frozen=True)
class ScenarioState:
    config: ScenarioConfig
    positions: np.ndarray       # (V, 3), z = 0
    velocities: np.ndarray      # (V, 2)
    accelerations: np.ndarray   # (V, 2)
    slot: int = 0

    def vehicle(self, i):
        return VehicleState(self.positions[i].copy(), self.velocities[i].copy(),
                            self.accelerations[i].copy())

    @property
    def bs(self):
        return np.asarray(self.config.bs_position, dtype=float)

    @property
    def irs(self):
        return np.asarray(self.config.irs_position, dtype=float)


def init_scenario(config: ScenarioConfig, seed: int) -> ScenarioState:
    config.validate()
    rng = np.random.default_rng(seed)
    v = config.num_vehicles
    width, height = config.area
    pos = np.zeros((v, 3))
    pos[:, 0] = rng.uniform(0.0, width, v)
    pos[:, 1] = rng.uniform(0.0, height, v)
    speed = rng.uniform(*config.speed_range, v)
    heading = rng.uniform(0.0, 2 * np.pi, v)
    vel = np.stack([speed * np.cos(heading), speed * np.sin(heading)], axis=1)
    acc = rng.uniform(*config.accel_range, (v, 2))
    return ScenarioState(config, pos, vel, acc, 0)


def _reflect(x, v, width):
    """Fold coordinates into [0, width], flipping velocity once per bounce."""
    if width <= 0:
        return np.zeros_like(x), v
    period = 2.0 * width
    folded = np.mod(x, period)
    bounces = np.floor_divide(x, width)
    upper = folded > width
    folded = np.where(upper, period - folded, folded)
    sign = np.where(np.mod(bounces, 2) == 1, -1.0, 1.0)
    return np.clip(folded, 0.0, width), v * sign


def step_mobility(state: ScenarioState) -> ScenarioState:
    dt = state.config.slot_duration
    xy = state.positions[:, :2] + state.velocities * dt + 0.5 * state.accelerations * dt**2
    vel = state.velocities + state.accelerations * dt
    new_xy = np.empty_like(xy)
    new_vel = np.empty_like(vel)
    for axis, width in enumerate(state.config.area):
        new_xy[:, axis], new_vel[:, axis] = _reflect(xy[:, axis], vel[:, axis], width)
    pos = state.positions.copy()
    pos[:, :2] = new_xy
    return replace(state, positions=pos, velocities=new_vel, slot=state.slot + 1)


def generate_tasks(state: ScenarioState, rng) -> list[Task]:
    cfg = state.config
    tasks = []
    for _ in range(cfg.num_vehicles):
        if rng.random() < cfg.task_prob:
            tasks.append(Task(True,
                              rng.uniform(*cfg.data_size_range),
                              rng.uniform(*cfg.intensity_range),
                              rng.uniform(*cfg.deadline_range)))
        else:
            tasks.append(Task(False))
    return tasks


def distances(state: ScenarioState):
    """3-D distances vehicle-BS, vehicle-IRS and IRS-BS, clamped at d0."""
    d_ib = np.linalg.norm(state.positions - state.bs, axis=1)
    d_ir = np.linalg.norm(state.positions - state.irs, axis=1)
    d_rb = float(np.linalg.norm(state.irs - state.bs))
    return (np.maximum(d_ib, REFERENCE_DISTANCE),
            np.maximum(d_ir, REFERENCE_DISTANCE),
            max(d_rb, REFERENCE_DISTANCE))
