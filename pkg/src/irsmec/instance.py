"""A fully realized problem instance: scenario, tasks and channels for every slot.

All solvers for one seed share the same ``Instance`` so that comparisons are
paired.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, ChannelRealization, realize_channels
from .compute import ComputeParams
from .game import GameParams
from .scenario import ScenarioConfig, Task, generate_tasks, init_scenario, step_mobility


@dataclass(frozen=True)
class SystemConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    compute: ComputeParams = field(default_factory=ComputeParams)
    game: GameParams = field(default_factory=GameParams)

    def validate(self):
        self.scenario.validate()
        self.channel.validate()
        self.compute.validate()
        self.game.validate()
        return self


@dataclass
class Instance:
    system: SystemConfig
    present: np.ndarray     # (N, V) bool
    data: np.ndarray        # (N, V) bits
    intensity: np.ndarray   # (N, V) cycles/bit
    deadline: np.ndarray    # (N, V) seconds
    positions: np.ndarray   # (N, V, 3)
    h_ib: np.ndarray        # (N, V, S)
    h_ir: np.ndarray        # (N, V, K)
    h_rb: np.ndarray        # (N, K, S)
    cycles: np.ndarray = None

    def __post_init__(self):
        if self.cycles is None:
            self.cycles = np.where(self.present, self.data * self.intensity, 0.0)

    @property
    def num_slots(self):
        return self.present.shape[0]

    @property
    def num_vehicles(self):
        return self.present.shape[1]

    @property
    def num_elements(self):
        return self.h_rb.shape[1]

    def slot_tasks(self, n):
        return [Task(bool(p), float(d), float(c), float(t)) if p else Task(False)
                for p, d, c, t in zip(self.present[n], self.data[n],
                                      self.intensity[n], self.deadline[n])]

    def realization(self, n, theta=None):
        return ChannelRealization(self.h_ib[n], self.h_ir[n], self.h_rb[n],
                                  None if theta is None else np.asarray(theta, float))

    def slots(self, idx):
        """Sub-instance restricted to the given slot indices."""
        idx = np.atleast_1d(idx)
        return Instance(self.system, self.present[idx], self.data[idx], self.intensity[idx],
                        self.deadline[idx], self.positions[idx], self.h_ib[idx],
                        self.h_ir[idx], self.h_rb[idx], self.cycles[idx])


def realize(system: SystemConfig, seed: int) -> Instance:
    """Roll the scenario forward for N slots, drawing tasks and fading per slot."""
    system.validate()
    cfg = system.scenario
    state = init_scenario(cfg, seed)
    task_rng = np.random.default_rng([seed, 1])
    chan_rng = np.random.default_rng([seed, 2])
    n, v = cfg.num_slots, cfg.num_vehicles
    present = np.zeros((n, v), bool)
    data = np.zeros((n, v))
    intensity = np.zeros((n, v))
    deadline = np.zeros((n, v))
    positions = np.zeros((n, v, 3))
    h_ib, h_ir, h_rb = [], [], []
    for slot in range(n):
        for i, task in enumerate(generate_tasks(state, task_rng)):
            if task.present:
                present[slot, i] = True
                data[slot, i] = task.data_size
                intensity[slot, i] = task.intensity
                deadline[slot, i] = task.deadline
        positions[slot] = state.positions
        chan: ChannelRealization = realize_channels(state, system.channel, chan_rng)
        h_ib.append(chan.h_ib)
        h_ir.append(chan.h_ir)
        h_rb.append(chan.h_rb)
        state = step_mobility(state)
    return Instance(system, present, data, intensity, deadline, positions,
                    np.stack(h_ib), np.stack(h_ir), np.stack(h_rb))
