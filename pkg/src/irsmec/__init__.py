"""Stackelberg-game offloading in IRS-assisted vehicular edge computing, solved by diffusion."""
from .channel import ChannelParams
from .compute import ComputeParams
from .diffusion import DiffusionConfig
from .game import GameParams
from .instance import Instance, SystemConfig, realize
from .scenario import ScenarioConfig
from .solvers import SOLVER_NAMES, SolverConfig, SolveResult, solve

__all__ = ["ChannelParams", "ComputeParams", "DiffusionConfig", "GameParams", "Instance",
           "SystemConfig", "realize", "ScenarioConfig", "SOLVER_NAMES", "SolverConfig",
           "SolveResult", "solve"]
__version__ = "0.1.0"
