"""Planar simulation and control of a balancing robot pushing a nonholonomic cart."""

from .dynamics import CartParams, CartState, HandleForces, PlanarWrench
from .estimation import CartEkf, CartIdentifier, NoiseConfig
from .pusher import BallbotParams, PushingPoseOptimizer
from .simulation import ArmModel, CommandProfile, ControllerConfig, Disturbance, Scenario, run_scenario

__all__ = [
    "ArmModel",
    "BallbotParams",
    "CartEkf",
    "CartIdentifier",
    "CartParams",
    "CartState",
    "CommandProfile",
    "ControllerConfig",
    "Disturbance",
    "HandleForces",
    "NoiseConfig",
    "PlanarWrench",
    "PushingPoseOptimizer",
    "Scenario",
    "run_scenario",
]

__version__ = "0.1.0"
