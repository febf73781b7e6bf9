"""Stochastic linear bandits: OFUL, Thompson sampling, Greedy and Sieved-Greedy
as instances of a worth-function selection rule, with simulation and regret
analytics."""

from .environment import ActionSet, GroupStructure, LinearEnvironment
from .linalg import NotPositiveDefiniteError, RidgeState
from .policies import PolicyConfig, PolicyKind, RadiusKind, RadiusParams

__all__ = [
    "ActionSet",
    "GroupStructure",
    "LinearEnvironment",
    "NotPositiveDefiniteError",
    "PolicyConfig",
    "PolicyKind",
    "RadiusKind",
    "RadiusParams",
    "RidgeState",
]

__version__ = "0.1.0"
