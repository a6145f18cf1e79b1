"""Temporal robustness of clustered machine-type-communication networks.

Two engines compute the same ratio of expected successfully communicating
nodes after vs before random node removal: an analytic expectation chain
(:mod:`mtcrobust.analytic`) and a Monte Carlo simulator
(:mod:`mtcrobust.simulator`).
"""

from .model import (
    BernoulliPerNode,
    DegenerateDegree,
    FixedCount,
    InvalidParameter,
    NetworkConfig,
    NoSuccessBaseline,
    RobustnessEstimate,
    UniformCount,
    default_config,
    load_config,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "BernoulliPerNode",
    "DegenerateDegree",
    "FixedCount",
    "InvalidParameter",
    "NetworkConfig",
    "NoSuccessBaseline",
    "RobustnessEstimate",
    "UniformCount",
    "default_config",
    "load_config",
    "validate",
]
