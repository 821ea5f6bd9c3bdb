"""Domain-adaptive imitation learning for monocular reactive flight.

Subpackages: mmd (multi-kernel discrepancy estimators), net (small network
with manual backprop), dan (joint adaptation training), imitation
(datasets, discretization, DAgger), sim (deterministic 2D forest flight
simulator), scenarios (named transfer shifts), harness (experiments, CLI).
"""
from . import errors  # noqa: F401

__version__ = "0.1.0"
