"""Adversarial linear partial monitoring with anchored exploration-by-optimization.

Modules
-------
linalg         pseudoinverses, design matrices and optimal designs
games          loss spaces, feedback graphs and game constructors
observability  Pareto set, neighbors and the observability verdict
constants      alignment and design constants, rate thresholds and bounds
optimizer      the per-round exploration program and its solvers
exo            the learner
adversary      loss environments and hard instances
harness        runs, regret, sweeps and rate fits
"""
from . import adversary, constants, exo, games, harness, linalg, observability, optimizer
from .exceptions import (EtaTooLargeError, IllConditionedError, InfeasibilityError, InvalidInputError,
                         LinPMError, LocalObservabilityError, NoWitnessError, UnsupportedError)
from .exo import ExoLearner, LearnerConfig
from .games import Game, Graph, make_game
from .observability import classify

__version__ = "0.1.0"

__all__ = ["adversary", "constants", "exo", "games", "harness", "linalg", "observability", "optimizer",
           "ExoLearner", "LearnerConfig", "Game", "Graph", "make_game", "classify",
           "LinPMError", "InvalidInputError", "IllConditionedError", "InfeasibilityError",
           "UnsupportedError", "EtaTooLargeError", "NoWitnessError", "LocalObservabilityError"]
