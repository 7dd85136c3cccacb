"""Evidential multi-view classification with conflict-aware opinion fusion.

Each view of an instance produces nonnegative class evidence through its own
small network. Evidence defines a Dirichlet over class probabilities and,
through subjective logic, an opinion (belief masses plus an explicit
uncertainty mass). View opinions are fused by averaging evidence, which makes
the fused uncertainty a harmonic mean: conflicting or vacuous views raise the
fused uncertainty instead of being silently outvoted. Training penalizes
confident disagreement between views through a pairwise conflictive degree.
"""

from .config import ConfigError, RunConfig
from .estimator import EvidentialMultiviewClassifier
from .evaluation import EvalReport, evaluate, multi_run, run_experiment
from .losses import LossBreakdown, LossConfig
from .network import EvidentialNet, NetConfig, TrainTrace, load_checkpoint, save_checkpoint
from .opinions import (
    DirichletParams,
    Evidence,
    Opinion,
    ProjectedProbability,
    aggregate_pair,
    conflictive_degree,
    conjunctive_certainty,
    decide,
    evidence_to_opinion,
    fuse_evidence,
    fuse_opinions,
    project,
    projected_distance,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DirichletParams",
    "EvalReport",
    "Evidence",
    "EvidentialMultiviewClassifier",
    "EvidentialNet",
    "LossBreakdown",
    "LossConfig",
    "NetConfig",
    "Opinion",
    "ProjectedProbability",
    "RunConfig",
    "TrainTrace",
    "aggregate_pair",
    "conflictive_degree",
    "conjunctive_certainty",
    "decide",
    "evaluate",
    "evidence_to_opinion",
    "fuse_evidence",
    "fuse_opinions",
    "load_checkpoint",
    "multi_run",
    "project",
    "projected_distance",
    "run_experiment",
    "save_checkpoint",
    "__version__",
]
