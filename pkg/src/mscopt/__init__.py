"""Budgeted multi-stage classifier optimization.

Searches the space of ordered feature-set partitions for cascade
configurations that balance coverage, conclusive accuracy, and feature
acquisition cost, with an exhaustive enumerator as ground truth and a set of
reference baselines.
"""

from .cascade import CascadeEvaluator, Chromosome, ObjectiveVector, compress
from .classifier import ClassifierCache, Regularization, SubsetClassifier
from .data import CostSchema, Dataset, SplitSpec
from .evolution import EvolutionConfig, RunResult, run
from .space import GlobalFront, count_space, enumerate_space, global_front, stirling2

__all__ = [
    "CascadeEvaluator",
    "Chromosome",
    "ClassifierCache",
    "CostSchema",
    "Dataset",
    "EvolutionConfig",
    "GlobalFront",
    "ObjectiveVector",
    "Regularization",
    "RunResult",
    "SplitSpec",
    "SubsetClassifier",
    "compress",
    "count_space",
    "enumerate_space",
    "global_front",
    "run",
    "stirling2",
]

__version__ = "0.1.0"
