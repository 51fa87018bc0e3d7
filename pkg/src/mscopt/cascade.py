"""Staged classifier cascades over ordered feature-set partitions.

A configuration assigns every feature a zero-indexed stage. An input walks
the stages in order, paying the acquisition cost of each stage's new features,
and exits at the first stage whose top class probability reaches the
confidence threshold. An input still below threshold after the last stage is
rejected with no label; its cost (all of the configuration's features) is
charged regardless.

Three performance measures are produced per configuration: coverage (fraction
of inputs that exit with a label), conclusive accuracy (accuracy among covered
inputs), and the mean per-input acquisition cost. Cost is reported raw and as
an inverse ratio against the cheapest configuration in a reference population.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import ClassifierCache, Regularization, SubsetClassifier, cache_get_or_train, predict_proba
from .data import CostSchema, Dataset

__all__ = [
    "Chromosome",
    "compress",
    "compress_assignments",
    "ObjectiveVector",
    "Verdict",
    "EvalContext",
    "CascadeEvaluator",
    "evaluate_input",
    "evaluate_objectives",
    "normalize_costs",
    "global_inverse_cost",
]


def compress_assignments(raw) -> tuple[int, ...]:
    """Rank-densify stage values so the used set is exactly {0..count-1}.

    Order relations between assignments are preserved: [0,0,0,2] -> [0,0,0,1],
    [3,3,0] -> [1,1,0]. Idempotent.
    """
    raw = tuple(int(v) for v in raw)
    if not raw:
        raise ValueError("empty assignment vector")
    if min(raw) < 0:
        raise ValueError("stage assignments must be non-negative")
    rank = {v: r for r, v in enumerate(sorted(set(raw)))}
    return tuple(rank[v] for v in raw)


@dataclass(frozen=True)
class Chromosome:
    """Gap-free stage assignment vector with at most k_max stages."""

    assignments: tuple[int, ...]
    k_max: int

    def __post_init__(self):
        object.__setattr__(self, "assignments", tuple(int(v) for v in self.assignments))
        if self.assignments != compress_assignments(self.assignments):
            raise ValueError(f"assignments {self.assignments} are not gap-free")
        if not (1 <= self.n_stages <= self.k_max):
            raise ValueError(f"{self.n_stages} stages exceeds limit k={self.k_max}")

    @property
    def n_stages(self) -> int:
        return max(self.assignments) + 1

    @property
    def n_features(self) -> int:
        return len(self.assignments)

    def stage_feature_sets(self) -> list[tuple[int, ...]]:
        """New features acquired at each stage (disjoint, all non-empty)."""
        return [
            tuple(i for i, v in enumerate(self.assignments) if v == s)
            for s in range(self.n_stages)
        ]

    def cumulative_feature_sets(self) -> list[tuple[int, ...]]:
        """Features available to the classifier at each stage (nested)."""
        return [
            tuple(i for i, v in enumerate(self.assignments) if v <= s)
            for s in range(self.n_stages)
        ]

    def to_text(self) -> str:
        return ",".join(str(v) for v in self.assignments)

    @classmethod
    def from_text(cls, text: str, k_max: int) -> "Chromosome":
        return compress([int(tok) for tok in text.split(",")], k_max)


def compress(raw, k_max: int) -> Chromosome:
    return Chromosome(compress_assignments(raw), k_max)


@dataclass
class ObjectiveVector:
    """(coverage, conclusive accuracy, cost) for one configuration.

    inverse_cost stays None until a population-level normalization fixes the
    reference minimum.
    """

    coverage: float
    conclusive_accuracy: float
    raw_cost: float
    inverse_cost: float | None = None

    def as_tuple(self) -> tuple[float, float, float]:
        if self.inverse_cost is None:
            raise ValueError("inverse cost not normalized yet")
        return (self.coverage, self.conclusive_accuracy, self.inverse_cost)


@dataclass(frozen=True)
class Verdict:
    conclusive: bool
    label: int | None
    stage: int  # 1-indexed last stage reached
    confidence: float


@dataclass(frozen=True)
class EvalContext:
    """A configuration's trained stages bound to an evaluation set."""

    chromosome: Chromosome
    stages: tuple[SubsetClassifier, ...]  # one per stage, on cumulative subsets
    stage_new_costs: tuple[float, ...]  # cost of the features first acquired per stage
    eval_features: np.ndarray
    eval_labels: np.ndarray
    p_hat: float

    @property
    def total_cost(self) -> float:
        return float(sum(self.stage_new_costs))


def evaluate_input(ctx: EvalContext, x: np.ndarray) -> tuple[Verdict, float]:
    """Walk one input through the cascade.

    Cost accrues for every stage reached, including the terminal stage of a
    rejected input. The threshold test is `>=`; argmax ties resolve to the
    lowest class index.
    """
    x = np.asarray(x, dtype=float)
    cost = 0.0
    for j, (clf, new_cost) in enumerate(zip(ctx.stages, ctx.stage_new_costs), start=1):
        cost += new_cost
        probs = predict_proba(clf, x)
        label = int(np.argmax(probs))
        confidence = float(probs[label])
        if confidence >= ctx.p_hat:
            return Verdict(True, label, j, confidence), cost
    return Verdict(False, None, len(ctx.stages), confidence), cost


def evaluate_objectives(ctx: EvalContext) -> ObjectiveVector:
    """Coverage, conclusive accuracy, and mean per-input cost over the eval set.

    With zero covered inputs the conclusive accuracy is defined as 0.
    """
    x = ctx.eval_features
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty evaluation set")
    s = len(ctx.stages)

    top_prob = np.empty((s, n))
    top_label = np.empty((s, n), dtype=int)
    for j, clf in enumerate(ctx.stages):
        probs = predict_proba(clf, x)
        top_label[j] = np.argmax(probs, axis=1)
        top_prob[j] = probs[np.arange(n), top_label[j]]

    passed = top_prob >= ctx.p_hat
    exit_stage = np.where(passed.any(axis=0), passed.argmax(axis=0), s)  # s = rejected
    cum_costs = np.cumsum(ctx.stage_new_costs)
    cost = cum_costs[np.minimum(exit_stage, s - 1)]

    conclusive = exit_stage < s
    n_star = int(conclusive.sum())
    coverage = n_star / n
    if n_star == 0:
        accuracy = 0.0
    else:
        labels = top_label[exit_stage[conclusive], np.flatnonzero(conclusive)]
        accuracy = float((labels == ctx.eval_labels[conclusive]).sum()) / n_star
    return ObjectiveVector(coverage, accuracy, float(cost.mean()))


def normalize_costs(objectives) -> None:
    """Set inverse_cost = (population minimum raw cost) / raw cost in place.

    The cheapest member(s) land exactly at 1; everything else falls in (0, 1).
    """
    objectives = list(objectives)
    if not objectives:
        raise ValueError("empty population")
    if any(o.raw_cost <= 0 for o in objectives):
        raise ValueError("raw costs must be positive for inverse-cost normalization")
    floor = min(o.raw_cost for o in objectives)
    for o in objectives:
        o.inverse_cost = floor / o.raw_cost


def global_inverse_cost(raw_cost: float, space_min: float) -> float:
    """Inverse cost against the minimum of an entire enumerated space."""
    if space_min <= 0 or raw_cost <= 0:
        raise ValueError("costs must be positive")
    return space_min / raw_cost


@dataclass
class CascadeEvaluator:
    """Builds and scores cascades for a fixed train/eval pairing.

    Stage classifiers are pulled from a shared cache keyed by cumulative
    feature subset, so repeated configurations and overlapping stages train
    each subset at most once.
    """

    train_ds: Dataset
    eval_ds: Dataset
    schema: CostSchema
    p_hat: float
    regularization: Regularization = Regularization("l2", 1.0)
    k_max: int | None = None
    cache: ClassifierCache = field(default_factory=ClassifierCache)

    def __post_init__(self):
        if not (0.0 < self.p_hat):
            raise ValueError("confidence threshold must be positive")
        if len(self.schema.costs) != self.train_ds.n_features:
            raise ValueError("cost schema does not match feature count")
        if self.k_max is None:
            self.k_max = self.train_ds.n_features

    @property
    def n_features(self) -> int:
        return self.train_ds.n_features

    @property
    def total_cost(self) -> float:
        return self.schema.total_cost

    def context_for(self, chromosome: Chromosome) -> EvalContext:
        stages = tuple(
            cache_get_or_train(self.cache, self.train_ds, subset, self.regularization)
            for subset in chromosome.cumulative_feature_sets()
        )
        new_costs = tuple(
            sum(self.schema.costs[i] for i in stage) for stage in chromosome.stage_feature_sets()
        )
        return EvalContext(
            chromosome,
            stages,
            new_costs,
            self.eval_ds.features,
            self.eval_ds.labels,
            self.p_hat,
        )

    def objectives(self, assignments) -> tuple[float, float, float]:
        """(coverage, conclusive accuracy, raw cost) for an assignment vector."""
        chrom = Chromosome(tuple(assignments), self.k_max)
        vec = evaluate_objectives(self.context_for(chrom))
        return (vec.coverage, vec.conclusive_accuracy, vec.raw_cost)
