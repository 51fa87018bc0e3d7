"""Reference methods the cascade search is compared against.

* single_stage: one classifier on all features, no reject option.
* cost_ordered: one stage per cost class, cheapest class first, terminal
  reject at the last stage.
* cact_lasso: L1 variable selection in a single stage with a terminal reject,
  tuned over a lambda grid by the aggregate linear score
  g1 + g2 + (1 - raw_cost / total_cost).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cascade import CascadeEvaluator, Chromosome, evaluate_objectives
from .classifier import ClassifierCache, Regularization, cache_get_or_train, predict_proba
from .data import CostSchema, Dataset

__all__ = [
    "BaselineResult",
    "aggregate_metric",
    "single_stage",
    "cost_ordered",
    "cost_ordered_chromosome",
    "cact_lasso",
    "default_lambda_grid",
    "selected_feature_cost",
]

COEF_ZERO_TOL = 1e-8


@dataclass(frozen=True)
class BaselineResult:
    method: str
    coverage: float
    conclusive_accuracy: float
    raw_cost: float
    aggregate: float
    config: dict

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "g1": self.coverage,
            "g2": self.conclusive_accuracy,
            "g3_raw": self.raw_cost,
            "aggregate": self.aggregate,
            "config": self.config,
        }


def aggregate_metric(g1: float, g2: float, raw_cost: float, total_cost: float) -> float:
    """g1 + g2 + (1 - raw_cost / total_cost), unclamped."""
    if total_cost <= 0:
        raise ValueError("total cost must be positive")
    return g1 + g2 + (1.0 - raw_cost / total_cost)


def single_stage(
    train_ds: Dataset,
    eval_ds: Dataset,
    schema: CostSchema,
    reg: Regularization = Regularization("l2", 1.0),
    cache: ClassifierCache | None = None,
) -> BaselineResult:
    """Full-feature classifier, every prediction accepted: g1 is exactly 1 and
    the per-input cost is the whole feature budget."""
    cache = cache or ClassifierCache()
    clf = cache_get_or_train(cache, train_ds, range(train_ds.n_features), reg)
    probs = predict_proba(clf, eval_ds.features)
    predictions = np.argmax(probs, axis=1)
    accuracy = float((predictions == eval_ds.labels).mean())
    total = schema.total_cost
    return BaselineResult(
        "single_stage",
        1.0,
        accuracy,
        total,
        aggregate_metric(1.0, accuracy, total, total),
        {"lambda": reg.strength, "kind": reg.kind},
    )


def cost_ordered_chromosome(schema: CostSchema, k_max: int | None = None) -> Chromosome:
    """Stage assignment by ascending cost class: each distinct class becomes a
    stage, cheapest first."""
    classes = sorted(set(schema.cost_classes))
    rank = {t: r for r, t in enumerate(classes)}
    k = k_max if k_max is not None else len(classes)
    return Chromosome(tuple(rank[t] for t in schema.cost_classes), max(k, len(classes)))


def cost_ordered(
    train_ds: Dataset,
    eval_ds: Dataset,
    schema: CostSchema,
    p_hat: float,
    reg: Regularization = Regularization("l2", 1.0),
    cache: ClassifierCache | None = None,
) -> BaselineResult:
    """Cascade with one stage per increasing cost class and a terminal reject."""
    chrom = cost_ordered_chromosome(schema)
    evaluator = CascadeEvaluator(
        train_ds, eval_ds, schema, p_hat, reg, k_max=chrom.k_max,
        cache=cache or ClassifierCache(),
    )
    vec = evaluate_objectives(evaluator.context_for(chrom))
    return BaselineResult(
        "cost_ordered",
        vec.coverage,
        vec.conclusive_accuracy,
        vec.raw_cost,
        aggregate_metric(vec.coverage, vec.conclusive_accuracy, vec.raw_cost, schema.total_cost),
        {"stages": chrom.n_stages, "chromosome": chrom.to_text(), "p_hat": p_hat},
    )


def default_lambda_grid() -> list[float]:
    """0 to 100 in steps of 0.1 (1001 values)."""
    return [round(0.1 * i, 1) for i in range(1001)]


def selected_feature_cost(clf, schema: CostSchema) -> float:
    """Cost of the features with any coefficient above the zero tolerance."""
    selected = np.abs(clf.weights[:, 1:]).max(axis=0) > COEF_ZERO_TOL
    return float(sum(schema.costs[f] for f, sel in zip(clf.feature_subset, selected) if sel))


def _reject_metrics(clf, ds: Dataset, p_hat: float) -> tuple[float, float]:
    probs = predict_proba(clf, ds.features)
    top = probs.max(axis=1)
    predictions = np.argmax(probs, axis=1)
    conclusive = top >= p_hat
    n_star = int(conclusive.sum())
    g1 = n_star / ds.n_samples
    g2 = float((predictions[conclusive] == ds.labels[conclusive]).sum()) / n_star if n_star else 0.0
    return g1, g2


def cact_lasso(
    train_ds: Dataset,
    val_ds: Dataset,
    test_ds: Dataset,
    schema: CostSchema,
    p_hat: float,
    lambdas=None,
) -> BaselineResult:
    """Tune an L1 single-stage model with a terminal reject over the lambda
    grid, maximizing the aggregate score on the validation set (lowest lambda
    wins ties), then report test metrics at the chosen lambda.

    The cost charged is the summed cost of features with non-zero
    coefficients; every input pays it, conclusive or not.
    """
    lambdas = default_lambda_grid() if lambdas is None else list(lambdas)
    if not lambdas:
        raise ValueError("empty lambda grid")
    total = schema.total_cost
    all_features = range(train_ds.n_features)

    best = None
    for lam in lambdas:
        clf = _train_l1(train_ds, all_features, lam)
        cost = selected_feature_cost(clf, schema)
        g1, g2 = _reject_metrics(clf, val_ds, p_hat)
        score = aggregate_metric(g1, g2, cost, total)
        if best is None or score > best[0]:
            best = (score, lam, clf)

    _, lam, clf = best
    cost = selected_feature_cost(clf, schema)
    g1, g2 = _reject_metrics(clf, test_ds, p_hat)
    return BaselineResult(
        "cact_lasso",
        g1,
        g2,
        cost,
        aggregate_metric(g1, g2, cost, total),
        {"lambda": lam, "p_hat": p_hat, "validation_aggregate": best[0]},
    )


def _train_l1(train_ds, subset, lam):
    from .classifier import train

    return train(train_ds, subset, Regularization("l1", lam))
