"""Shared fixtures: a small learnable dataset with mixed feature costs, its
trained cascade evaluator, and the exhaustively computed true front."""

from dataclasses import dataclass

import numpy as np
import pytest

from mscopt.cascade import CascadeEvaluator
from mscopt.classifier import Regularization
from mscopt.data import CostSchema, Dataset, SplitSpec, impute_standardize, make_synthetic, split
from mscopt.space import GlobalFront, global_front

FIXTURE_SEED = 7
SPLIT_SEED = 3
P_HAT = 0.75


@dataclass
class Study:
    """A prepared dataset with train/validation/test splits and evaluators."""

    dataset: Dataset
    schema: CostSchema
    train: Dataset
    validation: Dataset
    test: Dataset
    evaluator: CascadeEvaluator  # scores against the validation split
    test_evaluator: CascadeEvaluator
    p_hat: float


def build_study(n_features, cost_classes, k, seed=FIXTURE_SEED, n_samples=600,
                n_informative=None, p_hat=P_HAT) -> Study:
    ds = make_synthetic(
        n_features, n_samples, 2,
        n_informative if n_informative is not None else max(2, n_features - 3),
        seed=seed,
    )
    schema = CostSchema(cost_classes, "linear100")
    train_ds, val_ds, test_ds = split(ds, SplitSpec((0.5, 0.25, 0.25), SPLIT_SEED))
    train_ds, (val_ds, test_ds), _ = impute_standardize(train_ds, [val_ds, test_ds])
    reg = Regularization("l2", 1.0)
    evaluator = CascadeEvaluator(train_ds, val_ds, schema, p_hat, reg, k_max=k)
    test_evaluator = CascadeEvaluator(
        train_ds, test_ds, schema, p_hat, reg, k_max=k, cache=evaluator.cache
    )
    return Study(ds, schema, train_ds, val_ds, test_ds, evaluator, test_evaluator, p_hat)


@pytest.fixture(scope="session")
def study8() -> Study:
    """The n=8, k=3 workhorse: |S(8,3)| = 6051 chromosomes."""
    return build_study(8, (1, 1, 2, 2, 3, 3, 1, 2), k=3, n_informative=5)


@pytest.fixture(scope="session")
def front8(study8) -> GlobalFront:
    return global_front(8, 3, study8.evaluator)


@pytest.fixture(scope="session")
def study6() -> Study:
    """Smaller n=6, k=3 space (603 chromosomes) for exhaustive scans."""
    return build_study(6, (1, 2, 2, 3, 1, 3), k=3, n_samples=400, n_informative=4)


class TableEvaluator:
    """Objective lookup from an explicit table; records query counts."""

    def __init__(self, table, n_features):
        self.table = {tuple(k): tuple(v) for k, v in table.items()}
        self.n_features = n_features
        self.calls = 0

    def objectives(self, assignments):
        self.calls += 1
        return self.table[tuple(assignments)]


class HashEvaluator:
    """Deterministic pseudo-random objectives keyed by the assignment vector."""

    def __init__(self, n_features, salt=0):
        self.n_features = n_features
        self.salt = salt

    def objectives(self, assignments):
        rng = np.random.default_rng(hash((self.salt,) + tuple(assignments)) % (2**32))
        g1, g2 = rng.random(2)
        raw = 1.0 + 99.0 * rng.random()
        return (float(g1), float(g2), float(raw))
