"""Dataset ingestion, cost schemas, splitting, preprocessing and synthetic data.

Feature acquisition costs are modeled with integer cost classes per feature
and a scaling function that maps a class to an abstract cost unit. Two scaling
functions are built in (powers of ten and a linear 100x ramp); arbitrary
class-to-cost tables are also accepted.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "CostSchema",
    "SplitSpec",
    "TransformRecord",
    "load_csv",
    "split",
    "impute_standardize",
    "make_synthetic",
    "assign_gini_cost_classes",
    "percentile_cost_class",
]


@dataclass(frozen=True)
class Dataset:
    """A labeled feature matrix. Missing cells are NaN until imputed.

    labels are class indices in {0..n_classes-1}.
    """

    features: np.ndarray  # (N, n) float64
    labels: np.ndarray  # (N,) int
    feature_names: tuple[str, ...]
    n_classes: int
    categorical: tuple[bool, ...] | None = None  # mode-imputed when True

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        labs = np.asarray(self.labels, dtype=int)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError("features must be a non-empty 2-D matrix")
        if labs.shape != (feats.shape[0],):
            raise ValueError("labels length must match feature rows")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        if labs.min() < 0 or labs.max() >= self.n_classes:
            raise ValueError("label index out of range")
        if len(self.feature_names) != feats.shape[1]:
            raise ValueError("feature_names length must match feature columns")
        if self.categorical is not None and len(self.categorical) != feats.shape[1]:
            raise ValueError("categorical mask length must match feature columns")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def take(self, idx: np.ndarray) -> "Dataset":
        return Dataset(
            self.features[idx],
            self.labels[idx],
            self.feature_names,
            self.n_classes,
            self.categorical,
        )

    def with_features(self, feats: np.ndarray) -> "Dataset":
        return Dataset(feats, self.labels, self.feature_names, self.n_classes, self.categorical)


def _scale_cost(scaling, cost_class: int) -> float:
    if scaling == "power10":
        return float(10 ** cost_class)
    if scaling == "linear100":
        return float(100 * cost_class)
    if isinstance(scaling, dict):
        try:
            return float(scaling[cost_class])
        except KeyError:
            raise ValueError(f"cost class {cost_class} missing from custom scaling table")
    raise ValueError(f"unknown cost scaling {scaling!r}")


@dataclass(frozen=True)
class CostSchema:
    """Per-feature cost classes plus the scaling function that prices them."""

    cost_classes: tuple[int, ...]
    scaling: object  # "power10" | "linear100" | {class: cost}
    costs: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if len(self.cost_classes) < 1:
            raise ValueError("empty cost schema")
        for t in self.cost_classes:
            if int(t) != t or t <= 0:
                raise ValueError(f"cost class must be a positive integer, got {t!r}")
        costs = tuple(_scale_cost(self.scaling, int(t)) for t in self.cost_classes)
        if any(c <= 0 for c in costs):
            raise ValueError("all feature costs must be positive")
        object.__setattr__(self, "cost_classes", tuple(int(t) for t in self.cost_classes))
        object.__setattr__(self, "costs", costs)

    @property
    def total_cost(self) -> float:
        return float(sum(self.costs))

    def to_json_dict(self, feature_names) -> dict:
        scaling = self.scaling
        if isinstance(scaling, dict):
            scaling = {"table": {str(k): v for k, v in scaling.items()}}
        return {
            "scaling": scaling,
            "classes": {name: t for name, t in zip(feature_names, self.cost_classes)},
        }


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float] = (0.5, 0.25, 0.25)
    seed: int = 0

    def __post_init__(self):
        if len(self.fractions) != 3:
            raise ValueError("need (train, validation, test) fractions")
        if any(f <= 0 for f in self.fractions):
            raise ValueError("all split fractions must be positive")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


@dataclass(frozen=True)
class TransformRecord:
    """Train-set statistics applied identically to held-out splits."""

    fill_values: tuple[float, ...]
    means: tuple[float, ...]
    scales: tuple[float, ...]  # zero-variance columns get scale 1


def load_csv(path, cost_path) -> tuple[Dataset, CostSchema]:
    """Read a dataset CSV (header row, label in the last column, empty cell =
    missing) together with its cost file.

    The cost file is JSON: ``{"scaling": "power10" | "linear100" |
    {"table": {class: cost}}, "classes": {feature_name: class}}`` and must
    cover exactly the feature columns of the CSV.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise ValueError(f"{path}: need at least one feature column and a label column")
    feature_names = tuple(header[:-1])
    n = len(feature_names)

    feats = np.full((len(rows) - 1, n), np.nan)
    raw_labels = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != n + 1:
            raise ValueError(f"{path}: row {r} has {len(row)} cells, expected {n + 1}")
        for c, cell in enumerate(row[:-1]):
            cell = cell.strip()
            if cell == "":
                continue  # missing
            try:
                feats[r - 2, c] = float(cell)
            except ValueError:
                raise ValueError(f"{path}: row {r}, column {header[c]!r}: not a number: {cell!r}")
        lab = row[-1].strip()
        if lab == "":
            raise ValueError(f"{path}: row {r}: missing label")
        raw_labels.append(lab)

    # Map raw label values to dense indices, ordering numerically when possible.
    uniq = sorted(set(raw_labels))
    try:
        uniq = sorted(uniq, key=float)
    except ValueError:
        pass
    if len(uniq) < 2:
        raise ValueError(f"{path}: need at least two label values")
    index = {v: i for i, v in enumerate(uniq)}
    labels = np.array([index[v] for v in raw_labels], dtype=int)

    with open(cost_path) as fh:
        cost_doc = json.load(fh)
    if not isinstance(cost_doc, dict) or "classes" not in cost_doc or "scaling" not in cost_doc:
        raise ValueError(f"{cost_path}: cost file needs 'scaling' and 'classes' keys")
    classes = cost_doc["classes"]
    unknown = set(classes) - set(feature_names)
    if unknown:
        raise ValueError(f"{cost_path}: unknown features in cost file: {sorted(unknown)}")
    missing = set(feature_names) - set(classes)
    if missing:
        raise ValueError(f"{cost_path}: features without a cost class: {sorted(missing)}")
    scaling = cost_doc["scaling"]
    if isinstance(scaling, dict):
        if "table" not in scaling:
            raise ValueError(f"{cost_path}: custom scaling must be {{'table': {{class: cost}}}}")
        scaling = {int(k): float(v) for k, v in scaling["table"].items()}
    schema = CostSchema(tuple(classes[name] for name in feature_names), scaling)
    return Dataset(feats, labels, feature_names, len(uniq)), schema


def _largest_remainder(total: int, fractions) -> list[int]:
    exact = [total * f for f in fractions]
    counts = [math.floor(e) for e in exact]
    rem = total - sum(counts)
    order = sorted(range(len(fractions)), key=lambda j: (-(exact[j] - counts[j]), j))
    for j in order[:rem]:
        counts[j] += 1
    return counts


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Stratified train/validation/test split.

    Split sizes land within +/-1 of N*fraction; class proportions are
    preserved per split as closely as integer counts allow. Deterministic for
    a given seed.
    """
    if ds.n_samples < 4:
        raise ValueError("need at least 4 samples to split")
    totals = _largest_remainder(ds.n_samples, spec.fractions)
    if min(totals) == 0:
        raise ValueError(f"split fractions {spec.fractions} leave an empty split at N={ds.n_samples}")

    rng = np.random.default_rng(spec.seed)
    class_indices = {}
    for c in range(ds.n_classes):
        idx = np.flatnonzero(ds.labels == c)
        rng.shuffle(idx)
        class_indices[c] = idx

    # Floor allocation per (class, split), then hand out the leftovers by
    # largest fractional remainder subject to the global split totals.
    alloc = {}
    needs = {}
    capacity = list(totals)
    slots = []
    for c, idx in class_indices.items():
        base = [math.floor(len(idx) * f) for f in spec.fractions]
        alloc[c] = base
        needs[c] = len(idx) - sum(base)
        for j in range(3):
            capacity[j] -= base[j]
            slots.append((len(idx) * spec.fractions[j] - base[j], c, j))
    slots.sort(key=lambda s: (-s[0], s[1], s[2]))
    for _, c, j in slots:
        if needs[c] > 0 and capacity[j] > 0:
            alloc[c][j] += 1
            needs[c] -= 1
            capacity[j] -= 1
    for c in sorted(needs):  # capacity misalignment fallback
        while needs[c] > 0:
            j = next(j for j in range(3) if capacity[j] > 0)
            alloc[c][j] += 1
            needs[c] -= 1
            capacity[j] -= 1

    parts = [[], [], []]
    for c in sorted(class_indices):
        idx = class_indices[c]
        a, b = alloc[c][0], alloc[c][0] + alloc[c][1]
        parts[0].append(idx[:a])
        parts[1].append(idx[a:b])
        parts[2].append(idx[b:])
    out = []
    for j in range(3):
        merged = np.sort(np.concatenate(parts[j]))
        out.append(ds.take(merged))
    return tuple(out)


def impute_standardize(
    train: Dataset, others: list[Dataset]
) -> tuple[Dataset, list[Dataset], TransformRecord]:
    """Fill missing cells from train-column statistics, then z-score every
    column with train mean/stdev (population stdev; zero-variance columns are
    left centered with scale 1). The identical transform is applied to the
    held-out datasets.

    Continuous columns are mean-imputed; columns flagged categorical are
    mode-imputed (smallest value wins ties).
    """
    feats = train.features
    cat = train.categorical or (False,) * train.n_features
    fill = np.empty(train.n_features)
    for c in range(train.n_features):
        col = feats[:, c]
        known = col[~np.isnan(col)]
        if known.size == 0:
            fill[c] = 0.0
        elif cat[c]:
            values, counts = np.unique(known, return_counts=True)
            fill[c] = values[np.argmax(counts)]  # np.unique sorts, so ties pick the smallest
        else:
            fill[c] = known.mean()

    def _fill(x):
        x = x.copy()
        nan = np.isnan(x)
        x[nan] = np.broadcast_to(fill, x.shape)[nan]
        return x

    filled = _fill(feats)
    means = filled.mean(axis=0)
    stds = filled.std(axis=0)
    scales = np.where(stds > 0, stds, 1.0)

    record = TransformRecord(tuple(fill), tuple(means), tuple(scales))
    train_out = train.with_features((filled - means) / scales)
    others_out = [d.with_features((_fill(d.features) - means) / scales) for d in others]
    return train_out, others_out, record


def make_synthetic(
    n_features: int,
    n_samples: int,
    n_classes: int,
    n_informative: int,
    seed: int,
    class_sep: float = 2.0,
) -> Dataset:
    """Generate a classification dataset from class-conditional Gaussians.

    The first ``n_informative`` columns carry unit-variance clusters around
    per-class centroids (drawn once with spread ``class_sep``); the remaining
    columns are label-independent standard normal noise. Labels are assigned
    as evenly as possible and rows are shuffled.
    """
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if not (1 <= n_informative <= n_features):
        raise ValueError("n_informative must be in [1, n_features]")
    if n_samples < n_classes:
        raise ValueError("need at least one sample per class")
    rng = np.random.default_rng(seed)
    counts = _largest_remainder(n_samples, [1.0 / n_classes] * n_classes)
    centroids = rng.normal(0.0, class_sep, size=(n_classes, n_informative))

    labels = np.repeat(np.arange(n_classes), counts)
    info = centroids[labels] + rng.standard_normal((n_samples, n_informative))
    noise = rng.standard_normal((n_samples, n_features - n_informative))
    feats = np.hstack([info, noise])

    perm = rng.permutation(n_samples)
    names = tuple(f"f{i}" for i in range(n_features))
    return Dataset(feats[perm], labels[perm], names, n_classes)


def _stump_impurity_reduction(x: np.ndarray, labels: np.ndarray, n_classes: int) -> float:
    """Best Gini impurity reduction achievable by a single threshold on x."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    onehot = np.zeros((x.size, n_classes))
    onehot[np.arange(x.size), labels[order]] = 1.0
    left = np.cumsum(onehot, axis=0)  # class counts at split after position i
    total = left[-1]
    n = x.size

    boundaries = np.flatnonzero(xs[:-1] < xs[1:])  # splits only between distinct values
    if boundaries.size == 0:
        return 0.0
    nl = (boundaries + 1).astype(float)
    nr = n - nl
    lc = left[boundaries]
    rc = total - lc
    gini_l = 1.0 - ((lc / nl[:, None]) ** 2).sum(axis=1)
    gini_r = 1.0 - ((rc / nr[:, None]) ** 2).sum(axis=1)
    parent = 1.0 - ((total / n) ** 2).sum()
    reduction = parent - (nl / n) * gini_l - (nr / n) * gini_r
    return float(reduction.max())


def assign_gini_cost_classes(
    ds: Dataset, n_classes_of_cost: int, scaling="linear100", seed: int = 0, n_resamples: int = 25
) -> CostSchema:
    """Bucket features into cost classes by their Gini importance percentile.

    Importance is the impurity reduction of the best single-feature decision
    stump, averaged over bootstrap resamples. Features are ranked (ties broken
    by feature index) and the percentile (rank + 0.5) / n is mapped to
    equal-width buckets, so the most important features land in the highest
    cost class. The 5-bucket map puts percentile 0.2 in class 1, (0.2, 0.4]
    in class 2, and so on.
    """
    if n_classes_of_cost < 1:
        raise ValueError("need at least one cost class")
    rng = np.random.default_rng(seed)
    feats = ds.features
    if np.isnan(feats).any():
        raise ValueError("impute missing values before ranking features")
    importances = np.zeros(ds.n_features)
    for _ in range(n_resamples):
        idx = rng.integers(0, ds.n_samples, size=ds.n_samples)
        lab = ds.labels[idx]
        for c in range(ds.n_features):
            importances[c] += _stump_impurity_reduction(feats[idx, c], lab, ds.n_classes)
    importances /= n_resamples

    rank = np.empty(ds.n_features, dtype=int)
    rank[np.lexsort((np.arange(ds.n_features), importances))] = np.arange(ds.n_features)
    percentile = (rank + 0.5) / ds.n_features
    buckets = tuple(percentile_cost_class(x, n_classes_of_cost) for x in percentile)
    return CostSchema(buckets, scaling)


def percentile_cost_class(x: float, n_buckets: int) -> int:
    """Equal-width bucket of an importance percentile; boundaries belong to the
    lower bucket, so x = 0.2 with 5 buckets is class 1 and (0.2, 0.4] is 2."""
    if not (0.0 <= x <= 1.0):
        raise ValueError("percentile must be in [0, 1]")
    return max(1, math.ceil(x * n_buckets - 1e-12))
