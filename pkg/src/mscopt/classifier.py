"""Regularized multinomial logistic regression on arbitrary feature subsets.

Training is deterministic: weights start at zero and follow full-batch
gradient descent with a backtracking line search (Barzilai-Borwein trial
steps). The L1 variant takes proximal steps, which produce exact zeros in the
coefficients. The intercept is never penalized.

Loss is the summed (not averaged) multinomial cross-entropy plus
(lambda/2)*||w||^2 for L2 or lambda*||w||_1 for L1.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .data import Dataset

__all__ = [
    "Regularization",
    "SubsetClassifier",
    "ClassifierCache",
    "train",
    "predict_proba",
    "cache_get_or_train",
]

SCORE_CLAMP = 30.0  # inference-time guard; shifts probabilities by < 1e-13
GRAD_TOL = 1e-6
MAX_ITER = 20_000


@dataclass(frozen=True)
class Regularization:
    kind: str  # "l2" | "l1"
    strength: float

    def __post_init__(self):
        if self.kind not in ("l2", "l1"):
            raise ValueError(f"unknown regularization kind {self.kind!r}")
        if self.strength < 0:
            raise ValueError("regularization strength must be >= 0")


@dataclass(frozen=True)
class SubsetClassifier:
    """A trained model over a canonical (sorted) feature subset.

    weights has shape (n_classes, len(subset) + 1); column 0 is the intercept.
    """

    feature_subset: tuple[int, ...]
    weights: np.ndarray
    regularization: Regularization
    n_classes: int
    converged: bool
    grad_norm: float

    def to_json_dict(self) -> dict:
        return {
            "subset": list(self.feature_subset),
            "weights": self.weights.tolist(),
            "kind": self.regularization.kind,
            "strength": self.regularization.strength,
            "n_classes": self.n_classes,
            "converged": self.converged,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SubsetClassifier":
        return cls(
            tuple(doc["subset"]),
            np.asarray(doc["weights"], dtype=float),
            Regularization(doc["kind"], doc["strength"]),
            int(doc["n_classes"]),
            bool(doc.get("converged", True)),
            0.0,
        )


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _loss_grad(w, xb, onehot, lam, kind):
    """Summed cross-entropy and its gradient; for L1 only the smooth part."""
    scores = xb @ w.T
    logp = _log_softmax(scores)
    nll = -(onehot * logp).sum()
    grad = (np.exp(logp) - onehot).T @ xb
    if kind == "l2":
        nll += 0.5 * lam * (w[:, 1:] ** 2).sum()
        grad = grad.copy()
        grad[:, 1:] += lam * w[:, 1:]
    return nll, grad


def _soft_threshold(w, amount):
    out = np.sign(w) * np.maximum(np.abs(w) - amount, 0.0)
    out[:, 0] = w[:, 0]  # intercept untouched
    return out


def train(
    train_ds: Dataset,
    subset,
    reg: Regularization,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> SubsetClassifier:
    """Fit a multinomial logistic model restricted to ``subset``.

    Convergence means gradient 2-norm <= tol for L2, or the equivalent
    proximal-step residual for L1. Hitting the iteration cap returns a usable
    model with ``converged=False``.
    """
    subset = tuple(sorted(int(i) for i in set(subset)))
    if not subset:
        raise ValueError("feature subset must be non-empty")
    if max(subset) >= train_ds.n_features or min(subset) < 0:
        raise ValueError("feature index out of range")
    x = train_ds.features[:, subset]
    if np.isnan(x).any():
        raise ValueError("training data contains missing values; impute first")
    n, d = x.shape
    l = train_ds.n_classes
    xb = np.hstack([np.ones((n, 1)), x])
    onehot = np.zeros((n, l))
    onehot[np.arange(n), train_ds.labels] = 1.0
    lam = reg.strength

    w = np.zeros((l, d + 1))
    loss, grad = _loss_grad(w, xb, onehot, lam, reg.kind)
    step = 1.0 / max(n, 1)
    converged = False
    residual = np.inf
    prev_w = prev_grad = None

    for _ in range(max_iter):
        if reg.kind == "l2":
            residual = float(np.linalg.norm(grad))
            if residual <= tol:
                converged = True
                break
            direction = grad
        else:
            # Proximal-gradient residual: distance moved by one unit step.
            moved = _soft_threshold(w - step * grad, step * lam)
            residual = float(np.linalg.norm(w - moved)) / step
            if residual <= tol:
                converged = True
                break
            direction = grad

        # Barzilai-Borwein trial step, then backtrack until sufficient decrease.
        if prev_w is not None:
            s = (w - prev_w).ravel()
            y = (grad - prev_grad).ravel()
            sy = float(s @ y)
            if sy > 1e-18:
                step = float(s @ s) / sy
            step = min(max(step, 1e-12), 1e6)
        accepted = False
        for _ in range(60):
            if reg.kind == "l2":
                w_new = w - step * direction
                loss_new, _ = _loss_grad(w_new, xb, onehot, lam, "l2")
                if loss_new <= loss - 1e-4 * step * float((direction * direction).sum()):
                    accepted = True
                    break
            else:
                w_new = _soft_threshold(w - step * grad, step * lam)
                delta = w_new - w
                loss_new, _ = _loss_grad(w_new, xb, onehot, 0.0, "l1")
                quad = loss + float((grad * delta).sum()) + float((delta * delta).sum()) / (2 * step)
                if loss_new <= quad + 1e-12 * abs(loss):
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            break  # line search stalled at float precision
        prev_w, prev_grad = w, grad
        w = w_new
        loss, grad = _loss_grad(w, xb, onehot, lam, reg.kind)

    if not np.isfinite(w).all():
        raise ArithmeticError("training produced non-finite weights")
    return SubsetClassifier(subset, w, reg, l, converged, residual)


def training_loss(clf: SubsetClassifier, train_ds: Dataset, include_penalty: bool = True) -> float:
    """Summed cross-entropy of a trained model on its training set."""
    x = train_ds.features[:, clf.feature_subset]
    xb = np.hstack([np.ones((x.shape[0], 1)), x])
    logp = _log_softmax(xb @ clf.weights.T)
    nll = -float(logp[np.arange(x.shape[0]), train_ds.labels].sum())
    if include_penalty:
        lam = clf.regularization.strength
        if clf.regularization.kind == "l2":
            nll += 0.5 * lam * float((clf.weights[:, 1:] ** 2).sum())
        else:
            nll += lam * float(np.abs(clf.weights[:, 1:]).sum())
    return nll


def predict_proba(clf: SubsetClassifier, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one row (returns a vector) or a matrix of rows.

    Rows must provide values for every feature in the subset; raw scores are
    clamped to +/-30 before the softmax.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    rows = x[None, :] if squeeze else x
    sub = rows[:, clf.feature_subset]
    if np.isnan(sub).any():
        raise ValueError("input row is missing a required feature value")
    scores = clf.weights[:, 0] + sub @ clf.weights[:, 1:].T
    np.clip(scores, -SCORE_CLAMP, SCORE_CLAMP, out=scores)
    shifted = np.exp(scores - scores.max(axis=1, keepdims=True))
    probs = shifted / shifted.sum(axis=1, keepdims=True)
    return probs[0] if squeeze else probs


class ClassifierCache:
    """Subset-keyed store of trained models; safe for concurrent readers."""

    def __init__(self):
        self._models: dict = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(subset, reg: Regularization):
        return (tuple(sorted(int(i) for i in set(subset))), reg.kind, reg.strength)

    def __len__(self) -> int:
        return len(self._models)

    def get(self, subset, reg: Regularization):
        return self._models.get(self.key(subset, reg))


def cache_get_or_train(
    cache: ClassifierCache, train_ds: Dataset, subset, reg: Regularization
) -> SubsetClassifier:
    key = cache.key(subset, reg)
    model = cache._models.get(key)
    if model is not None:
        cache.hits += 1
        return model
    model = train(train_ds, subset, reg)
    with cache._lock:
        cache._models[key] = model  # duplicate trains are identical; last insert wins
        cache.misses += 1
    return model
