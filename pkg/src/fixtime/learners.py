"""In-house probabilistic classifiers and classification metrics.

Three learners share the class-probability contract every feature view and
the stacking meta-learner rely on:

* multinomial logistic regression trained by full-batch gradient descent on
  the softmax cross-entropy plus an (l2/2)*||W||^2 penalty, with feature
  standardization fitted from the training data and stored in the model;
* a CART-style decision tree growing greedy binary splits that maximize
  Gini impurity decrease, candidate thresholds being the midpoints between
  consecutive sorted unique feature values (ties resolved toward the lower
  feature index, then the lower threshold);
* a random forest of such trees over bootstrap resamples with ceil(sqrt(p))
  feature candidates per split, predicting the mean of its trees'
  probability vectors.

All training is deterministic given the seed, and every model serializes to
versioned JSON-compatible dicts that round-trip losslessly for prediction.
Routing convention: x[feature] <= threshold goes left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from fixtime.errors import DimensionError, DivergenceError

__all__ = [
    "Dataset",
    "LogRegModel",
    "TreeNode",
    "TreeModel",
    "ForestModel",
    "Metrics",
    "train_logreg",
    "train_tree",
    "train_forest",
    "predict_proba",
    "predict_proba_batch",
    "logreg_loss_and_grad",
    "metrics",
    "model_to_dict",
    "model_from_dict",
]

SERIALIZATION_VERSION = 1


@dataclass
class Dataset:
    """Feature matrix with integer class labels in [0, n_classes)."""

    X: np.ndarray
    y: np.ndarray
    n_classes: int
    class_names: Sequence[str] | None = None

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise DimensionError("X must be (n, p) with one label per row")
        if self.X.shape[0] < 1:
            raise ValueError("dataset is empty")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("X contains non-finite values")
        if self.y.min(initial=0) < 0 or (self.y.size and self.y.max() >= self.n_classes):
            raise ValueError("labels out of range")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def logreg_loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy + (l2/2)*||W||^2 and its analytic gradient.

    The bias is not penalized. Computed in log-sum-exp form so the loss is
    finite until the parameters themselves overflow.
    """
    n = X.shape[0]
    logits = X @ weights.T + bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
    loss = float((lse - logits[np.arange(n), y]).mean() + 0.5 * l2 * np.sum(weights**2))
    probs = np.exp(logits - lse[:, None])
    probs[np.arange(n), y] -= 1.0
    grad_w = probs.T @ X / n + l2 * weights
    grad_b = probs.mean(axis=0)
    return loss, grad_w, grad_b


@dataclass
class LogRegModel:
    """Fitted multinomial logistic regression with stored standardization."""

    weights: np.ndarray  # (C, p)
    bias: np.ndarray  # (C,)
    l2: float
    mu: np.ndarray
    sigma: np.ndarray
    training_trace: list[float] = field(default_factory=list)
    seed: int = 0

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def predict_proba_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionError(f"expected {self.n_features} features, got {X.shape[1]}")
        standardized = (X - self.mu) / self.sigma
        return _softmax(standardized @ self.weights.T + self.bias)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.predict_proba_batch(np.asarray(x, dtype=np.float64)[None, :])[0]

    def to_dict(self) -> dict:
        return {
            "kind": "logreg",
            "version": SERIALIZATION_VERSION,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "l2": self.l2,
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "training_trace": list(self.training_trace),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> LogRegModel:
        return cls(
            weights=np.asarray(data["weights"], dtype=np.float64),
            bias=np.asarray(data["bias"], dtype=np.float64),
            l2=float(data["l2"]),
            mu=np.asarray(data["mu"], dtype=np.float64),
            sigma=np.asarray(data["sigma"], dtype=np.float64),
            training_trace=[float(v) for v in data["training_trace"]],
            seed=int(data["seed"]),
        )


def train_logreg(
    data: Dataset,
    l2: float = 1e-3,
    lr: float = 0.1,
    max_epochs: int = 5000,
    tol: float = 1e-7,
    seed: int = 0,
) -> LogRegModel:
    """Full-batch gradient descent from zero-initialized parameters.

    Stops when |loss(e) - loss(e-1)| < tol or at max_epochs. The seed is
    recorded for provenance; with zero init and full batches it does not
    influence the result. Raises DivergenceError on a non-finite loss.
    """
    if data.n < data.n_classes:
        raise ValueError(f"need at least {data.n_classes} samples, got {data.n}")
    if data.n_classes < 2:
        raise ValueError("need at least 2 classes")
    mu = data.X.mean(axis=0)
    sigma = data.X.std(axis=0)
    sigma = np.where(sigma == 0.0, 1.0, sigma)
    standardized = (data.X - mu) / sigma

    weights = np.zeros((data.n_classes, data.p), dtype=np.float64)
    bias = np.zeros(data.n_classes, dtype=np.float64)
    trace: list[float] = []
    for epoch in range(max_epochs):
        loss, grad_w, grad_b = logreg_loss_and_grad(weights, bias, standardized, data.y, l2)
        if not math.isfinite(loss):
            raise DivergenceError(epoch)
        trace.append(loss)
        if epoch > 0 and abs(trace[-2] - trace[-1]) < tol:
            break
        weights -= lr * grad_w
        bias -= lr * grad_b
    return LogRegModel(
        weights=weights, bias=bias, l2=l2, mu=mu, sigma=sigma, training_trace=trace, seed=seed
    )


# ---------------------------------------------------------------------------
# Decision tree
# ---------------------------------------------------------------------------


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (probs/count)."""

    feature: int | None = None
    threshold: float | None = None
    left: TreeNode | None = None
    right: TreeNode | None = None
    probs: np.ndarray | None = None
    count: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.probs is not None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"probs": self.probs.tolist(), "count": self.count}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> TreeNode:
        if "probs" in data:
            return cls(probs=np.asarray(data["probs"], dtype=np.float64), count=int(data["count"]))
        return cls(
            feature=int(data["feature"]),
            threshold=float(data["threshold"]),
            left=cls.from_dict(data["left"]),
            right=cls.from_dict(data["right"]),
        )


def _gini(counts: np.ndarray, total: int) -> float:
    fractions = counts / total
    return float(1.0 - np.sum(fractions * fractions))


def best_split(
    X: np.ndarray,
    y_onehot: np.ndarray,
    indices: np.ndarray,
    feature_ids: np.ndarray,
    min_samples_leaf: int,
) -> tuple[float, int, float] | None:
    """Best (gini_decrease, feature, midpoint threshold) over the candidates.

    Decrease is measured relative to this node's impurity. Returns None for
    pure nodes or when no split leaves min_samples_leaf on both sides with
    positive decrease.
    """
    n = indices.shape[0]
    node_counts = y_onehot[indices].sum(axis=0)
    node_gini = _gini(node_counts, n)
    if node_gini == 0.0:
        return None

    best: tuple[float, int, float] | None = None
    for feature in feature_ids:
        values = X[indices, feature]
        order = np.argsort(values, kind="stable")
        sorted_vals = values[order]
        cum = np.cumsum(y_onehot[indices][order], axis=0)
        cut_pos = np.nonzero(sorted_vals[:-1] < sorted_vals[1:])[0]
        left_sizes = cut_pos + 1
        valid = (left_sizes >= min_samples_leaf) & (n - left_sizes >= min_samples_leaf)
        cut_pos, left_sizes = cut_pos[valid], left_sizes[valid]
        if cut_pos.size == 0:
            continue
        left_counts = cum[cut_pos]
        right_counts = node_counts - left_counts
        right_sizes = n - left_sizes
        left_frac = left_counts / left_sizes[:, None]
        right_frac = right_counts / right_sizes[:, None]
        left_gini = 1.0 - np.sum(left_frac * left_frac, axis=1)
        right_gini = 1.0 - np.sum(right_frac * right_frac, axis=1)
        decrease = node_gini - (left_sizes / n) * left_gini - (right_sizes / n) * right_gini
        pick = int(np.argmax(decrease))
        if decrease[pick] <= 0.0:
            continue
        if best is None or decrease[pick] > best[0]:
            threshold = float((sorted_vals[cut_pos[pick]] + sorted_vals[cut_pos[pick] + 1]) / 2.0)
            best = (float(decrease[pick]), int(feature), threshold)
    return best


def _grow(
    X: np.ndarray,
    y_onehot: np.ndarray,
    indices: np.ndarray,
    depth: int,
    max_depth: int,
    min_samples_leaf: int,
    features_per_split: int,
    rng: np.random.Generator | None,
) -> TreeNode:
    counts = y_onehot[indices].sum(axis=0)
    n = indices.shape[0]
    leaf = TreeNode(probs=counts / n, count=int(n))
    if depth >= max_depth or n < 2 * min_samples_leaf:
        return leaf

    p = X.shape[1]
    if rng is not None and features_per_split < p:
        feature_ids = np.sort(rng.choice(p, size=features_per_split, replace=False))
    else:
        feature_ids = np.arange(p)
    split = best_split(X, y_onehot, indices, feature_ids, min_samples_leaf)
    if split is None:
        return leaf
    _, feature, threshold = split
    left_mask = X[indices, feature] <= threshold
    node = TreeNode(feature=feature, threshold=threshold)
    node.left = _grow(
        X, y_onehot, indices[left_mask], depth + 1, max_depth, min_samples_leaf,
        features_per_split, rng,
    )
    node.right = _grow(
        X, y_onehot, indices[~left_mask], depth + 1, max_depth, min_samples_leaf,
        features_per_split, rng,
    )
    return node


@dataclass
class TreeModel:
    root: TreeNode
    n_classes: int
    n_features: int
    max_depth: int
    min_samples_leaf: int

    def predict_proba_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.empty((X.shape[0], self.n_classes), dtype=np.float64)
        self._route(self.root, X, np.arange(X.shape[0]), out)
        return out

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.predict_proba_batch(np.asarray(x, dtype=np.float64)[None, :])[0]

    def _route(self, node: TreeNode, X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
        if node.is_leaf:
            out[idx] = node.probs
            return
        left = X[idx, node.feature] <= node.threshold
        if left.any():
            self._route(node.left, X, idx[left], out)
        if (~left).any():
            self._route(node.right, X, idx[~left], out)

    def to_dict(self) -> dict:
        return {
            "kind": "tree",
            "version": SERIALIZATION_VERSION,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "root": self.root.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> TreeModel:
        return cls(
            root=TreeNode.from_dict(data["root"]),
            n_classes=int(data["n_classes"]),
            n_features=int(data["n_features"]),
            max_depth=int(data["max_depth"]),
            min_samples_leaf=int(data["min_samples_leaf"]),
        )


def train_tree(data: Dataset, max_depth: int = 8, min_samples_leaf: int = 5) -> TreeModel:
    """Greedy Gini tree; degenerate data yields a single-leaf tree."""
    y_onehot = np.eye(data.n_classes, dtype=np.float64)[data.y]
    root = _grow(
        data.X, y_onehot, np.arange(data.n), 0, max_depth, min_samples_leaf,
        features_per_split=data.p, rng=None,
    )
    return TreeModel(
        root=root,
        n_classes=data.n_classes,
        n_features=data.p,
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
    )


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------


@dataclass
class ForestModel:
    trees: list[TreeModel]
    n_classes: int
    n_features: int
    features_per_split: int
    seed: int
    bootstrap: bool

    def predict_proba_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        total = np.zeros((X.shape[0], self.n_classes), dtype=np.float64)
        for tree in self.trees:
            total += tree.predict_proba_batch(X)
        return total / len(self.trees)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.predict_proba_batch(np.asarray(x, dtype=np.float64)[None, :])[0]

    def to_dict(self) -> dict:
        return {
            "kind": "forest",
            "version": SERIALIZATION_VERSION,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "features_per_split": self.features_per_split,
            "seed": self.seed,
            "bootstrap": self.bootstrap,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ForestModel:
        return cls(
            trees=[TreeModel.from_dict(t) for t in data["trees"]],
            n_classes=int(data["n_classes"]),
            n_features=int(data["n_features"]),
            features_per_split=int(data["features_per_split"]),
            seed=int(data["seed"]),
            bootstrap=bool(data["bootstrap"]),
        )


def train_forest(
    data: Dataset,
    n_trees: int = 100,
    max_depth: int = 8,
    min_samples_leaf: int = 5,
    seed: int = 0,
    bootstrap: bool = True,
    features_per_split: int | None = None,
) -> ForestModel:
    """Bootstrap-aggregated Gini trees with per-split feature subsampling.

    features_per_split defaults to ceil(sqrt(p)). Disabling bootstrap and
    passing features_per_split=p reduces a 1-tree forest to train_tree.
    """
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    m = features_per_split if features_per_split is not None else math.isqrt(max(data.p - 1, 0)) + 1
    m = min(max(m, 1), data.p)
    y_onehot = np.eye(data.n_classes, dtype=np.float64)[data.y]
    trees: list[TreeModel] = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        indices = rng.integers(0, data.n, size=data.n) if bootstrap else np.arange(data.n)
        root = _grow(
            data.X, y_onehot, np.asarray(indices), 0, max_depth, min_samples_leaf,
            features_per_split=m, rng=rng,
        )
        trees.append(
            TreeModel(
                root=root, n_classes=data.n_classes, n_features=data.p,
                max_depth=max_depth, min_samples_leaf=min_samples_leaf,
            )
        )
    return ForestModel(
        trees=trees, n_classes=data.n_classes, n_features=data.p,
        features_per_split=m, seed=seed, bootstrap=bootstrap,
    )


Model = LogRegModel | TreeModel | ForestModel


def predict_proba(model: Model, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one sample; entries >= 0 and sum to 1."""
    return model.predict_proba(x)


def predict_proba_batch(model: Model, X: np.ndarray) -> np.ndarray:
    return model.predict_proba_batch(X)


def model_to_dict(model: Model) -> dict:
    return model.to_dict()


def model_from_dict(data: dict) -> Model:
    kinds = {"logreg": LogRegModel, "tree": TreeModel, "forest": ForestModel}
    kind = data.get("kind")
    if kind not in kinds:
        raise ValueError(f"unknown model kind {kind!r}")
    if data.get("version") != SERIALIZATION_VERSION:
        raise ValueError(f"unsupported model version {data.get('version')!r}")
    return kinds[kind].from_dict(data)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass
class Metrics:
    """Standard multi-class classification metrics.

    Macro F1 averages only classes present in the truth or the predictions;
    weighted F1 weights by true-class support. A class scores F1 = 0 when
    precision + recall = 0.
    """

    accuracy: float
    f1_macro: float
    f1_weighted: float
    confusion: np.ndarray  # (C, C) counts, rows = truth
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1_macro": self.f1_macro,
            "f1_weighted": self.f1_weighted,
            "confusion": self.confusion.tolist(),
            "per_class": {
                "precision": self.precision.tolist(),
                "recall": self.recall.tolist(),
                "f1": self.f1.tolist(),
            },
        }


def metrics(y_true: Sequence[int], y_pred: Sequence[int], n_classes: int) -> Metrics:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ValueError("y_true and y_pred must be equal-length and nonempty")
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)

    true_counts = confusion.sum(axis=1)
    pred_counts = confusion.sum(axis=0)
    diag = np.diag(confusion).astype(np.float64)
    precision = np.divide(diag, pred_counts, out=np.zeros(n_classes), where=pred_counts > 0)
    recall = np.divide(diag, true_counts, out=np.zeros(n_classes), where=true_counts > 0)
    pr_sum = precision + recall
    f1 = np.divide(2 * precision * recall, pr_sum, out=np.zeros(n_classes), where=pr_sum > 0)

    present = (true_counts + pred_counts) > 0
    f1_macro = float(f1[present].mean()) if present.any() else 0.0
    f1_weighted = float((f1 * true_counts).sum() / y_true.size)
    return Metrics(
        accuracy=float(diag.sum() / y_true.size),
        f1_macro=f1_macro,
        f1_weighted=f1_weighted,
        confusion=confusion,
        precision=precision,
        recall=recall,
        f1=f1,
    )
