"""
Random Forest Service
Binary random forest over Gini impurity: bootstrap rows per tree, sqrt(F)
candidate features per node, majority vote with ties going to class 0.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import EvaluationError
from .statistics import prf_weighted

logger = logging.getLogger(__name__)

LEAF = -1


class RFHyper(NamedTuple):
    n_estimators: int
    max_depth: Optional[int] = None  # None = grow until pure
    min_samples_split: int = 2
    min_samples_leaf: int = 1


@dataclass
class DecisionTree:
    """Array-backed binary tree. Row i of `counts` holds the class-0/class-1 training counts of node i."""
    feature: List[int] = field(default_factory=list)
    threshold: List[float] = field(default_factory=list)
    left: List[int] = field(default_factory=list)
    right: List[int] = field(default_factory=list)
    counts: List[Tuple[int, int]] = field(default_factory=list)
    node_depth: List[int] = field(default_factory=list)

    def _add(self, counts: Tuple[int, int], depth: int) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.counts.append(counts)
        self.node_depth.append(depth)
        return len(self.feature) - 1

    @property
    def depth(self) -> int:
        return max(self.node_depth) if self.node_depth else 0

    def leaves(self) -> List[int]:
        return [i for i, f in enumerate(self.feature) if f == LEAF]

    def predict(self, X: np.ndarray) -> np.ndarray:
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        counts = np.asarray(self.counts)

        node = np.zeros(len(X), dtype=np.int64)
        active = feature[node] != LEAF
        while active.any():
            rows = np.nonzero(active)[0]
            f = feature[node[rows]]
            go_left = X[rows, f] <= threshold[node[rows]]
            node[rows] = np.where(go_left, left[node[rows]], right[node[rows]])
            active = feature[node] != LEAF
        leaf_counts = counts[node]
        return (leaf_counts[:, 1] > leaf_counts[:, 0]).astype(np.int64)


def _gini_best_split(
    x: np.ndarray, y: np.ndarray, min_leaf: int
) -> Optional[Tuple[float, float]]:
    """Lowest weighted Gini impurity split on one feature: (impurity, threshold)."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    n_left = np.arange(1, n)
    ones_left = np.cumsum(ys)[:-1]
    ones_total = ys.sum()

    valid = xs[:-1] < xs[1:]
    valid &= (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None

    n_right = n - n_left
    p_left = ones_left / n_left
    p_right = (ones_total - ones_left) / n_right
    gini_left = 2.0 * p_left * (1.0 - p_left)
    gini_right = 2.0 * p_right * (1.0 - p_right)
    impurity = (n_left * gini_left + n_right * gini_right) / n
    impurity = np.where(valid, impurity, np.inf)

    i = int(np.argmin(impurity))
    threshold = (xs[i] + xs[i + 1]) / 2.0
    if not xs[i] <= threshold < xs[i + 1]:
        threshold = xs[i]
    return float(impurity[i]), float(threshold)


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    hyper: RFHyper,
    rng: np.random.Generator,
    max_features: Optional[int] = None,
) -> DecisionTree:
    n_features = X.shape[1]
    max_features = max_features or max(1, int(math.sqrt(n_features)))
    tree = DecisionTree()

    def grow(idx: np.ndarray, depth: int) -> int:
        ys = y[idx]
        ones = int(ys.sum())
        node = tree._add((len(idx) - ones, ones), depth)
        if (
            ones == 0
            or ones == len(idx)
            or len(idx) < hyper.min_samples_split
            or (hyper.max_depth is not None and depth >= hyper.max_depth)
        ):
            return node

        best: Optional[Tuple[float, int, float]] = None
        # keep drawing features past max_features until one yields a valid split
        for visited, f in enumerate(rng.permutation(n_features), start=1):
            found = _gini_best_split(X[idx, f], ys, hyper.min_samples_leaf)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], int(f), found[1])
            if visited >= max_features and best is not None:
                break
        if best is None:
            return node

        _, f, threshold = best
        mask = X[idx, f] <= threshold
        tree.feature[node] = f
        tree.threshold[node] = threshold
        tree.left[node] = grow(idx[mask], depth + 1)
        tree.right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return tree


@dataclass
class RandomForestModel:
    trees: List[DecisionTree]
    hyper: RFHyper
    constant: Optional[int] = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.constant is not None:
            return np.full(len(X), self.constant, dtype=np.int64)
        votes = np.zeros(len(X), dtype=np.int64)
        for tree in self.trees:
            votes += tree.predict(X)
        # strict majority for class 1, ties to 0
        return (2 * votes > len(self.trees)).astype(np.int64)


def _check_xy(features, labels) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise EvaluationError(f"features {X.shape} do not match labels {y.shape}")
    if len(y) == 0:
        raise EvaluationError("cannot fit a random forest on zero samples")
    if not np.isin(y, (0, 1)).all():
        raise EvaluationError("labels must be 0 or 1")
    return X, y


def rf_fit(features, labels, hyper: RFHyper, rng: np.random.Generator) -> RandomForestModel:
    X, y = _check_xy(features, labels)
    classes = np.unique(y)
    if len(classes) < 2:
        logger.warning(f"training data has a single class ({int(classes[0])}); using a constant classifier")
        return RandomForestModel(trees=[], hyper=hyper, constant=int(classes[0]))

    n = len(y)
    trees = []
    for _ in range(hyper.n_estimators):
        sample = rng.integers(0, n, size=n)
        trees.append(fit_tree(X[sample], y[sample], hyper, rng))
    return RandomForestModel(trees=trees, hyper=hyper)


def rf_predict(model: RandomForestModel, features) -> np.ndarray:
    return model.predict(features)


def select_hyperparameters(
    features,
    labels,
    grid: Sequence[Tuple[int, Optional[int]]],
    rng: np.random.Generator,
    validation_fraction: float = 0.2,
    average: str = "positive",
) -> RFHyper:
    """
    Pick the grid entry with the best weighted F on an inner train/validation
    split of the training fold. Ties keep the earlier grid entry.
    """
    X, y = _check_xy(features, labels)
    grid = list(grid)
    if len(grid) == 1:
        return RFHyper(*grid[0])

    n = len(y)
    n_val = min(max(1, round(validation_fraction * n)), n - 1) if n > 1 else 0
    perm = rng.permutation(n)
    val, train = perm[:n_val], perm[n_val:]
    if n_val == 0 or len(np.unique(y[train])) < 2:
        logger.debug("inner split too small for grid selection; using the first grid entry")
        return RFHyper(*grid[0])

    best_hyper, best_f = RFHyper(*grid[0]), -1.0
    for n_estimators, max_depth in grid:
        hyper = RFHyper(n_estimators, max_depth)
        model = rf_fit(X[train], y[train], hyper, rng)
        _, _, f = prf_weighted(model.predict(X[val]), y[val], average=average)
        if f > best_f:
            best_hyper, best_f = hyper, f
    logger.debug(f"selected {best_hyper.n_estimators} trees, max_depth={best_hyper.max_depth} (inner F={best_f:.3f})")
    return best_hyper
