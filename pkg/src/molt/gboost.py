"""Squared-loss gradient boosting over depth-limited CART regression trees."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import check_features, check_is_fitted, check_targets

LEAF = -1
GAIN_TIE_RTOL = 1e-12


@dataclass
class RegressionTree:
    """Flat node arrays; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: int

    @property
    def n_nodes(self):
        return len(self.feature)

    def depth(self):
        def walk(i):
            if self.feature[i] == LEAF:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def apply(self, X):
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] != LEAF
        while np.any(active):
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] != LEAF
        return node

    def predict(self, X):
        return self.value[self.apply(X)]


def best_split(X, y, min_leaf=1):
    """Best ``(feature, threshold, gain)`` by variance reduction, or None.

    Thresholds are midpoints between consecutive distinct sorted values. Near
    ties (relative 1e-12) go to the lowest feature index, then the lowest
    threshold.
    """
    n, d = X.shape
    if n < 2 * min_leaf or n < 2:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    csum = np.cumsum(ys, axis=0)[:-1]
    total = y.sum()
    n_left = np.arange(1, n)[:, None].astype(np.float64)
    n_right = n - n_left
    gain = csum**2 / n_left + (total - csum) ** 2 / n_right - total**2 / n
    valid = xs[:-1] < xs[1:]
    valid[: min_leaf - 1] = False
    valid[n - min_leaf:] = False
    if not np.any(valid):
        return None
    gain = np.where(valid, gain, -np.inf)
    best = gain.max()
    if not best > 0:
        return None
    parent_sse = float(((y - y.mean()) ** 2).sum())
    tol = GAIN_TIE_RTOL * max(parent_sse, np.finfo(float).tiny)
    # feature-major scan: lowest feature, then lowest threshold
    pos, feat = np.nonzero(gain >= best - tol)
    first = np.lexsort((pos, feat))[0]
    i, j = pos[first], feat[first]
    lo, hi = xs[i, j], xs[i + 1, j]
    thr = 0.5 * (lo + hi)
    if thr >= hi:
        thr = lo
    return int(j), float(thr), float(gain[i, j])


def fit_tree(X, residuals, max_depth=4, min_leaf=1) -> RegressionTree:
    X = np.asarray(X, dtype=np.float64)
    r = np.asarray(residuals, dtype=np.float64)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for arr, v in ((feature, LEAF), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0)):
            arr.append(v)
        return len(feature) - 1

    def grow(idx, depth):
        node = new_node()
        yi = r[idx]
        value[node] = float(yi.mean())
        if depth >= max_depth or len(idx) < 2 * min_leaf or np.all(yi == yi[0]):
            return node
        split = best_split(X[idx], yi, min_leaf)
        if split is None:
            return node
        j, thr, _ = split
        mask = X[idx, j] <= thr
        feature[node], threshold[node] = j, thr
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    if len(r) < 1:
        raise ValueError("fit_tree needs at least one sample")
    grow(np.arange(len(r)), 0)
    return RegressionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        int(max_depth),
    )


@dataclass
class GboostModel:
    base_value: float
    learning_rate: float
    trees: list = field(default_factory=list)
    n_features: int = 0
    train_mse: list = field(default_factory=list)


def gboost_fit(X, y, n_estimators=295, learning_rate=0.059, max_depth=4, min_leaf=1) -> GboostModel:
    X = check_features(X)
    y = check_targets(y, len(X))
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    if not 0 < learning_rate <= 1:
        raise ValueError(f"learning_rate must be in (0, 1], got {learning_rate}")
    model = GboostModel(float(y.mean()), float(learning_rate), [], X.shape[1])
    pred = np.full(len(y), model.base_value)
    model.train_mse.append(float(np.mean((y - pred) ** 2)))
    for _ in range(n_estimators):
        tree = fit_tree(X, y - pred, max_depth, min_leaf)
        pred = pred + learning_rate * tree.predict(X)
        model.trees.append(tree)
        model.train_mse.append(float(np.mean((y - pred) ** 2)))
    return model


def gboost_predict(model: GboostModel, X_query):
    X = check_features(X_query, model.n_features or None)
    out = np.full(len(X), model.base_value)
    for tree in model.trees:
        out += model.learning_rate * tree.predict(X)
    return out


class TreeBoostRegressor(RegressorMixin, BaseEstimator):
    def __init__(self, n_estimators=295, learning_rate=0.059, max_depth=4, min_leaf=1):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y):
        self.model_ = gboost_fit(X, y, self.n_estimators, self.learning_rate, self.max_depth, self.min_leaf)
        self.n_features_in_ = self.model_.n_features
        self.train_score_ = np.array(self.model_.train_mse)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return gboost_predict(self.model_, X)

    def staged_predict(self, X):
        check_is_fitted(self, "model_")
        X = check_features(X, self.n_features_in_)
        out = np.full(len(X), self.model_.base_value)
        for tree in self.model_.trees:
            out = out + self.model_.learning_rate * tree.predict(X)
            yield out
