"""Greedy variance-reduction regression trees and a bagged forest.

A single shared growing routine underlies both estimators so that a
one-tree forest with bootstrap disabled and all features in play is
exactly the single tree.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .base import as_matrix, as_target, check_columns, check_fitted, rng_from_seed


class Tree(NamedTuple):
    """Parallel node arrays; feature < 0 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return self.feature.size


def _node_sse(y: np.ndarray) -> float:
    if y.size == 0:
        return 0.0
    d = y - y.mean()
    return float(d @ d)


def _best_split(X, y, rows, feat_idx, min_leaf):
    """Exhaustive search over midpoints; returns (gain, feature, threshold).

    Gain is the SSE reduction.  Ties resolve to the lowest feature index,
    then the lowest threshold, keeping growth deterministic.
    """
    y_node = y[rows]
    n = rows.size
    parent_sse = _node_sse(y_node)
    best = (0.0, -1, 0.0)
    if n < 2 * min_leaf:
        return best
    counts = np.arange(min_leaf, n - min_leaf + 1, dtype=float)  # left sizes
    sel = np.arange(min_leaf - 1, n - min_leaf)  # cumulative index per count
    for j in feat_idx:
        xj = X[rows, j]
        order = np.argsort(xj, kind="stable")
        xs, ys = xj[order], y_node[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total, total_sq = csum[-1], csq[-1]
        lsum, lsq = csum[sel], csq[sel]
        left_sse = lsq - lsum**2 / counts
        right_sse = (total_sq - lsq) - (total - lsum) ** 2 / (n - counts)
        gain = parent_sse - left_sse - right_sse
        boundary = xs[sel] < xs[sel + 1]  # split only between distinct values
        gain = np.where(boundary, gain, -np.inf)
        k = int(np.argmax(gain))  # first max wins: lowest threshold on ties
        if gain[k] > best[0] + 1e-12:
            threshold = 0.5 * (xs[sel[k]] + xs[sel[k] + 1])
            best = (float(gain[k]), j, threshold)
    return best


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    *,
    min_split: int,
    min_leaf: int,
    cp: float,
    max_depth: int,
    mtry: int | None = None,
    rng: np.random.Generator | None = None,
):
    """Grow one tree; returns parallel node arrays.

    cp is the complexity threshold relative to the root SSE: a split must
    reduce SSE by at least cp * root_sse.  mtry, when set, samples that
    many candidate features without replacement at every node.
    """
    p = X.shape[1]
    root_sse = _node_sse(y[rows])
    min_gain = cp * root_sse if np.isfinite(cp) else np.inf
    feature, threshold, left, right, value = [], [], [], [], []

    def add_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def build(node_rows, depth):
        node = add_node()
        y_node = y[node_rows]
        value[node] = float(y_node.mean())
        if (
            depth >= max_depth
            or node_rows.size < min_split
            or np.ptp(y_node) == 0.0
            or not np.isfinite(min_gain)
        ):
            return node
        if mtry is not None and mtry < p:
            feats = np.sort(rng.choice(p, size=mtry, replace=False))
        else:
            feats = np.arange(p)
        gain, j, thr = _best_split(X, y, node_rows, feats, min_leaf)
        if j < 0 or gain < min_gain or gain <= 0.0:
            return node
        mask = X[node_rows, j] <= thr
        feature[node] = j
        threshold[node] = thr
        left[node] = build(node_rows[mask], depth + 1)
        right[node] = build(node_rows[~mask], depth + 1)
        return node

    build(np.asarray(rows, dtype=np.intp), 0)
    return Tree(
        np.asarray(feature, dtype=np.intp),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.intp),
        np.asarray(right, dtype=np.intp),
        np.asarray(value, dtype=float),
    )


def predict_tree(tree: Tree, X: np.ndarray) -> np.ndarray:
    feature, threshold, left, right, value = tree
    node = np.zeros(X.shape[0], dtype=np.intp)
    while True:
        internal = feature[node] >= 0
        if not internal.any():
            break
        idx = np.flatnonzero(internal)
        f = feature[node[idx]]
        go_left = X[idx, f] <= threshold[node[idx]]
        node[idx] = np.where(go_left, left[node[idx]], right[node[idx]])
    return value[node]


class CartRegressor(BaseEstimator, RegressorMixin):
    """Single greedy regression tree with an rpart-style cp threshold."""

    def __init__(
        self,
        cp: float = 0.01,
        min_split: int = 10,
        min_leaf: int = 5,
        max_depth: int = 30,
    ):
        self.cp = cp
        self.min_split = min_split
        self.min_leaf = min_leaf
        self.max_depth = max_depth

    def fit(self, X, y):
        if self.cp < 0:
            raise ValueError(f"cp must be >= 0, got {self.cp}")
        X = as_matrix(X)
        y = as_target(y, X.shape[0])
        self.tree_ = grow_tree(
            X,
            y,
            np.arange(X.shape[0]),
            min_split=max(self.min_split, 2),
            min_leaf=max(self.min_leaf, 1),
            cp=self.cp,
            max_depth=self.max_depth,
        )
        self.n_features_in_ = X.shape[1]
        self.y_range_ = (float(y.min()), float(y.max()))
        return self

    def predict(self, X):
        check_fitted(self, "tree_")
        X = as_matrix(X)
        check_columns(X.shape[1], self.n_features_in_)
        return predict_tree(self.tree_, X)


class ForestRegressor(BaseEstimator, RegressorMixin):
    """Bagged variance-reduction trees with per-node feature subsampling.

    Trees grow unpruned (cp=0) down to `min_node_size` leaves over iid
    bootstrap resamples of the training rows.  `mtry=None` means p/3
    (regression default), floored at 1.
    """

    def __init__(
        self,
        n_trees: int = 200,
        mtry: int | None = None,
        min_node_size: int = 5,
        bootstrap: bool = True,
        max_depth: int = 30,
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_node_size = min_node_size
        self.bootstrap = bootstrap
        self.max_depth = max_depth
        self.seed = seed

    def fit(self, X, y):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        X = as_matrix(X)
        y = as_target(y, X.shape[0])
        n, p = X.shape
        mtry = self.mtry if self.mtry is not None else max(1, p // 3)
        mtry = min(max(int(mtry), 1), p)
        self.mtry_ = mtry
        min_leaf = max(int(self.min_node_size), 1)
        rng = rng_from_seed(self.seed)
        self.trees_ = []
        for _ in range(self.n_trees):
            rows = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            self.trees_.append(
                grow_tree(
                    X,
                    y,
                    rows,
                    min_split=2 * min_leaf,
                    min_leaf=min_leaf,
                    cp=0.0,
                    max_depth=self.max_depth,
                    mtry=mtry if mtry < p else None,
                    rng=rng,
                )
            )
        self.n_features_in_ = p
        self.y_range_ = (float(y.min()), float(y.max()))
        return self

    def predict(self, X):
        check_fitted(self, "trees_")
        X = as_matrix(X)
        check_columns(X.shape[1], self.n_features_in_)
        acc = np.zeros(X.shape[0])
        for tree in self.trees_:
            acc += predict_tree(tree, X)
        return acc / len(self.trees_)
