"""Gradient-boosted regression trees with a second-order split criterion.

Squared-error loss gives g = prediction - y and h = 1 per row. Each round
grows one tree on (g, h) with L2-regularised leaf weights -G / (H + lambda)
and adds it scaled by the learning rate.
"""

from __future__ import annotations

import numpy as np

from ..errors import TooFewSamples
from ..tree import grow_tree


class GbtRegressor:
    def __init__(self, n_trees: int = 100, learning_rate: float = 0.1, max_depth: int | None = 6,
                 reg_lambda: float = 1.0, min_child_weight: float = 1.0, seed: int = 0):
        self.n_trees = int(n_trees)
        self.learning_rate = float(learning_rate)
        self.max_depth = None if max_depth is None else int(max_depth)
        self.reg_lambda = float(reg_lambda)
        self.min_child_weight = float(min_child_weight)
        self.seed = seed

    def fit(self, X, y) -> "GbtRegressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if len(y) < 2:
            raise TooFewSamples("boosting needs at least two rows")
        self.base_score_ = float(np.mean(y))
        pred = np.full(len(y), self.base_score_)
        hess = np.ones(len(y))
        self.trees_ = []
        self.train_loss_ = []
        for _ in range(self.n_trees):
            tree = grow_tree(X, pred - y, hess, max_depth=self.max_depth,
                             min_child_weight=self.min_child_weight, reg_lambda=self.reg_lambda)
            pred = pred + self.learning_rate * tree.predict(X)
            self.trees_.append(tree)
            self.train_loss_.append(float(np.mean(np.abs(y - pred))))
        return self

    def staged_predict(self, X):
        X = np.asarray(X, dtype=float)
        out = np.full(len(X), self.base_score_)
        yield out.copy()
        for t in self.trees_:
            out += self.learning_rate * t.predict(X)
            yield out.copy()

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(len(X), self.base_score_)
        for t in self.trees_:
            out += self.learning_rate * t.predict(X)
        return out
