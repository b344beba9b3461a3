"""Bagged regression trees (every split sees every feature)."""

from __future__ import annotations

import numpy as np

from ..errors import TooFewSamples
from ..tree import RegressionTree


class ForestRegressor:
    def __init__(self, n_trees: int = 100, max_depth: int | None = None, min_leaf: int = 1,
                 bootstrap: bool = True, seed: int = 0):
        self.n_trees = int(n_trees)
        self.max_depth = None if max_depth is None else int(max_depth)
        self.min_leaf = int(min_leaf)
        self.bootstrap = bool(bootstrap)
        self.seed = seed

    def fit(self, X, y) -> "ForestRegressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n = len(y)
        if n < 2:
            raise TooFewSamples("forest needs at least two rows")
        rng = np.random.default_rng(self.seed)
        self.trees_ = []
        for _ in range(self.n_trees):
            rows = rng.integers(0, n, n) if self.bootstrap else np.arange(n)
            self.trees_.append(RegressionTree(self.max_depth, self.min_leaf).fit(X[rows], y[rows]))
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.zeros(len(X))
        for t in self.trees_:
            out += t.predict(X)
        return out / max(len(self.trees_), 1)
