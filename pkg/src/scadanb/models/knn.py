"""K-nearest-neighbour regression under a Minkowski metric."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..errors import DimensionMismatch, KTooLarge


class KnnRegressor:
    """Average target of the ``n_neighbors`` closest training rows.

    The k-d tree is an exact index, so results equal a brute-force search;
    distance ties are resolved by the index's traversal order.
    """

    def __init__(self, n_neighbors: int = 5, p: int = 2, seed: int = 0):
        self.n_neighbors = int(n_neighbors)
        self.p = int(p)
        self.seed = seed

    def fit(self, X, y) -> "KnnRegressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.n_neighbors < 1:
            raise KTooLarge("n_neighbors must be >= 1")
        if self.n_neighbors > len(X):
            raise KTooLarge(f"K={self.n_neighbors} exceeds {len(X)} training rows")
        self.index_ = cKDTree(X)
        self.y_ = y
        self.n_features_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.n_features_:
            raise DimensionMismatch("query dimension differs from training data")
        _, idx = self.index_.query(X, k=self.n_neighbors, p=self.p)
        idx = np.asarray(idx).reshape(len(X), self.n_neighbors)
        return self.y_[idx].mean(axis=1)
