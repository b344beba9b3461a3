"""Regression model families sharing a ``fit(X, y)`` / ``predict(X)`` contract."""

from __future__ import annotations

from ..errors import InvalidConfig
from .forest import ForestRegressor
from .gbt import GbtRegressor
from .knn import KnnRegressor
from .mlp import MlpRegressor

FAMILIES = {
    "knn": KnnRegressor,
    "forest": ForestRegressor,
    "gbt": GbtRegressor,
    "mlp": MlpRegressor,
}


def make_model(family: str, params: dict | None = None, seed: int = 0):
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise InvalidConfig(f"unknown model family {family!r}") from None
    return cls(**(params or {}), seed=seed)


__all__ = ["FAMILIES", "make_model", "ForestRegressor", "GbtRegressor", "KnnRegressor", "MlpRegressor"]
