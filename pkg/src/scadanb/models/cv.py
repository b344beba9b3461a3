"""Expanding-window cross-validation with train-only robust scaling."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidConfig
from ..folds import Fold, expanding_window_folds
from ..stats import mae, mape, robust_apply, robust_fit
from . import make_model

METRICS = {"MAE": mae, "MAPE": mape}


@dataclass(frozen=True)
class CvConfig:
    n_folds: int = 5
    initial_train_size: int | None = None  # default: half of the rows
    metric: str = "MAE"

    def __post_init__(self):
        if self.n_folds < 1:
            raise InvalidConfig("n_folds must be >= 1")
        if self.metric not in METRICS:
            raise InvalidConfig(f"metric must be one of {sorted(METRICS)}")

    def folds(self, n: int) -> list[Fold]:
        t = self.initial_train_size if self.initial_train_size is not None else n // 2
        return expanding_window_folds(n, t, self.n_folds)

    def to_dict(self) -> dict:
        return asdict(self)


class ScaledModel:
    """Robust-scales features on the rows it is fitted on, then delegates."""

    def __init__(self, model):
        self.model = model

    def fit(self, X, y):
        self.scaler_ = robust_fit(X)
        self.model.fit(robust_apply(self.scaler_, X), y)
        return self

    def predict(self, X):
        return self.model.predict(robust_apply(self.scaler_, X))


@dataclass
class CvResult:
    mean: float
    fold_errors: list


def expanding_window_cv(X, y, family: str, params: dict | None = None,
                        cfg: CvConfig | None = None, seed: int = 0) -> CvResult:
    """Mean validation metric over expanding-window folds (rows in time order)."""
    cfg = cfg or CvConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    metric = METRICS[cfg.metric]
    errors = []
    for fold in cfg.folds(len(y)):
        model = ScaledModel(make_model(family, params, seed)).fit(X[fold.train], y[fold.train])
        errors.append(metric(y[fold.val], model.predict(X[fold.val])))
    return CvResult(float(np.mean(errors)), errors)
