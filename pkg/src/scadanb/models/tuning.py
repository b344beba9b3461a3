"""Seeded uniform random search over per-family hyperparameter spaces."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidConfig
from .cv import CvConfig, expanding_window_cv


@dataclass(frozen=True)
class IntRange:
    low: int
    high: int  # inclusive

    def sample(self, rng):
        return int(rng.integers(self.low, self.high + 1))


@dataclass(frozen=True)
class FloatRange:
    low: float
    high: float
    log: bool = False

    def sample(self, rng):
        if self.log:
            return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class Choice:
    options: tuple

    def sample(self, rng):
        return self.options[int(rng.integers(len(self.options)))]


SEARCH_SPACES = {
    "knn": {"n_neighbors": IntRange(2, 50), "p": Choice((1, 2))},
    "forest": {"n_trees": IntRange(50, 400), "max_depth": IntRange(4, 20), "min_leaf": IntRange(1, 20)},
    "gbt": {
        "n_trees": IntRange(50, 500),
        "learning_rate": FloatRange(0.01, 0.3, log=True),
        "max_depth": IntRange(3, 10),
        "reg_lambda": FloatRange(0.0, 10.0),
    },
    "mlp": {"learning_rate": FloatRange(1e-4, 1e-2, log=True), "batch_size": Choice((128, 256, 512))},
}


@dataclass(frozen=True)
class TunerConfig:
    n_trials: int = 50
    seed: int = 0
    search_space: dict | None = None  # per-family override of SEARCH_SPACES

    def __post_init__(self):
        if self.n_trials < 1:
            raise InvalidConfig("n_trials must be >= 1")

    def space(self, family: str) -> dict:
        if self.search_space is not None and family in self.search_space:
            space = self.search_space[family]
        else:
            space = SEARCH_SPACES.get(family)
        if not space:
            raise InvalidConfig(f"empty search space for {family!r}")
        return space


def sample_params(space: dict, rng) -> dict:
    """One draw; parameters are sampled in sorted-name order."""
    return {name: space[name].sample(rng) for name in sorted(space)}


@dataclass
class Trial:
    number: int
    params: dict
    score: float
    cached: bool

    def to_dict(self) -> dict:
        return {"number": self.number, "params": self.params, "score": self.score, "cached": self.cached}


@dataclass
class TuneResult:
    family: str
    best_params: dict
    best_score: float
    trials: list = field(default_factory=list)

    @property
    def n_evaluations(self) -> int:
        return sum(not t.cached for t in self.trials)


def tune(family: str, X, y, tuner: TunerConfig | None = None, cv: CvConfig | None = None) -> TuneResult:
    """Random search scored by expanding-window CV; the lowest mean error wins.

    Trial ``i`` draws from ``default_rng([seed, i])`` so trials do not depend
    on execution order. Every evaluation uses the tuner seed for the model,
    which makes repeated parameter sets reuse the first evaluation safely.
    Ties keep the earlier trial.
    """
    tuner = tuner or TunerConfig()
    cv = cv or CvConfig()
    space = tuner.space(family)
    cache: dict[str, float] = {}
    trials = []
    best = None
    for i in range(tuner.n_trials):
        rng = np.random.default_rng([tuner.seed, i])
        params = sample_params(space, rng)
        key = json.dumps(params, sort_keys=True)
        cached = key in cache
        if not cached:
            cache[key] = expanding_window_cv(X, y, family, params, cv, seed=tuner.seed).mean
        score = cache[key]
        trials.append(Trial(i, params, score, cached))
        if best is None or score < best.score:
            best = trials[-1]
    return TuneResult(family, dict(best.params), best.score, trials)
