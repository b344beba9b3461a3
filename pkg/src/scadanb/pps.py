"""Temporal predictive power score of explanatory variables on GridPower."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import data as D
from .errors import InvalidConfig, TooFewSamples
from .folds import expanding_window_folds
from .tree import RegressionTree

# default variables scored for the combined indicator (see README)
DEFAULT_PPS_VARIABLES = (*D.BLADE_LOADS, D.WIND_SPEED)


@dataclass(frozen=True)
class PpsConfig:
    n_folds: int = 4
    min_samples_per_quarter: int = 200
    tree_max_depth: int | None = 8
    tree_min_leaf: int = 5
    error_metric: str = "MAE"
    variables: tuple = DEFAULT_PPS_VARIABLES

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if self.n_folds < 2:
            raise InvalidConfig("n_folds must be >= 2")
        if self.tree_max_depth is not None and self.tree_max_depth < 1:
            raise InvalidConfig("tree_max_depth must be >= 1")
        if self.error_metric != "MAE":
            raise InvalidConfig("only the MAE error metric is supported")
        unknown = set(self.variables) - set(D.EXPLANATORY)
        if unknown or not self.variables:
            raise InvalidConfig(f"bad PPS variables: {sorted(unknown) or 'empty'}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["variables"] = list(self.variables)
        return out


@dataclass
class PpsResult:
    quarter: D.QuarterKey
    n_samples: int
    sufficient: bool
    per_variable: dict = field(default_factory=dict)
    normalized_error: dict = field(default_factory=dict)

    @property
    def combined_avg(self) -> float:
        if not self.per_variable:
            return math.nan
        return float(np.mean(list(self.per_variable.values())))


def pps_folds(n: int, cfg: PpsConfig):
    return expanding_window_folds(n, n // (cfg.n_folds + 1), cfg.n_folds)


def normalized_error(e_column, t_column, cfg: PpsConfig | None = None) -> float:
    """Mean over temporal folds of MAE(tree) / MAE(median of train targets)."""
    cfg = cfg or PpsConfig()
    x = np.asarray(e_column, dtype=float)
    y = np.asarray(t_column, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = len(y)
    if len(x) != n:
        raise ValueError("columns differ in length")
    if n < max(cfg.min_samples_per_quarter, cfg.n_folds + 1):
        raise TooFewSamples(f"PPS needs >= {cfg.min_samples_per_quarter} rows, got {n}")
    ratios = []
    for fold in pps_folds(n, cfg):
        tree = RegressionTree(cfg.tree_max_depth, cfg.tree_min_leaf).fit(x[fold.train], y[fold.train])
        yv = y[fold.val]
        mae_model = float(np.mean(np.abs(yv - tree.predict(x[fold.val]))))
        mae_naive = float(np.mean(np.abs(yv - np.median(y[fold.train]))))
        if mae_naive == 0.0:
            ratios.append(0.0 if mae_model == 0.0 else math.inf)
        else:
            ratios.append(mae_model / mae_naive)
    return float(np.mean(ratios))


def pps_single(e_column, t_column, cfg: PpsConfig | None = None) -> float:
    """PPS = max(0, 1 - normalized error), always in [0, 1]."""
    eps = normalized_error(e_column, t_column, cfg)
    return max(0.0, 1.0 - eps)


def pps_rows(frame: D.ScadaFrame, cfg: PpsConfig | None = None) -> tuple[dict, dict]:
    """PPS and normalized error of each configured variable on GridPower."""
    cfg = cfg or PpsConfig()
    y = frame.column(D.GRID_POWER)
    scores, errs = {}, {}
    for var in cfg.variables:
        eps = normalized_error(frame.column(var), y, cfg)
        errs[var] = eps
        scores[var] = max(0.0, 1.0 - eps)
    return scores, errs


def combined_pps(frame: D.ScadaFrame, cfg: PpsConfig | None = None) -> float:
    scores, _ = pps_rows(frame, cfg)
    return float(np.mean(list(scores.values())))


def pps_quarterly(frame: D.ScadaFrame, variables=None, cfg: PpsConfig | None = None) -> list[PpsResult]:
    """One result per calendar quarter; small quarters are marked insufficient."""
    cfg = cfg or PpsConfig()
    if variables is not None:
        cfg = PpsConfig(**{**cfg.to_dict(), "variables": tuple(variables)})
    out = []
    if len(frame) == 0:
        return out
    for key, rows in D.quarter_index(frame).items():
        part = frame.subset(rows)
        if len(part) < cfg.min_samples_per_quarter:
            out.append(PpsResult(key, len(part), False))
            continue
        scores, errs = pps_rows(part, cfg)
        out.append(PpsResult(key, len(part), True, scores, errs))
    return out


PPS_CSV_HEADER = ("turbine_id", "year", "quarter", "variable", "pps", "combined_avg")


def pps_table(turbine_id: int, series: list[PpsResult]) -> list[tuple]:
    """Long-format rows; insufficient quarters get one row with empty values."""
    rows = []
    for r in series:
        if not r.sufficient:
            rows.append((turbine_id, r.quarter.year, r.quarter.quarter, "", "", ""))
            continue
        for var, v in r.per_variable.items():
            rows.append((turbine_id, r.quarter.year, r.quarter.quarter, var, v, r.combined_avg))
    return rows
