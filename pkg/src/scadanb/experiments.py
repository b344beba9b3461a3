"""Drift quantification against a normal-behaviour year.

Experiment 1 trains on the NB year only and scores every later year of the
stable period. Experiment 2 trains on the whole period with ``Year`` as a
feature, then re-predicts the post-NB rows with ``Year`` set to the NB year.

Drift score of a year: ``100 * sum(r / y)`` with ``r = y - prediction``,
divided by the row count when ``normalize`` is on. Relative drift of a
target year subtracts the reference year's score.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import data as D
from .errors import InsufficientData, InvalidConfig
from .models import make_model
from .models.cv import CvConfig, ScaledModel
from .models.tuning import TunerConfig, tune
from .nb_filters import StablePeriod
from .stats import mae, mape

log = logging.getLogger(__name__)

YEAR = "Year"
FEATURE_SETS = {
    "pc": (D.WIND_SPEED, D.AMB_TEMP),
    "all": tuple(D.EXPLANATORY),
}
MIN_TRAIN_ROWS = 50


def feature_columns(feature_set: str) -> tuple:
    try:
        return FEATURE_SETS[feature_set.lower()]
    except KeyError:
        raise InvalidConfig(f"unknown feature set {feature_set!r}") from None


def drift_score(y, yhat, normalize: bool = True) -> float:
    y = np.asarray(y, dtype=float)
    r = y - np.asarray(yhat, dtype=float)
    total = 100.0 * float(np.sum(r / y))
    return total / len(y) if normalize else total


@dataclass
class YearDrift:
    year: int
    n: int
    delta: float
    mae: float
    mape: float
    drift_delta: float = math.nan  # relative to the reference year; NaN for the NB year


@dataclass
class DriftReport:
    turbine_id: int
    family: str
    feature_set: str
    experiment: int
    nb_year: int
    reference_year: int
    normalize: bool
    per_year: list = field(default_factory=list)
    best_params: dict = field(default_factory=dict)
    n_nonpositive_dropped: int = 0
    reference_in_sample_mape: float = math.nan
    trials: list = field(default_factory=list)
    options: dict = field(default_factory=dict)

    def year(self, y: int) -> YearDrift:
        for row in self.per_year:
            if row.year == y:
                return row
        raise KeyError(y)

    @property
    def target_drift(self) -> dict:
        return {r.year: r.drift_delta for r in self.per_year if r.year > self.reference_year}

    def rows(self) -> list[tuple]:
        return [
            (self.turbine_id, self.family, self.feature_set, r.year, r.delta, r.drift_delta, r.mae, r.mape)
            for r in self.per_year
        ]

    def to_dict(self) -> dict:
        return {
            "turbine_id": self.turbine_id,
            "family": self.family,
            "feature_set": self.feature_set,
            "experiment": self.experiment,
            "nb_year": self.nb_year,
            "reference_year": self.reference_year,
            "drift_normalized_by_count": self.normalize,
            "best_params": self.best_params,
            "n_nonpositive_dropped": self.n_nonpositive_dropped,
            "reference_in_sample_mape": self.reference_in_sample_mape,
            "options": self.options,
            "per_year": [vars(r) for r in self.per_year],
        }


DRIFT_CSV_HEADER = ("turbine", "model", "feature_set", "year", "delta", "drift_delta", "mae", "mape")


def _period_rows(frame: D.ScadaFrame, period: StablePeriod):
    years = frame.years
    y = frame.column(D.GRID_POWER)
    in_period = np.isin(years, period.years)
    nonpos = in_period & ~(y > 0)
    return in_period & (y > 0), int(nonpos.sum()), years


def _fit(family, X, y, tuner, cv, params, seed):
    trials = []
    if params is None:
        result = tune(family, X, y, tuner, cv)
        params = result.best_params
        trials = [t.to_dict() for t in result.trials]
    model = ScaledModel(make_model(family, params, seed)).fit(X, y)
    return model, params, trials


def _with_relative(rows: list[YearDrift], reference_year: int) -> list[YearDrift]:
    ref = next(r.delta for r in rows if r.year == reference_year)
    for r in rows:
        if r.year >= reference_year:
            r.drift_delta = r.delta - ref
    return rows


def run_experiment1(frame: D.ScadaFrame, period: StablePeriod, feature_set: str = "pc",
                    family: str = "gbt", tuner: TunerConfig | None = None, cv: CvConfig | None = None,
                    normalize: bool = True, params: dict | None = None, seed: int = 0) -> DriftReport:
    """Train on the NB year, then score every later year of ``period``.

    Only NB-year rows reach tuning, scaling and fitting. Rows with
    non-positive GridPower are dropped because the drift score divides by it.
    Passing ``params`` skips tuning.
    """
    cols = feature_columns(feature_set)
    keep, n_nonpos, years = _period_rows(frame, period)
    X_all = frame.matrix(cols)
    y_all = frame.column(D.GRID_POWER)
    nb = keep & (years == period.nb_year)
    if nb.sum() < MIN_TRAIN_ROWS:
        raise InsufficientData(f"NB year {period.nb_year} has {int(nb.sum())} usable rows")
    model, params, trials = _fit(family, X_all[nb], y_all[nb], tuner, cv, params, seed)

    rows = []
    for year in period.years:
        sel = keep & (years == year)
        if not sel.any():
            raise InsufficientData(f"year {year} has no usable rows")
        yy = y_all[sel]
        pred = model.predict(X_all[sel])
        rows.append(YearDrift(year, int(sel.sum()), drift_score(yy, pred, normalize), mae(yy, pred), mape(yy, pred)))
    report = DriftReport(frame.turbine_id, family, feature_set, 1, period.nb_year, period.reference_year,
                         normalize, _with_relative(rows, period.reference_year), params, n_nonpos,
                         trials=trials)
    report.reference_in_sample_mape = report.year(period.nb_year).mape
    return report


@dataclass
class SensitivityDataset:
    X: np.ndarray  # replicas with the Year column set to the NB year
    y: np.ndarray
    source_rows: np.ndarray  # index into the period rows
    source_year: np.ndarray


def build_sensitivity_dataset(X, y, years, nb_year: int, year_col: int,
                              replication: str = "proportional", seed: int = 0) -> SensitivityDataset:
    """Copies of every post-NB row with only the Year column overwritten.

    ``proportional`` keeps one replica per row. ``equal`` samples the same
    number of rows (the smallest year count) from every post-NB year.
    """
    post = np.flatnonzero(years > nb_year)
    if replication == "equal":
        rng = np.random.default_rng(seed)
        groups = [post[years[post] == yr] for yr in np.unique(years[post])]
        m = min(len(g) for g in groups)
        post = np.sort(np.concatenate([np.sort(rng.choice(g, m, replace=False)) for g in groups]))
    elif replication != "proportional":
        raise InvalidConfig(f"unknown replication rule {replication!r}")
    Xr = X[post].copy()
    Xr[:, year_col] = nb_year
    return SensitivityDataset(Xr, y[post], post, years[post])


def run_experiment2(frame: D.ScadaFrame, period: StablePeriod, feature_set: str = "pc",
                    family: str = "gbt", tuner: TunerConfig | None = None, cv: CvConfig | None = None,
                    normalize: bool = True, params: dict | None = None, seed: int = 0,
                    replication: str = "proportional", residual_mode: str = "actual") -> DriftReport:
    """Year-substitution sensitivity analysis over the whole stable period.

    ``residual_mode='actual'`` compares measured power with the prediction
    under the NB year; ``'prediction'`` compares the prediction under the
    true year with the prediction under the NB year.
    """
    if residual_mode not in ("actual", "prediction"):
        raise InvalidConfig(f"unknown residual mode {residual_mode!r}")
    cols = (*feature_columns(feature_set), YEAR)
    keep, n_nonpos, years_all = _period_rows(frame, period)
    if keep.sum() < MIN_TRAIN_ROWS:
        raise InsufficientData("stable period has too few usable rows")
    rows_idx = np.flatnonzero(keep)
    years = years_all[rows_idx]
    X = np.column_stack([frame.matrix(cols[:-1])[rows_idx], years.astype(float)])
    y = frame.column(D.GRID_POWER)[rows_idx]
    model, params, trials = _fit(family, X, y, tuner, cv, params, seed)

    ds = build_sensitivity_dataset(X, y, years, period.nb_year, len(cols) - 1, replication, seed)
    pred_nb = model.predict(ds.X)
    if residual_mode == "actual":
        target = ds.y
    else:
        target = model.predict(X[ds.source_rows])

    out = []
    nb_sel = years == period.nb_year
    nb_pred = model.predict(X[nb_sel])
    out.append(YearDrift(period.nb_year, int(nb_sel.sum()), drift_score(y[nb_sel], nb_pred, normalize),
                         mae(y[nb_sel], nb_pred), mape(y[nb_sel], nb_pred)))
    for year in period.years[1:]:
        sel = ds.source_year == year
        if not sel.any():
            raise InsufficientData(f"year {year} has no usable rows")
        t, p = target[sel], pred_nb[sel]
        out.append(YearDrift(year, int(sel.sum()), drift_score(t, p, normalize), mae(t, p), mape(t, p)))
    report = DriftReport(frame.turbine_id, family, feature_set, 2, period.nb_year, period.reference_year,
                         normalize, _with_relative(out, period.reference_year), params, n_nonpos,
                         trials=trials, options={"replication": replication, "residual_mode": residual_mode})
    ref = years == period.reference_year
    report.reference_in_sample_mape = mape(y[ref], model.predict(X[ref]))
    return report


DECLINE_THRESHOLD = -0.5
IMPROVE_THRESHOLD = 0.5


def classify_drift(delta: float) -> str:
    if delta < DECLINE_THRESHOLD:
        return "decline"
    if delta > IMPROVE_THRESHOLD:
        return "improve"
    return "no-change"


@dataclass
class FarmSummary:
    per_turbine: dict  # turbine -> (last-target drift, class)
    counts: dict

    def to_dict(self) -> dict:
        return {
            "counts": self.counts,
            "per_turbine": {str(k): {"drift_delta": v[0], "class": v[1]} for k, v in sorted(self.per_turbine.items())},
        }


def summarize(reports) -> FarmSummary:
    """Classify each turbine by the PC-feature drift of its last target year.

    With several model families per turbine the median drift is used.
    """
    by_turbine: dict[int, list[float]] = {}
    for r in reports:
        if r.feature_set.lower() != "pc":
            continue
        targets = r.target_drift
        if not targets:
            continue
        by_turbine.setdefault(r.turbine_id, []).append(targets[max(targets)])
    per = {}
    counts = {"decline": 0, "improve": 0, "no-change": 0}
    for tid in sorted(by_turbine):
        d = float(np.median(by_turbine[tid]))
        c = classify_drift(d)
        per[tid] = (d, c)
        counts[c] += 1
    return FarmSummary(per, counts)
