"""Normal-behaviour filter stages, GMM k-selection and stability analysis.

Stages run in a fixed order:

1. pitch box-plot filter
2. bivariate Mahalanobis filter on (pitch, wind speed) per blade
3. wind-speed box-plot filter within pitch bins
4. sensor voting across the pitch and blade-load triples
5. per-quarter GMM filtering with the number of components chosen by a
   weighted PPS / data-loss objective

followed by the quarterly stability scan that yields stable periods.
Stages only drop rows; scaling used for decisions never leaks into the
returned frames.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from . import data as D
from .errors import EmptyFrame, InvalidConfig, SingularCovariance, TooFewSamples
from .gmm import EmConfig, gmm_boxplot_filter, gmm_fit
from .hard_filters import FilterReport, HardFilterConfig, apply_hard_filters
from .pps import PpsConfig, PpsResult, pps_rows
from .stats import chi2_quantile, mahalanobis_sq, robust_apply, robust_fit, tukey_flags

log = logging.getLogger(__name__)

GMM_FEATURES = (*D.BLADE_LOADS, D.WIND_SPEED)
SENSOR_GROUPS = {"pitch": D.PITCH_ANGLES, "load": D.BLADE_LOADS}
_PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass(frozen=True)
class NbFilterConfig:
    mahalanobis_alpha: float = 0.05
    pitch_bin_width: float = 0.5
    min_bin_size: int = 20
    voting_threshold: float = 1.0
    voting_strict: bool = True
    k_candidates: tuple = (1, 2, 3, 4, 5)
    alpha_weight: float = 0.6
    pps_stability_threshold: float = 0.8
    rolling_std_threshold: float = 0.03
    rolling_window: int = 4
    min_stable_years: int = 3
    latest_period_start_year: int = 2020
    nb_year_choices: tuple | None = (2018, 2019)
    em: EmConfig = field(default_factory=EmConfig)
    pps: PpsConfig = field(default_factory=PpsConfig)

    def __post_init__(self):
        object.__setattr__(self, "k_candidates", tuple(sorted(int(k) for k in self.k_candidates)))
        if self.nb_year_choices is not None:
            object.__setattr__(self, "nb_year_choices", tuple(int(y) for y in self.nb_year_choices))
        if not 0 < self.mahalanobis_alpha < 1:
            raise InvalidConfig("mahalanobis_alpha must lie in (0, 1)")
        if not 0 <= self.alpha_weight <= 1:
            raise InvalidConfig("alpha_weight must lie in [0, 1]")
        positive = ("pitch_bin_width", "voting_threshold", "pps_stability_threshold",
                    "rolling_std_threshold", "rolling_window", "min_stable_years")
        for name in positive:
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be positive")
        if any(k < 1 for k in self.k_candidates):
            raise InvalidConfig("k candidates must be >= 1")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["k_candidates"] = list(self.k_candidates)
        out["nb_year_choices"] = None if self.nb_year_choices is None else list(self.nb_year_choices)
        out["pps"] = self.pps.to_dict()
        return out


def _report(stage, before, keep, **extra) -> FilterReport:
    return FilterReport(stage, total=int(before), kept=int(np.sum(keep)),
                        removed_by_rule={stage: int(before - np.sum(keep))}, params=extra)


# -- stage 1 ---------------------------------------------------------------

def pitch_iqr_flags(frame: D.ScadaFrame) -> np.ndarray:
    flags = np.zeros(len(frame), dtype=bool)
    for col in D.PITCH_ANGLES:
        flags |= tukey_flags(frame.column(col))
    return flags


def pitch_iqr_filter(frame: D.ScadaFrame):
    """Drop rows flagged by the box-plot rule on any pitch column."""
    if len(frame) == 0:
        raise EmptyFrame("pitch filter needs a non-empty frame")
    keep = ~pitch_iqr_flags(frame)
    return frame.subset(keep), _report("pitch_iqr", len(frame), keep)


# -- stage 2 ---------------------------------------------------------------

def mahalanobis_flags(frame: D.ScadaFrame, cfg: NbFilterConfig) -> tuple[np.ndarray, list[str]]:
    crit = chi2_quantile(2, 1.0 - cfg.mahalanobis_alpha)
    ws = frame.column(D.WIND_SPEED)
    flags = np.zeros(len(frame), dtype=bool)
    skipped = []
    for col in D.PITCH_ANGLES:
        P = np.column_stack([frame.column(col), ws])
        mean = P.mean(axis=0)
        cov = np.cov(P.T, bias=True)
        try:
            d2 = mahalanobis_sq(P, mean, cov)
        except SingularCovariance:
            log.warning("singular (%s, WindSpeed) covariance; pairing skipped", col)
            skipped.append(col)
            continue
        flags |= d2 > crit
    return flags, skipped


def mahalanobis_pitch_wind_filter(frame: D.ScadaFrame, cfg: NbFilterConfig | None = None):
    """Keep rows within the chi-square(2) critical distance for every blade."""
    cfg = cfg or NbFilterConfig()
    if len(frame) < 30:
        raise TooFewSamples("Mahalanobis filter needs >= 30 records")
    flags, skipped = mahalanobis_flags(frame, cfg)
    keep = ~flags
    return frame.subset(keep), _report("mahalanobis", len(frame), keep, skipped_pairings=skipped)


# -- stage 3 ---------------------------------------------------------------

def pitch_bins(pitch, width) -> np.ndarray:
    return np.floor(np.asarray(pitch, dtype=float) / width).astype(np.int64)


def hierarchical_wind_flags(frame: D.ScadaFrame, cfg: NbFilterConfig) -> np.ndarray:
    ws = frame.column(D.WIND_SPEED)
    bins = pitch_bins(frame.column(D.PITCH_ANGLES[0]), cfg.pitch_bin_width)
    flags = np.zeros(len(frame), dtype=bool)
    order = np.argsort(bins, kind="stable")
    edges = np.flatnonzero(np.diff(bins[order])) + 1
    for rows in np.split(order, edges):
        if len(rows) >= cfg.min_bin_size:
            flags[rows] = tukey_flags(ws[rows])
    return flags


def hierarchical_wind_iqr_filter(frame: D.ScadaFrame, cfg: NbFilterConfig | None = None):
    """Box-plot rule on wind speed inside each pitch-angle bin of blade A."""
    cfg = cfg or NbFilterConfig()
    if len(frame) == 0:
        return frame, _report("hierarchical_iqr", 0, np.zeros(0, bool))
    keep = ~hierarchical_wind_flags(frame, cfg)
    return frame.subset(keep), _report("hierarchical_iqr", len(frame), keep)


# -- stage 4 ---------------------------------------------------------------

@dataclass
class VoteLedger:
    """Votes per record and sensor; columns follow ``sensors``."""

    times: np.ndarray
    sensors: tuple
    counts: np.ndarray  # N x 6 votes against each sensor
    flagged: np.ndarray  # N bool

    @property
    def votes(self) -> dict:
        r, c = np.nonzero(self.counts)
        return {(int(self.times[i]), self.sensors[j]): int(self.counts[i, j]) for i, j in zip(r, c)}

    @property
    def flagged_intervals(self) -> set:
        return set(int(t) for t in self.times[self.flagged])


def vote_counts(scaled: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Votes against each of three sensors and the number of disagreeing pairs."""
    votes = np.zeros(scaled.shape, dtype=np.int64)
    disagree = np.zeros(len(scaled), dtype=np.int64)
    for i, j in _PAIRS:
        bad = np.abs(scaled[:, i] - scaled[:, j]) > threshold
        votes[:, i] += bad
        votes[:, j] += bad
        disagree += bad
    return votes, disagree


def vote_flags(scaled_groups, threshold: float, strict: bool) -> tuple[np.ndarray, np.ndarray]:
    all_votes = []
    flagged = None
    for scaled in scaled_groups:
        votes, disagree = vote_counts(scaled, threshold)
        if strict:
            f = votes.sum(axis=1) > 0
        else:
            f = (votes.max(axis=1) >= 2) | (disagree >= 2)
        flagged = f if flagged is None else flagged | f
        all_votes.append(votes)
    return np.hstack(all_votes), flagged


def sensor_vote_filter(frame: D.ScadaFrame, cfg: NbFilterConfig | None = None):
    """Cross-check the three blades' pitch and load sensors on robust-scaled values."""
    cfg = cfg or NbFilterConfig()
    groups = []
    sensors = []
    for cols in SENSOR_GROUPS.values():
        M = frame.matrix(cols)
        groups.append(robust_apply(robust_fit(M), M) if len(M) else M)
        sensors.extend(cols)
    if len(frame):
        counts, flagged = vote_flags(groups, cfg.voting_threshold, cfg.voting_strict)
    else:
        counts, flagged = np.zeros((0, 6), dtype=np.int64), np.zeros(0, dtype=bool)
    ledger = VoteLedger(frame.times, tuple(sensors), counts, flagged)
    keep = ~flagged
    rep = _report("voting", len(frame), keep, strict=cfg.voting_strict)
    return frame.subset(keep), ledger, rep


# -- stage 5 ---------------------------------------------------------------

@dataclass
class KSelectionResult:
    quarter: D.QuarterKey
    n_before: int
    per_k: dict = field(default_factory=dict)  # k -> (pps, n_delta, score)
    chosen_k: int = 0
    pps_result: PpsResult | None = None
    skipped: str = ""

    def to_dict(self) -> dict:
        return {
            "quarter": str(self.quarter),
            "n_before": self.n_before,
            "chosen_k": self.chosen_k,
            "per_k": {str(k): list(v) for k, v in self.per_k.items()},
            "skipped": self.skipped,
        }


def selection_score(pps: float, n_delta: float, alpha: float) -> float:
    return alpha * pps - (1.0 - alpha) * n_delta


def choose_k(pps_by_k: dict, n_delta_by_k: dict, alpha: float) -> tuple[int, dict]:
    """Arg-max of the weighted objective; ties go to the smaller k."""
    scores = {k: selection_score(pps_by_k[k], n_delta_by_k[k], alpha) for k in sorted(pps_by_k)}
    best_k, best = None, -math.inf
    for k, s in scores.items():
        if s > best:
            best_k, best = k, s
    return best_k, scores


def gmm_feature_matrix(frame: D.ScadaFrame) -> np.ndarray:
    M = frame.matrix(GMM_FEATURES)
    return robust_apply(robust_fit(M), M)


def select_k_and_filter(quarter_frame: D.ScadaFrame, cfg: NbFilterConfig | None = None, quarter=None):
    """GMM filtering of one quarter with k picked from {0} and the candidates."""
    cfg = cfg or NbFilterConfig()
    if quarter is None:
        quarter = next(iter(D.quarter_index(quarter_frame)))
    n = len(quarter_frame)
    if n < cfg.pps.min_samples_per_quarter:
        raise TooFewSamples(f"quarter {quarter} has {n} rows")
    X = gmm_feature_matrix(quarter_frame)
    scores0, errs0 = pps_rows(quarter_frame, cfg.pps)
    pps_by_k = {0: float(np.mean(list(scores0.values())))}
    nd_by_k = {0: 0.0}
    keeps = {0: np.ones(n, dtype=bool)}
    details = {0: (scores0, errs0)}
    for k in cfg.k_candidates:
        if n < 10 * k:
            continue
        try:
            model = gmm_fit(X, k, cfg.em)
        except (TooFewSamples, ArithmeticError) as exc:
            log.debug("quarter %s k=%d skipped: %s", quarter, k, exc)
            continue
        keep = gmm_boxplot_filter(X, model)
        survivors = quarter_frame.subset(keep)
        if len(survivors) < cfg.pps.min_samples_per_quarter:
            continue
        sc, er = pps_rows(survivors, cfg.pps)
        pps_by_k[k] = float(np.mean(list(sc.values())))
        nd_by_k[k] = 1.0 - keep.sum() / n
        keeps[k] = keep
        details[k] = (sc, er)
    chosen, scores = choose_k(pps_by_k, nd_by_k, cfg.alpha_weight)
    keep = keeps[chosen]
    sc, er = details[chosen]
    res = KSelectionResult(
        quarter, n,
        {k: (pps_by_k[k], nd_by_k[k], scores[k]) for k in scores},
        chosen,
        PpsResult(quarter, int(keep.sum()), True, sc, er),
    )
    return quarter_frame.subset(keep), res


# -- stability -------------------------------------------------------------

@dataclass(frozen=True)
class QuarterStability:
    quarter: D.QuarterKey
    combined_avg: float
    rolling_std: float
    stable: bool


@dataclass(frozen=True)
class StablePeriod:
    turbine_id: int
    years: tuple

    @property
    def nb_year(self) -> int:
        return self.years[0]

    @property
    def reference_year(self) -> int:
        return self.years[1]

    @property
    def target_years(self) -> tuple:
        return tuple(self.years[2:])

    def to_dict(self) -> dict:
        return {
            "turbine_id": self.turbine_id,
            "years": list(self.years),
            "nb_year": self.nb_year,
            "reference_year": self.reference_year,
            "target_years": list(self.target_years),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StablePeriod":
        return cls(int(d["turbine_id"]), tuple(int(y) for y in d["years"]))


def quarter_stability(series, cfg: NbFilterConfig | None = None) -> list[QuarterStability]:
    """Level and rolling-spread test per quarter.

    The rolling population standard deviation runs over the trailing
    ``rolling_window`` quarters that have a PPS value; shorter histories at
    the start of the series use what is available.
    """
    cfg = cfg or NbFilterConfig()
    series = sorted(series, key=lambda r: r.quarter)
    history = []
    out = []
    for r in series:
        if not r.sufficient or math.isnan(r.combined_avg):
            out.append(QuarterStability(r.quarter, math.nan, math.nan, False))
            continue
        history.append(r.combined_avg)
        window = history[-cfg.rolling_window:]
        sd = float(np.std(window))
        stable = r.combined_avg > cfg.pps_stability_threshold and sd < cfg.rolling_std_threshold
        out.append(QuarterStability(r.quarter, r.combined_avg, sd, stable))
    return out


def stable_years(stability: list[QuarterStability]) -> list[int]:
    by_year: dict[int, list[bool]] = {}
    for q in stability:
        by_year.setdefault(q.quarter.year, []).append(q.stable)
    return sorted(y for y, flags in by_year.items() if len(flags) == 4 and all(flags))


def year_runs(years) -> list[list[int]]:
    runs = []
    for y in sorted(years):
        if runs and y == runs[-1][-1] + 1:
            runs[-1].append(y)
        else:
            runs.append([y])
    return runs


def periods_from_years(turbine_id: int, years, cfg: NbFilterConfig) -> list[StablePeriod]:
    out = []
    for run in year_runs(years):
        if cfg.nb_year_choices is not None:
            starts = [y for y in run if y in cfg.nb_year_choices]
            if not starts:
                continue
            run = [y for y in run if y >= starts[0]]
        if len(run) >= cfg.min_stable_years and run[0] <= cfg.latest_period_start_year:
            out.append(StablePeriod(turbine_id, tuple(run)))
    return out


def stability_scan(pps_series, cfg: NbFilterConfig | None = None, turbine_id: int = 0) -> list[StablePeriod]:
    cfg = cfg or NbFilterConfig()
    return periods_from_years(turbine_id, stable_years(quarter_stability(pps_series, cfg)), cfg)


# -- pipeline --------------------------------------------------------------

@dataclass
class PipelineResult:
    frame: D.ScadaFrame
    stage_reports: list
    k_selection: list
    pps_series: list
    stability: list
    stable_periods: list
    ledger: VoteLedger | None = None
    max_power: float = math.nan

    def stage_counts(self) -> dict:
        return {r.stage: {"total": r.total, "kept": r.kept} for r in self.stage_reports}


def distance_and_voting(frame, cfg: NbFilterConfig):
    """Stages 1-4; returns the surviving frame, reports and the vote ledger."""
    reports = []
    f, rep = pitch_iqr_filter(frame)
    reports.append(rep)
    f, rep = mahalanobis_pitch_wind_filter(f, cfg)
    reports.append(rep)
    f, rep = hierarchical_wind_iqr_filter(f, cfg)
    reports.append(rep)
    f, ledger, rep = sensor_vote_filter(f, cfg)
    reports.append(rep)
    return f, reports, ledger


def gmm_stage(frame: D.ScadaFrame, cfg: NbFilterConfig):
    parts = []
    selections = []
    series = []
    for key, rows in D.quarter_index(frame).items():
        q = frame.subset(rows)
        try:
            kept, sel = select_k_and_filter(q, cfg, key)
        except TooFewSamples as exc:
            sel = KSelectionResult(key, len(q), skipped=str(exc))
            kept = q
            series.append(PpsResult(key, len(q), False))
        else:
            series.append(sel.pps_result)
        parts.append(kept)
        selections.append(sel)
    data = pd.concat([p.data for p in parts], ignore_index=True) if parts else frame.data.iloc[:0]
    labels = None
    if frame.labels is not None:
        labels = np.concatenate([p.labels for p in parts]) if parts else frame.labels[:0]
    out = D.ScadaFrame(frame.turbine_id, data, labels, frame.n_dropped)
    rep = FilterReport("gmm", len(frame), len(out), {"gmm": len(frame) - len(out)},
                       {"chosen_k": {str(s.quarter): s.chosen_k for s in selections}})
    return out, rep, selections, series


def run_nb_pipeline(frame: D.ScadaFrame, hard_cfg: HardFilterConfig | None = None,
                    nb_cfg: NbFilterConfig | None = None) -> PipelineResult:
    """Hard filters, the NB-filter stages and the stability scan, in that order."""
    hard_cfg = hard_cfg or HardFilterConfig()
    nb_cfg = nb_cfg or NbFilterConfig()
    f, hard_rep = apply_hard_filters(frame, hard_cfg)
    reports = [hard_rep]
    ledger = None
    if len(f) >= 30:
        f, reps, ledger = distance_and_voting(f, nb_cfg)
        reports.extend(reps)
    else:
        log.warning("turbine %s: %d rows after hard filters; NB stages skipped", frame.turbine_id, len(f))
    if len(f):
        f, rep, selections, series = gmm_stage(f, nb_cfg)
        reports.append(rep)
    else:
        selections, series = [], []
    stability = quarter_stability(series, nb_cfg)
    periods = periods_from_years(frame.turbine_id, stable_years(stability), nb_cfg)
    return PipelineResult(f, reports, selections, series, stability, periods, ledger,
                          hard_rep.params["max_grid_power"])
