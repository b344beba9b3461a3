"""Deterministic synthetic SCADA generator with labelled anomalies.

The baseline turbine follows a logistic power curve between cut-in and
rated wind speed. Anomalies of the four SCADA classes are then injected at
exact per-type counts, a compounding yearly degradation is applied to the
power output, and optional sensor recalibration offsets are added.

All randomness comes from one ``numpy.random.Generator`` seeded with
``(seed, turbine_id)``, so identical configs give bitwise-identical frames.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy.special import expit, logit, ndtr

from . import data as D
from .errors import InvalidConfig

# pitch schedule (degrees): fine pitch in partial load, ramp near rated
FINE_PITCH = -0.8
PITCH_RAMP_START = 10.3
PITCH_RAMP_SLOPE = 1.5
PITCH_COMMON_STD = 0.1
PITCH_BLADE_STD = 0.005
# blade load model (load units, negative = backward bending)
LOAD_IDLE = 150.0
LOAD_SPAN = 850.0
LOAD_COMMON_STD = 15.0
LOAD_BLADE_STD = 5.0

DERATE_MIN_SPEED = 11.5


@dataclass(frozen=True)
class RecalibrationEvent:
    """Additive offset applied to ``sensor`` from ``time`` (epoch minutes) on."""

    time: int
    sensor: str
    offset: float


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator settings.

    ``anomaly_rates`` maps anomaly type (1-4) to the fraction of all records
    carrying that label. ``degradation_rate`` is the fractional loss of power
    per elapsed calendar year (0.02 means 2 %/year, compounding).
    ``availability`` is the fraction of 10-minute slots present in the
    output; lower values emulate communication gaps and shrink the data.
    """

    seed: int = 0
    n_years: int = 3
    start_year: int = 2018
    turbine_id: int = 1
    rated_power: float = 2000.0
    cut_in: float = 3.0
    rated_speed: float = 12.0
    cut_out: float = 25.0
    anomaly_rates: dict = field(default_factory=lambda: {1: 0.0, 2: 0.0, 3: 0.0, 4: 0.0})
    degradation_rate: float = 0.0
    recalibration_events: tuple = ()
    noise_scale: float = 0.01
    availability: float = 1.0
    weibull_scale: float = 8.0
    weibull_shape: float = 2.0

    def __post_init__(self):
        rates = {int(k): float(v) for k, v in dict(self.anomaly_rates).items()}
        object.__setattr__(self, "anomaly_rates", rates)
        events = tuple(
            e if isinstance(e, RecalibrationEvent) else RecalibrationEvent(*_coerce_event(e))
            for e in self.recalibration_events
        )
        object.__setattr__(self, "recalibration_events", events)

    def validate(self) -> None:
        if self.n_years < 1:
            raise InvalidConfig("n_years must be >= 1")
        if not 0 < self.cut_in < self.rated_speed < self.cut_out:
            raise InvalidConfig("need 0 < cut_in < rated_speed < cut_out")
        if self.rated_power <= 0:
            raise InvalidConfig("rated_power must be positive")
        if set(self.anomaly_rates) - {1, 2, 3, 4}:
            raise InvalidConfig("anomaly types are 1..4")
        rates = list(self.anomaly_rates.values())
        if any(not 0 <= r <= 1 for r in rates) or sum(rates) > 1:
            raise InvalidConfig("anomaly rates must lie in [0, 1] and sum to <= 1")
        if not 0 <= self.degradation_rate < 1:
            raise InvalidConfig("degradation_rate must lie in [0, 1)")
        if not 0 <= self.noise_scale <= 1:
            raise InvalidConfig("noise_scale must lie in [0, 1]")
        if not 0 < self.availability <= 1:
            raise InvalidConfig("availability must lie in (0, 1]")
        for e in self.recalibration_events:
            if e.sensor not in D.MEASUREMENTS:
                raise InvalidConfig(f"unknown recalibration sensor {e.sensor!r}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["anomaly_rates"] = {str(k): v for k, v in sorted(self.anomaly_rates.items())}
        out["recalibration_events"] = [asdict(e) for e in self.recalibration_events]
        out["power_curve"] = "logistic: rated * expit((ws - mid) / width), mid=(cut_in+rated_speed)/2, width=(rated_speed-cut_in)/8"
        out["aggregation"] = "10-minute means"
        return out


def _coerce_event(e):
    if isinstance(e, dict):
        e = (e["time"], e["sensor"], e["offset"])
    t, sensor, offset = e
    if not isinstance(t, (int, np.integer)):
        t = int(D.to_epoch_minutes([t])[0])
    return int(t), str(sensor), float(offset)


def curve_params(cfg: SyntheticConfig) -> tuple[float, float]:
    mid = 0.5 * (cfg.cut_in + cfg.rated_speed)
    width = (cfg.rated_speed - cfg.cut_in) / 8.0
    return mid, width


def power_curve(ws, cfg: SyntheticConfig) -> np.ndarray:
    """Noise-free power for wind speed ``ws``; zero outside [cut_in, cut_out]."""
    ws = np.asarray(ws, dtype=float)
    mid, width = curve_params(cfg)
    p = cfg.rated_power * expit((ws - mid) / width)
    return np.where((ws >= cfg.cut_in) & (ws <= cfg.cut_out), p, 0.0)


def normal_pitch(ws) -> np.ndarray:
    return FINE_PITCH + PITCH_RAMP_SLOPE * np.maximum(0.0, np.asarray(ws) - PITCH_RAMP_START)


def _blade_loads(power, rated, rng, n):
    common = -(LOAD_IDLE + LOAD_SPAN * power / rated) + rng.normal(0, LOAD_COMMON_STD, n)
    return [common + rng.normal(0, LOAD_BLADE_STD, n) for _ in range(3)]


def _time_grid(cfg: SyntheticConfig) -> np.ndarray:
    start = D.epoch_minutes(cfg.start_year)
    stop = D.epoch_minutes(cfg.start_year + cfg.n_years)
    return np.arange(start, stop, D.GRID_MINUTES, dtype=np.int64)


def _ar1(rng, n, phi):
    """Unit-variance stationary AR(1) series."""
    from scipy.signal import lfilter

    eps = rng.normal(0.0, np.sqrt(1 - phi**2), n)
    eps[0] = rng.normal()
    return lfilter([1.0], [1.0, -phi], eps)


def _pick_blocks(rng, eligible, count, mean_len):
    """Choose exactly ``count`` eligible indices as contiguous runs.

    Runs are drawn at random eligible starts with geometric lengths and are
    clipped at the first ineligible record; the final run is trimmed.
    """
    free = eligible.copy()
    chosen = []
    total = 0
    while total < count:
        pool = np.flatnonzero(free)
        if len(pool) == 0:
            break
        start = pool[rng.integers(len(pool))]
        length = 1 if mean_len <= 1 else int(rng.geometric(1.0 / mean_len))
        length = min(length, count - total)
        stop = start
        while stop < len(free) and stop - start < length and free[stop]:
            stop += 1
        run = np.arange(start, stop)
        free[run] = False
        chosen.append(run)
        total += len(run)
    return np.concatenate(chosen) if chosen else np.empty(0, dtype=np.int64)


def generate_synthetic(cfg: SyntheticConfig) -> D.ScadaFrame:
    """Generate one labelled turbine frame from ``cfg``."""
    cfg.validate()
    rng = np.random.default_rng([cfg.seed, cfg.turbine_id])
    rated = cfg.rated_power

    t = _time_grid(cfg)
    n = len(t)
    if cfg.availability < 1:
        keep = rng.random(n) < cfg.availability
        t = t[keep]
        n = len(t)
    dt = D.minutes_to_datetime64(t)
    doy = (dt - dt.astype("datetime64[Y]")).astype("timedelta64[m]").astype(float) / 1440.0
    hour = (t % 1440) / 60.0

    # wind: AR(1) gaussian mapped through the Weibull quantile function
    z = _ar1(rng, n, 0.98)
    u = np.clip(ndtr(z), 1e-12, 1 - 1e-12)
    ws = cfg.weibull_scale * (-np.log1p(-u)) ** (1.0 / cfg.weibull_shape)

    temp = (
        8.0
        + 9.0 * np.sin(2 * np.pi * (doy - 105.0) / 365.25)
        + 3.0 * np.sin(2 * np.pi * (hour - 9.0) / 24.0)
        + 1.5 * _ar1(rng, n, 0.9)
    )
    wd_abs = np.mod(rng.uniform(0, 360) + np.cumsum(rng.normal(0, 3.0, n)), 360.0)
    wd_rel = rng.normal(0, 4.0, n)

    natural = power_curve(ws, cfg)
    noise = rng.normal(0, cfg.noise_scale * rated, n) if cfg.noise_scale > 0 else np.zeros(n)
    power = np.where(natural > 0, np.clip(natural + noise, 0.0, rated), 0.0)
    pitch_common = normal_pitch(ws) + rng.normal(0, PITCH_COMMON_STD, n)
    pitch = [pitch_common + rng.normal(0, PITCH_BLADE_STD, n) for _ in range(3)]

    labels = np.full(n, "normal", dtype=object)
    free = np.ones(n, dtype=bool)
    rates = cfg.anomaly_rates

    # type 1: downtime, no power above cut-in, blades feathered
    idx1 = _pick_blocks(rng, free & (ws >= cfg.cut_in), round(rates.get(1, 0.0) * n), 18)
    # type 2: curtailment plateau below rated, realised by pitching out
    eligible2 = free & (natural >= 0.5 * rated) & (ws <= cfg.cut_out)
    eligible2[idx1] = False
    idx2 = _pick_blocks(rng, eligible2, round(rates.get(2, 0.0) * n), 12)
    # type 4: high-wind derating tail
    eligible4 = free & (ws >= DERATE_MIN_SPEED) & (ws <= cfg.cut_out)
    eligible4[idx1] = False
    eligible4[idx2] = False
    idx4 = _pick_blocks(rng, eligible4, round(rates.get(4, 0.0) * n), 6)
    # type 3: isolated points anywhere
    eligible3 = free.copy()
    eligible3[np.r_[idx1, idx2, idx4]] = False
    idx3 = _pick_blocks(rng, eligible3, round(rates.get(3, 0.0) * n), 1)

    # compounding degradation per elapsed calendar year
    years_elapsed = (D.calendar_years(t) - cfg.start_year).astype(float)
    degr = (1.0 - cfg.degradation_rate) ** years_elapsed
    power = power * degr

    loads = _blade_loads(power, rated, rng, n)

    if len(idx1):
        m = len(idx1)
        labels[idx1] = "anomaly1"
        power[idx1] = 0.0
        for b in range(3):
            pitch[b][idx1] = 85.0 + rng.uniform(0, 5, m)
        common = rng.normal(-5.0, 15.0, m)
        for b in range(3):
            loads[b][idx1] = common + rng.normal(0, LOAD_BLADE_STD, m)

    if len(idx2):
        m = len(idx2)
        labels[idx2] = "anomaly2"
        # one plateau level per contiguous run
        run_id = np.cumsum(np.r_[True, np.diff(idx2) != 1])
        level = rng.uniform(0.2, 0.4, run_id.max() + 1)[run_id] * rated
        p2 = np.clip(level + rng.normal(0, cfg.noise_scale * rated, m), 0.0, rated)
        power[idx2] = p2
        extra = 2.0 + 8.0 * (natural[idx2] - level) / rated
        common = normal_pitch(ws[idx2]) + extra + rng.normal(0, PITCH_COMMON_STD, m)
        for b in range(3):
            pitch[b][idx2] = common + rng.normal(0, PITCH_BLADE_STD, m)
        l2 = _blade_loads(p2, rated, rng, m)
        for b in range(3):
            loads[b][idx2] = l2[b]

    if len(idx4):
        m = len(idx4)
        labels[idx4] = "anomaly4"
        w4 = ws[idx4]
        frac = np.clip(0.8 - 0.06 * (w4 - DERATE_MIN_SPEED), 0.15, None)
        p4 = frac * rated * degr[idx4]
        power[idx4] = p4
        common = -0.45 + 0.9 * (w4 - DERATE_MIN_SPEED) + rng.normal(0, 0.05, m)
        for b in range(3):
            pitch[b][idx4] = common + rng.normal(0, PITCH_BLADE_STD, m)
        l4 = _blade_loads(p4, rated, rng, m)
        for b in range(3):
            loads[b][idx4] = l4[b]

    if len(idx3):
        m = len(idx3)
        labels[idx3] = "anomaly3"
        ws[idx3] = rng.uniform(0, 25, m)
        power[idx3] = rng.uniform(0, rated, m)
        for b in range(3):
            pitch[b][idx3] = rng.uniform(-2.0, 4.0, m)
            loads[b][idx3] = rng.uniform(-1100.0, 100.0, m)
        temp[idx3] = temp[idx3] + rng.normal(0, 8.0, m)
        wd_abs[idx3] = rng.uniform(0, 360, m)
        wd_rel[idx3] = rng.uniform(-60, 60, m)

    mid, width = curve_params(cfg)
    frac = np.clip(power / rated, 1e-6, 1 - 1e-6)
    wse = np.where(power > 0, mid + width * logit(frac), 0.0) + rng.normal(0, 0.2, n)
    wse = np.maximum(wse, 0.0)

    cols = {
        D.TIME: t,
        D.AMB_TEMP: temp,
        D.BLADE_LOADS[0]: loads[0],
        D.BLADE_LOADS[1]: loads[1],
        D.BLADE_LOADS[2]: loads[2],
        D.GRID_POWER: power,
        D.WIND_SPEED: ws,
        D.PITCH_ANGLES[0]: pitch[0],
        D.PITCH_ANGLES[1]: pitch[1],
        D.PITCH_ANGLES[2]: pitch[2],
        D.WD_ABS: wd_abs,
        D.WIND_DIR_REL: wd_rel,
        D.WSE: wse,
    }
    for ev in cfg.recalibration_events:
        after = t >= ev.time
        cols[ev.sensor] = np.where(after, cols[ev.sensor] + ev.offset, cols[ev.sensor])
        labels[after & (labels == "normal")] = "recalibration-affected"

    return D.ScadaFrame(cfg.turbine_id, pd.DataFrame(cols), labels.astype(str))
