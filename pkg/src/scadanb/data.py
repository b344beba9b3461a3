"""SCADA record model, CSV ingestion and calendar partitioning.

A :class:`ScadaFrame` holds the 10-minute records of a single turbine as a
pandas DataFrame whose columns use the CSV attribute names. ``Time`` is kept
as integer epoch minutes (UTC); conversion to ISO-8601 happens only at the
CSV boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

from .errors import EmptyFrame, EmptyInput, MissingColumn, ParseError

log = logging.getLogger(__name__)

TIME = "Time"
TURBINE_ID = "TurbineId"
AMB_TEMP = "AmbTemp"
BLADE_LOADS = ("BladeLoadA", "BladeLoadB", "BladeLoadC")
GRID_POWER = "GridPower"
WIND_SPEED = "WindSpeed"
PITCH_ANGLES = ("PitchAngleA", "PitchAngleB", "PitchAngleC")
WD_ABS = "WdAbs"
WIND_DIR_REL = "WindDirRel"
WSE = "WSE"
LABEL = "Label"

CSV_COLUMNS = [
    TIME, TURBINE_ID, AMB_TEMP, *BLADE_LOADS, GRID_POWER, WIND_SPEED,
    *PITCH_ANGLES, WD_ABS, WIND_DIR_REL, WSE,
]
# every attribute except the time stamp and the identifier
MEASUREMENTS = [c for c in CSV_COLUMNS if c not in (TIME, TURBINE_ID)]
# explanatory variables for GridPower; WSE is derived from GridPower itself
EXPLANATORY = [c for c in MEASUREMENTS if c not in (GRID_POWER, WSE)]

LABEL_VALUES = (
    "normal", "anomaly1", "anomaly2", "anomaly3", "anomaly4",
    "recalibration-affected",
)

GRID_MINUTES = 10
_EPOCH = np.datetime64("1970-01-01T00:00", "m")


def to_epoch_minutes(values) -> np.ndarray:
    """Convert datetimes (strings, numpy or pandas) to int64 UTC epoch minutes."""
    ts = pd.DatetimeIndex(pd.to_datetime(values, utc=True, format="ISO8601"))
    return (ts.as_unit("ns").asi8 // 60_000_000_000).astype(np.int64)


def epoch_minutes(year, month=1, day=1, hour=0, minute=0) -> int:
    dt = np.datetime64(f"{year:04d}-{month:02d}-{day:02d}T{hour:02d}:{minute:02d}", "m")
    return int((dt - _EPOCH).astype(np.int64))


def minutes_to_datetime64(minutes) -> np.ndarray:
    return _EPOCH + np.asarray(minutes, dtype=np.int64).astype("timedelta64[m]")


def format_iso(minutes) -> np.ndarray:
    dt = minutes_to_datetime64(minutes).astype("datetime64[s]")
    return np.char.add(np.datetime_as_string(dt, unit="s"), "Z")


def calendar_years(minutes) -> np.ndarray:
    return minutes_to_datetime64(minutes).astype("datetime64[Y]").astype(np.int64) + 1970


def calendar_quarters(minutes) -> np.ndarray:
    months = minutes_to_datetime64(minutes).astype("datetime64[M]").astype(np.int64) % 12
    return months // 3 + 1


@dataclass(frozen=True, order=True)
class QuarterKey:
    year: int
    quarter: int

    def __post_init__(self):
        if self.quarter not in (1, 2, 3, 4):
            raise ValueError(f"quarter must be 1..4, got {self.quarter}")

    def __str__(self):
        return f"{self.year}Q{self.quarter}"


@dataclass(frozen=True, eq=False)
class ScadaFrame:
    """Time-ordered records of one turbine.

    ``data`` holds ``Time`` (epoch minutes) plus the measurement columns.
    ``labels`` is only populated for synthetic frames. Frames are treated as
    immutable; every filter returns a new frame via :meth:`subset`.
    """

    turbine_id: int
    data: pd.DataFrame
    labels: np.ndarray | None = None
    n_dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        missing = [c for c in [TIME, *MEASUREMENTS] if c not in self.data.columns]
        if missing:
            raise MissingColumn(missing[0])
        if self.labels is not None and len(self.labels) != len(self.data):
            raise ValueError("labels length does not match records")

    def __len__(self):
        return len(self.data)

    @property
    def times(self) -> np.ndarray:
        return self.data[TIME].to_numpy(dtype=np.int64)

    @property
    def years(self) -> np.ndarray:
        return calendar_years(self.times)

    def column(self, name: str) -> np.ndarray:
        return self.data[name].to_numpy(dtype=float)

    def matrix(self, names: Iterable[str]) -> np.ndarray:
        return self.data[list(names)].to_numpy(dtype=float)

    def subset(self, rows) -> "ScadaFrame":
        """Return a frame restricted to ``rows`` (boolean mask or index array)."""
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        data = self.data.iloc[rows].reset_index(drop=True)
        labels = None if self.labels is None else self.labels[rows]
        return ScadaFrame(self.turbine_id, data, labels, self.n_dropped)

    def with_data(self, data: pd.DataFrame) -> "ScadaFrame":
        return ScadaFrame(self.turbine_id, data.reset_index(drop=True), self.labels, self.n_dropped)

    def to_dataframe(self) -> pd.DataFrame:
        out = self.data[[TIME, *MEASUREMENTS]].copy()
        out.insert(1, TURBINE_ID, self.turbine_id)
        if self.labels is not None:
            out[LABEL] = self.labels
        return out


def _validate_order(frame: ScadaFrame) -> None:
    t = frame.times
    if len(t) > 1 and not np.all(np.diff(t) > 0):
        raise ValueError("frame times must be strictly increasing")


def make_frame(turbine_id: int, data: pd.DataFrame, labels=None) -> ScadaFrame:
    """Build a frame after sorting by time; raises on duplicate stamps."""
    order = np.argsort(data[TIME].to_numpy(), kind="stable")
    data = data.iloc[order].reset_index(drop=True)
    if labels is not None:
        labels = np.asarray(labels)[order]
    frame = ScadaFrame(int(turbine_id), data, labels)
    _validate_order(frame)
    return frame


def _row_problems(raw: pd.DataFrame):
    """Vectorised validation; yields (row mask, column, detail) per problem."""
    times = pd.to_datetime(raw[TIME], utc=True, errors="coerce", format="ISO8601")
    bad = times.isna().to_numpy()
    yield bad, TIME, "not an ISO-8601 timestamp"
    minutes = np.where(bad, 0, pd.DatetimeIndex(times).as_unit("ns").asi8 // 60_000_000_000)
    yield ~bad & (minutes % GRID_MINUTES != 0), TIME, "not on the 10-minute grid"

    tid = pd.to_numeric(raw[TURBINE_ID], errors="coerce").to_numpy(dtype=float)
    yield ~np.isfinite(tid) | (tid != np.round(tid)), TURBINE_ID, "not an integer"

    for col in MEASUREMENTS:
        vals = pd.to_numeric(raw[col], errors="coerce").to_numpy(dtype=float)
        yield ~np.isfinite(vals), col, "not a finite number"
        if col == WIND_SPEED:
            yield vals < 0, col, "negative wind speed"
        elif col == WD_ABS:
            yield (vals < 0) | (vals >= 360), col, "outside [0, 360)"


def load_csv(path, schema_strict: bool = False) -> list[ScadaFrame]:
    """Read a SCADA CSV into one frame per turbine, sorted by turbine id.

    Args:
        path: CSV file with the 14 CSV attributes (``Label`` optional).
        schema_strict: if True any unparseable or out-of-domain cell raises
            :class:`ParseError`; otherwise such rows are dropped and the
            count is stored on each frame's ``n_dropped``.
    """
    path = Path(path)
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    for col in CSV_COLUMNS:
        if col not in raw.columns:
            raise MissingColumn(col)
    if raw.empty:
        raise EmptyInput(f"{path} has no data rows")

    drop = np.zeros(len(raw), dtype=bool)
    for mask, col, detail in _row_problems(raw):
        if schema_strict and mask.any():
            raise ParseError(int(np.flatnonzero(mask)[0]), col, detail)
        drop |= mask

    has_labels = LABEL in raw.columns
    if has_labels:
        bad_label = ~raw[LABEL].isin(LABEL_VALUES).to_numpy()
        if schema_strict and bad_label.any():
            raise ParseError(int(np.flatnonzero(bad_label)[0]), LABEL, "unknown label")
        drop |= bad_label

    keep = raw.loc[~drop]
    data = pd.DataFrame({TIME: to_epoch_minutes(keep[TIME].to_numpy())})
    for col in MEASUREMENTS:
        data[col] = keep[col].astype(float).to_numpy()
    ids = pd.to_numeric(keep[TURBINE_ID]).to_numpy().astype(np.int64)
    labels_all = keep[LABEL].to_numpy(dtype=object) if has_labels else None

    frames = []
    n_bad = int(drop.sum())
    for tid in np.unique(ids):
        sel = np.flatnonzero(ids == tid)
        part = data.iloc[sel].reset_index(drop=True)
        order = np.argsort(part[TIME].to_numpy(), kind="stable")
        part = part.iloc[order].reset_index(drop=True)
        labels = None if labels_all is None else labels_all[sel][order].astype(str)
        t = part[TIME].to_numpy()
        dup = np.r_[False, t[1:] == t[:-1]]
        if dup.any():
            if schema_strict:
                raise ParseError(int(sel[order][np.flatnonzero(dup)[0]]), TIME, "duplicate timestamp")
            part = part.loc[~dup].reset_index(drop=True)
            labels = None if labels is None else labels[~dup]
        frames.append(ScadaFrame(int(tid), part, labels, n_dropped=n_bad + int(dup.sum())))
    if n_bad:
        log.warning("%s: dropped %d unparseable rows", path, n_bad)
    if not frames:
        raise EmptyInput(f"{path} has no valid rows")
    return frames


def write_csv(frames: ScadaFrame | Iterable[ScadaFrame], path) -> None:
    """Write frames to one CSV, ordered by turbine id then time."""
    if isinstance(frames, ScadaFrame):
        frames = [frames]
    frames = sorted(frames, key=lambda f: f.turbine_id)
    with_labels = any(f.labels is not None for f in frames)
    parts = []
    for f in frames:
        df = f.to_dataframe()
        if with_labels and f.labels is None:
            raise ValueError("cannot mix labelled and unlabelled frames in one CSV")
        df[TIME] = format_iso(df[TIME].to_numpy())
        parts.append(df)
    cols = CSV_COLUMNS + ([LABEL] if with_labels else [])
    out = pd.concat(parts, ignore_index=True) if parts else pd.DataFrame(columns=cols)
    out[cols].to_csv(path, index=False, lineterminator="\n")


def partition_quarters(frame: ScadaFrame) -> dict[QuarterKey, ScadaFrame]:
    """Split a frame into calendar quarters (UTC), keys in time order."""
    if len(frame) == 0:
        raise EmptyFrame("cannot partition an empty frame")
    idx = quarter_index(frame)
    return {key: frame.subset(rows) for key, rows in idx.items()}


def quarter_index(frame: ScadaFrame) -> dict[QuarterKey, np.ndarray]:
    """Row indices per calendar quarter."""
    t = frame.times
    code = calendar_years(t) * 4 + calendar_quarters(t) - 1
    out = {}
    for c in np.unique(code):
        out[QuarterKey(int(c // 4), int(c % 4) + 1)] = np.flatnonzero(code == c)
    return out
