"""Rule-based hard filters for domain ranges and operating constraints."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import data as D
from .errors import EmptyFrame, InvalidConfig


@dataclass(frozen=True)
class HardFilterConfig:
    amb_temp_min: float = -10.0
    max_year_exclusive: int = 2024
    nominal_power_frac: float = 0.95
    cut_in_speed: float = 5.0
    power_floor_frac: float = 0.05
    cut_out_speed: float = 20.0

    def __post_init__(self):
        if not 0 < self.power_floor_frac < self.nominal_power_frac < 1:
            raise InvalidConfig("need 0 < power_floor_frac < nominal_power_frac < 1")
        if not self.cut_in_speed < self.cut_out_speed:
            raise InvalidConfig("cut_in_speed must be below cut_out_speed")

    def to_dict(self) -> dict:
        return asdict(self)


# rule names in reporting (first-match) order
RULES = (
    "amb_temp",
    "blade_load",
    "year",
    "curtailment",
    "nominal_power",
    "cut_in",
    "cut_out",
)


@dataclass
class FilterReport:
    """Row accounting for one filter stage; ``removed_by_rule`` is ordered."""

    stage: str
    total: int
    kept: int
    removed_by_rule: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def removed(self) -> int:
        return self.total - self.kept

    def to_rows(self) -> list[tuple[str, int]]:
        return list(self.removed_by_rule.items())

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "total": self.total,
            "kept": self.kept,
            "removed_by_rule": dict(self.removed_by_rule),
            "params": dict(self.params),
        }


def rule_masks(frame: D.ScadaFrame, cfg: HardFilterConfig, max_power: float) -> dict[str, np.ndarray]:
    """Per-rule violation masks (True = rule fails, record must go)."""
    power = frame.column(D.GRID_POWER)
    ws = frame.column(D.WIND_SPEED)
    loads = frame.matrix(D.BLADE_LOADS)
    pitch = frame.matrix(D.PITCH_ANGLES)
    return {
        "amb_temp": ~(frame.column(D.AMB_TEMP) >= cfg.amb_temp_min),
        "blade_load": ~np.all(loads <= 0, axis=1),
        "year": ~(frame.years < cfg.max_year_exclusive),
        "curtailment": ~np.all(pitch <= 0, axis=1),
        "nominal_power": ~(power <= cfg.nominal_power_frac * max_power),
        "cut_in": ~((ws >= cfg.cut_in_speed) | (power >= cfg.power_floor_frac * max_power)),
        "cut_out": ~(ws <= cfg.cut_out_speed),
    }


def apply_hard_filters(
    frame: D.ScadaFrame,
    cfg: HardFilterConfig | None = None,
    max_power: float | None = None,
) -> tuple[D.ScadaFrame, FilterReport]:
    """Keep only records passing every hard-filter rule.

    ``max_power`` defaults to the maximum GridPower of ``frame``; pass the
    value reported by an earlier run to make repeated application idempotent.
    """
    cfg = cfg or HardFilterConfig()
    if len(frame) == 0:
        raise EmptyFrame("hard filters need a non-empty frame")
    if max_power is None:
        max_power = float(np.max(frame.column(D.GRID_POWER)))
    if not max_power > 0:
        raise EmptyFrame("maximum GridPower must be positive")

    masks = rule_masks(frame, cfg, max_power)
    removed = np.zeros(len(frame), dtype=bool)
    by_rule = {}
    for name in RULES:
        hit = masks[name] & ~removed
        by_rule[name] = int(hit.sum())
        removed |= hit
    report = FilterReport(
        "hard_filters",
        total=len(frame),
        kept=int((~removed).sum()),
        removed_by_rule=by_rule,
        params={"max_grid_power": max_power, **cfg.to_dict()},
    )
    return frame.subset(~removed), report
