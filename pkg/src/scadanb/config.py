"""Flat ``section.key = value`` run configuration files.

Lines starting with ``#`` are comments. Values are parsed as JSON when
possible (numbers, booleans, lists, objects, null) and kept as bare strings
otherwise. Command-line flags override file values.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import InvalidConfig
from .gmm import EmConfig
from .hard_filters import HardFilterConfig
from .models.cv import CvConfig
from .models.tuning import TunerConfig
from .nb_filters import NbFilterConfig
from .pps import PpsConfig
from .synthetic import SyntheticConfig

SECTIONS = ("synthetic", "generate", "hard", "nb", "em", "pps", "cv", "tuning", "experiment")


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config(text: str) -> dict:
    out: dict[str, dict] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'section.key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise InvalidConfig(f"line {lineno}: key {key!r} lacks a section")
        section, name = key.split(".", 1)
        if section not in SECTIONS:
            raise InvalidConfig(f"line {lineno}: unknown section {section!r}")
        out.setdefault(section, {})[name] = parse_value(value)
    return out


def load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise InvalidConfig(f"config file {p} not found")
    return parse_config(p.read_text())


def _build(cls, values: dict, **fixed):
    try:
        return cls(**{**values, **fixed})
    except TypeError as exc:
        raise InvalidConfig(f"{cls.__name__}: {exc}") from None


def synthetic_config(cfg: dict, **overrides) -> SyntheticConfig:
    values = dict(cfg.get("synthetic", {}))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return _build(SyntheticConfig, values)


def hard_config(cfg: dict) -> HardFilterConfig:
    return _build(HardFilterConfig, cfg.get("hard", {}))


def pps_config(cfg: dict) -> PpsConfig:
    return _build(PpsConfig, cfg.get("pps", {}))


def nb_config(cfg: dict, seed: int | None = None, strict_voting: bool | None = None) -> NbFilterConfig:
    em_values = dict(cfg.get("em", {}))
    if seed is not None:
        em_values["seed"] = seed
    values = dict(cfg.get("nb", {}))
    if strict_voting is not None:
        values["voting_strict"] = strict_voting
    return _build(NbFilterConfig, values, em=_build(EmConfig, em_values), pps=pps_config(cfg))


def cv_config(cfg: dict) -> CvConfig:
    return _build(CvConfig, cfg.get("cv", {}))


def tuner_config(cfg: dict, seed: int | None = None) -> TunerConfig:
    values = dict(cfg.get("tuning", {}))
    if seed is not None:
        values["seed"] = seed
    return _build(TunerConfig, values)
