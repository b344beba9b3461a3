"""Command-line entry point: ``scadanb <command> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
Every command writes ``manifest.json`` next to its outputs; ``rerun``
replays a manifest into a new output directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from . import data as D
from .config import (
    cv_config,
    hard_config,
    load_config,
    nb_config,
    pps_config,
    synthetic_config,
    tuner_config,
)
from .errors import DataError, InvalidConfig, ScadaError
from .experiments import DRIFT_CSV_HEADER, run_experiment1, run_experiment2, summarize
from .models import FAMILIES
from .nb_filters import StablePeriod, periods_from_years, quarter_stability, run_nb_pipeline, stable_years
from .pps import PPS_CSV_HEADER, pps_quarterly, pps_table
from .svg import line_chart
from .synthetic import generate_synthetic

log = logging.getLogger("scadanb")

MANIFEST = "manifest.json"
SCADA_FILE = "scada.csv"
PERIODS_FILE = "stable_periods.json"
# arguments that never influence output bytes and stay out of the manifest
_VOLATILE_ARGS = {"out", "jobs", "config", "func", "command", "verbose"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


# -- io helpers ------------------------------------------------------------

def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if isinstance(v, float) and math.isnan(v) else v for v in row])


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _is_scada_csv(path: Path) -> bool:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), [])
    return all(c in header for c in D.CSV_COLUMNS)


def discover_inputs(path) -> list[Path]:
    if path is None:
        raise UsageError("--in is required")
    p = Path(path)
    if p.is_file():
        return [p]
    if not p.is_dir():
        raise DataError(f"input {p} does not exist")
    return [f for f in sorted(p.glob("*.csv")) if _is_scada_csv(f)]


def load_frames(path) -> tuple[list[D.ScadaFrame], list[Path]]:
    files = discover_inputs(path)
    frames: dict[int, D.ScadaFrame] = {}
    for f in files:
        for fr in D.load_csv(f):
            if fr.turbine_id in frames:
                raise DataError(f"turbine {fr.turbine_id} appears in more than one input file")
            frames[fr.turbine_id] = fr
    if not frames:
        raise DataError("no input frames")
    return [frames[k] for k in sorted(frames)], files


def pmap(fn, items, jobs: int):
    """Ordered map, optionally over a process pool."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _config(args) -> dict:
    if getattr(args, "config_dict", None) is not None:
        return args.config_dict
    return load_config(args.config)


def _out_dir(args) -> Path:
    if args.out is None:
        raise UsageError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, args, cfg: dict, inputs, extra: dict | None = None) -> None:
    outputs = {
        p.name: sha256_file(p)
        for p in sorted(out.iterdir())
        if p.is_file() and p.name != MANIFEST
    }
    manifest = {
        "tool": "scadanb",
        "version": __version__,
        "command": args.command,
        "args": {k: v for k, v in sorted(vars(args).items()) if k not in _VOLATILE_ARGS and k != "config_dict"},
        "config": cfg,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): sha256_file(Path(p)) for p in inputs},
        "outputs": outputs,
    }
    if extra:
        manifest.update(extra)
    write_json(out / MANIFEST, manifest)


# -- generate --------------------------------------------------------------

def _generate_one(cfg):
    return generate_synthetic(cfg)


def cmd_generate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    n_turbines = args.turbines or int(cfg.get("generate", {}).get("turbines", 1))
    if n_turbines < 1:
        raise UsageError("--turbines must be >= 1")
    cfgs = [
        synthetic_config(cfg, seed=args.seed, n_years=args.years, turbine_id=tid)
        for tid in range(1, n_turbines + 1)
    ]
    for c in cfgs:
        c.validate()
    frames = pmap(_generate_one, cfgs, args.jobs)
    D.write_csv(frames, out / SCADA_FILE)
    write_manifest(out, args, cfg, [], {"synthetic": [c.to_dict() for c in cfgs]})
    return 0


# -- filter ----------------------------------------------------------------

def _pipeline_one(frame, hard, nb):
    return run_nb_pipeline(frame, hard, nb)


def cmd_filter(args) -> int:
    cfg = _config(args)
    hard = hard_config(cfg)
    nb = nb_config(cfg, args.seed, args.strict_voting)
    frames, inputs = load_frames(args.inp)
    out = _out_dir(args)
    results = pmap(partial(_pipeline_one, hard=hard, nb=nb), frames, args.jobs)

    kept = [r.frame for r in results if len(r.frame)]
    if kept:
        D.write_csv(kept, out / SCADA_FILE)
    stage_rows, k_rows, pps_rows = [], [], []
    periods = []
    counts = {}
    for fr, r in zip(frames, results):
        tid = fr.turbine_id
        for rep in r.stage_reports:
            for rule, n in rep.removed_by_rule.items():
                stage_rows.append((tid, rep.stage, rule, n, rep.total, rep.kept))
        for sel in r.k_selection:
            for k, (p, nd, s) in sel.per_k.items():
                k_rows.append((tid, sel.quarter.year, sel.quarter.quarter, k, p, nd, s, int(k == sel.chosen_k)))
        pps_rows.extend(pps_table(tid, r.pps_series))
        periods.extend(p.to_dict() for p in r.stable_periods)
        counts[str(tid)] = {
            "input_rows": len(fr),
            "dropped_unparseable": fr.n_dropped,
            "max_grid_power": r.max_power,
            "stages": r.stage_counts(),
            "chosen_k": {str(s.quarter): s.chosen_k for s in r.k_selection},
        }
    write_rows(out / "stage_report.csv", ("turbine_id", "stage", "rule", "removed", "total", "kept"), stage_rows)
    write_rows(out / "k_selection.csv",
               ("turbine_id", "year", "quarter", "k", "pps", "n_delta", "score", "chosen"), k_rows)
    write_rows(out / "pps.csv", PPS_CSV_HEADER, pps_rows)
    write_json(out / PERIODS_FILE, {"stable_periods": periods})
    write_manifest(out, args, cfg, inputs, {
        "stage_counts": counts,
        "resolved": {"hard": hard.to_dict(), "nb": nb.to_dict()},
        "reserved": {"period_specific_voting_modifications": None},
    })
    return 0


# -- pps / stable ----------------------------------------------------------

def _pps_one(frame, pcfg):
    return pps_quarterly(frame, None, pcfg)


def _pps_chart(turbines, series_list) -> str:
    keys = sorted({r.quarter for s in series_list for r in s})
    lines = {}
    for tid, s in zip(turbines, series_list):
        by_q = {r.quarter: r.combined_avg for r in s}
        lines[f"turbine {tid}"] = [by_q.get(k, math.nan) for k in keys]
    return line_chart(lines, "Combined average PPS per quarter", [str(k) for k in keys], "PPS")


def cmd_pps(args) -> int:
    cfg = _config(args)
    pcfg = pps_config(cfg)
    frames, inputs = load_frames(args.inp)
    out = _out_dir(args)
    series = pmap(partial(_pps_one, pcfg=pcfg), frames, args.jobs)
    rows = [row for fr, s in zip(frames, series) for row in pps_table(fr.turbine_id, s)]
    write_rows(out / "pps.csv", PPS_CSV_HEADER, rows)
    (out / "pps.svg").write_text(_pps_chart([f.turbine_id for f in frames], series))
    write_manifest(out, args, cfg, inputs, {"resolved": {"pps": pcfg.to_dict()}})
    return 0


def _stability_one(frame, nb):
    series = pps_quarterly(frame, None, nb.pps)
    stab = quarter_stability(series, nb)
    return stab, periods_from_years(frame.turbine_id, stable_years(stab), nb)


def compute_periods(frames, nb, jobs) -> tuple[list, list]:
    results = pmap(partial(_stability_one, nb=nb), frames, jobs)
    return [r[0] for r in results], [p for r in results for p in r[1]]


def cmd_stable(args) -> int:
    cfg = _config(args)
    nb = nb_config(cfg, args.seed)
    frames, inputs = load_frames(args.inp)
    out = _out_dir(args)
    stabs, periods = compute_periods(frames, nb, args.jobs)
    rows = [
        (fr.turbine_id, q.quarter.year, q.quarter.quarter, q.combined_avg, q.rolling_std, int(q.stable))
        for fr, stab in zip(frames, stabs) for q in stab
    ]
    write_rows(out / "stability.csv", ("turbine_id", "year", "quarter", "combined_avg", "rolling_std", "stable"), rows)
    write_json(out / PERIODS_FILE, {"stable_periods": [p.to_dict() for p in periods]})
    write_manifest(out, args, cfg, inputs, {"resolved": {"nb": nb.to_dict()}})
    return 0


# -- experiments -----------------------------------------------------------

def _load_periods(args, frames, nb) -> tuple[list[StablePeriod], list[Path]]:
    path = Path(args.periods) if args.periods else None
    if path is None and Path(args.inp).is_dir() and (Path(args.inp) / PERIODS_FILE).is_file():
        path = Path(args.inp) / PERIODS_FILE
    if path is not None:
        if not path.is_file():
            raise DataError(f"periods file {path} not found")
        doc = json.loads(path.read_text())
        return [StablePeriod.from_dict(d) for d in doc.get("stable_periods", [])], [path]
    return compute_periods(frames, nb, args.jobs)[1], []


def _experiment_one(job, experiment, family, features, tuner, cv, normalize, seed, exp2_opts):
    frame, period = job
    if experiment == 1:
        return run_experiment1(frame, period, features, family, tuner, cv, normalize, seed=seed)
    return run_experiment2(frame, period, features, family, tuner, cv, normalize, seed=seed, **exp2_opts)


def _run_experiment(args, experiment: int) -> int:
    cfg = _config(args)
    nb = nb_config(cfg, args.seed)
    tuner = tuner_config(cfg, args.seed)
    cv = cv_config(cfg)
    exp_cfg = dict(cfg.get("experiment", {}))
    normalize = args.normalize_drift if args.normalize_drift is not None else bool(exp_cfg.get("normalize_drift", True))
    exp2_opts = {}
    if experiment == 2:
        exp2_opts = {
            "replication": exp_cfg.get("replication", "proportional"),
            "residual_mode": exp_cfg.get("residual_mode", "actual"),
        }
    frames, inputs = load_frames(args.inp)
    periods, period_files = _load_periods(args, frames, nb)
    by_id = {f.turbine_id: f for f in frames}
    jobs = [(by_id[p.turbine_id], p) for p in sorted(periods, key=lambda p: (p.turbine_id, p.years))
            if p.turbine_id in by_id]
    if not jobs:
        raise DataError("no stable periods for the input turbines")
    out = _out_dir(args)
    fn = partial(_experiment_one, experiment=experiment, family=args.model, features=args.features,
                 tuner=tuner, cv=cv, normalize=normalize, seed=args.seed or 0, exp2_opts=exp2_opts)
    reports = pmap(fn, jobs, args.jobs)

    tag = f"exp{experiment}"
    write_rows(out / f"drift_{tag}.csv", DRIFT_CSV_HEADER, [row for r in reports for row in r.rows()])
    write_json(out / f"drift_{tag}.json", {
        "drift_score": "100 * sum(r / y)" + (" / N" if normalize else ""),
        "reports": [r.to_dict() for r in reports],
    })
    trial_rows = [
        (r.turbine_id, r.family, r.feature_set, t["number"], json.dumps(t["params"], sort_keys=True), t["score"],
         int(t["cached"]))
        for r in reports for t in r.trials
    ]
    write_rows(out / f"trials_{tag}.csv",
               ("turbine_id", "model", "feature_set", "trial", "params", "cv_error", "cached"), trial_rows)
    write_manifest(out, args, cfg, [*inputs, *period_files], {
        "resolved": {"tuning": {"n_trials": tuner.n_trials, "seed": tuner.seed}, "cv": cv.to_dict(),
                     "normalize_drift": normalize, **exp2_opts},
    })
    return 0


def cmd_exp1(args) -> int:
    return _run_experiment(args, 1)


def cmd_exp2(args) -> int:
    return _run_experiment(args, 2)


# -- report ----------------------------------------------------------------

def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _num(text: str) -> float:
    return float(text) if text not in ("", None) else math.nan


def cmd_report(args) -> int:
    from .experiments import DriftReport, YearDrift

    cfg = _config(args)
    dirs = [Path(p) for p in (args.inp if isinstance(args.inp, list) else [args.inp])]
    for d in dirs:
        if not d.is_dir():
            raise DataError(f"report input {d} is not a directory")
    out = _out_dir(args)
    inputs = []
    summary: dict = {}

    rule_totals: dict[str, int] = {}
    for d in dirs:
        p = d / "stage_report.csv"
        if p.is_file():
            inputs.append(p)
            for row in _read_csv(p):
                if row["stage"] == "hard_filters":
                    rule_totals[row["rule"]] = rule_totals.get(row["rule"], 0) + int(row["removed"])
    if rule_totals:
        write_rows(out / "hard_filter_report.csv", ("rule", "count"), rule_totals.items())
        summary["hard_filter_removed"] = rule_totals

    pps_series: dict[int, dict] = {}
    for d in dirs:
        p = d / "pps.csv"
        if p.is_file():
            inputs.append(p)
            for row in _read_csv(p):
                key = (int(row["year"]), int(row["quarter"]))
                pps_series.setdefault(int(row["turbine_id"]), {})[key] = _num(row["combined_avg"])
    if pps_series:
        keys = sorted({k for s in pps_series.values() for k in s})
        lines = {f"turbine {t}": [s.get(k, math.nan) for k in keys] for t, s in sorted(pps_series.items())}
        (out / "pps.svg").write_text(line_chart(lines, "Combined average PPS per quarter",
                                                [f"{y}Q{q}" for y, q in keys], "PPS"))

    reports = []
    for d in dirs:
        for p in sorted(d.glob("drift_exp*.csv")):
            inputs.append(p)
            exp = p.stem.split("_")[-1]
            groups: dict[tuple, list] = {}
            for row in _read_csv(p):
                groups.setdefault((exp, int(row["turbine"]), row["model"], row["feature_set"]), []).append(row)
            for (exp_tag, tid, model, fs), rows in sorted(groups.items()):
                per_year = [YearDrift(int(r["year"]), 0, _num(r["delta"]), _num(r["mae"]), _num(r["mape"]),
                                      _num(r["drift_delta"])) for r in rows]
                years = [y.year for y in per_year]
                ref = min((y.year for y in per_year if not math.isnan(y.drift_delta)), default=years[0])
                reports.append((exp_tag, DriftReport(tid, model, fs, int(exp_tag[3:]), min(years), ref, True, per_year)))
    for exp_tag in sorted({e for e, _ in reports}):
        subset = [r for e, r in reports if e == exp_tag]
        summary[f"summary_{exp_tag}"] = summarize(subset).to_dict()
        for tid in sorted({r.turbine_id for r in subset}):
            mine = [r for r in subset if r.turbine_id == tid]
            years = sorted({y.year for r in mine for y in r.per_year})
            lines = {}
            for r in mine:
                by_year = {y.year: y.drift_delta for y in r.per_year}
                lines[f"{r.family}/{r.feature_set}"] = [by_year.get(y, math.nan) for y in years]
            (out / f"drift_{exp_tag}_turbine{tid}.svg").write_text(
                line_chart(lines, f"Relative drift, {exp_tag}, turbine {tid}", years, "drift (%)"))
    if not summary:
        raise DataError("no report inputs found")
    write_json(out / "summary.json", summary)
    write_manifest(out, args, cfg, inputs)
    return 0


# -- rerun -----------------------------------------------------------------

def cmd_rerun(args) -> int:
    path = Path(args.manifest)
    if not path.is_file():
        raise DataError(f"manifest {path} not found")
    doc = json.loads(path.read_text())
    command = doc.get("command")
    if command not in COMMANDS or command == "rerun":
        raise DataError(f"manifest names unknown command {command!r}")
    ns = argparse.Namespace(**doc["args"])
    ns.command = command
    ns.out = args.out
    ns.jobs = args.jobs
    ns.config = None
    ns.config_dict = doc.get("config", {})
    for name, expected in doc.get("inputs", {}).items():
        if Path(name).is_file() and sha256_file(Path(name)) != expected:
            log.warning("input %s changed since the manifest was written", name)
    return COMMANDS[command](ns)


COMMANDS = {
    "generate": cmd_generate,
    "filter": cmd_filter,
    "pps": cmd_pps,
    "stable": cmd_stable,
    "exp1": cmd_exp1,
    "exp2": cmd_exp2,
    "report": cmd_report,
    "rerun": cmd_rerun,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scadanb", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"scadanb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, need_in=True):
        if need_in:
            p.add_argument("--in", dest="inp", required=True, help="input CSV file or directory")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="flat section.key = value config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("generate", help="write synthetic SCADA data")
    common(p, need_in=False)
    p.add_argument("--years", type=int, default=None)
    p.add_argument("--turbines", type=int, default=None)

    p = sub.add_parser("filter", help="hard filters and NB-filter pipeline")
    common(p)
    p.add_argument("--strict-voting", type=_on_off, default=None)

    p = sub.add_parser("pps", help="quarterly PPS series and chart")
    common(p)

    p = sub.add_parser("stable", help="stable operating periods")
    common(p)

    for name in ("exp1", "exp2"):
        p = sub.add_parser(name, help=f"drift experiment {name[-1]}")
        common(p)
        p.add_argument("--model", choices=sorted(FAMILIES), default="gbt")
        p.add_argument("--features", choices=("pc", "all"), default="pc")
        p.add_argument("--normalize-drift", type=_on_off, default=None)
        p.add_argument("--periods", help="stable_periods.json (default: look in --in)")

    p = sub.add_parser("report", help="aggregate reports and plots")
    p.add_argument("--in", dest="inp", action="append", required=True, help="result directory (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("rerun", help="replay a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"scadanb: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("scadanb: error: --jobs must be >= 1", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidConfig) as exc:
        print(f"scadanb: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ScadaError, OSError, UnicodeDecodeError) as exc:
        print(f"scadanb: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
