import csv
import json

import numpy as np
import pytest

from scadanb import data as D
from scadanb.cli import main

from cli_support import run, run_chain, snapshot, write_config


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    root = tmp_path_factory.mktemp("chain")
    cfg = write_config(root)
    return run_chain(root, cfg, jobs=1), cfg


def test_generate_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run("generate", "--seed", 7, "--years", 1, "--out", tmp_path / name) == 0
    assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")
    frames = D.load_csv(tmp_path / "a" / "scada.csv")
    assert len(frames) == 1 and len(frames[0]) == 52560


def test_empty_input_directory(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert run("filter", "--in", tmp_path / "empty", "--out", tmp_path / "o") == 2
    assert "no input frames" in capsys.readouterr().err


def test_usage_errors(tmp_path, capsys):
    assert main([]) == 1
    assert main(["bogus"]) == 1
    assert run("filter", "--out", tmp_path) == 1
    assert run("exp1", "--in", tmp_path, "--out", tmp_path, "--model", "svm") == 1
    assert run("filter", "--in", tmp_path, "--out", tmp_path, "--strict-voting", "maybe") == 1
    assert run("generate", "--out", tmp_path, "--jobs", 0) == 1
    assert "error" in capsys.readouterr().err


def test_bad_config_is_usage_error(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nosection = 3\n")
    assert run("generate", "--out", tmp_path / "o", "--config", bad) == 1
    bad.write_text("hard.unknown_field = 3\n")
    assert run("generate", "--out", tmp_path / "o", "--config", bad, "--years", 1) == 0
    assert run("filter", "--in", tmp_path / "o", "--out", tmp_path / "f", "--config", bad) == 1
    assert run("generate", "--out", tmp_path / "o2", "--config", tmp_path / "missing.cfg") == 1


def test_malformed_csv_is_data_error(tmp_path, capsys):
    src = tmp_path / "in"
    src.mkdir()
    header = ",".join(D.CSV_COLUMNS)
    (src / "x.csv").write_text(header + "\n" + ",".join(["1"] * (len(D.CSV_COLUMNS) - 1) + ["oops"]) + "\n")
    assert run("filter", "--in", src, "--out", tmp_path / "o") == 2
    assert "data error" in capsys.readouterr().err


def test_version_and_help(capsys):
    assert main(["--version"]) == 0
    assert main(["--help"]) == 0
    assert "generate" in capsys.readouterr().out


def test_chain_outputs(chain):
    d, _ = chain
    assert {"scada.csv", "stage_report.csv", "k_selection.csv", "pps.csv", "stable_periods.json",
            "manifest.json"} <= set(snapshot(d["filt"]))
    assert {"pps.csv", "pps.svg"} <= set(snapshot(d["pps"]))
    with open(d["exp1"] / "drift_exp1.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and {"delta", "drift_delta", "mae", "mape"} <= set(rows[0])
    periods = json.loads((d["filt"] / "stable_periods.json").read_text())["stable_periods"]
    with_period = {str(p["turbine_id"]) for p in periods}
    assert with_period and {r["turbine"] for r in rows} == with_period
    summary = json.loads((d["report"] / "summary.json").read_text())
    assert sum(summary["summary_exp1"]["counts"].values()) == len(with_period)


def test_manifest_lists_every_output(chain):
    d, _ = chain
    for out in d.values():
        files = snapshot(out)
        manifest = json.loads(files.pop("manifest.json"))
        assert set(manifest["outputs"]) == set(files)


def test_filtered_frames_are_subsets(chain):
    d, _ = chain
    raw = {f.turbine_id: f for f in D.load_csv(d["gen"] / "scada.csv")}
    for f in D.load_csv(d["filt"] / "scada.csv"):
        assert np.isin(f.times, raw[f.turbine_id].times).all()


def test_rerun_reproduces(chain, tmp_path):
    d, _ = chain
    for name in ("filt", "exp2"):
        assert run("rerun", "--manifest", d[name] / "manifest.json", "--out", tmp_path / name, "--jobs", 2) == 0
        assert snapshot(tmp_path / name) == snapshot(d[name])


def test_rerun_missing_manifest(tmp_path):
    assert run("rerun", "--manifest", tmp_path / "nope.json", "--out", tmp_path) == 2


def test_strict_voting_flag_changes_config(chain, tmp_path):
    d, cfg = chain
    assert run("filter", "--in", d["gen"], "--out", tmp_path / "lenient", "--config", cfg, "--seed", 5,
               "--strict-voting", "off") == 0
    manifest = json.loads((tmp_path / "lenient" / "manifest.json").read_text())
    assert manifest["args"]["strict_voting"] is False
