import csv
import json
import subprocess
import sys

import pytest

from sbmfbm.cli import main

TINY = """
models = SBM, FBM
alphas = 0.5
n_steps = 20
dims = 1
n_traj = 2
n_live = 20
steps_per_replacement = 10
workers = 1
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(TINY)
    return path


def test_simulate_writes_deterministic_file(cfg_file, tmp_path, capsys):
    assert main(["simulate", "--config", str(cfg_file), "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", str(cfg_file), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "trajectories.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "trajectories.jsonl").read_bytes()
    assert len(a.splitlines()) == 4
    assert "config_hash" in (tmp_path / "a" / "config.txt").read_text()
    assert main(["simulate", "--config", str(cfg_file), "--seed", "9", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "trajectories.jsonl").read_bytes() != a


def test_simulate_rejects_superdiffusive_ctrw(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("models = CTRW\nalphas = 1.3\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "CTRW requires alpha <= 1" in capsys.readouterr().err


def test_infer_round_trip(cfg_file, tmp_path):
    main(["simulate", "--config", str(cfg_file), "--out", str(tmp_path)])
    traj = tmp_path / "trajectories.jsonl"
    assert main(["infer", str(traj), "--config", str(cfg_file), "--out", str(tmp_path / "inf")]) == 0
    rows = [json.loads(l) for l in (tmp_path / "inf" / "inference.jsonl").read_text().splitlines()]
    assert len(rows) == 4
    for row in rows:
        assert set(row["models"]) == {"SBM", "FBM"}
        assert row["assigned"] in ("SBM", "FBM")
        assert row["provenance"]["version"]
        for m in row["models"].values():
            assert {"logz", "logz_err", "alpha_median"} <= set(m)
    # the same records come back when the input is reversed
    lines = traj.read_text().splitlines()
    rev = tmp_path / "rev.jsonl"
    rev.write_text("\n".join(reversed(lines)) + "\n")
    assert main(["infer", str(rev), "--config", str(cfg_file), "--out", str(tmp_path / "inf2")]) == 0
    assert (tmp_path / "inf" / "inference.jsonl").read_bytes() == \
        (tmp_path / "inf2" / "inference.jsonl").read_bytes()


def test_infer_partial_and_total_failure(cfg_file, tmp_path):
    main(["simulate", "--config", str(cfg_file), "--out", str(tmp_path)])
    mixed = tmp_path / "mixed.jsonl"
    mixed.write_text((tmp_path / "trajectories.jsonl").read_text().splitlines()[0] + "\n{oops\n")
    assert main(["infer", str(mixed), "--config", str(cfg_file), "--out", str(tmp_path / "m")]) == 2
    summary = json.loads((tmp_path / "m" / "inference_summary.json").read_text())
    assert summary["n_ok"] == 1 and summary["n_failed"] == 1
    broken = tmp_path / "broken.jsonl"
    broken.write_text("{oops\n")
    assert main(["infer", str(broken), "--config", str(cfg_file), "--out", str(tmp_path / "b")]) == 2


def test_infer_empty_input(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["infer", str(empty), "--out", str(tmp_path)]) != 0
    assert "no trajectories" in capsys.readouterr().err


def test_infer_missing_input(tmp_path):
    assert main(["infer", str(tmp_path / "nope.jsonl")]) == 1


@pytest.mark.parametrize("argv", [[], ["bogus"], ["simulate", "--seed", "-3"],
                                  ["infer", "x", "--prior", "flat"], ["benchmark", "--workers", "x"]])
def test_usage_errors_exit_one(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 1


def test_benchmark_then_report(cfg_file, tmp_path):
    out = tmp_path / "bench"
    assert main(["benchmark", "--config", str(cfg_file), "--out", str(out), "--resume"]) == 0
    for name in ("mae", "f1", "confusion", "ctrw"):
        assert (out / f"benchmark_{name}.csv").exists()
    figs = tmp_path / "figs"
    assert main(["report", str(out / "benchmark.json"), "--out", str(figs), "--gnuplot"]) == 0
    rows = list(csv.DictReader(open(figs / "fig_mae_sbm.csv")))
    assert {"x", "y", "yerr", "series", "alpha_gt", "mae", "stderr", "N", "sigma_mn"} <= set(rows[0])
    conf = list(csv.DictReader(open(figs / "fig_confusion.csv")))
    assert {"sbm_as_sbm", "sbm_as_fbm", "fbm_as_sbm", "fbm_as_fbm"} <= set(conf[0])
    assert (figs / "fig_mae_sbm.gp").read_text().startswith("set datafile separator")
    # a CSV table works as report input too
    assert main(["report", str(out / "benchmark_f1.csv"), "--out", str(tmp_path / "f2")]) == 0


def test_benchmark_prior_flag_and_preset_conflict(cfg_file, tmp_path, capsys):
    assert main(["benchmark", "--config", str(cfg_file), "--preset", "ctrw", "--out", str(tmp_path)]) == 1
    assert "mutually exclusive" in capsys.readouterr().err
    assert main(["benchmark", "--config", str(cfg_file), "--prior", "wrong",
                 "--out", str(tmp_path / "w")]) == 0
    data = json.loads((tmp_path / "w" / "benchmark.json").read_text())
    assert {r["prior"] for r in data["records"]} == {"wrong"}


def test_report_schema_mismatch_names_column(tmp_path, capsys):
    bad = tmp_path / "benchmark_mae.csv"
    bad.write_text("model,alpha_gt,N,sigma_mn,prior,stderr,n\nSBM,0.4,50,0,correct,0.1,3\n")
    assert main(["report", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "'mae'" in capsys.readouterr().err


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sbmfbm", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("sbmfbm ")
    proc = subprocess.run([sys.executable, "-m", "sbmfbm", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == 1
