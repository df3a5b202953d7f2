import json

import numpy as np
import pytest

from sbmfbm import campaign
from sbmfbm.campaign import (
    BenchmarkReport,
    aggregate,
    cells_of,
    generate_trajectory,
    infer_file,
    read_jsonl,
    run_benchmark,
    simulate_dataset,
    trajectory_ids,
)
from sbmfbm.config import ConfigError, RunConfig, dump_config_text, parse_config_text
from sbmfbm.presets import PRESETS, preset
from sbmfbm.simulate import TrajectoryRecord

TINY = """
models = SBM, FBM
alphas = 0.5, 1.5
n_steps = 20
sigma_mn = 0
dims = 1
n_traj = 2
seed = 17
n_live = 20
steps_per_replacement = 10
workers = 1
"""


@pytest.fixture
def tiny():
    return parse_config_text(TINY)


# -- configuration ---------------------------------------------------------------


def test_config_text_round_trip(tiny):
    again = parse_config_text(dump_config_text(tiny))
    assert again == tiny
    assert again.config_hash() == tiny.config_hash()


def test_config_defaults_and_comments():
    cfg = parse_config_text("alphas = uniform  # drawn per trajectory\nnoise_prior_max = 10\n")
    assert cfg.alphas == ("uniform",) and cfg.noise_prior_max == 10.0
    assert cfg.n_live == 100 and cfg.steps_per_replacement == 40 and cfg.dims == 2


@pytest.mark.parametrize("text", [
    "models = CTRW\nalphas = 1.3", "models = LW", "alphas = 2.5", "dims = 4", "n_traj = 0",
    "priors = flat", "bogus = 1", "n_steps = many", "n_live = 1", "seed = -1",
    "models = CTRW\nalphas = uniform", "noise_prior_max = -1",
])
def test_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_hash_ignores_grid_and_workers(tiny):
    h = tiny.config_hash()
    assert tiny.with_overrides(workers=4, n_traj=9, alphas=(0.3,)).config_hash() == h
    assert tiny.with_overrides(seed=18).config_hash() != h
    assert tiny.with_overrides(n_live=21).config_hash() != h


def test_presets_are_valid():
    for name in PRESETS:
        assert preset(name).models
    with pytest.raises(KeyError):
        preset("nope")


# -- datasets --------------------------------------------------------------------


def test_grid_shape():
    cfg = RunConfig(alphas=(0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8), n_steps=(50, 100, 200),
                    sigma_mn=(0.0, 0.1, 1.0, 10.0), n_traj=3).validate()
    assert len(cells_of(cfg)) == 2 * 9 * 3 * 4
    ids = [i for _, _, i in trajectory_ids(cfg)]
    assert len(ids) == len(set(ids)) == 2 * 9 * 3 * 4 * 3


def test_simulate_dataset_shape_and_determinism(tmp_path):
    cfg = RunConfig(models=("SBM",), alphas=(0.4,), n_steps=(200,), dims=2, n_traj=100).validate()
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert simulate_dataset(cfg, a) == 100
    simulate_dataset(cfg, b)
    assert a.read_bytes() == b.read_bytes()
    rows = [obj for _, obj, _ in read_jsonl(a)]
    assert len(rows) == 100
    for row in rows:
        rec = TrajectoryRecord.from_dict(row)
        assert rec.positions.shape == (2, 201)
        assert rec.provenance["config_hash"] == cfg.config_hash()


def test_trajectory_regenerates_on_its_own(tiny):
    cell = cells_of(tiny)[1]
    a = generate_trajectory(tiny, cell, 1)
    b = generate_trajectory(tiny.with_overrides(n_traj=50), cell, 1)
    np.testing.assert_array_equal(a.positions, b.positions)


def test_uniform_alpha_cells(tmp_path):
    cfg = RunConfig(models=("SBM",), alphas=("uniform",), n_steps=(10,), n_traj=20).validate()
    alphas = [generate_trajectory(cfg, c, j).ground_truth["alpha"] for c, j, _ in trajectory_ids(cfg)]
    assert len(set(alphas)) == 20 and all(0 < a < 2 for a in alphas)


def test_ctrw_cells(tmp_path):
    cfg = RunConfig(models=("CTRW",), alphas=(0.5,), n_steps=(30,), sigma_mn=(0.1,), n_traj=2).validate()
    rec = generate_trajectory(cfg, cells_of(cfg)[0], 0)
    assert rec.model == "CTRW" and rec.ground_truth["sigma_mn"] == pytest.approx(0.1)


# -- benchmark -------------------------------------------------------------------


def _csv_tables(out):
    return {n: (out / f"benchmark_{n}.csv").read_text() for n in ("mae", "f1", "confusion", "ctrw")}


@pytest.fixture(scope="module")
def reference_run(tmp_path_factory):
    cfg = parse_config_text(TINY)
    out = tmp_path_factory.mktemp("ref")
    rep = run_benchmark(cfg, out, resume=True)
    rep.write(out)
    return cfg, out, rep


def test_benchmark_tables(reference_run):
    cfg, out, rep = reference_run
    assert rep.complete and len(rep.records) == 8
    mae_rows = rep.table("mae")
    assert [(r["model"], r["alpha_gt"]) for r in mae_rows] == [
        ("FBM", 0.5), ("FBM", 1.5), ("SBM", 0.5), ("SBM", 1.5)]
    assert all(r["n"] == 2 and r["n_failed"] == 0 for r in mae_rows)
    assert [r["n_total"] for r in rep.table("f1")] == [4, 4]
    for row in rep.table("confusion"):
        assert row["sbm_as_sbm"] + row["sbm_as_fbm"] == 2
        assert row["fbm_as_sbm"] + row["fbm_as_fbm"] == 2
    header = (out / "benchmark_mae.csv").read_text().splitlines()[0]
    assert header.endswith("config_hash,version")
    data = json.loads((out / "benchmark.json").read_text())
    assert BenchmarkReport.from_dict(data).to_dict() == data


def test_resume_after_interruption_is_identical(reference_run, tmp_path):
    cfg, out, _ = reference_run
    run_benchmark(cfg, tmp_path, resume=True)
    cached = sorted((tmp_path / "cache").rglob("*.json"))
    for path in cached[::2]:
        path.unlink()
    cached[1].write_text("{truncated")
    run_benchmark(cfg, tmp_path, resume=True).write(tmp_path)
    assert _csv_tables(tmp_path) == _csv_tables(out)


def test_worker_count_does_not_change_results(reference_run, tmp_path):
    cfg, out, _ = reference_run
    run_benchmark(cfg.with_overrides(workers=2), tmp_path, resume=False).write(tmp_path)
    assert _csv_tables(tmp_path) == _csv_tables(out)


def test_failures_leave_gap_markers(tiny, tmp_path, monkeypatch):
    real = campaign.infer_record

    def flaky(cfg, traj, prior, cell=None):
        if traj.id.startswith("FBM-a1.5"):
            raise ValueError("synthetic failure")
        return real(cfg, traj, prior, cell)

    monkeypatch.setattr(campaign, "infer_record", flaky)
    rep = run_benchmark(tiny, tmp_path, resume=False)
    assert not rep.complete and len(rep.failures) == 2
    gap = [r for r in rep.table("mae") if r["model"] == "FBM" and r["alpha_gt"] == 1.5]
    assert gap[0]["mae"] is None and gap[0]["n_failed"] == 2 and gap[0]["n"] == 0
    f1 = [r for r in rep.table("f1") if r["alpha_gt"] == 1.5][0]
    assert f1["n_total"] == 2 and f1["n_failed"] == 2
    rep.write(tmp_path)
    line = [ln for ln in (tmp_path / "benchmark_mae.csv").read_text().splitlines()
            if ln.startswith("FBM,1.5")][0]
    assert ",,," in line


def test_infer_file_skips_malformed_lines(tiny, tmp_path):
    path = tmp_path / "t.jsonl"
    simulate_dataset(tiny.with_overrides(n_traj=1, models=("SBM",), alphas=(0.5,)), path)
    good = path.read_text()
    path.write_text(good + "{not json\n" + json.dumps({"id": "x", "model": "SBM"}) + "\n")
    records, failures = infer_file(tiny, path, "correct")
    assert len(records) == 1 and len(failures) == 2
    assert failures[0]["line"] == 2 and failures[1]["id"] == "x"


def test_aggregate_ctrw_fractions():
    def rec(i, alpha, assigned):
        return {"id": f"c{i}", "prior": "correct", "assigned": assigned, "true_model": "CTRW",
                "alpha_estimate": 0.5, "ambiguous": False, "ground_truth": {"alpha": alpha},
                "models": {}, "cell": {"model": "CTRW", "alpha": alpha, "n_steps": 10, "sigma_mn": 0.1}}

    tables = aggregate([rec(0, 0.3, "SBM"), rec(1, 0.3, "SBM"), rec(2, 0.3, "FBM"), rec(3, 0.7, "FBM")])
    rows = tables["ctrw"]
    assert [r["alpha_gt"] for r in rows] == [0.3, 0.7]
    assert rows[0]["frac_sbm"] == pytest.approx(2 / 3) and rows[1]["frac_sbm"] == 0.0
    assert tables["f1"] == [] and tables["mae"][0]["mae_true_model"] is None
