import json

import pytest

from sbmfbm.report import ReportSchemaError, figure_tables, load_tables, write_figure_tables


def _tables():
    mae = [
        {"model": "SBM", "alpha_gt": a, "N": 200, "sigma_mn": 0.0, "prior": "correct", "mae": 0.1 * a,
         "stderr": 0.01, "n": 50, "mae_true_model": 0.05, "stderr_true_model": 0.01, "ambiguous": 0,
         "n_failed": 0}
        for a in (0.4, 1.6)
    ] + [
        {"model": "SBM", "alpha_gt": "uniform", "N": n, "sigma_mn": 0.0, "prior": p, "mae": 0.2,
         "stderr": 0.01, "n": 300, "mae_true_model": 0.2, "stderr_true_model": 0.01, "ambiguous": 0,
         "n_failed": 0}
        for n in (50, 400) for p in ("correct", "wrong")
    ]
    f1 = [{"alpha_gt": 0.4, "N": 200, "sigma_mn": 0.0, "prior": "correct", "f1": 0.9, "stderr": 0.03,
           "n_total": 100, "n_failed": 0}]
    conf = [{"alpha_gt": 0.4, "N": 200, "sigma_mn": 1.0, "prior": "correct", "sbm_as_sbm": 30,
             "sbm_as_fbm": 20, "fbm_as_sbm": 5, "fbm_as_fbm": 45}]
    ctrw = [{"alpha_gt": a, "N": 200, "sigma_mn": 0.1, "prior": "correct", "n": 50, "n_sbm": k,
             "n_fbm": 50 - k, "frac_sbm": k / 50, "frac_fbm": 1 - k / 50, "n_failed": 0}
            for a, k in ((0.3, 45), (0.7, 30))]
    return {"mae": mae, "f1": f1, "confusion": conf, "ctrw": ctrw}


def _report_file(tmp_path, tables):
    path = tmp_path / "benchmark.json"
    path.write_text(json.dumps({"config": {}, "config_hash": "h", "version": "v", "tables": tables}))
    return path


def test_figure_tables_tidy(tmp_path):
    figs = figure_tables(load_tables([_report_file(tmp_path, _tables())]))
    assert set(figs) == {"mae_sbm", "mae_weighted_vs_true", "mae_vs_n", "f1", "confusion",
                         "ctrw_assignment"}
    for name, rows in figs.items():
        if name != "confusion":
            assert {"x", "y", "yerr", "series"} <= set(rows[0])
    assert [r["x"] for r in figs["mae_vs_n"]] == [50, 400, 50, 400]
    assert [r["y"] for r in figs["ctrw_assignment"]] == [0.9, 0.6]
    assert len(figs["mae_weighted_vs_true"]) == 4


def test_written_files_round_trip(tmp_path):
    figs = figure_tables(load_tables([_report_file(tmp_path, _tables())]))
    paths = write_figure_tables(figs, tmp_path / "out", gnuplot=True)
    assert any(p.suffix == ".gp" for p in paths)
    mae = tmp_path / "out" / "fig_mae_sbm.csv"
    assert mae.read_text().splitlines()[0] == "x,y,yerr,series,alpha_gt,mae,stderr,N,sigma_mn,prior"


def test_csv_input_round_trip(tmp_path):
    from sbmfbm.campaign import TABLE_COLUMNS, to_csv

    tables = _tables()
    paths = []
    for name, cols in TABLE_COLUMNS.items():
        p = tmp_path / f"benchmark_{name}.csv"
        p.write_text(to_csv(tables[name], cols, {"config_hash": "h", "version": "v"}))
        paths.append(p)
    loaded = load_tables(paths)
    assert loaded["mae"][0]["alpha_gt"] == 0.4 and loaded["mae"][2]["alpha_gt"] == "uniform"
    assert loaded["confusion"][0]["sbm_as_fbm"] == 20
    assert figure_tables(loaded).keys() == figure_tables(tables).keys()


def test_missing_column_in_json_named(tmp_path):
    tables = _tables()
    del tables["confusion"][0]["fbm_as_sbm"]
    with pytest.raises(ReportSchemaError, match="fbm_as_sbm"):
        load_tables([_report_file(tmp_path, tables)])


def test_unknown_inputs_rejected(tmp_path):
    other = tmp_path / "notes.txt"
    other.write_text("x")
    with pytest.raises(ReportSchemaError):
        load_tables([other])
    bad = tmp_path / "benchmark_other.csv"
    bad.write_text("a,b\n")
    with pytest.raises(ReportSchemaError):
        load_tables([bad])
