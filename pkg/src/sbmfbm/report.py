"""Plot-ready tables from benchmark outputs.

Every figure table is tidy: one row per point with ``x, y, yerr, series``
plus the descriptive columns it was derived from.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .campaign import TABLE_COLUMNS, BenchmarkReport, _csv_value


class ReportSchemaError(ValueError):
    """An input table lacks a required column."""


def _num(v):
    if v in (None, ""):
        return None
    if v == "uniform":
        return v
    try:
        f = float(v)
    except (TypeError, ValueError):
        return v
    return int(f) if isinstance(v, str) and f.is_integer() and "." not in v and "e" not in v else f


def load_tables(paths) -> dict:
    """Merge benchmark tables from ``benchmark.json`` or ``benchmark_<name>.csv`` files."""
    tables = {name: [] for name in TABLE_COLUMNS}
    for path in map(Path, paths):
        if path.suffix == ".json":
            try:
                data = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise ReportSchemaError(f"{path}: not valid JSON ({exc})") from exc
            if "tables" not in data:
                raise ReportSchemaError(f"{path}: missing column/field 'tables'")
            rep = BenchmarkReport.from_dict(data)
            for name in TABLE_COLUMNS:
                rows = rep.tables.get(name, [])
                _check_rows(rows, name, path)
                tables[name].extend(rows)
        elif path.suffix == ".csv":
            name = path.stem.replace("benchmark_", "", 1)
            if name not in TABLE_COLUMNS:
                raise ReportSchemaError(f"{path}: cannot tell which table this is")
            with open(path, newline="") as fh:
                reader = csv.DictReader(fh)
                header = reader.fieldnames or []
                for col in TABLE_COLUMNS[name]:
                    if col not in header:
                        raise ReportSchemaError(f"{path}: missing column '{col}'")
                tables[name].extend({k: _num(v) for k, v in row.items()} for row in reader)
        else:
            raise ReportSchemaError(f"{path}: expected a .json or .csv benchmark file")
    return tables


def _check_rows(rows, name, path):
    for row in rows:
        for col in TABLE_COLUMNS[name]:
            if col not in row:
                raise ReportSchemaError(f"{path}: table '{name}' missing column '{col}'")


def figure_tables(tables: dict) -> dict:
    """Derive one tidy table per figure type."""
    figs = {}
    grid_mae = [r for r in tables["mae"] if r["alpha_gt"] != "uniform"]
    for model in ("SBM", "FBM", "CTRW"):
        rows = [r for r in grid_mae if r["model"] == model]
        if rows:
            figs[f"mae_{model.lower()}"] = [
                {"x": r["alpha_gt"], "y": r["mae"], "yerr": r["stderr"],
                 "series": f"N={r['N']} sigma_mn={r['sigma_mn']:g} prior={r['prior']}",
                 "alpha_gt": r["alpha_gt"], "mae": r["mae"], "stderr": r["stderr"],
                 "N": r["N"], "sigma_mn": r["sigma_mn"], "prior": r["prior"]}
                for r in rows
            ]
    weighted_vs_true = []
    for r in grid_mae:
        if r["model"] in ("SBM", "FBM") and r.get("mae_true_model") not in (None, ""):
            base = {"x": r["alpha_gt"], "model": r["model"], "N": r["N"], "sigma_mn": r["sigma_mn"],
                    "prior": r["prior"]}
            weighted_vs_true.append({**base, "y": r["mae"], "yerr": r["stderr"],
                                     "series": f"{r['model']} weighted sigma_mn={r['sigma_mn']:g}"})
            weighted_vs_true.append({**base, "y": r["mae_true_model"], "yerr": r["stderr_true_model"],
                                     "series": f"{r['model']} true sigma_mn={r['sigma_mn']:g}"})
    if weighted_vs_true:
        figs["mae_weighted_vs_true"] = weighted_vs_true
    uni = [r for r in tables["mae"] if r["alpha_gt"] == "uniform"]
    if uni:
        figs["mae_vs_n"] = [
            {"x": r["N"], "y": r["mae"], "yerr": r["stderr"],
             "series": f"{r['model']} {r['prior']} prior", "model": r["model"], "prior": r["prior"],
             "sigma_mn": r["sigma_mn"]}
            for r in sorted(uni, key=lambda r: (r["model"], r["prior"], r["N"]))
        ]
    f1_grid = [r for r in tables["f1"] if r["alpha_gt"] != "uniform"]
    if f1_grid:
        figs["f1"] = [
            {"x": r["alpha_gt"], "y": r["f1"], "yerr": r["stderr"],
             "series": f"N={r['N']} sigma_mn={r['sigma_mn']:g} prior={r['prior']}",
             "alpha_gt": r["alpha_gt"], "f1": r["f1"], "stderr": r["stderr"], "N": r["N"],
             "sigma_mn": r["sigma_mn"], "prior": r["prior"]}
            for r in f1_grid
        ]
    f1_uni = [r for r in tables["f1"] if r["alpha_gt"] == "uniform"]
    if f1_uni:
        figs["f1_vs_n"] = [
            {"x": r["N"], "y": r["f1"], "yerr": r["stderr"], "series": f"{r['prior']} prior",
             "prior": r["prior"], "sigma_mn": r["sigma_mn"]}
            for r in sorted(f1_uni, key=lambda r: (r["prior"], r["N"]))
        ]
    if tables["confusion"]:
        figs["confusion"] = [
            {"alpha_gt": r["alpha_gt"], "N": r["N"], "sigma_mn": r["sigma_mn"], "prior": r["prior"],
             "sbm_as_sbm": r["sbm_as_sbm"], "sbm_as_fbm": r["sbm_as_fbm"],
             "fbm_as_sbm": r["fbm_as_sbm"], "fbm_as_fbm": r["fbm_as_fbm"]}
            for r in tables["confusion"]
        ]
    if tables["ctrw"]:
        figs["ctrw_assignment"] = [
            {"x": r["alpha_gt"], "y": r["frac_sbm"], "yerr": None, "series": "SBM",
             "alpha_gt": r["alpha_gt"], "frac_sbm": r["frac_sbm"], "frac_fbm": r["frac_fbm"],
             "n": r["n"], "N": r["N"], "sigma_mn": r["sigma_mn"], "prior": r["prior"]}
            for r in tables["ctrw"]
        ]
    return figs


def write_figure_tables(figs: dict, out_dir, gnuplot: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows in figs.items():
        cols = list(rows[0].keys())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_csv_value(r.get(c)) for c in cols])
        path = out / f"fig_{name}.csv"
        path.write_text(buf.getvalue())
        written.append(path)
        if gnuplot and "series" in cols:
            written.append(_gnuplot_script(out, name, rows))
    return written


def _gnuplot_script(out: Path, name: str, rows) -> Path:
    series = sorted({r["series"] for r in rows})
    lines = [
        "set datafile separator ','",
        "set key outside",
        f"set title '{name}'",
        "plot \\",
    ]
    plots = []
    for s in series:
        sub = out / f"fig_{name}__{len(plots):02d}.dat"
        pts = sorted((r["x"], r["y"], r["yerr"] or 0.0) for r in rows
                     if r["series"] == s and r["y"] is not None)
        sub.write_text("".join(f"{x},{y},{e}\n" for x, y, e in pts))
        plots.append(f"  '{sub.name}' using 1:2:3 with yerrorlines title '{s}'")
    lines.append(", \\\n".join(plots))
    path = out / f"fig_{name}.gp"
    path.write_text("\n".join(lines) + "\n")
    return path
