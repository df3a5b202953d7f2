"""Dataset generation, batch inference and benchmark aggregation.

A benchmark is a grid of cells ``(model, alpha, N, sigma_mn)`` with
``n_traj`` trajectories each.  Every trajectory has a stable id that encodes
its cell and index, and its seed is derived from (master seed, id), so any
subset of a dataset can be regenerated on its own.  Inference results are
cached per ``(config hash, prior, trajectory id)`` which makes interrupted
campaigns resumable; aggregation always walks trajectories in id order, so
the output does not depend on worker count or completion order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import NonConvergenceError, NumericalDomainError, ParameterError
from .inference import (
    MODEL_ORDER,
    TrajectoryInference,
    confusion_matrix,
    derive_seed,
    f1_score,
    infer_trajectory,
    mae,
)
from .likelihood import FBM, SBM
from .priors import PriorSpec, draw_ground_truth, noise_prior_max_for, prior_for
from .simulate import CTRW, TrajectoryRecord, simulate_ctrw, simulate_fbm, simulate_sbm, stream

log = logging.getLogger(__name__)

GROUND_TRUTH_KEY = 1_000_003


@dataclass(frozen=True)
class Cell:
    model: str
    alpha: float | str
    n_steps: int
    sigma_mn: float

    @property
    def alpha_label(self) -> str:
        return "U" if self.alpha == "uniform" else f"{self.alpha:.4g}"

    def traj_id(self, j: int) -> str:
        return f"{self.model}-a{self.alpha_label}-N{self.n_steps}-mn{self.sigma_mn:g}-{j:05d}"


def cells_of(cfg: RunConfig) -> list[Cell]:
    return [
        Cell(m, a, n, s)
        for m in cfg.models
        for a in cfg.alphas
        for n in cfg.n_steps
        for s in cfg.sigma_mn
    ]


def trajectory_ids(cfg: RunConfig) -> list[tuple[Cell, int, str]]:
    return [(c, j, c.traj_id(j)) for c in cells_of(cfg) for j in range(cfg.n_traj)]


def provenance(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.config_hash(), "version": __version__}


def generate_trajectory(cfg: RunConfig, cell: Cell, j: int) -> TrajectoryRecord:
    traj_id = cell.traj_id(j)
    seed = derive_seed(cfg.seed, traj_id)
    if cell.model == CTRW:
        rec = simulate_ctrw(float(cell.alpha), cell.n_steps, cfg.dims, cfg.dt, cfg.ds, seed,
                            cell.sigma_mn, traj_id)
    else:
        spec = PriorSpec(cell.model, dt=cfg.dt)
        rng = stream(seed, GROUND_TRUTH_KEY)
        params = draw_ground_truth(spec, rng, cell.alpha, cell.sigma_mn)
        sim = simulate_sbm if cell.model == SBM else simulate_fbm
        rec = sim(params, cell.n_steps, cfg.dims, seed, traj_id)
    rec.provenance = provenance(cfg)
    return rec


def priors_for(cfg: RunConfig, prior: str, sigma_mn: float) -> dict:
    noise_max = (noise_prior_max_for(sigma_mn) if cfg.noise_prior_max == "auto"
                 else float(cfg.noise_prior_max))
    return {m: prior_for(m, prior, noise_max, cfg.dt) for m in cfg.inference_models}


def write_jsonl(path, rows) -> None:
    """Write dict rows as JSON Lines atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    os.replace(tmp, path)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
    os.replace(tmp, path)


def read_jsonl(path):
    """Yield ``(line_number, dict | None, error | None)`` for each non-blank line."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line), None
            except json.JSONDecodeError as exc:
                yield lineno, None, str(exc)


# ---------------------------------------------------------------------------
# dataset generation


def simulate_dataset(cfg: RunConfig, out_path) -> int:
    """Write every trajectory of the grid to a JSON-Lines file."""
    rows = [generate_trajectory(cfg, c, j).to_dict() for c, j, _ in trajectory_ids(cfg)]
    write_jsonl(out_path, rows)
    return len(rows)


# ---------------------------------------------------------------------------
# inference jobs


def _record_for(inf: TrajectoryInference, prior: str, cell: Cell | None, cfg: RunConfig) -> dict:
    d = inf.to_dict()
    d["prior"] = prior
    if cell is not None:
        d["cell"] = {"model": cell.model, "alpha": cell.alpha, "n_steps": cell.n_steps,
                     "sigma_mn": cell.sigma_mn}
    d["provenance"] = provenance(cfg)
    return d


def infer_record(cfg: RunConfig, traj: TrajectoryRecord, prior: str, cell: Cell | None = None) -> dict:
    sigma = float(traj.ground_truth.get("sigma_mn", 0.0)) if cell is None else cell.sigma_mn
    inf = infer_trajectory(traj, priors_for(cfg, prior, sigma), cfg.nested_config(), cfg.seed)
    return _record_for(inf, prior, cell, cfg)


def _cache_path(root: Path, cfg: RunConfig, prior: str, traj_id: str) -> Path:
    return root / "cache" / cfg.config_hash() / prior / f"{traj_id}.json"


def _benchmark_job(payload):
    cfg_dict, cell_tuple, j, prior, cache_file = payload
    cfg = RunConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in cfg_dict.items()})
    cell = Cell(*cell_tuple)
    traj_id = cell.traj_id(j)
    try:
        traj = generate_trajectory(cfg, cell, j)
        rec = infer_record(cfg, traj, prior, cell)
    except (NonConvergenceError, NumericalDomainError, ParameterError, ValueError) as exc:
        return traj_id, prior, None, f"{type(exc).__name__}: {exc}"
    _write_json(Path(cache_file), rec)
    return traj_id, prior, rec, None


def _run_jobs(fn, payloads, workers: int, on_done=None):
    """Run ``fn`` over payloads; results come back in completion order."""
    if workers <= 1 or len(payloads) <= 1:
        for p in payloads:
            res = fn(p)
            if on_done:
                on_done(res)
            yield res
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for res in pool.map(fn, payloads, chunksize=1):
            if on_done:
                on_done(res)
            yield res


# ---------------------------------------------------------------------------
# aggregation


def _fmt_alpha(a):
    return a if a == "uniform" else float(a)


def _cell_key(cell: dict, prior: str) -> tuple:
    return (cell["model"], str(cell["alpha"]), cell["n_steps"], cell["sigma_mn"], prior)


def aggregate(records: list[dict], failures: list[dict] = ()) -> dict:
    """MAE, F1, confusion and CTRW tables from per-trajectory records.

    Failed trajectories are counted in ``n_failed``; a cell where every
    trajectory failed still gets a row, with empty metric fields.
    """
    by_cell = defaultdict(list)
    failed = defaultdict(int)
    for r in records:
        by_cell[_cell_key(r["cell"], r["prior"])].append(r)
    for f in failures:
        if "cell" in f:
            key = _cell_key(f["cell"], f["prior"])
            failed[key] += 1
            by_cell.setdefault(key, [])

    def sort_key(k):
        model, alpha, n, s, prior = k
        return (model, alpha == "uniform", float(alpha) if alpha != "uniform" else 0.0, n, s, prior)

    mae_rows = []
    for key in sorted(by_cell, key=sort_key):
        model, alpha, n, s, prior = key
        rs = by_cell[key]
        row = {"model": model, "alpha_gt": _fmt_alpha(alpha), "N": n, "sigma_mn": s, "prior": prior,
               "mae": None, "stderr": None, "n": len(rs), "mae_true_model": None,
               "stderr_true_model": None, "ambiguous": 0, "n_failed": failed[key]}
        mae_rows.append(row)
        if not rs:
            continue
        gt = [r["ground_truth"]["alpha"] for r in rs]
        row["mae"], row["stderr"] = mae([r["alpha_estimate"] for r in rs], gt)
        if model in MODEL_ORDER:
            mt, set_ = mae([r["models"][model]["alpha_median"] for r in rs], gt)
            row.update(mae_true_model=mt, stderr_true_model=set_)
        row["ambiguous"] = sum(bool(r["ambiguous"]) for r in rs)

    pooled = defaultdict(list)
    ctrw = defaultdict(list)
    pooled_failed, ctrw_failed = defaultdict(int), defaultdict(int)
    for (model, alpha, n, s, prior), rs in by_cell.items():
        target, nf = (pooled, pooled_failed) if model in MODEL_ORDER else (ctrw, ctrw_failed)
        target[(alpha, n, s, prior)].extend(rs)
        nf[(alpha, n, s, prior)] += failed[(model, alpha, n, s, prior)]

    def pkey(k):
        alpha, n, s, prior = k
        return (alpha == "uniform", float(alpha) if alpha != "uniform" else 0.0, n, s, prior)

    f1_rows, conf_rows = [], []
    for key in sorted(pooled, key=pkey):
        alpha, n, s, prior = key
        rs = sorted(pooled[key], key=lambda r: r["id"])
        base = {"alpha_gt": _fmt_alpha(alpha), "N": n, "sigma_mn": s, "prior": prior}
        if not rs:
            f1_rows.append({**base, "f1": None, "stderr": None, "n_total": 0,
                            "n_failed": pooled_failed[key]})
            conf_rows.append({**base, **dict.fromkeys(CONFUSION_COLUMNS[4:])})
            continue
        assigned = [r["assigned"] for r in rs]
        truth = [r["true_model"] for r in rs]
        f1, se = f1_score(assigned, truth)
        cm = confusion_matrix(assigned, truth)
        f1_rows.append({**base, "f1": f1, "stderr": se, "n_total": len(rs),
                        "n_failed": pooled_failed[key]})
        conf_rows.append({**base, "sbm_as_sbm": int(cm[0, 0]), "sbm_as_fbm": int(cm[0, 1]),
                          "fbm_as_sbm": int(cm[1, 0]), "fbm_as_fbm": int(cm[1, 1])})

    ctrw_rows = []
    for key in sorted(ctrw, key=pkey):
        alpha, n, s, prior = key
        rs = ctrw[key]
        n_sbm = sum(r["assigned"] == SBM for r in rs)
        frac = n_sbm / len(rs) if rs else None
        ctrw_rows.append({"alpha_gt": _fmt_alpha(alpha), "N": n, "sigma_mn": s, "prior": prior,
                          "n": len(rs), "n_sbm": n_sbm, "n_fbm": len(rs) - n_sbm,
                          "frac_sbm": frac, "frac_fbm": None if frac is None else 1.0 - frac,
                          "n_failed": ctrw_failed[key]})
    return {"mae": mae_rows, "f1": f1_rows, "confusion": conf_rows, "ctrw": ctrw_rows}


MAE_COLUMNS = ["model", "alpha_gt", "N", "sigma_mn", "prior", "mae", "stderr", "n",
               "mae_true_model", "stderr_true_model", "ambiguous", "n_failed"]
F1_COLUMNS = ["alpha_gt", "N", "sigma_mn", "prior", "f1", "stderr", "n_total", "n_failed"]
CONFUSION_COLUMNS = ["alpha_gt", "N", "sigma_mn", "prior", "sbm_as_sbm", "sbm_as_fbm",
                     "fbm_as_sbm", "fbm_as_fbm"]
CTRW_COLUMNS = ["alpha_gt", "N", "sigma_mn", "prior", "n", "n_sbm", "n_fbm", "frac_sbm", "frac_fbm",
                "n_failed"]
TABLE_COLUMNS = {"mae": MAE_COLUMNS, "f1": F1_COLUMNS, "confusion": CONFUSION_COLUMNS,
                 "ctrw": CTRW_COLUMNS}


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: list[dict], columns: list[str], prov: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns + ["config_hash", "version"])
    for r in rows:
        w.writerow([_csv_value(r.get(c)) for c in columns] + [prov["config_hash"], prov["version"]])
    return buf.getvalue()


@dataclass
class BenchmarkReport:
    config: dict
    config_hash: str
    version: str
    tables: dict
    records: list = field(repr=False, default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failures

    def table(self, name: str) -> list[dict]:
        return self.tables[name]

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        prov = {"config_hash": self.config_hash, "version": self.version}
        paths = {}
        for name, cols in TABLE_COLUMNS.items():
            p = out / f"benchmark_{name}.csv"
            p.write_text(to_csv(self.tables[name], cols, prov))
            paths[name] = p
        paths["json"] = out / "benchmark.json"
        _write_json(paths["json"], self.to_dict())
        return paths

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "config": self.config,
            "config_hash": self.config_hash,
            "version": self.version,
            "tables": self.tables,
            "failures": self.failures,
            "records": self.records,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkReport":
        return cls(d["config"], d["config_hash"], d["version"], d["tables"],
                   d.get("records", []), d.get("failures", []))


def run_benchmark(cfg: RunConfig, out_dir, resume: bool = True, progress=None) -> BenchmarkReport:
    """Simulate and infer the whole grid, reusing cached results when ``resume``."""
    cfg.validate()
    root = Path(out_dir)
    jobs, records, failures, cells = [], {}, [], {}
    cfg_dict = cfg.to_dict()
    for cell, j, traj_id in trajectory_ids(cfg):
        for prior in cfg.priors:
            cache = _cache_path(root, cfg, prior, traj_id)
            if resume and cache.exists():
                try:
                    records[(traj_id, prior)] = json.loads(cache.read_text())
                    continue
                except json.JSONDecodeError:
                    log.warning("discarding corrupt cache entry %s", cache)
            cell_tuple = (cell.model, cell.alpha, cell.n_steps, cell.sigma_mn)
            cells[traj_id] = dict(zip(("model", "alpha", "n_steps", "sigma_mn"), cell_tuple))
            jobs.append((cfg_dict, cell_tuple, j, prior, str(cache)))
    log.info("%d cached, %d to run (config %s)", len(records), len(jobs), cfg.config_hash())
    done = 0
    for traj_id, prior, rec, err in _run_jobs(_benchmark_job, jobs, cfg.worker_count()):
        done += 1
        if err is not None:
            log.error("trajectory %s (%s prior) failed: %s", traj_id, prior, err)
            failures.append({"id": traj_id, "prior": prior, "error": err, "cell": cells[traj_id]})
        else:
            records[(traj_id, prior)] = rec
        if progress:
            progress(done, len(jobs))
    ordered = [records[k] for k in sorted(records)]
    failures.sort(key=lambda f: (f["id"], f["prior"]))
    return BenchmarkReport(cfg_dict, cfg.config_hash(), __version__, aggregate(ordered, failures),
                           ordered, failures)


def infer_file(cfg: RunConfig, in_path, prior: str):
    """Run inference on every record of a trajectory JSON-Lines file.

    Returns ``(records, failures)``; malformed lines become failures.
    """
    trajs, failures = [], []
    for lineno, obj, err in read_jsonl(in_path):
        if err is not None:
            failures.append({"line": lineno, "id": None, "error": err})
            continue
        try:
            trajs.append(TrajectoryRecord.from_dict(obj))
        except (ValueError, TypeError, KeyError) as exc:
            failures.append({"line": lineno, "id": obj.get("id") if isinstance(obj, dict) else None,
                             "error": str(exc)})
    payloads = [(cfg.to_dict(), t.to_dict(), prior) for t in trajs]
    out = []
    for rec, fail in _run_jobs(_infer_job, payloads, cfg.worker_count()):
        if fail is not None:
            failures.append(fail)
        else:
            out.append(rec)
    out.sort(key=lambda r: r["id"])
    return out, failures


def _infer_job(payload):
    cfg_dict, traj_dict, prior = payload
    cfg = RunConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in cfg_dict.items()})
    traj = TrajectoryRecord.from_dict(traj_dict)
    try:
        return infer_record(cfg, traj, prior), None
    except (NonConvergenceError, NumericalDomainError, ParameterError, ValueError) as exc:
        return None, {"id": traj.id, "error": f"{type(exc).__name__}: {exc}"}
