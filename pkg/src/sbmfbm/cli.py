"""Command-line front end: ``sbmfbm {simulate,infer,benchmark,report}``.

Exit codes: 0 success, 1 usage or configuration error, 2 partial failure
(some trajectories failed, or all of them did).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .campaign import _write_json, infer_file, provenance, run_benchmark, simulate_dataset, write_jsonl
from .config import ConfigError, RunConfig, dump_config_text, load_config
from .presets import PRESETS, preset
from .report import ReportSchemaError, figure_tables, load_tables, write_figure_tables

log = logging.getLogger("sbmfbm")

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sbmfbm", description="Bayesian SBM/FBM model selection for trajectories.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_default):
        sp.add_argument("--config", type=Path, help="key = value configuration file")
        sp.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
        sp.add_argument("--workers", type=_nonneg, help="worker processes, 0 = all cores")
        sp.add_argument("--out", type=Path, default=Path(out_default), help="output directory")

    sp = sub.add_parser("simulate", help="generate a trajectory dataset (JSON Lines)")
    common(sp, "out")

    sp = sub.add_parser("infer", help="run model selection on a trajectory file")
    sp.add_argument("input", type=Path, help="trajectory JSON-Lines file")
    common(sp, "out")
    sp.add_argument("--prior", choices=("correct", "wrong"), default="correct")

    sp = sub.add_parser("benchmark", help="simulate and infer a whole grid, then aggregate")
    common(sp, "out")
    sp.add_argument("--preset", choices=sorted(PRESETS), help="named campaign instead of --config")
    sp.add_argument("--prior", choices=("correct", "wrong"), help="restrict to one prior")
    sp.add_argument("--resume", action="store_true", help="reuse cached per-trajectory results")

    sp = sub.add_parser("report", help="turn benchmark outputs into per-figure tables")
    sp.add_argument("inputs", type=Path, nargs="+", help="benchmark.json or benchmark_*.csv files")
    sp.add_argument("--out", type=Path, default=Path("figures"))
    sp.add_argument("--gnuplot", action="store_true", help="also write gnuplot scripts")
    return p


def _config(args) -> RunConfig:
    if getattr(args, "preset", None):
        if args.config:
            raise UsageError("--preset and --config are mutually exclusive")
        cfg = preset(args.preset)
    elif args.config:
        cfg = load_config(args.config)
    else:
        cfg = RunConfig().validate()
    over = {"seed": args.seed, "workers": args.workers}
    if getattr(args, "prior", None) and args.command == "benchmark":
        over["priors"] = (args.prior,)
    return cfg.with_overrides(**over)


def _write_run_config(out: Path, cfg: RunConfig) -> None:
    out.mkdir(parents=True, exist_ok=True)
    prov = provenance(cfg)
    header = f"# config_hash = {prov['config_hash']}\n# version = {prov['version']}\n"
    (out / "config.txt").write_text(header + dump_config_text(cfg))


def cmd_simulate(args) -> int:
    cfg = _config(args)
    _write_run_config(args.out, cfg)
    path = args.out / "trajectories.jsonl"
    n = simulate_dataset(cfg, path)
    print(f"wrote {n} trajectories to {path}")
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = _config(args)
    if not args.input.exists():
        raise UsageError(f"input file not found: {args.input}")
    records, failures = infer_file(cfg, args.input, args.prior)
    for f in failures:
        where = f"line {f['line']}" if "line" in f else f"id {f['id']}"
        log.error("skipped %s: %s", where, f["error"])
    if not records and not failures:
        print(f"error: no trajectories in {args.input}", file=sys.stderr)
        return EXIT_PARTIAL
    _write_run_config(args.out, cfg)
    path = args.out / "inference.jsonl"
    write_jsonl(path, records)
    _write_json(args.out / "inference_summary.json",
                {"n_ok": len(records), "n_failed": len(failures), "failures": failures,
                 "prior": args.prior, "config": cfg.to_dict(), **provenance(cfg)})
    print(f"inferred {len(records)} trajectories, {len(failures)} failed; wrote {path}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _config(args)
    _write_run_config(args.out, cfg)

    def progress(done, total):
        if done % 25 == 0 or done == total:
            log.info("%d/%d trajectories", done, total)

    rep = run_benchmark(cfg, args.out, resume=args.resume, progress=progress)
    paths = rep.write(args.out)
    print(f"benchmark {rep.config_hash}: {len(rep.records)} results, {len(rep.failures)} failed; "
          f"tables in {args.out}")
    for name in ("mae", "f1", "confusion", "ctrw"):
        log.info("%s -> %s", name, paths[name])
    return EXIT_OK if rep.complete else EXIT_PARTIAL


def cmd_report(args) -> int:
    for p in args.inputs:
        if not p.exists():
            raise UsageError(f"input file not found: {p}")
    figs = figure_tables(load_tables(args.inputs))
    if not figs:
        print("error: input files contain no table rows", file=sys.stderr)
        return EXIT_PARTIAL
    written = write_figure_tables(figs, args.out, gnuplot=args.gnuplot)
    print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "infer": cmd_infer, "benchmark": cmd_benchmark,
            "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, ReportSchemaError) as exc:
        print(f"sbmfbm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"sbmfbm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
