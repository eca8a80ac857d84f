"""Command-line entry point: ``smoothsgd {run,compare,bench,convert-gefcom}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 I/O error.
A diverged run still exits 0; divergence is recorded in the report.
"""
from __future__ import annotations

import argparse
import sys

from .config import FORMATS, ConfigError, OutputConfig, load_config
from .harness import compare_methods, emit_report, report_to_json, rows_to_csv, run_experiment
from .stream_data import DataError, convert_gefcom

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_IO = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smoothsgd", description="Online smoothed-SGD forecasting experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "replay one experiment"), ("compare", "sweep methods x learning rates x seeds")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="report path (default: stdout)")
        p.add_argument("--format", choices=FORMATS, help="report format")
        if name == "compare":
            p.add_argument("--workers", type=int, help="parallel runs")
    p = sub.add_parser("bench", help="time compiled vs pure-Python kernels")
    p.add_argument("--repeat", type=int, default=50)
    p = sub.add_parser("convert-gefcom", help="convert a GEFCom-style load file to hour,value CSV")
    p.add_argument("src")
    p.add_argument("dst")
    p.add_argument("--column", default="LOAD")
    return ap


def _load(args):
    cfg = load_config(args.config)
    out = OutputConfig(args.out if args.out is not None else cfg.output.path, args.format or cfg.output.format)
    changes = {"output": out}
    if args.seed is not None:
        changes["seed"] = args.seed
    try:
        return cfg.replace(**changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _emit(report, cfg) -> None:
    if cfg.output.path:
        emit_report(report, cfg.output.path, cfg.output.format)
        return
    if hasattr(report, "to_json"):
        text = report.to_csv() if cfg.output.format == "csv" else report.to_json()
    else:
        text = rows_to_csv(report.rows) if cfg.output.format == "csv" else report_to_json(report)
    sys.stdout.write(text)


def _dispatch(args) -> int:
    if args.command == "run":
        cfg = _load(args)
        _emit(run_experiment(cfg), cfg)
    elif args.command == "compare":
        cfg = _load(args)
        c = cfg.compare
        seeds = [args.seed] if args.seed is not None else c.seeds
        workers = args.workers if args.workers is not None else c.workers
        _emit(compare_methods(cfg, c.etas, c.methods, seeds, workers=workers), cfg)
    elif args.command == "bench":
        from .bench import bench_kernels, format_table

        print(format_table(bench_kernels(repeat=args.repeat)))
    else:
        n = convert_gefcom(args.src, args.dst, args.column)
        print(f"wrote {n} hours to {args.dst}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        if args.command in ("run", "compare") and exc.filename == args.config:
            print(f"config error: cannot read {exc.filename}", file=sys.stderr)
            return EXIT_CONFIG
        if args.command == "convert-gefcom" and exc.filename == args.src:
            print(f"data error: cannot read {exc.filename}", file=sys.stderr)
            return EXIT_DATA
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
