"""Command-line runner: ``ripchain <mode> --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..dynamics import NumericalError
from .config import MODES, ConfigError, ExperimentConfig, load_config, parse_config
from .io import RunManifest, read_aggregate, read_pairs, read_profiles, read_series
from .runner import run
from .validate import ValidationReport, run_validation

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

__all__ = [
    "ConfigError", "ExperimentConfig", "RunManifest", "ValidationReport", "load_config", "main",
    "parse_config", "read_aggregate", "read_pairs", "read_profiles", "read_series", "run",
    "run_validation",
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ripchain", description=__doc__)
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", type=Path, required=mode != "validate")
        p.add_argument("--out", type=Path, help="output directory (overrides the config key)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--quiet", action="store_true")
    return parser


def _validate(args, say) -> int:
    report = run_validation()
    for c in report.checks:
        say(f"{'PASS' if c.passed else 'FAIL'}  {c.name:36s} deviation={c.deviation:.3e}  tol={c.tolerance:.1e}")
    if args.out is not None:
        from .io import write_json
        write_json(args.out / "report.json", report.to_dict())
    if not report.passed:
        print("validation failed: " + ", ".join(report.failed), file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    say = (lambda *_: None) if args.quiet else print
    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        if args.mode == "validate":
            return _validate(args, say)
        cfg = load_config(args.config, args.mode)
        out = args.out or (Path(cfg.out) if cfg.out else None)
        if out is None:
            raise ConfigError("out", "no output directory given (use --out or the 'out' key)")
        manifest = run(cfg, out, threads=args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name in sorted(manifest.files):
        say(f"wrote {Path(manifest.out_dir) / name}")
    for failure in manifest.failed_points:
        print(f"sweep point {failure['index']} ({failure['value']}) failed: {failure['error']}", file=sys.stderr)
    say(f"manifest {Path(manifest.out_dir) / 'manifest.json'} ({manifest.elapsed_s:.2f} s)")
    return EXIT_OK
