"""
Command-line entry point for the experiment harness.

    python cli.py simulate --config configs/max_limit.json --workers 4
    python cli.py limit --config configs/max_limit.json --out results
    python cli.py verify --out results
    python cli.py report --out results

Exit code is 0 iff every result row passed.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from app import settings
from app.services import harness
from app.services.errors import ConfigError, SimulationError
from app.schemas import RESULT_COLUMNS, ExperimentConfig

logger = logging.getLogger("cli")

CONFIG_DIR = Path(__file__).resolve().parent / "configs"


def _t_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--t expects comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="renewal-extremes", description="Renewal extremes experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config_required: bool) -> None:
        p.add_argument("--config", action="append", required=config_required, help="experiment JSON config")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, default=settings.WORKERS, help="worker processes")
        p.add_argument("--reps", type=int, help="replication count override")
        p.add_argument("--t", type=_t_list, help="comma-separated horizons override")

    common(sub.add_parser("simulate", help="run experiment configs"), True)
    common(sub.add_parser("limit", help="export limit-law grids"), True)
    common(sub.add_parser("verify", help="run every shipped config (or the given ones)"), False)
    report = sub.add_parser("report", help="summarize results.csv files under --out")
    report.add_argument("--out", default=settings.OUTPUT_DIR)
    return parser


def _load(path: str, args: argparse.Namespace, out: Optional[str]) -> ExperimentConfig:
    config = harness.load_config(path)
    return harness.apply_overrides(config, seed=args.seed, reps=args.reps, t_grid=args.t, out=out)


def _print_rows(frame: pd.DataFrame) -> None:
    with pd.option_context("display.max_rows", None, "display.width", 160):
        print(frame[RESULT_COLUMNS].to_string(index=False))


def cmd_simulate(args: argparse.Namespace, paths: List[str]) -> int:
    all_passed = True
    multiple = len(paths) > 1
    for path in paths:
        out = args.out
        if out is not None and multiple:
            out = str(Path(out) / Path(path).stem)
        config = _load(path, args, out)
        result = harness.run(config, workers=args.workers)
        _print_rows(pd.DataFrame([row.model_dump() for row in result.rows]))
        all_passed &= result.all_passed
        logger.info(f"{path}: {'PASS' if result.all_passed else 'FAIL'} -> {config.out}")
    return 0 if all_passed else 1


def cmd_limit(args: argparse.Namespace) -> int:
    for path in args.config:
        config = _load(path, args, args.out)
        written = harness.export_limit_grid(config, config.out)
        print(written)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    paths = args.config or sorted(str(p) for p in CONFIG_DIR.glob("*.json"))
    if not paths:
        raise ConfigError(f"No configs found in {CONFIG_DIR}")
    # every config gets its own folder under --out
    root = Path(args.out or settings.OUTPUT_DIR)
    all_passed = True
    for path in paths:
        config = _load(path, args, str(root / Path(path).stem))
        result = harness.run(config, workers=args.workers)
        all_passed &= result.all_passed
        print(f"{'PASS' if result.all_passed else 'FAIL'}  {Path(path).stem}")
    return 0 if all_passed else 1


def cmd_report(args: argparse.Namespace) -> int:
    files = sorted(Path(args.out).rglob("results.csv"))
    if not files:
        print(f"No results.csv under {args.out}")
        return 1
    frame = pd.concat([pd.read_csv(f) for f in files], ignore_index=True)
    _print_rows(frame)
    failed = frame[~frame["passed"].astype(bool)]
    print(f"\n{len(frame) - len(failed)}/{len(frame)} rows passed")
    return 0 if failed.empty else 1


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=settings.LOG_LEVEL)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args, args.config)
        if args.command == "limit":
            return cmd_limit(args)
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_report(args)
    except ConfigError as exc:
        print(f"Config error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
