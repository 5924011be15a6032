#!/usr/bin/env python3
"""
Main entry point for the hierarchical tensor solver toolkit.
Runs single experiments, parameter sweeps and the built-in oracle checks.
"""
import argparse
import sys
from pathlib import Path
from loguru import logger

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from config import get_settings
from src.utils.errors import HTSolveError, InvalidConfigError
from src.utils.logger import setup_logging
from src.experiment.config import load_experiment_config
from src.experiment.runner import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK, run_experiment
from src.experiment.sweep import run_sweep
from src.experiment.validate import format_report, run_checks


def solve_job(config_path: str, overrides: list[str], out_path: str | None) -> int:
    """
    Run one configured solver and write its CSV trace.

    Args:
        config_path: key=value experiment file
        overrides: key=value strings applied on top
        out_path: CSV destination (falls back to the out_path key)

    Returns:
        Process exit code
    """
    settings = get_settings()
    config = load_experiment_config(config_path, overrides)
    if out_path is None and config.out_path is None:
        raise InvalidConfigError("out_path", "pass --out or set out_path in the config")
    result = run_experiment(
        config,
        out_path,
        dense_solve_cap=settings.dense_solve_cap,
        expsum_terms=settings.expsum_terms,
        max_iter=settings.max_iter,
    )
    return result.exit_code


def validate_job(seed: int) -> int:
    """Run the oracle cross-checks and print the report."""
    logger.info("=" * 60)
    logger.info("Running built-in oracle checks")
    logger.info("=" * 60)
    results = run_checks(seed=seed)
    print(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def sweep_job(config_path: str, grid_path: str, out_dir: str, overrides: list[str], workers: int | None) -> int:
    settings = get_settings()
    outcomes = run_sweep(
        config_path,
        grid_path,
        out_dir,
        overrides,
        workers=workers or settings.sweep_workers,
        limits=dict(
            dense_solve_cap=settings.dense_solve_cap,
            expsum_terms=settings.expsum_terms,
            max_iter=settings.max_iter,
        ),
    )
    return max((code for _, code in outcomes), default=EXIT_OK)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Thresholded Richardson solvers on hierarchical tensors"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="Run one experiment")
    solve.add_argument("--config", required=True, help="key=value experiment file")
    solve.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override a config key")
    solve.add_argument("--out", help="CSV trace destination")

    validate = commands.add_parser("validate", help="Run the built-in oracle checks")
    validate.add_argument("--seed", type=int, default=0, help="Seed for the sampled checks")

    sweep = commands.add_parser("sweep", help="Run a parameter grid")
    sweep.add_argument("--config", required=True, help="Base key=value experiment file")
    sweep.add_argument("--grid", required=True, help="key=v1,v2,... grid file")
    sweep.add_argument("--out-dir", required=True, help="Directory for run_<index>.csv")
    sweep.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override a base config key")
    sweep.add_argument("--workers", type=int, help="Worker processes (default from settings)")
    return parser


def main(argv: list[str] | None = None) -> int:
    """Main entry point for CLI."""
    args = build_parser().parse_args(argv)
    settings = get_settings()

    # validate leaves no files behind besides its report
    setup_logging(settings.log_level, None if args.command == "validate" else settings.log_dir)

    try:
        if args.command == "solve":
            return solve_job(args.config, args.set, args.out)
        if args.command == "validate":
            return validate_job(args.seed)
        return sweep_job(args.config, args.grid, args.out_dir, args.set, args.workers)
    except InvalidConfigError as e:
        logger.error(f"Configuration error in '{e.key}': {e}")
        return EXIT_CONFIG
    except HTSolveError as e:
        logger.error(f"{args.command} failed: {e}")
        raise


if __name__ == "__main__":
    sys.exit(main())
