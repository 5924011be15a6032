"""
Parameter sweeps: Cartesian product of a key=v1,v2 grid over a base config.
Uses concurrent.futures.ProcessPoolExecutor, one independent run per task.
"""
import itertools
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from loguru import logger

from src.experiment.config import build_experiment_config, parse_overrides, read_key_values
from src.experiment.runner import EXIT_OK, run_experiment
from src.utils.errors import InvalidConfigError


def parse_grid(path: str | Path) -> Dict[str, List[str]]:
    """
    Read a grid file of `key=v1,v2,...` lines.

    Args:
        path: Grid file

    Returns:
        Mapping key -> list of string values, in file order
    """
    grid = {}
    for key, raw in read_key_values(path).items():
        values = [v.strip() for v in raw.split(",") if v.strip()]
        if not values:
            raise InvalidConfigError(key, "grid entry has no values")
        grid[key] = values
    return grid


def expand_grid(base: Dict[str, str], grid: Dict[str, List[str]]) -> List[Dict[str, str]]:
    """Cartesian product of the grid applied on top of base, last key varying fastest."""
    keys = list(grid)
    runs = []
    for combination in itertools.product(*(grid[k] for k in keys)):
        runs.append({**base, **dict(zip(keys, combination))})
    return runs


def _run_one(index: int, values: Dict[str, str], out_dir: str, limits: Dict[str, int]) -> Tuple[int, int]:
    config = build_experiment_config(values)
    result = run_experiment(config, Path(out_dir) / f"run_{index}.csv", **limits)
    return index, result.exit_code


def run_sweep(
    config_path: str | Path,
    grid_path: str | Path,
    out_dir: str | Path,
    overrides: Sequence[str] = (),
    workers: int = 4,
    limits: Dict[str, int] | None = None,
) -> List[Tuple[int, int]]:
    """
    Validate every grid point, then run them across worker processes.

    Args:
        config_path: Base key=value config
        grid_path: Grid file
        out_dir: Directory receiving run_<index>.csv
        overrides: key=value overrides applied to the base config
        workers: Worker processes (1 runs in-process)
        limits: dense_solve_cap / expsum_terms / max_iter defaults for run_experiment

    Returns:
        (index, exit code) per run, ordered by index
    """
    base = read_key_values(config_path)
    base.update(parse_overrides(overrides))
    runs = expand_grid(base, parse_grid(grid_path))
    for values in runs:
        build_experiment_config(values)
    limits = limits or {}
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    logger.info("=" * 60)
    logger.info(f"Sweep: {len(runs)} runs with {workers} workers -> {out_dir}")
    logger.info("=" * 60)

    if workers <= 1:
        outcomes = [_run_one(i, values, str(out_dir), limits) for i, values in enumerate(runs)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, i, values, str(out_dir), limits) for i, values in enumerate(runs)]
            outcomes = [future.result() for future in futures]

    failed = [i for i, code in outcomes if code != EXIT_OK]
    if failed:
        logger.warning(f"Sweep finished with {len(failed)} failed runs: {failed}")
    else:
        logger.success(f"✓ Sweep finished: {len(outcomes)} runs")
    return sorted(outcomes)
