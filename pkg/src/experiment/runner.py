"""
Single experiment run: build the problem, solve, write the CSV trace.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Tuple

import numpy as np
from loguru import logger

from src.experiment.config import ExperimentConfig
from src.htensor.htensor import HTensor, norm, rank_one
from src.operators.kron_sum import KronSumOperator, kron_sum_laplacian, synthetic_operator
from src.reference.dense import DENSE_SOLVE_CAP, dense_solve
from src.reference.expsum import error_vs_reference, expsum_inverse
from src.solver.config import Schedule, SolverConfig, parse_model
from src.solver.richardson import apriori_iterate, ie_solve, st_solve
from src.solver.trace import IterationTrace
from src.tree.dim_tree import balanced_tree, linear_tree
from src.utils.errors import DeltaUnderflowError, MaxIterError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_MAX_ITER = 3


@dataclass
class RunResult:
    """Outcome of one run."""
    exit_code: int
    trace: IterationTrace | None
    out_path: Path | None
    solution: HTensor | None = None


def build_problem(config: ExperimentConfig) -> Tuple[KronSumOperator, HTensor]:
    """
    Operator and rank-one right-hand side for the configured problem.

    Args:
        config: Experiment configuration

    Returns:
        (A, f)
    """
    tree = linear_tree(config.d) if config.tree == "linear" else balanced_tree(config.d)
    if config.problem == "laplacian":
        A = kron_sum_laplacian(config.d, config.n, config.h)
    else:
        A = synthetic_operator(config.d, config.n, config.kappa, seed=config.seed)

    if config.rhs == "ones":
        f = rank_one(tree, [np.ones(n) for n in A.mode_sizes])
    else:
        rng = np.random.default_rng(config.seed)
        f = rank_one(tree, [rng.standard_normal(n) for n in A.mode_sizes])
    return A, f


def build_error_fn(
    config: ExperimentConfig,
    A: KronSumOperator,
    f: HTensor,
    dense_solve_cap: int = DENSE_SOLVE_CAP,
    expsum_terms: int = 100,
) -> Callable[[HTensor], float] | None:
    """||u - u*|| against the configured reference, or None."""
    if config.reference == "none":
        return None
    if config.reference == "dense":
        solution = dense_solve(A, f, cap=dense_solve_cap)
    else:
        solution = expsum_inverse(A, f, J=config.expsum_terms or expsum_terms)
    return lambda u: error_vs_reference(u, solution)


def run_experiment(
    config: ExperimentConfig,
    out_path: str | Path | None = None,
    dense_solve_cap: int = DENSE_SOLVE_CAP,
    expsum_terms: int = 100,
    max_iter: int = 10000,
) -> RunResult:
    """
    Execute the configured solver and write its trace.

    Args:
        config: Validated experiment configuration
        out_path: CSV destination (overrides config.out_path)
        dense_solve_cap: Unknowns allowed for the dense reference
        expsum_terms: Quadrature terms when the config leaves expsum_terms unset
        max_iter: Iteration cap when the config leaves max_iter unset

    Returns:
        RunResult with exit code 0 (criterion met) or 3 (iteration cap / tolerance underflow)
    """
    logger.info("=" * 60)
    logger.info(f"Experiment: {config.problem} d={config.d} n={config.n}, solver={config.solver}")
    logger.info("=" * 60)

    destination = out_path or config.out_path
    destination = Path(destination) if destination else None

    A, f = build_problem(config)
    error_fn = build_error_fn(config, A, f, dense_solve_cap, expsum_terms)
    logger.info(f"gamma={A.bounds.gamma:.6g}, Gamma={A.bounds.Gamma:.6g}, kappa={A.bounds.kappa:.4f}, ||f||={norm(f):.6g}")

    try:
        if config.solver == "apriori":
            schedule = parse_model(Schedule, dict(
                kind=config.schedule_kind, p=config.p, c0=config.c0, rho_tilde=config.rho_tilde,
            ))
            u, trace = apriori_iterate(A, f, schedule, config.iterations, error_fn, timing=config.timing)
        else:
            solver_config = SolverConfig.build(
                A.bounds,
                norm(f),
                f.tree.num_edges,
                config.epsilon,
                alpha0_factor=config.alpha0_factor,
                **{**config.solver_overrides(), "max_iter": config.max_iter or max_iter},
            )
            if config.solver == "st":
                u, trace = st_solve(A, f, solver_config, error_fn, timing=config.timing)
            else:
                u, trace = ie_solve(A, f, solver_config, error_fn, timing=config.timing)
    except (MaxIterError, DeltaUnderflowError) as e:
        logger.error(f"Solver failed: {e}")
        if destination is not None and e.trace is not None:
            e.trace.to_csv(destination)
        return RunResult(EXIT_MAX_ITER, e.trace, destination)

    if destination is not None:
        trace.to_csv(destination)
    last = trace.last
    logger.info("=" * 60)
    logger.info(f"Finished after {last.k} iterations: ||r||={last.res_norm:.4e}, ranks {last.rank_min}..{last.rank_max}")
    logger.info("=" * 60)
    return RunResult(EXIT_OK, trace, destination, u)
