"""
Residual evaluation for A u = f with certified recompression.
"""
from loguru import logger

from src.htensor.htensor import HTensor, axpy, hard_truncate
from src.operators.kron_sum import KronSumOperator, apply_exact


def exact_residual(A: KronSumOperator, u: HTensor, f: HTensor) -> HTensor:
    """A u - f without truncation."""
    return axpy(-1.0, f, apply_exact(A, u))


def residual_inexact(A: KronSumOperator, u: HTensor, f: HTensor, delta: float) -> HTensor:
    """
    Residual r with ||r - (A u - f)|| <= delta.

    Args:
        A: Operator
        u: Current iterate
        f: Right-hand side
        delta: Absolute accuracy of the returned residual

    Returns:
        Hard-truncated residual (exact when delta == 0)
    """
    if delta < 0:
        raise ValueError(f"residual tolerance must be nonnegative, got {delta}")
    exact = exact_residual(A, u, f)
    if delta == 0:
        return exact
    r = hard_truncate(exact, tol=delta)
    logger.debug(f"residual ranks {exact.rank_max} -> {r.rank_max} at delta={delta:.3e}")
    return r


def richardson_step(A: KronSumOperator, u: HTensor, f: HTensor, mu: float) -> HTensor:
    """F(u) = u - mu (A u - f)."""
    return axpy(-mu, exact_residual(A, u, f), u)
