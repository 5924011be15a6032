"""
Direct sparse solve of the materialized system, used as ground truth.
Uses scipy.sparse.linalg.splu on the Kronecker-sum matrix.
"""
import numpy as np
from loguru import logger
from scipy.sparse.linalg import splu

from src.htensor.htensor import HTensor, to_dense
from src.operators.kron_sum import KronSumOperator
from src.utils.errors import CapacityError, ShapeMismatchError, SingularSystemError

DENSE_SOLVE_CAP = 2**16


def dense_solve(A: KronSumOperator, f: HTensor, cap: int = DENSE_SOLVE_CAP) -> np.ndarray:
    """
    Solve A u = f by sparse LU.

    Args:
        A: Operator
        f: Right-hand side
        cap: Maximum number of unknowns

    Returns:
        Dense solution of shape A.mode_sizes
    """
    if tuple(f.mode_sizes) != tuple(A.mode_sizes):
        raise ShapeMismatchError(f"operator modes {A.mode_sizes} vs right-hand side {f.mode_sizes}")
    total = int(np.prod(A.mode_sizes, dtype=np.int64))
    if total > cap:
        logger.error(f"Dense solve of {total} unknowns exceeds cap {cap}")
        raise CapacityError(total, cap)

    rhs = to_dense(f).ravel()
    try:
        lu = splu(A.to_sparse().tocsc())
    except RuntimeError as e:
        logger.error(f"Sparse LU failed: {e}")
        raise SingularSystemError(str(e)) from e
    solution = lu.solve(rhs)
    if not np.all(np.isfinite(solution)):
        raise SingularSystemError("direct solve produced non-finite values")
    logger.debug(f"Dense reference solved: {total} unknowns, ||u*|| = {np.linalg.norm(solution):.6e}")
    return solution.reshape(A.mode_sizes)
