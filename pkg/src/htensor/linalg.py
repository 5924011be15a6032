"""
Small dense kernels shared by the hierarchical tensor code.
Uses scipy.linalg for SVD/QR and tenacity to fall back between LAPACK drivers.
"""
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg
from loguru import logger
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

SVD_DRIVERS = ("gesdd", "gesvd")


def robust_svd(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Thin SVD, retried with the slower gesvd driver when gesdd fails to converge.

    Args:
        matrix: Dense 2-D array

    Returns:
        (U, s, Vt) with s nonincreasing
    """
    drivers = iter(SVD_DRIVERS)
    for attempt in Retrying(
        stop=stop_after_attempt(len(SVD_DRIVERS)),
        retry=retry_if_exception_type(np.linalg.LinAlgError),
        reraise=True,
    ):
        with attempt:
            driver = next(drivers)
            if attempt.retry_state.attempt_number > 1:
                logger.warning(f"SVD did not converge, retrying with {driver}")
            return scipy.linalg.svd(
                matrix, full_matrices=False, lapack_driver=driver, check_finite=False
            )


def move_to_end(core: np.ndarray, axis: int) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """Flatten all axes except `axis` into rows; return matrix and the row shape."""
    moved = np.moveaxis(core, axis, -1)
    rest = moved.shape[:-1]
    return moved.reshape(-1, moved.shape[-1]), rest


def restore_axis(matrix: np.ndarray, rest: Sequence[int], axis: int) -> np.ndarray:
    return np.moveaxis(matrix.reshape(tuple(rest) + (matrix.shape[-1],)), -1, axis)


def qr_toward(core: np.ndarray, axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Orthonormalize a core with respect to one axis.

    Returns (Q, R) with core[..., j, ...] = sum_i Q[..., i, ...] R[i, j] along `axis`.
    """
    matrix, rest = move_to_end(core, axis)
    q, r = np.linalg.qr(matrix, mode="reduced")
    return restore_axis(q, rest, axis), r


def absorb(core: np.ndarray, axis: int, matrix: np.ndarray) -> np.ndarray:
    """new[..., i, ...] = sum_j matrix[i, j] * core[..., j, ...] along `axis`."""
    return np.moveaxis(np.tensordot(matrix, core, axes=(1, axis)), 0, axis)


def take(core: np.ndarray, axis: int, count: int) -> np.ndarray:
    """Keep the first `count` slices of `axis`."""
    index = [slice(None)] * core.ndim
    index[axis] = slice(0, count)
    return core[tuple(index)]


def unfold(x: np.ndarray, modes: Sequence[int]) -> np.ndarray:
    """
    Matricization M_t(x): rows indexed by `modes` (1-based), columns by the rest.

    Args:
        x: Dense d-way array
        modes: Row modes, 1-based

    Returns:
        2-D array of shape (prod rows, prod cols)
    """
    rows = [m - 1 for m in modes]
    cols = [m for m in range(x.ndim) if m not in rows]
    permuted = np.transpose(x, rows + cols)
    n_rows = int(np.prod([x.shape[m] for m in rows], dtype=np.int64))
    return permuted.reshape(n_rows, -1)
