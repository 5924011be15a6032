"""
Exponential-sum approximation of A^{-1} for Kronecker sums, reference errors
and truncation profiles of reference solutions.
Uses scipy.linalg.eigh for the mode-wise matrix exponentials.
"""
import math
from typing import List, Tuple

import numpy as np
import scipy.linalg
from loguru import logger

from src.htensor.htensor import (
    HTensor,
    from_cp,
    hard_truncate,
    norm,
    rank_one_factors,
    rank_profile,
    sub,
    to_dense,
)
from src.operators.kron_sum import KronSumOperator
from src.utils.errors import InvalidConfigError, PreconditionError, ShapeMismatchError


def expsum_coefficients(gamma: float, J: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sinc quadrature of 1/lambda = int exp(x - e^x lambda) dx for lambda >= gamma.

    Nodes t_j = e^{jh}/gamma and weights w_j = h e^{jh}/gamma with h = pi sqrt(2/J),
    j = -J/2 .. J/2 - 1.

    Args:
        gamma: Lower end of the spectrum (> 0)
        J: Number of terms (>= 2)

    Returns:
        (t, w), each of length J
    """
    if gamma <= 0:
        raise InvalidConfigError("gamma", f"must be positive, got {gamma}")
    if J < 2:
        raise InvalidConfigError("expsum_terms", f"need at least 2 terms, got {J}")
    h = math.pi * math.sqrt(2.0 / J)
    j = np.arange(-(J // 2), J - J // 2)
    scaled = np.exp(j * h) / gamma
    return scaled, h * scaled


def expsum_scalar_error(t: np.ndarray, w: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    """Relative errors |sum_j w_j exp(-t_j lambda) - 1/lambda| * lambda."""
    lambdas = np.asarray(lambdas, dtype=float)
    approx = np.exp(-np.outer(lambdas, t)) @ w
    return np.abs(approx - 1.0 / lambdas) * lambdas


def expsum_inverse(A: KronSumOperator, f: HTensor, J: int = 100, compress_tol: float = 0.0) -> HTensor:
    """
    Approximate A^{-1} f by sum_j w_j (x)_i exp(-t_j A_i) f_i.

    Args:
        A: Pure Kronecker sum with symmetric factors
        f: Rank-one right-hand side
        J: Number of quadrature terms
        compress_tol: Absolute budget for the final recompression

    Returns:
        HTensor with every rank at most J
    """
    factors = A.kron_factors()
    if factors is None or not A.is_symmetric:
        logger.error("expsum_inverse needs a symmetric pure Kronecker sum")
        raise PreconditionError("operator is not a symmetric sum of I x .. A_i .. x I")
    if tuple(f.mode_sizes) != tuple(A.mode_sizes):
        raise ShapeMismatchError(f"operator modes {A.mode_sizes} vs right-hand side {f.mode_sizes}")
    vectors = rank_one_factors(f)
    t, w = expsum_coefficients(A.bounds.gamma, J)

    columns = []
    for factor, vector in zip(factors, vectors):
        eigenvalues, basis = scipy.linalg.eigh(factor)
        coefficients = basis.T @ vector
        damped = np.exp(-np.outer(eigenvalues, t)) * coefficients[:, None]
        columns.append(basis @ damped)

    reference = hard_truncate(from_cp(f.tree, columns, w), tol=compress_tol)
    logger.info(f"Exponential-sum reference with J={J}: ranks {reference.ranks}")
    return reference


def error_vs_reference(u: HTensor, ref: HTensor | np.ndarray) -> float:
    """
    ||u - ref||.

    Args:
        u: Hierarchical tensor
        ref: Reference as HTensor or dense array

    Returns:
        Euclidean distance
    """
    if isinstance(ref, HTensor):
        if tuple(ref.mode_sizes) != tuple(u.mode_sizes):
            raise ShapeMismatchError(f"reference modes {ref.mode_sizes} vs {u.mode_sizes}")
        return norm(sub(u, ref))
    ref = np.asarray(ref, dtype=float)
    if ref.shape != tuple(u.mode_sizes):
        raise ShapeMismatchError(f"reference shape {ref.shape} vs {u.mode_sizes}")
    return float(np.linalg.norm(to_dense(u) - ref))


def truncation_profile(ref: HTensor, max_rank: int | None = None) -> List[Tuple[int, float]]:
    """
    Errors of hard-truncating ref with a uniform rank cap.

    Args:
        ref: Reference tensor
        max_rank: Largest cap (default: the largest rank of ref)

    Returns:
        [(cap, ||hard_truncate(ref, cap) - ref||)] for cap = 0..max_rank
    """
    max_rank = max(rank_profile(ref)) if max_rank is None else max_rank
    ref_norm = norm(ref)
    profile = [(0, ref_norm)]
    for cap in range(1, max_rank + 1):
        profile.append((cap, norm(sub(hard_truncate(ref, rank_caps=cap), ref))))
    return profile


def best_rank_for_accuracy(profile: List[Tuple[int, float]], err: float) -> int:
    """Smallest cap in the profile whose truncation error is at most err."""
    for cap, error in profile:
        if error <= err:
            return cap
    return profile[-1][0]
