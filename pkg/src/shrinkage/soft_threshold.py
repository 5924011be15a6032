"""
Singular value soft thresholding for matrices and hierarchical tensors.
The hierarchical operator S_alpha shrinks every edge spectrum in sweep order.
"""
import numpy as np
from loguru import logger

from src.htensor.htensor import ZERO_CUTOFF, HTensor, canonicalize_at
from src.htensor.linalg import robust_svd


def scalar_soft(x, alpha: float):
    """sgn(x) * max(|x| - alpha, 0), elementwise for arrays."""
    if alpha < 0:
        raise ValueError(f"threshold must be nonnegative, got {alpha}")
    return np.sign(x) * np.maximum(np.abs(x) - alpha, 0.0)


def scalar_hard(x, alpha: float):
    """Keep x where |x| > alpha, zero elsewhere."""
    if alpha < 0:
        raise ValueError(f"threshold must be nonnegative, got {alpha}")
    return np.where(np.abs(x) > alpha, x, 0.0)


def nuclear_norm(matrix: np.ndarray) -> float:
    return float(np.sum(robust_svd(np.asarray(matrix, dtype=float))[1]))


def matrix_soft_threshold(matrix: np.ndarray, alpha: float) -> np.ndarray:
    """
    Proximity operator of alpha * nuclear norm.

    Args:
        matrix: Dense matrix X
        alpha: Threshold

    Returns:
        argmin_V alpha*||V||_* + 0.5*||X - V||_F^2
    """
    u, s, vt = robust_svd(np.asarray(matrix, dtype=float))
    shrunk = scalar_soft(s, alpha)
    keep = shrunk > 0
    return (u[:, keep] * shrunk[keep]) @ vt[keep]


def edge_soft_threshold(u: HTensor, t: int, alpha: float) -> HTensor:
    """
    S_{t,alpha}: soft-threshold the singular values of M_t(u).

    Args:
        u: Hierarchical tensor
        t: Edge index
        alpha: Threshold

    Returns:
        HTensor canonical at t with the zeroed directions removed
    """
    if alpha < 0:
        raise ValueError(f"threshold must be nonnegative, got {alpha}")
    c = canonicalize_at(u, t)
    if c.is_zero or alpha == 0:
        return c
    sigma = np.diag(c.gauge)
    shrunk = sigma - alpha
    # ties at sigma == alpha vanish together with the numerical zeros
    keep = int(np.count_nonzero(shrunk > ZERO_CUTOFF * sigma[0]))
    return c.with_gauge_spectrum(shrunk[:keep])


def soft_threshold(u: HTensor, alpha: float) -> HTensor:
    """
    The complete operator S_alpha = S_{E,alpha} o ... o S_{1,alpha}.

    Args:
        u: Hierarchical tensor
        alpha: Threshold (0 only recompresses)

    Returns:
        HTensor with finite ranks, canonical at the last scheduled edge
    """
    if alpha < 0:
        raise ValueError(f"threshold must be nonnegative, got {alpha}")
    if u.is_zero:
        return u
    w = u
    for t in u.tree.schedule:
        w = edge_soft_threshold(w, t, alpha)
        if w.is_zero:
            logger.debug(f"S_alpha with alpha={alpha:.3e} annihilated the tensor at edge {t}")
            return w
    return w
