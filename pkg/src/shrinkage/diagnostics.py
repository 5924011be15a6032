"""
Error functionals of soft thresholding and singular value decay fits.
Uses scipy.stats.linregress for the algebraic/exponential decay models.
"""
import math
from dataclasses import dataclass
from typing import List, Literal, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.stats import linregress

from src.htensor.htensor import EdgeSpectrum, HTensor, hsvd_spectra
from src.shrinkage.soft_threshold import scalar_hard
from src.utils.errors import InsufficientDataError

MIN_R_SQUARED = 0.9
BETA_GRID = np.round(np.arange(0.1, 2.05, 0.05), 2)


@dataclass(frozen=True)
class ThresholdDiagnostics:
    """Per-edge r_{t,alpha}, tau_{t,alpha}, d_t^alpha and the sandwich bounds."""
    alpha: float
    r_alpha: Tuple[int, ...]
    tau_alpha: Tuple[float, ...]
    d_alpha: Tuple[float, ...]

    @property
    def lower(self) -> float:
        return max(self.d_alpha) if self.d_alpha else 0.0

    @property
    def upper(self) -> float:
        return float(sum(self.d_alpha))


@dataclass(frozen=True)
class DecayModel:
    """
    Fitted decay of a singular value sequence.

    weak-lp: sigma_k ~ |sigma|_{wlp} k^{-1/p};
    exponential: sigma_k <= C exp(-c k^beta).
    """
    kind: Literal["weak-lp", "exponential", "none"]
    r_squared: float
    p: float | None = None
    wlp_norm: float | None = None
    C: float | None = None
    c: float | None = None
    beta: float | None = None


def edge_diagnostics(sigma: np.ndarray, alpha: float) -> Tuple[int, float, float]:
    """
    r, tau and d for one nonincreasing spectrum.

    Args:
        sigma: Singular values, nonincreasing
        alpha: Threshold

    Returns:
        (r_alpha, tau_alpha, d_alpha) with r counting sigma strictly above alpha
    """
    sigma = np.asarray(sigma, dtype=float)
    kept = scalar_hard(sigma, alpha)
    r = int(np.count_nonzero(kept))
    tau = float(np.linalg.norm(sigma - kept))
    return r, tau, math.sqrt(alpha**2 * r + tau**2)


def threshold_diagnostics(u: HTensor, alpha: float) -> ThresholdDiagnostics:
    """
    Evaluate the shrinkage error functionals on every edge of u.

    Args:
        u: Hierarchical tensor
        alpha: Positive threshold

    Returns:
        ThresholdDiagnostics for the HSVD of u
    """
    if alpha <= 0:
        raise ValueError(f"threshold must be positive, got {alpha}")
    rows = [edge_diagnostics(s.sigma, alpha) for s in hsvd_spectra(u)]
    return ThresholdDiagnostics(
        alpha=alpha,
        r_alpha=tuple(r for r, _, _ in rows),
        tau_alpha=tuple(tau for _, tau, _ in rows),
        d_alpha=tuple(d for _, _, d in rows),
    )


def fit_decay(spectra: Sequence[EdgeSpectrum]) -> DecayModel:
    """
    Fit algebraic and exponential decay to the richest edge spectrum.

    Args:
        spectra: Edge spectra (e.g. from hsvd_spectra)

    Returns:
        Better-fitting DecayModel, or kind "none" when neither fit is convincing
    """
    best = max(spectra, key=lambda s: s.rank, default=None)
    if best is None or best.rank < 3:
        logger.error("fit_decay needs at least 3 nonzero singular values on some edge")
        raise InsufficientDataError("at least 3 nonzero singular values required")

    sigma = np.asarray(best.sigma[best.sigma > 0], dtype=float)
    k = np.arange(1, len(sigma) + 1, dtype=float)
    log_sigma = np.log(sigma)

    candidates: List[DecayModel] = []

    algebraic = linregress(np.log(k), log_sigma)
    if algebraic.slope < -0.5:
        p = -1.0 / algebraic.slope
        candidates.append(DecayModel(
            kind="weak-lp",
            r_squared=float(algebraic.rvalue**2),
            p=float(p),
            wlp_norm=float(np.max(k ** (1.0 / p) * sigma)),
        ))

    exponential = None
    for beta in BETA_GRID:
        fit = linregress(k**beta, log_sigma)
        if fit.slope < 0 and (exponential is None or fit.rvalue**2 > exponential[1].rvalue**2):
            exponential = (float(beta), fit)
    if exponential is not None:
        beta, fit = exponential
        candidates.append(DecayModel(
            kind="exponential",
            r_squared=float(fit.rvalue**2),
            C=float(np.exp(fit.intercept)),
            c=float(-fit.slope),
            beta=beta,
        ))

    model = max(candidates, key=lambda m: m.r_squared, default=None)
    if model is None or model.r_squared < MIN_R_SQUARED:
        r2 = 0.0 if model is None else model.r_squared
        logger.info(f"No decay model fits edge {best.t} (best r^2 {r2:.3f})")
        return DecayModel(kind="none", r_squared=r2)
    logger.info(f"Edge {best.t}: {model.kind} decay fit, r^2 = {model.r_squared:.4f}")
    return model


def predicted_rank(model: DecayModel, alpha: float) -> float:
    """Upper estimate of r_{t,alpha} implied by the decay model (constant 1)."""
    if model.kind == "weak-lp":
        return model.wlp_norm**model.p * alpha ** (-model.p)
    if model.kind == "exponential":
        if alpha >= model.C:
            return 0.0
        return (math.log(model.C / alpha) / model.c) ** (1.0 / model.beta)
    raise ValueError("no decay model to predict from")


def predicted_error(model: DecayModel, alpha: float, edge_count: int) -> float:
    """Rate of ||S_alpha(u) - u|| implied by the decay model (constant 1)."""
    if model.kind == "weak-lp":
        return edge_count * model.wlp_norm ** (model.p / 2) * alpha ** (1 - model.p / 2)
    if model.kind == "exponential":
        return edge_count * (1 + abs(math.log(alpha))) ** (1 / (2 * model.beta)) * alpha
    raise ValueError("no decay model to predict from")


def rank_lemma_bound(sigma_v: np.ndarray, eps: float, alpha: float) -> float:
    """
    Bound on rank_t(S_alpha(w)) for any w with ||v - w|| <= eps.

    Args:
        sigma_v: sigma_t(v)
        eps: Perturbation size
        alpha: Threshold

    Returns:
        4 eps^2 / alpha^2 + #{i : sigma_{t,i}(v) > alpha/2}
    """
    return 4 * eps**2 / alpha**2 + int(np.count_nonzero(np.asarray(sigma_v) > alpha / 2))


def rank_lemma_bound_exponential(model: DecayModel, eps: float, alpha: float) -> float:
    """Same bound with the count replaced by the exponential-decay estimate at alpha/2."""
    if model.kind != "exponential":
        raise ValueError("exponential decay model required")
    count = 0.0
    if alpha / 2 < model.C:
        count = (math.log(2 * model.C / alpha) / model.c) ** (1.0 / model.beta)
    return 4 * eps**2 / alpha**2 + count
