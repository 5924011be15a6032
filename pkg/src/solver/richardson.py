"""
Thresholded Richardson iterations for A u = f on hierarchical tensors.
Implements the a priori schedule, the thresholded fixed point u^alpha and the
a posteriori solvers with exact (st_solve) and inexact (ie_solve) residuals.
"""
import math
import time
from typing import Callable, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.stats import linregress

from src.htensor.htensor import HTensor, axpy, norm, rank_profile, sub, zeros
from src.operators.kron_sum import KronSumOperator, SpectrumBounds
from src.operators.residual import exact_residual, residual_inexact, richardson_step
from src.shrinkage.soft_threshold import soft_threshold
from src.solver.config import Schedule, SolverConfig
from src.solver.trace import IterationRecord, IterationTrace
from src.utils.errors import (
    DeltaUnderflowError,
    InsufficientDataError,
    InvalidConfigError,
    MaxIterError,
    ScheduleKindError,
)

ErrorFn = Callable[[HTensor], float]

DELTA_FLOOR = np.finfo(float).tiny


def contraction_params(bounds: SpectrumBounds) -> Tuple[float, float]:
    """
    Step size and contraction factor of the Richardson map.

    Args:
        bounds: Spectrum bounds gamma <= Gamma

    Returns:
        (mu, rho) = (2/(gamma + Gamma), (kappa - 1)/(kappa + 1))
    """
    if bounds.gamma <= 0:
        raise InvalidConfigError("gamma", f"lower spectral bound must be positive, got {bounds.gamma}")
    mu = 2.0 / (bounds.gamma + bounds.Gamma)
    rho = (bounds.Gamma - bounds.gamma) / (bounds.Gamma + bounds.gamma)
    return mu, rho


def perturbed_contraction(rho: float, tau2: float) -> float:
    """Contraction factor rho + (1 + rho) tau2/(1 - tau2); below 1 iff tau2 < (1 - rho)/2."""
    return rho + (1.0 + rho) * tau2 / (1.0 - tau2)


def inexact_richardson_factor(rho: float, tau1: float) -> float:
    """Error reduction per step when the residual carries relative error tau1."""
    return rho + 2.0 * tau1 / (1.0 - tau1)


def algorithm2_constants(config: SolverConfig) -> Tuple[float, float]:
    """
    Constants B (threshold decrease test) and D (residual tolerance floor) of ie_solve.

    Args:
        config: Validated solver configuration

    Returns:
        (B, D)
    """
    rho, nu, mu, Gamma = config.rho, config.nu, config.mu, config.Gamma
    tau1, tau2 = config.tau1, config.tau2
    if not tau2 < (1.0 - rho) / 2.0:
        logger.error(f"tau2={tau2} violates tau2 < (1 - rho)/2 = {(1.0 - rho) / 2.0:.6g}")
        raise InvalidConfigError("tau2", f"must be below (1 - rho)/2 = {(1.0 - rho) / 2.0:.6g}, got {tau2}")

    B = (1 - rho) * (1 - tau1) * nu / (
        (1 + tau2) * (rho + (1 + rho) * tau2 / (1 - tau2)) * Gamma
    )
    D = min(
        (1 - tau1) * tau2 * B / ((1 + tau1 + Gamma * B) * mu),
        rho * nu * tau2 * (1 - tau1) ** 2
        / ((rho * (1 + tau1) * (1 + tau2) + nu * (1 - tau1) * (1 - rho)) * mu),
    )
    return B, D


class _Recorder:
    """Appends IterationRecords with ranks, optional reference error and timing."""

    def __init__(self, solver: str, error_fn: ErrorFn | None, timing: bool):
        self.trace = IterationTrace(solver)
        self.error_fn = error_fn
        self.timing = timing
        self.start = time.perf_counter()

    def record(
        self,
        k: int,
        u: HTensor,
        r: HTensor,
        res_norm: float,
        alpha: float,
        delta: float | None = None,
    ) -> IterationRecord:
        ranks = rank_profile(u)
        row = IterationRecord(
            k=k,
            res_norm=float(res_norm),
            alpha=float(alpha),
            rank_min=min(ranks),
            rank_max=max(ranks),
            res_rank_max=r.rank_max,
            delta=None if delta is None else float(delta),
            err_ref=None if self.error_fn is None else float(self.error_fn(u)),
            wall_ms=(time.perf_counter() - self.start) * 1e3 if self.timing else None,
        )
        self.trace.append(row)
        logger.debug(
            f"[{self.trace.solver}] k={k} ||r||={res_norm:.4e} alpha={alpha:.4e}"
            + ("" if delta is None else f" delta={delta:.3e}")
            + f" ranks={ranks}"
        )
        return row


def apriori_iterate(
    A: KronSumOperator,
    f: HTensor,
    schedule: Schedule,
    K: int,
    error_fn: ErrorFn | None = None,
    timing: bool = True,
) -> Tuple[HTensor, IterationTrace]:
    """
    K steps of u_{k+1} = S_{alpha_k}(u_k - mu (A u_k - f)) from u_0 = 0.

    Args:
        A: Operator
        f: Right-hand side
        schedule: Algebraic or exponential threshold schedule
        K: Number of steps
        error_fn: Optional ||u_k - u*|| oracle for the trace
        timing: Record wall time

    Returns:
        (u_K, trace with K + 1 rows)
    """
    if schedule.kind == "a-posteriori":
        logger.error("apriori_iterate called with an a-posteriori schedule")
        raise ScheduleKindError("apriori_iterate needs an algebraic or exponential schedule")
    mu, rho = contraction_params(A.bounds)
    schedule.check_rate(rho)

    recorder = _Recorder(f"apriori-{schedule.kind}", error_fn, timing)
    u = zeros(f.tree, f.mode_sizes)
    r = exact_residual(A, u, f)
    recorder.record(0, u, r, norm(r), schedule.alpha(0))
    for k in range(K):
        u = soft_threshold(axpy(-mu, r, u), schedule.alpha(k))
        r = exact_residual(A, u, f)
        recorder.record(k + 1, u, r, norm(r), schedule.alpha(k + 1))
    recorder.trace.converged = True
    logger.info(f"A priori {schedule.kind} schedule: {K} steps, final ranks {u.ranks}")
    return u, recorder.trace


def fixed_point_u_alpha(
    A: KronSumOperator,
    f: HTensor,
    alpha: float,
    tol: float,
    max_iter: int = 10000,
) -> HTensor:
    """
    Fixed point u^alpha of S_alpha o F by iteration from 0.

    Stops once ||u_{n+1} - u_n|| <= tol (1 - rho)/rho, so ||u_{n+1} - u^alpha|| <= tol.

    Args:
        A: Operator
        f: Right-hand side
        alpha: Threshold (>= 0)
        tol: Target distance to u^alpha (> 0)
        max_iter: Iteration cap

    Returns:
        Approximation of u^alpha
    """
    if alpha < 0:
        raise ValueError(f"threshold must be nonnegative, got {alpha}")
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    mu, rho = contraction_params(A.bounds)
    stop = math.inf if rho == 0 else tol * (1.0 - rho) / rho
    u = zeros(f.tree, f.mode_sizes)
    for n in range(max_iter):
        u_next = soft_threshold(richardson_step(A, u, f, mu), alpha)
        diff = norm(sub(u_next, u))
        u = u_next
        if diff <= stop:
            logger.debug(f"u^alpha for alpha={alpha:.3e} after {n + 1} steps, ranks {u.ranks}")
            return u
    logger.error(f"fixed_point_u_alpha did not reach tol={tol:.2e} in {max_iter} steps")
    raise MaxIterError(f"fixed point iteration exceeded {max_iter} steps", trace=None)


def st_solve(
    A: KronSumOperator,
    f: HTensor,
    config: SolverConfig,
    error_fn: ErrorFn | None = None,
    timing: bool = True,
) -> Tuple[HTensor, IterationTrace]:
    """
    A posteriori thresholded Richardson iteration with exact residuals.

    Args:
        A: Operator whose spectrum lies in [config.gamma, config.Gamma]
        f: Right-hand side
        config: Solver constants
        error_fn: Optional ||u_k - u*|| oracle for the trace
        timing: Record wall time

    Returns:
        (u_eps with ||A u_eps - f|| <= gamma eps, trace)
    """
    mu, rho, theta = config.mu, config.rho, config.theta
    target = config.gamma * config.epsilon
    decrease = math.inf if rho == 0 else (1.0 - rho) * config.nu / (config.Gamma * rho)

    logger.info("=" * 60)
    logger.info(f"STSolve: eps={config.epsilon:.3e}, alpha0={config.alpha0:.4e}, rho={rho:.4f}")
    logger.info("=" * 60)

    recorder = _Recorder("st", error_fn, timing)
    alpha = config.alpha0
    u = zeros(f.tree, f.mode_sizes)
    r = exact_residual(A, u, f)
    res = norm(r)
    recorder.record(0, u, r, res, alpha)

    k = 0
    while res > target:
        if k >= config.max_iter:
            logger.error(f"STSolve hit max_iter={config.max_iter} with ||r||={res:.4e} > {target:.4e}")
            raise MaxIterError(f"st_solve exceeded {config.max_iter} iterations", trace=recorder.trace)
        u_next = soft_threshold(axpy(-mu, r, u), alpha)
        r = exact_residual(A, u_next, f)
        res = norm(r)
        if norm(sub(u_next, u)) <= decrease * res:
            alpha = theta * alpha
        u = u_next
        k += 1
        recorder.record(k, u, r, res, alpha)

    recorder.trace.converged = True
    logger.success(f"✓ STSolve converged after {k} iterations: ||r||={res:.4e}, ranks {u.ranks}")
    return u, recorder.trace


def ie_solve(
    A: KronSumOperator,
    f: HTensor,
    config: SolverConfig,
    error_fn: ErrorFn | None = None,
    timing: bool = True,
) -> Tuple[HTensor, IterationTrace]:
    """
    A posteriori thresholded Richardson iteration with inexact residuals.

    Each residual r_k satisfies ||r_k - (A u_k - f)|| <= delta_k, and delta_k is
    refined until it is at most tau1 ||r_k||.

    Args:
        A: Operator whose spectrum lies in [config.gamma, config.Gamma]
        f: Right-hand side
        config: Solver constants
        error_fn: Optional ||u_k - u*|| oracle for the trace
        timing: Record wall time

    Returns:
        (u_eps with ||A u_eps - f|| <= gamma eps, trace)
    """
    B, D = algorithm2_constants(config)
    mu, theta, omega = config.mu, config.theta, config.omega
    tau1, tau2 = config.tau1, config.tau2
    target = config.gamma * config.epsilon

    logger.info("=" * 60)
    logger.info(f"IESolve: eps={config.epsilon:.3e}, alpha0={config.alpha0:.4e}, B={B:.4e}, D={D:.4e}")
    factor = inexact_richardson_factor(config.rho, tau1)
    logger.info(f"IESolve: rho={config.rho:.4f}, per-step factor with tau1={tau1}: {factor:.4f}")
    logger.info("=" * 60)

    recorder = _Recorder("ie", error_fn, timing)
    trace = recorder.trace

    def check(delta: float) -> None:
        if delta != 0.0 and not delta > DELTA_FLOOR:
            logger.error(f"IESolve residual tolerance underflow: delta={delta!r}")
            raise DeltaUnderflowError(f"residual tolerance underflow (delta={delta!r})", trace=trace)

    alpha = config.alpha0
    u = zeros(f.tree, f.mode_sizes)
    r = residual_inexact(A, u, f, 0.0)
    res = norm(r)
    delta = tau1 * res
    recorder.record(0, u, r, res, alpha, delta)

    k = 0
    while res + delta > target:
        if k >= config.max_iter:
            logger.error(f"IESolve hit max_iter={config.max_iter} with ||r||+delta={res + delta:.4e}")
            raise MaxIterError(f"ie_solve exceeded {config.max_iter} iterations", trace=trace)

        u_next = soft_threshold(axpy(-mu, r, u), alpha)
        step = norm(sub(u_next, u))
        while delta > tau2 / mu * step and delta > D * res:
            if step == 0.0 and D * res == 0.0:
                # no positive delta passes the test; fall back to the exact residual
                logger.debug(f"IESolve k={k}: zero step with D*||r||=0, using the exact residual")
                delta = 0.0
                r = residual_inexact(A, u, f, 0.0)
                res = norm(r)
                u_next = soft_threshold(axpy(-mu, r, u), alpha)
                step = norm(sub(u_next, u))
                break
            delta = omega * delta
            check(delta)
            r = residual_inexact(A, u, f, delta)
            res = norm(r)
            u_next = soft_threshold(axpy(-mu, r, u), alpha)
            step = norm(sub(u_next, u))

        delta_next = delta / omega
        while True:
            delta_next = omega * delta_next
            check(delta_next)
            r_next = residual_inexact(A, u_next, f, delta_next)
            res_next = norm(r_next)
            if res_next + delta_next <= target:
                trace.stopped_early = True
                trace.converged = True
                recorder.record(k + 1, u_next, r_next, res_next, alpha, delta_next)
                logger.success(
                    f"✓ IESolve converged after {k + 1} iterations: "
                    f"||r||+delta={res_next + delta_next:.4e}, ranks {u_next.ranks}"
                )
                return u_next, trace
            if delta_next <= tau1 * res_next:
                break

        if step <= B * res_next:
            alpha = theta * alpha
            delta_next = tau1 * res_next

        u, r, res, delta = u_next, r_next, res_next, delta_next
        k += 1
        recorder.record(k, u, r, res, alpha, delta)

    trace.converged = True
    logger.success(f"✓ IESolve converged after {k} iterations: ||r||+delta={res + delta:.4e}, ranks {u.ranks}")
    return u, trace


def fitted_rate(
    trace: IterationTrace | Sequence[float],
    start: int,
    stop: int,
    column: str = "err_ref",
) -> float:
    """
    Least-squares slope of log(value_k) over k = start..stop.

    Args:
        trace: IterationTrace (the given column is used) or a plain sequence
        start: First iteration
        stop: Last iteration (inclusive)
        column: Trace column to fit

    Returns:
        Slope; exp(slope) is the fitted per-step reduction factor
    """
    values = trace.column(column) if isinstance(trace, IterationTrace) else list(trace)
    window = values[start:stop + 1]
    ks = [k for k, v in zip(range(start, stop + 1), window) if v is not None and v > 0]
    if len(ks) < 2:
        raise InsufficientDataError(f"need two positive values in [{start}, {stop}] to fit a rate")
    logs = [math.log(values[k]) for k in ks]
    return float(linregress(ks, logs).slope)
