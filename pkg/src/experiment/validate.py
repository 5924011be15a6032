"""
Built-in oracle cross-checks reported as pass/fail entries.
The shrink operator is injectable so that a faulty variant can be checked.
"""
import math
import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np
from loguru import logger
from scipy.stats import linregress

from src.htensor.htensor import (
    HTensor,
    axpy,
    from_dense,
    hsvd_spectra,
    norm,
    random,
    rank_one,
    sub,
    to_dense,
)
from src.operators.kron_sum import kron_sum_laplacian
from src.reference.dense import dense_solve
from src.reference.expsum import error_vs_reference, expsum_inverse
from src.shrinkage.diagnostics import threshold_diagnostics
from src.shrinkage.soft_threshold import edge_soft_threshold, matrix_soft_threshold, soft_threshold
from src.tree.dim_tree import balanced_tree, linear_tree
from src.utils.errors import InsufficientDataError

Shrink = Callable[[HTensor, float], HTensor]

COMPLEXITY_RANKS = (32, 64, 96, 128)
COMPLEXITY_MODE_SIZE = 128
COMPLEXITY_MIN_SLOPE = 2.5
COMPLEXITY_MAX_SLOPE = 4.5


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _padded_gap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    size = max(len(a), len(b))
    return np.pad(a, (0, size - len(a))) - np.pad(b, (0, size - len(b)))


def _random_tensor(rng: np.random.Generator, d_choices=(3, 4)) -> HTensor:
    d = int(rng.choice(d_choices))
    tree = linear_tree(d) if rng.random() < 0.5 else balanced_tree(d)
    sizes = rng.integers(2, 6, size=d)
    return random(tree, sizes, int(rng.integers(1, 4)), rng)


def _random_alpha(rng: np.random.Generator, u: HTensor) -> float:
    top = max(float(s.sigma[0]) for s in hsvd_spectra(u) if s.rank > 0)
    return top * 10 ** rng.uniform(-3, math.log10(0.3))


def check_dense_vs_expsum(rng: np.random.Generator) -> CheckResult:
    A = kron_sum_laplacian(3, 4)
    f = rank_one(linear_tree(3), [np.ones(4)] * 3)
    dense = dense_solve(A, f)
    relative = error_vs_reference(expsum_inverse(A, f), dense) / np.linalg.norm(dense)
    return CheckResult("dense_vs_expsum", relative <= 1e-6, f"relative gap {relative:.2e}")


def check_prox_d2(rng: np.random.Generator, shrink: Shrink, samples: int) -> CheckResult:
    worst = 0.0
    for _ in range(samples):
        rows, cols = rng.integers(2, 9, size=2)
        x = rng.standard_normal((rows, cols))
        alpha = float(rng.uniform(0.05, 1.5))
        u = from_dense(x, linear_tree(2))
        worst = max(worst, float(np.max(np.abs(to_dense(shrink(u, alpha)) - matrix_soft_threshold(x, alpha)))))
    return CheckResult("prox_d2", worst <= 1e-10, f"max entry gap {worst:.2e}")


def check_sandwich(rng: np.random.Generator, shrink: Shrink, samples: int) -> CheckResult:
    violations = 0
    for _ in range(samples):
        u = _random_tensor(rng)
        alpha = _random_alpha(rng, u)
        bounds = threshold_diagnostics(u, alpha)
        error = norm(sub(shrink(u, alpha), u))
        if not bounds.lower - 1e-9 <= error <= bounds.upper + 1e-9:
            violations += 1
    return CheckResult("sandwich", violations == 0, f"{violations}/{samples} violations")


def check_nonexpansive(rng: np.random.Generator, shrink: Shrink, samples: int) -> CheckResult:
    worst = 0.0
    for _ in range(samples):
        u = _random_tensor(rng)
        v = axpy(1.0, u, random(u.tree, u.mode_sizes, int(rng.integers(1, 4)), rng).scale(rng.uniform(0.01, 1.0)))
        alpha = _random_alpha(rng, u)
        gap = norm(sub(u, v))
        if gap > 0:
            worst = max(worst, norm(sub(shrink(u, alpha), shrink(v, alpha))) / gap)
    return CheckResult("nonexpansive", worst <= 1 + 1e-10, f"max ratio {worst:.12f}")


def check_mirsky(rng: np.random.Generator, samples: int) -> CheckResult:
    worst = 0.0
    for _ in range(samples):
        u = _random_tensor(rng)
        u = u.scale(1.0 / norm(u))
        e = random(u.tree, u.mode_sizes, int(rng.integers(1, 4)), rng)
        e = e.scale(1e-3 / norm(e))
        for s, p in zip(hsvd_spectra(u), hsvd_spectra(axpy(1.0, e, u))):
            worst = max(worst, float(np.linalg.norm(_padded_gap(s.sigma, p.sigma))) / 1e-3)
    return CheckResult("mirsky", worst <= 1 + 1e-10, f"max ratio {worst:.12f}")


def check_monotonicity(rng: np.random.Generator, samples: int) -> CheckResult:
    worst = -math.inf
    for _ in range(samples):
        u = _random_tensor(rng)
        alpha = _random_alpha(rng, u)
        before = hsvd_spectra(u)
        for s in u.tree.schedule:
            after = hsvd_spectra(edge_soft_threshold(u, s, alpha))
            for b, a in zip(before, after):
                worst = max(worst, float(np.max(_padded_gap(a.sigma, b.sigma), initial=-math.inf)))
    return CheckResult("monotonicity", worst <= 1e-10, f"max increase {worst:.2e}")


def _best_time(u: HTensor, alpha: float, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        soft_threshold(u, alpha)
        best = min(best, time.perf_counter() - start)
    return best


def complexity_slope(
    rng: np.random.Generator,
    ranks=COMPLEXITY_RANKS,
    mode_size: int = COMPLEXITY_MODE_SIZE,
    repeats: int = 3,
) -> float:
    """
    Log-log slope of soft_threshold wall time against the representation rank.

    Ranks must not exceed the mode size, otherwise the leaf QR collapses them
    before any transfer-tensor work. The time of a rank-one tensor with the same
    tree and modes is subtracted, leaving the rank-dependent part of the sweep.

    Args:
        rng: Source of the random tensors
        ranks: Representation ranks to time
        mode_size: n of every mode (d = 4)
        repeats: Runs per rank; the fastest counts

    Returns:
        Slope of log(t(r) - t(1)) against log(r)
    """
    if max(ranks) > mode_size:
        raise ValueError(f"ranks up to {max(ranks)} need mode size >= {max(ranks)}, got {mode_size}")
    tree = balanced_tree(4)
    modes = (mode_size,) * 4
    # tiny threshold: every direction survives, so the sweep runs at full rank
    baseline = random(tree, modes, 1, rng)
    overhead = _best_time(baseline, 1e-9 * norm(baseline), repeats)
    excess = []
    for r in ranks:
        u = random(tree, modes, r, rng)
        best = _best_time(u, 1e-9 * norm(u), repeats)
        logger.debug(f"soft_threshold at rank {r}: {best * 1e3:.2f} ms (rank one: {overhead * 1e3:.2f} ms)")
        if best <= overhead:
            raise InsufficientDataError(f"rank {r} ran no slower than rank one; timings are noise")
        excess.append(best - overhead)
    return float(linregress(np.log(ranks), np.log(excess)).slope)


def check_complexity(rng: np.random.Generator) -> CheckResult:
    slope = complexity_slope(rng)
    passed = COMPLEXITY_MIN_SLOPE <= slope <= COMPLEXITY_MAX_SLOPE
    return CheckResult("complexity", passed, f"log-log slope {slope:.2f}")


def run_checks(shrink: Shrink = soft_threshold, seed: int = 0, samples: int = 20) -> List[CheckResult]:
    """
    Run every cross-check; exceptions become failed entries.

    Args:
        shrink: Operator standing in for S_alpha in the shrink-based checks
        seed: Seed of all sampling
        samples: Random cases per sampled check

    Returns:
        One CheckResult per check
    """
    rng = np.random.default_rng(seed)
    checks = [
        ("dense_vs_expsum", lambda: check_dense_vs_expsum(rng)),
        ("prox_d2", lambda: check_prox_d2(rng, shrink, samples)),
        ("sandwich", lambda: check_sandwich(rng, shrink, samples)),
        ("nonexpansive", lambda: check_nonexpansive(rng, shrink, samples)),
        ("mirsky", lambda: check_mirsky(rng, samples)),
        ("monotonicity", lambda: check_monotonicity(rng, samples)),
        ("complexity", lambda: check_complexity(rng)),
    ]
    results = []
    for name, check in checks:
        try:
            result = check()
        except Exception as e:
            logger.error(f"Check {name} raised: {e}")
            result = CheckResult(name, False, f"raised {type(e).__name__}: {e}")
        if result.passed:
            logger.success(f"✓ {name}: {result.detail}")
        else:
            logger.warning(f"✗ {name}: {result.detail}")
        results.append(result)
    return results


def format_report(results: List[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}" for r in results]
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines)
