#!/usr/bin/env python3
"""
Test script for soft thresholding, its error functionals and decay fits.
"""
import math
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest
from loguru import logger

from src.experiment.validate import complexity_slope
from src.htensor.htensor import (
    EdgeSpectrum,
    axpy,
    from_dense,
    hsvd_spectra,
    norm,
    random,
    rank_one,
    rank_profile,
    sub,
    to_dense,
)
from src.shrinkage.diagnostics import (
    edge_diagnostics,
    fit_decay,
    predicted_error,
    predicted_rank,
    rank_lemma_bound,
    rank_lemma_bound_exponential,
    threshold_diagnostics,
)
from src.shrinkage.soft_threshold import (
    edge_soft_threshold,
    matrix_soft_threshold,
    nuclear_norm,
    scalar_hard,
    scalar_soft,
    soft_threshold,
)
from src.tree.dim_tree import balanced_tree, linear_tree
from src.utils.errors import InsufficientDataError


def _random_case(rng):
    d = int(rng.integers(2, 6))
    tree = linear_tree(d) if rng.random() < 0.5 else balanced_tree(d)
    u = random(tree, rng.integers(2, 7, size=d), int(rng.integers(1, 5)), rng)
    top = max(s.sigma[0] for s in hsvd_spectra(u))
    return u, float(top * 10 ** rng.uniform(-3, 0))


def _padded(a, size):
    return np.pad(a, (0, size - len(a)))


def test_scalar_soft():
    assert scalar_soft(3.0, 1.0) == 2.0
    assert scalar_soft(-0.5, 1.0) == 0.0
    assert scalar_soft(-7.25, 0.0) == -7.25
    with pytest.raises(ValueError):
        scalar_soft(1.0, -0.1)


def test_scalar_soft_is_lipschitz():
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal(500) * 3, rng.standard_normal(500) * 3
    alpha = 0.7
    assert np.all(np.abs(scalar_soft(x, alpha) - scalar_soft(y, alpha)) <= np.abs(x - y) + 1e-15)


def test_scalar_hard():
    values = np.array([-2.0, -0.5, 0.5, 1.0, 1.5])
    assert np.array_equal(scalar_hard(values, 1.0), np.array([-2.0, 0.0, 0.0, 0.0, 1.5]))


def test_edge_soft_threshold_matrix_case():
    """sigma = (3, 1) shrunk by 2 leaves a single singular value 1."""
    u = from_dense(np.diag([3.0, 1.0]), linear_tree(2))
    shrunk = edge_soft_threshold(u, 0, 2.0)
    assert shrunk.ranks == (1,)
    assert np.allclose(np.diag(shrunk.gauge), [1.0])
    assert edge_soft_threshold(u, 0, 3.0).is_zero
    assert np.allclose(to_dense(edge_soft_threshold(u, 0, 0.0)), np.diag([3.0, 1.0]))


def test_edge_shrink_distance_equals_d_alpha():
    rng = np.random.default_rng(1)
    tree = balanced_tree(4)
    u = random(tree, (3, 3, 3, 3), 3, rng)
    for spectrum in hsvd_spectra(u):
        alpha = 0.3 * spectrum.sigma[0]
        _, _, d_alpha = edge_diagnostics(spectrum.sigma, alpha)
        distance = norm(sub(edge_soft_threshold(u, spectrum.t, alpha), u))
        assert abs(distance - d_alpha) <= 1e-10 * max(d_alpha, 1.0)


def test_rank_one_annihilated_at_edge_count_alpha():
    tree = linear_tree(4)
    vectors = [v / np.linalg.norm(v) for v in (np.ones(3), np.arange(1.0, 4.0), np.ones(2), np.array([1.0, -2.0]))]
    alpha = 0.2
    u = rank_one(tree, vectors, scale=tree.num_edges * alpha)
    assert norm(soft_threshold(u, alpha)) <= 1e-12 * norm(u)


def test_soft_threshold_zero_alpha_is_identity():
    rng = np.random.default_rng(2)
    u = random(balanced_tree(5), (2, 3, 2, 3, 2), 3, rng)
    assert norm(sub(soft_threshold(u, 0.0), u)) <= 1e-12 * norm(u)


def test_prox_oracle_two_modes():
    """S_alpha at d = 2 is the nuclear-norm prox."""
    rng = np.random.default_rng(3)
    tree = linear_tree(2)
    for _ in range(100):
        rows, cols = rng.integers(1, 9, size=2)
        x = rng.standard_normal((rows, cols))
        alpha = float(rng.uniform(0.0, 2.0))
        v = to_dense(soft_threshold(from_dense(x, tree), alpha))
        oracle = matrix_soft_threshold(x, alpha)
        assert np.max(np.abs(v - oracle)) <= 1e-10

        objective = alpha * nuclear_norm(v) + 0.5 * np.linalg.norm(x - v) ** 2
        for _ in range(50):
            w = v + 1e-3 * rng.standard_normal(v.shape)
            assert objective < alpha * nuclear_norm(w) + 0.5 * np.linalg.norm(x - w) ** 2


def test_threshold_diagnostics_example():
    u = from_dense(np.diag([3.0, 1.0, 0.5]), linear_tree(2))
    diag = threshold_diagnostics(u, 0.8)
    assert diag.r_alpha == (2,)
    assert diag.tau_alpha[0] == pytest.approx(0.5)
    assert diag.d_alpha[0] == pytest.approx(math.sqrt(1.53))
    assert diag.lower == pytest.approx(diag.upper)

    top = threshold_diagnostics(u, 4.0)
    assert top.r_alpha == (0,)
    assert top.d_alpha[0] == pytest.approx(math.sqrt(9 + 1 + 0.25))


def test_tie_is_excluded_from_count():
    r, tau, d = edge_diagnostics(np.array([2.0, 1.0]), 1.0)
    assert (r, tau, d) == (1, 1.0, math.sqrt(2.0))


def test_sandwich_bounds():
    rng = np.random.default_rng(4)
    for _ in range(500):
        u, alpha = _random_case(rng)
        diag = threshold_diagnostics(u, alpha)
        error = norm(sub(soft_threshold(u, alpha), u))
        assert diag.lower - 1e-9 <= error <= diag.upper + 1e-9


def test_non_expansive():
    rng = np.random.default_rng(5)
    for _ in range(500):
        u, alpha = _random_case(rng)
        v = axpy(1.0, u, random(u.tree, u.mode_sizes, int(rng.integers(1, 4)), rng).scale(rng.uniform(0.05, 1.0)))
        gap = norm(sub(u, v))
        assert norm(sub(soft_threshold(u, alpha), soft_threshold(v, alpha))) <= gap * (1 + 1e-10)


def test_monotonicity_of_single_edge_shrink():
    rng = np.random.default_rng(6)
    for _ in range(500):
        u, alpha = _random_case(rng)
        before = hsvd_spectra(u)
        for s in u.tree.schedule:
            after = hsvd_spectra(edge_soft_threshold(u, s, alpha))
            for b, a in zip(before, after):
                size = max(len(a.sigma), len(b.sigma))
                assert np.all(_padded(a.sigma, size) <= _padded(b.sigma, size) + 1e-10)


def test_output_ranks_do_not_grow():
    rng = np.random.default_rng(7)
    for _ in range(20):
        u, alpha = _random_case(rng)
        ranks_in = [s.rank for s in hsvd_spectra(u)]
        ranks_out = [s.rank for s in hsvd_spectra(soft_threshold(u, alpha))]
        assert all(o <= i for o, i in zip(ranks_out, ranks_in))


def test_inverse_decay_bound():
    """d^alpha <= d^{theta alpha} / theta."""
    rng = np.random.default_rng(8)
    for _ in range(200):
        sigma = np.sort(np.abs(rng.standard_normal(int(rng.integers(1, 12)))) * 10 ** rng.uniform(-2, 2))[::-1]
        alpha = float(sigma[0] * 10 ** rng.uniform(-3, 0.3))
        for theta in (0.5, 0.75, 0.9):
            _, _, d_alpha = edge_diagnostics(sigma, alpha)
            _, _, d_theta = edge_diagnostics(sigma, theta * alpha)
            assert d_alpha <= d_theta / theta + 1e-10


def test_fit_decay_algebraic():
    k = np.arange(1, 31, dtype=float)
    model = fit_decay([EdgeSpectrum(0, k**-2.0)])
    assert model.kind == "weak-lp"
    assert 1.9 <= 1.0 / model.p <= 2.1
    assert predicted_rank(model, 0.01) == pytest.approx(model.wlp_norm**model.p * 0.01**-model.p)


def test_fit_decay_exponential():
    k = np.arange(1, 21, dtype=float)
    model = fit_decay([EdgeSpectrum(0, np.exp(-k))])
    assert model.kind == "exponential"
    assert model.c == pytest.approx(1.0, rel=0.1)
    assert model.beta == pytest.approx(1.0, rel=0.1)
    assert predicted_error(model, 1e-3, 3) > 0


def test_fit_decay_degenerate():
    model = fit_decay([EdgeSpectrum(0, np.array([1.0, 1.0, 1.0, 1.0, 0.0, 0.0]))])
    assert model.kind == "none"
    with pytest.raises(InsufficientDataError):
        fit_decay([EdgeSpectrum(0, np.array([1.0, 0.5]))])


def test_rank_lemma_bound_formula():
    assert rank_lemma_bound(np.array([4.0, 2.0, 0.6, 0.4]), 0.1, 1.0) == pytest.approx(0.04 + 3)


def test_rank_lemma_bound_exponential_decay():
    """With sigma_k = e^{-k} the fitted count bounds the ranks of S_alpha(w) for ||v - w|| <= eps."""
    rng = np.random.default_rng(10)
    tree = linear_tree(2)
    v = from_dense(np.diag(np.exp(-np.arange(1.0, 21.0))), tree)
    spectra = hsvd_spectra(v)
    model = fit_decay(spectra)
    assert model.kind == "exponential"
    for alpha in (1e-2, 1e-3, 1e-5):
        for _ in range(10):
            e = random(tree, (20, 20), 3, rng)
            eps = float(alpha * rng.uniform(0.1, 2.0))
            w = axpy(1.0, e.scale(eps / norm(e)), v)
            assert rank_profile(soft_threshold(w, alpha))[0] <= rank_lemma_bound_exponential(model, eps, alpha)
        estimate = rank_lemma_bound_exponential(model, alpha, alpha)
        assert estimate >= rank_lemma_bound(spectra[0].sigma, alpha, alpha) - 1e-6
        logger.info(f"alpha={alpha:g}: exponential-decay rank bound {estimate:.2f}")

    algebraic = fit_decay([EdgeSpectrum(0, np.arange(1.0, 31.0) ** -2.0)])
    with pytest.raises(ValueError):
        rank_lemma_bound_exponential(algebraic, 0.1, 1.0)


def test_complexity_slope_band():
    """Time beyond the rank-one sweep grows like r^4."""
    slope = complexity_slope(np.random.default_rng(9))
    logger.info(f"soft_threshold log-log slope over ranks 32..128: {slope:.2f}")
    assert 2.5 <= slope <= 4.5


def test_complexity_slope_rejects_ranks_above_mode_size():
    with pytest.raises(ValueError):
        complexity_slope(np.random.default_rng(0), ranks=(4, 16), mode_size=8)


TESTS = [
    test_scalar_soft,
    test_scalar_soft_is_lipschitz,
    test_scalar_hard,
    test_edge_soft_threshold_matrix_case,
    test_edge_shrink_distance_equals_d_alpha,
    test_rank_one_annihilated_at_edge_count_alpha,
    test_soft_threshold_zero_alpha_is_identity,
    test_prox_oracle_two_modes,
    test_threshold_diagnostics_example,
    test_tie_is_excluded_from_count,
    test_sandwich_bounds,
    test_non_expansive,
    test_monotonicity_of_single_edge_shrink,
    test_output_ranks_do_not_grow,
    test_inverse_decay_bound,
    test_fit_decay_algebraic,
    test_fit_decay_exponential,
    test_fit_decay_degenerate,
    test_rank_lemma_bound_formula,
    test_rank_lemma_bound_exponential_decay,
    test_complexity_slope_band,
    test_complexity_slope_rejects_ranks_above_mode_size,
]


if __name__ == "__main__":
    from script_runner import run_script

    run_script(TESTS, "Testing soft thresholding")
