#!/usr/bin/env python3
"""
Test script for Kronecker-sum operators and residual evaluation.
"""
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest
from loguru import logger

from src.htensor.htensor import from_dense, inner, norm, random, rank_one, sub, to_dense, zeros
from src.operators.kron_sum import (
    KronSumOperator,
    SpectrumBounds,
    apply_exact,
    identity_operator,
    kron_sum,
    kron_sum_laplacian,
    laplacian_1d,
    synthetic_operator,
)
from src.operators.residual import exact_residual, residual_inexact, richardson_step
from src.reference.dense import dense_solve
from src.solver.richardson import contraction_params
from src.tree.dim_tree import balanced_tree, linear_tree
from src.utils.errors import InvalidConfigError, ShapeMismatchError


def _dense_apply(A, u):
    return (A.to_sparse() @ to_dense(u).ravel()).reshape(u.mode_sizes)


def test_laplacian_1d_eigenvalues():
    lap = laplacian_1d(3, 1.0)
    assert np.allclose(lap.eigenvalues, [2 - np.sqrt(2), 2, 2 + np.sqrt(2)])
    assert np.allclose(np.linalg.eigvalsh(lap.matrix), lap.eigenvalues)
    assert np.allclose(laplacian_1d(2, 1.0).eigenvalues, [1.0, 3.0])
    assert np.array_equal(lap.matrix, lap.matrix.T)


def test_laplacian_1d_rejects_bad_input():
    with pytest.raises(InvalidConfigError):
        laplacian_1d(1, 1.0)
    with pytest.raises(InvalidConfigError):
        laplacian_1d(4, 0.0)


def test_kron_sum_laplacian_bounds():
    A = kron_sum_laplacian(2, 3, 1.0)
    eigenvalues = np.linalg.eigvalsh(A.to_sparse().toarray())
    assert abs(A.bounds.gamma - 2 * (2 - np.sqrt(2))) <= 1e-10
    assert abs(A.bounds.Gamma - 2 * (2 + np.sqrt(2))) <= 1e-10
    assert abs(eigenvalues[0] - A.bounds.gamma) <= 1e-10
    assert abs(eigenvalues[-1] - A.bounds.Gamma) <= 1e-10

    small = kron_sum_laplacian(2, 2, 1.0)
    assert np.allclose(np.linalg.eigvalsh(small.to_sparse().toarray()), [2, 4, 4, 6])
    assert (small.bounds.gamma, small.bounds.Gamma) == pytest.approx((2.0, 6.0))


def test_rayleigh_quotient_within_bounds():
    rng = np.random.default_rng(0)
    A = kron_sum_laplacian(3, 4)
    matrix = A.to_sparse()
    for _ in range(100):
        v = rng.standard_normal(matrix.shape[0])
        q = v @ (matrix @ v) / (v @ v)
        assert A.bounds.gamma * (1 - 1e-12) <= q <= A.bounds.Gamma * (1 + 1e-12)


def test_synthetic_operator_spectrum():
    A = synthetic_operator(3, 4, kappa=3.0, seed=1)
    eigenvalues = np.linalg.eigvalsh(A.to_sparse().toarray())
    assert eigenvalues[0] == pytest.approx(1.0)
    assert eigenvalues[-1] == pytest.approx(3.0)
    assert A.is_symmetric
    assert A.kron_factors() is not None


def test_apply_identity_and_zero():
    rng = np.random.default_rng(2)
    tree = linear_tree(3)
    u = random(tree, (3, 3, 3), 2, rng)
    assert norm(sub(apply_exact(identity_operator(3, 3), u), u)) <= 1e-12 * norm(u)
    assert apply_exact(kron_sum_laplacian(3, 3), zeros(tree, (3, 3, 3))).is_zero


def test_apply_matches_dense_product():
    rng = np.random.default_rng(3)
    for tree in (linear_tree(3), balanced_tree(3)):
        for A in (kron_sum_laplacian(3, 4), synthetic_operator(3, 4, 3.0, seed=4)):
            u = random(tree, (4, 4, 4), 2, rng)
            expected = _dense_apply(A, u)
            result = to_dense(apply_exact(A, u))
            assert np.linalg.norm(result - expected) <= 1e-10 * np.linalg.norm(expected)


def test_apply_with_gauge_off_the_root_edge():
    rng = np.random.default_rng(5)
    tree = balanced_tree(4)
    A = kron_sum_laplacian(4, 3)
    u = random(tree, (3, 3, 3, 3), 2, rng).orthogonalize(0)
    assert u.gauge_edge != tree.root_edge
    expected = _dense_apply(A, u)
    assert np.linalg.norm(to_dense(apply_exact(A, u)) - expected) <= 1e-10 * np.linalg.norm(expected)


def test_apply_general_terms():
    """Terms with several non-identity factors fall back to per-term products."""
    rng = np.random.default_rng(6)
    m = rng.standard_normal((3, 3))
    m = m + m.T
    A = KronSumOperator(((m, m, None), (None, None, np.eye(3))), (3, 3, 3), SpectrumBounds(1.0, 2.0))
    assert A.kron_factors() is None
    u = random(linear_tree(3), (3, 3, 3), 2, rng)
    expected = _dense_apply(A, u)
    assert np.linalg.norm(to_dense(apply_exact(A, u)) - expected) <= 1e-10 * np.linalg.norm(expected)


def test_apply_shape_mismatch():
    rng = np.random.default_rng(7)
    with pytest.raises(ShapeMismatchError):
        apply_exact(kron_sum_laplacian(3, 4), random(linear_tree(3), (4, 4, 3), 1, rng))


def test_operator_symmetry():
    rng = np.random.default_rng(8)
    A = synthetic_operator(4, 3, 5.0, seed=9)
    tree = balanced_tree(4)
    for _ in range(5):
        u = random(tree, (3,) * 4, 2, rng)
        v = random(tree, (3,) * 4, 3, rng)
        left, right = inner(apply_exact(A, u), v), inner(u, apply_exact(A, v))
        assert abs(left - right) <= 1e-10 * max(abs(left), 1.0)


def test_richardson_map_contracts():
    rng = np.random.default_rng(10)
    A = kron_sum_laplacian(3, 4)
    mu, rho = contraction_params(A.bounds)
    tree = linear_tree(3)
    f = rank_one(tree, [np.ones(4)] * 3)
    for _ in range(10):
        v = random(tree, (4, 4, 4), 2, rng)
        w = random(tree, (4, 4, 4), 2, rng)
        gap = norm(sub(richardson_step(A, v, f, mu), richardson_step(A, w, f, mu)))
        assert gap <= rho * norm(sub(v, w)) * (1 + 1e-10)


def test_residual_inexact_certificate():
    rng = np.random.default_rng(11)
    A = kron_sum_laplacian(3, 4)
    tree = balanced_tree(3)
    f = rank_one(tree, [np.ones(4)] * 3)
    u = random(tree, (4, 4, 4), 3, rng)
    exact = exact_residual(A, u, f)
    assert norm(sub(residual_inexact(A, u, f, 0.0), exact)) <= 1e-12 * norm(exact)
    for delta in (1e-8, 1e-4, 1e-1, 10.0):
        r = residual_inexact(A, u, f, delta)
        assert norm(sub(r, exact)) <= delta * (1 + 1e-10)
        assert r.rank_max <= exact.rank_max
        logger.info(f"delta={delta:g}: residual ranks {exact.rank_max} -> {r.rank_max}")


def test_residual_at_solution_is_small():
    A = kron_sum_laplacian(3, 4)
    tree = linear_tree(3)
    f = rank_one(tree, [np.ones(4)] * 3)
    solution = from_dense(dense_solve(A, f), tree)
    for delta in (1e-8, 1e-6):
        assert norm(residual_inexact(A, solution, f, delta)) <= delta


def test_kron_sum_bounds_from_factors():
    rng = np.random.default_rng(12)
    factors = []
    for n in (2, 3, 4):
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        factors.append((q * rng.uniform(1.0, 4.0, n)) @ q.T)
    A = kron_sum(factors)
    eigenvalues = np.linalg.eigvalsh(A.to_sparse().toarray())
    assert eigenvalues[0] == pytest.approx(A.bounds.gamma)
    assert eigenvalues[-1] == pytest.approx(A.bounds.Gamma)
    u = random(linear_tree(3), (2, 3, 4), 2, rng)
    expected = _dense_apply(A, u)
    assert np.allclose(to_dense(apply_exact(A, u)), expected)


TESTS = [
    test_laplacian_1d_eigenvalues,
    test_laplacian_1d_rejects_bad_input,
    test_kron_sum_laplacian_bounds,
    test_rayleigh_quotient_within_bounds,
    test_synthetic_operator_spectrum,
    test_apply_identity_and_zero,
    test_apply_matches_dense_product,
    test_apply_with_gauge_off_the_root_edge,
    test_apply_general_terms,
    test_apply_shape_mismatch,
    test_operator_symmetry,
    test_richardson_map_contracts,
    test_residual_inexact_certificate,
    test_residual_at_solution_is_small,
    test_kron_sum_bounds_from_factors,
]


if __name__ == "__main__":
    from script_runner import run_script

    run_script(TESTS, "Testing Kronecker-sum operators")
