#!/usr/bin/env python3
"""
Test script for hierarchical tensors: HSVD, arithmetic and truncation.
"""
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest
from loguru import logger

import config as app_config

from src.htensor.htensor import (
    axpy,
    canonicalize_at,
    from_cp,
    from_dense,
    hard_truncate,
    hsvd_spectra,
    inner,
    norm,
    random,
    rank_one,
    rank_one_factors,
    rank_profile,
    sub,
    to_dense,
    zeros,
)
from src.htensor.linalg import unfold
from src.tree.dim_tree import balanced_tree, linear_tree
from src.utils.errors import CapacityError, PreconditionError, TreeMismatchError


def _trees(d):
    return [linear_tree(d), balanced_tree(d)]


def _padded(a, size):
    return np.pad(a, (0, size - len(a)))


def test_dense_round_trip():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 4, 2, 3))
    for tree in _trees(4):
        u = from_dense(x, tree)
        assert np.max(np.abs(to_dense(u) - x)) <= 1e-12 * np.max(np.abs(x))


def test_hsvd_matches_dense_unfoldings():
    """Edge spectra equal the singular values of the dense matricizations."""
    rng = np.random.default_rng(1)
    for d in (2, 3, 4, 5):
        sizes = rng.integers(2, 5, size=d)
        for tree in _trees(d):
            u = random(tree, sizes, 3, rng)
            x = to_dense(u)
            for spectrum in hsvd_spectra(u):
                dense = np.linalg.svd(unfold(x, tree.edge(spectrum.t).modes), compute_uv=False)
                dense = dense[dense > 1e-14 * dense[0]]
                size = max(len(dense), len(spectrum.sigma))
                gap = np.max(np.abs(_padded(spectrum.sigma, size) - _padded(dense, size)))
                assert gap <= 1e-10 * max(1.0, dense[0])
    logger.info("HSVD agrees with dense SVDs for d = 2..5")


def test_norm_matches_every_matricization():
    rng = np.random.default_rng(2)
    tree = balanced_tree(5)
    u = random(tree, (3, 2, 4, 2, 3), 2, rng)
    x = to_dense(u)
    for t in tree.schedule:
        assert abs(norm(u) - np.linalg.norm(unfold(x, tree.edge(t).modes))) <= 1e-10 * norm(u)


def test_canonicalize_preserves_tensor():
    rng = np.random.default_rng(3)
    for tree in _trees(4):
        u = random(tree, (3, 3, 2, 4), 3, rng)
        x = to_dense(u)
        for t in tree.schedule:
            c = canonicalize_at(u, t)
            assert c.canonical and c.gauge_edge == t
            assert np.linalg.norm(to_dense(c) - x) <= 1e-12 * np.linalg.norm(x)
            sigma = np.diag(c.gauge)
            assert np.all(np.diff(sigma) <= 0)


def test_move_gauge_after_canonicalize():
    rng = np.random.default_rng(4)
    tree = linear_tree(5)
    u = random(tree, (2, 3, 2, 3, 2), 2, rng)
    x = to_dense(u)
    w = canonicalize_at(u, 0)
    for t in reversed(tree.schedule):
        w = w.move_gauge(t)
        assert w.gauge_edge == t
        assert np.linalg.norm(to_dense(w) - x) <= 1e-12 * np.linalg.norm(x)


def test_axpy_and_inner():
    rng = np.random.default_rng(5)
    tree = balanced_tree(4)
    u = random(tree, (3, 2, 3, 2), 2, rng)
    v = random(tree, (3, 2, 3, 2), 3, rng)
    xu, xv = to_dense(u), to_dense(v)
    w = axpy(-0.7, u, v)
    assert np.linalg.norm(to_dense(w) - (xv - 0.7 * xu)) <= 1e-12 * np.linalg.norm(xv - 0.7 * xu)
    assert w.ranks == tuple(a + b for a, b in zip(u.ranks, v.ranks))
    assert abs(inner(u, v) - np.sum(xu * xv)) <= 1e-10 * np.linalg.norm(xu) * np.linalg.norm(xv)
    assert abs(norm(sub(u, v)) - np.linalg.norm(xu - xv)) <= 1e-10 * np.linalg.norm(xu - xv)


def test_zero_tensor_is_accepted():
    tree = linear_tree(3)
    z = zeros(tree, (2, 3, 4))
    assert z.is_zero and z.ranks == (0, 0, 0)
    assert norm(z) == 0.0
    assert np.all(to_dense(z) == 0)
    assert rank_profile(z) == (0, 0, 0)
    u = rank_one(tree, [np.ones(2), np.arange(1.0, 4.0), np.ones(4)])
    assert axpy(1.0, z, u) is u
    assert norm(axpy(1.0, u, z)) == pytest.approx(norm(u))
    assert inner(z, u) == 0.0
    assert canonicalize_at(z, 1).is_zero


def test_from_cp_and_rank_one_factors():
    rng = np.random.default_rng(6)
    tree = balanced_tree(4)
    factors = [rng.standard_normal((n, 2)) for n in (3, 4, 2, 3)]
    u = from_cp(tree, factors, [2.0, -1.0])
    x = np.einsum("ar,br,cr,dr,r->abcd", *factors, np.array([2.0, -1.0]))
    assert np.linalg.norm(to_dense(u) - x) <= 1e-12 * np.linalg.norm(x)
    assert max(rank_profile(u)) <= 2

    vectors = [rng.standard_normal(n) for n in (3, 4, 2, 3)]
    r1 = rank_one(tree, vectors, scale=3.0)
    recovered = rank_one_factors(r1)
    y = np.einsum("a,b,c,d->abcd", *recovered)
    assert np.linalg.norm(y - to_dense(r1)) <= 1e-12 * np.linalg.norm(y)

    with pytest.raises(PreconditionError):
        rank_one_factors(u)


def test_hard_truncate_tolerance_zero_is_identity():
    rng = np.random.default_rng(7)
    u = random(linear_tree(4), (3, 3, 3, 3), 2, rng)
    t = hard_truncate(u, tol=0.0)
    assert rank_profile(t) == rank_profile(u)
    assert norm(sub(t, u)) <= 1e-12 * norm(u)


def test_hard_truncate_removes_small_perturbation():
    """Rank one plus a perturbation of norm 1e-6 truncates back to rank one."""
    rng = np.random.default_rng(8)
    tree = balanced_tree(4)
    sizes = (3, 4, 3, 2)
    base = rank_one(tree, [rng.standard_normal(n) for n in sizes])
    noise = random(tree, sizes, 2, rng)
    noise = noise.scale(1e-6 / norm(noise))
    u = axpy(1.0, noise, base)
    t = hard_truncate(u, tol=1e-5)
    assert rank_profile(t) == (1,) * tree.num_edges
    assert np.linalg.norm(to_dense(t) - to_dense(u)) <= 1e-5


def test_hard_truncate_rank_caps():
    rng = np.random.default_rng(9)
    tree = linear_tree(4)
    u = random(tree, (4, 4, 4, 4), 3, rng)
    full = rank_profile(u)
    assert norm(sub(hard_truncate(u, rank_caps=list(full)), u)) <= 1e-12 * norm(u)
    capped = hard_truncate(u, rank_caps=1)
    assert max(rank_profile(capped)) == 1


def test_mirsky_inequality():
    rng = np.random.default_rng(10)
    for _ in range(500):
        d = int(rng.integers(2, 6))
        tree = linear_tree(d) if rng.random() < 0.5 else balanced_tree(d)
        sizes = rng.integers(2, 7, size=d)
        u = random(tree, sizes, int(rng.integers(1, 5)), rng)
        u = u.scale(1.0 / norm(u))
        e = random(tree, sizes, int(rng.integers(1, 5)), rng)
        e = e.scale(1e-3 / norm(e))
        for s, p in zip(hsvd_spectra(u), hsvd_spectra(axpy(1.0, e, u))):
            size = max(len(s.sigma), len(p.sigma))
            gap = np.linalg.norm(_padded(s.sigma, size) - _padded(p.sigma, size))
            assert gap <= 1e-3 * (1 + 1e-10)


def test_dense_cap_and_tree_mismatch():
    rng = np.random.default_rng(11)
    u = random(linear_tree(3), (4, 4, 4), 2, rng)
    with pytest.raises(CapacityError):
        to_dense(u, cap=10)
    app_config._settings = app_config.Settings(dense_cap=10)
    try:
        with pytest.raises(CapacityError):
            to_dense(u)
        with pytest.raises(CapacityError):
            from_dense(np.ones((4, 4, 4)), linear_tree(3))
        assert to_dense(u, cap=64).shape == (4, 4, 4)
    finally:
        app_config._settings = None
    v = random(linear_tree(3), (4, 4, 3), 2, rng)
    with pytest.raises(TreeMismatchError):
        axpy(1.0, u, v)


TESTS = [
    test_dense_round_trip,
    test_hsvd_matches_dense_unfoldings,
    test_norm_matches_every_matricization,
    test_canonicalize_preserves_tensor,
    test_move_gauge_after_canonicalize,
    test_axpy_and_inner,
    test_zero_tensor_is_accepted,
    test_from_cp_and_rank_one_factors,
    test_hard_truncate_tolerance_zero_is_identity,
    test_hard_truncate_removes_small_perturbation,
    test_hard_truncate_rank_caps,
    test_mirsky_inequality,
    test_dense_cap_and_tree_mismatch,
]


if __name__ == "__main__":
    from script_runner import run_script

    run_script(TESTS, "Testing hierarchical tensors")
