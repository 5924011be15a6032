"""
Kronecker-sum operators acting on hierarchical tensors.
Uses numpy/scipy.linalg for the small mode matrices and scipy.sparse for
the materialized operator used by the dense oracles.
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
from loguru import logger

from src.htensor.htensor import HTensor, axpy, zeros
from src.htensor.linalg import absorb
from src.utils.errors import InvalidConfigError, InvalidOrderError, ShapeMismatchError

# Operator transfer tensor of a Kronecker sum: child bases (I, A_child),
# output 0 = I (x) I, output 1 = A_left (x) I + I (x) A_right.
KRON_TRANSFER = np.zeros((2, 2, 2))
KRON_TRANSFER[0, 0, 0] = 1.0
KRON_TRANSFER[1, 0, 1] = 1.0
KRON_TRANSFER[0, 1, 1] = 1.0

ROOT_COUPLING = np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class SpectrumBounds:
    """gamma ||v||^2 <= <Av, v> <= Gamma ||v||^2."""
    gamma: float
    Gamma: float

    def __post_init__(self):
        if not 0 < self.gamma <= self.Gamma:
            raise InvalidConfigError("gamma", f"need 0 < gamma <= Gamma, got ({self.gamma}, {self.Gamma})")

    @property
    def kappa(self) -> float:
        return self.Gamma / self.gamma


@dataclass(frozen=True, eq=False)
class ModeMatrix:
    """Symmetric mode matrix together with its sorted eigenvalues."""
    matrix: np.ndarray
    eigenvalues: np.ndarray

    @property
    def eig_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def eig_max(self) -> float:
        return float(self.eigenvalues[-1])


@dataclass(frozen=True, eq=False)
class KronSumOperator:
    """
    A = sum over terms of M_1 (x) ... (x) M_d, None standing for the identity.

    Attributes:
        terms: One d-tuple of mode matrices (or None) per term
        mode_sizes: n_1..n_d
        bounds: Spectrum bounds of A
    """
    terms: Tuple[Tuple[np.ndarray | None, ...], ...]
    mode_sizes: Tuple[int, ...]
    bounds: SpectrumBounds

    def __post_init__(self):
        for term in self.terms:
            if len(term) != len(self.mode_sizes):
                raise ShapeMismatchError(f"term has {len(term)} factors for {len(self.mode_sizes)} modes")
            for factor, n in zip(term, self.mode_sizes):
                if factor is not None and factor.shape != (n, n):
                    raise ShapeMismatchError(f"factor of shape {factor.shape} on a mode of size {n}")

    @property
    def d(self) -> int:
        return len(self.mode_sizes)

    @property
    def is_symmetric(self) -> bool:
        return all(f is None or np.allclose(f, f.T) for term in self.terms for f in term)

    def kron_factors(self) -> List[np.ndarray] | None:
        """Per-mode factors A_i if A = sum_i I (x) .. A_i .. (x) I, else None."""
        factors = [np.zeros((n, n)) for n in self.mode_sizes]
        for term in self.terms:
            active = [i for i, f in enumerate(term) if f is not None]
            if len(active) != 1:
                return None
            factors[active[0]] = factors[active[0]] + term[active[0]]
        return factors

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        """Materialize A with mode 1 as the slowest index."""
        total = int(np.prod(self.mode_sizes))
        result = scipy.sparse.csr_matrix((total, total))
        for term in self.terms:
            product = scipy.sparse.identity(1, format="csr")
            for factor, n in zip(term, self.mode_sizes):
                block = scipy.sparse.identity(n, format="csr") if factor is None else scipy.sparse.csr_matrix(factor)
                product = scipy.sparse.kron(product, block, format="csr")
            result = result + product
        return result.tocsr()


def laplacian_1d(n: int, h: float) -> ModeMatrix:
    """
    Tridiagonal (-1, 2, -1)/h^2 with its analytic eigenvalues.

    Args:
        n: Number of interior grid points (>= 2)
        h: Mesh width (> 0)

    Returns:
        ModeMatrix with eigenvalues (2 - 2 cos(k pi/(n+1)))/h^2, k = 1..n
    """
    if n < 2:
        raise InvalidConfigError("n", f"grid size must be at least 2, got {n}")
    if h <= 0:
        raise InvalidConfigError("h", f"mesh width must be positive, got {h}")
    matrix = (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
    k = np.arange(1, n + 1)
    eigenvalues = np.sort((2.0 - 2.0 * np.cos(k * np.pi / (n + 1))) / h**2)
    return ModeMatrix(matrix, eigenvalues)


def kron_sum(factors: Sequence[np.ndarray]) -> KronSumOperator:
    """
    Kronecker sum of symmetric factors with eigenvalue-additive bounds.

    Args:
        factors: d symmetric positive definite mode matrices

    Returns:
        KronSumOperator with gamma = sum min eig, Gamma = sum max eig
    """
    if len(factors) < 2:
        raise InvalidOrderError(f"tensor order must be at least 2, got {len(factors)}")
    d = len(factors)
    terms = []
    lo = hi = 0.0
    for i, factor in enumerate(factors):
        factor = np.asarray(factor, dtype=float)
        eigenvalues = scipy.linalg.eigvalsh(factor)
        lo += eigenvalues[0]
        hi += eigenvalues[-1]
        terms.append(tuple(factor if j == i else None for j in range(d)))
    sizes = tuple(np.asarray(f).shape[0] for f in factors)
    return KronSumOperator(tuple(terms), sizes, SpectrumBounds(float(lo), float(hi)))


def kron_sum_laplacian(d: int, n: int, h: float | None = None) -> KronSumOperator:
    """
    sum_i I (x) .. L .. (x) I with L = laplacian_1d(n, h).

    Args:
        d: Tensor order (>= 2)
        n: Mode size
        h: Mesh width, default 1/(n+1)

    Returns:
        KronSumOperator with gamma = d*lambda_min(L), Gamma = d*lambda_max(L)
    """
    if d < 2:
        logger.error(f"Kronecker-sum Laplacian requires d >= 2, got {d}")
        raise InvalidOrderError(f"tensor order must be at least 2, got {d}")
    h = 1.0 / (n + 1) if h is None else h
    lap = laplacian_1d(n, h)
    terms = tuple(tuple(lap.matrix if j == i else None for j in range(d)) for i in range(d))
    bounds = SpectrumBounds(d * lap.eig_min, d * lap.eig_max)
    logger.info(f"Initialized Laplacian d={d}, n={n}, kappa={bounds.kappa:.2f}")
    return KronSumOperator(terms, (n,) * d, bounds)


def synthetic_operator(d: int, n: int, kappa: float, seed: int = 0) -> KronSumOperator:
    """
    Kronecker sum of Q diag(lambda) Q^T with seeded orthogonal Q per mode.

    Eigenvalues are evenly spaced in [1/d, kappa/d], so gamma = 1 and Gamma = kappa.
    """
    if d < 2:
        raise InvalidOrderError(f"tensor order must be at least 2, got {d}")
    if n < 2:
        raise InvalidConfigError("n", f"mode size must be at least 2, got {n}")
    if kappa < 1:
        raise InvalidConfigError("kappa", f"condition number must be >= 1, got {kappa}")
    rng = np.random.default_rng(seed)
    spectrum = np.linspace(1.0 / d, kappa / d, n)
    terms = []
    for i in range(d):
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        factor = (q * spectrum) @ q.T
        factor = 0.5 * (factor + factor.T)
        terms.append(tuple(factor if j == i else None for j in range(d)))
    logger.info(f"Initialized synthetic operator d={d}, n={n}, kappa={kappa}")
    return KronSumOperator(tuple(terms), (n,) * d, SpectrumBounds(1.0, float(kappa)))


def identity_operator(d: int, n: int) -> KronSumOperator:
    return KronSumOperator(((None,) * d,), (n,) * d, SpectrumBounds(1.0, 1.0))


def apply_exact(A: KronSumOperator, u: HTensor) -> HTensor:
    """
    Exact A u without recompression.

    Pure Kronecker sums use the rank-2 operator network (ranks at most double);
    other operators add one copy of u per term.

    Args:
        A: Operator
        u: Hierarchical tensor with matching mode sizes

    Returns:
        HTensor representing A u
    """
    if tuple(u.mode_sizes) != tuple(A.mode_sizes):
        logger.error(f"Operator modes {A.mode_sizes} do not match tensor modes {u.mode_sizes}")
        raise ShapeMismatchError(f"operator modes {A.mode_sizes} vs tensor modes {u.mode_sizes}")
    if u.is_zero:
        return u
    factors = A.kron_factors()
    if factors is not None:
        return _apply_kron_sum(factors, u)
    result = zeros(u.tree, u.mode_sizes)
    for term in A.terms:
        result = axpy(1.0, _apply_term(term, u), result)
    return result


def _apply_term(term: Sequence[np.ndarray | None], u: HTensor) -> HTensor:
    if all(f is None for f in term):
        return u
    tree = u.tree
    cores = list(u.cores)
    for mode, leaf in enumerate(tree.leaves):
        if term[mode] is not None:
            cores[leaf] = term[mode] @ cores[leaf]
    return HTensor(tree, u.mode_sizes, tuple(cores), u.gauge_edge, u.gauge)


def _apply_kron_sum(factors: Sequence[np.ndarray], u: HTensor) -> HTensor:
    tree = u.tree
    cores = list(u.cores)
    for v in tree.vertices:
        core = cores[v]
        if tree.is_leaf(v):
            lifted = np.stack([core, factors[tree.nodes[v][0] - 1] @ core], axis=-1)
            cores[v] = lifted.reshape(core.shape[0], -1)
        else:
            a, b, k = core.shape
            cores[v] = np.einsum("abk,pqs->apbqks", core, KRON_TRANSFER).reshape(2 * a, 2 * b, 2 * k)

    root = tree.root_edge
    if u.gauge_edge == root:
        gauge = np.kron(u.gauge, ROOT_COUPLING)
    else:
        gauge = np.kron(u.gauge, np.eye(2))
        right = tree.root_children[1]
        axis = tree.axis(right, root)
        bond = u.cores[right].shape[axis]
        cores[right] = absorb(cores[right], axis, np.kron(np.eye(bond), ROOT_COUPLING))
    return HTensor(tree, u.mode_sizes, tuple(cores), u.gauge_edge, gauge)
