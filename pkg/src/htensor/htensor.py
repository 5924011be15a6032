"""
Hierarchical tensors stored as tree tensor networks over a DimensionTree.
Uses numpy for core contractions and QR/SVD re-gauging for root moves.

Every non-root tree node owns a core: leaves hold an (n_i, k) mode frame,
interior nodes a (k_left, k_right, k) transfer tensor. One edge additionally
carries the gauge matrix (k_lower, k_upper); canonicalizing at edge t makes
every core orthonormal toward t and the gauge diag(sigma_t(u)).
"""
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np
from loguru import logger

from config import get_settings
from src.htensor.linalg import absorb, qr_toward, robust_svd, take, unfold
from src.tree.dim_tree import DimensionTree
from src.utils.errors import CapacityError, PreconditionError, TreeMismatchError

ZERO_CUTOFF = 1e-14

Cores = Tuple[np.ndarray | None, ...]


@dataclass(frozen=True)
class EdgeSpectrum:
    """Nonincreasing singular values of one matricization M_t(u)."""
    t: int
    sigma: np.ndarray

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.sigma))


@dataclass(frozen=True, eq=False)
class HTensor:
    """
    Immutable hierarchical tensor.

    Attributes:
        tree: Dimension tree
        mode_sizes: n_1..n_d
        cores: Core per tree node (None at the root)
        gauge_edge: Edge holding the gauge matrix
        gauge: Matrix joining the two cores on gauge_edge
        orthonormal: All cores orthonormal toward gauge_edge
        canonical: Orthonormal and gauge is diag(sigma), sigma nonincreasing
    """
    tree: DimensionTree
    mode_sizes: Tuple[int, ...]
    cores: Cores
    gauge_edge: int
    gauge: np.ndarray
    orthonormal: bool = False
    canonical: bool = False

    @property
    def d(self) -> int:
        return self.tree.d

    @property
    def ranks(self) -> Tuple[int, ...]:
        """Representation rank per edge (an upper bound on rank_t)."""
        result = []
        for t, (lower, _) in enumerate(self.tree.edges):
            if t == self.gauge_edge:
                result.append(min(self.gauge.shape))
            else:
                result.append(self.cores[lower].shape[self.tree.axis(lower, t)])
        return tuple(result)

    @property
    def rank_min(self) -> int:
        return min(self.ranks)

    @property
    def rank_max(self) -> int:
        return max(self.ranks)

    @property
    def is_zero(self) -> bool:
        return self.rank_min == 0

    def scale(self, a: float) -> "HTensor":
        if a == 0 or self.is_zero:
            return zeros(self.tree, self.mode_sizes)
        return replace(self, gauge=a * self.gauge, canonical=self.canonical and a > 0)

    # -- gauge handling -------------------------------------------------

    def flat_cores(self) -> List[np.ndarray | None]:
        """Cores with the gauge folded into the lower core of its edge."""
        cores = list(self.cores)
        lower, _ = self.tree.edges[self.gauge_edge]
        cores[lower] = absorb(cores[lower], self.tree.axis(lower, self.gauge_edge), self.gauge.T)
        return cores

    def orthogonalize(self, t: int) -> "HTensor":
        """QR sweep from the far vertices toward edge t; gauge lands on t."""
        if self.is_zero:
            return self
        tree = self.tree
        cores = self.flat_cores()
        remainders: Dict[int, np.ndarray] = {}
        for v, e in tree.orthogonalization_plan(t):
            q, r = qr_toward(cores[v], tree.axis(v, e))
            cores[v] = q
            if e == t:
                remainders[v] = r
            else:
                w = tree.other_end(e, v)
                cores[w] = absorb(cores[w], tree.axis(w, e), r)
        lower, upper = tree.edges[t]
        gauge = remainders[lower] @ remainders[upper].T
        return HTensor(tree, self.mode_sizes, tuple(cores), t, gauge, orthonormal=True)

    def move_gauge(self, t: int) -> "HTensor":
        """Walk the gauge to edge t one shared vertex at a time (requires orthonormal)."""
        if not self.orthonormal:
            raise ValueError("move_gauge requires an orthonormal representation")
        tree = self.tree
        path = tree.edge_path(self.gauge_edge, t)
        if len(path) == 1:
            return self
        cores = list(self.cores)
        gauge = self.gauge
        for s, e in zip(path, path[1:]):
            v = tree.shared_vertex(s, e)
            folded = absorb(cores[v], tree.axis(v, s), gauge.T if v == tree.edges[s][0] else gauge)
            q, r = qr_toward(folded, tree.axis(v, e))
            cores[v] = q
            gauge = r if v == tree.edges[e][0] else r.T
        return HTensor(tree, self.mode_sizes, tuple(cores), t, gauge, orthonormal=True)

    def diagonalize(self) -> "HTensor":
        """SVD of the gauge; singular vectors go into the two adjacent cores."""
        tree = self.tree
        t = self.gauge_edge
        p, s, qt = robust_svd(self.gauge)
        keep = int(np.count_nonzero(s > ZERO_CUTOFF * s[0])) if s.size and s[0] > 0 else 0
        if keep == 0:
            return zeros(tree, self.mode_sizes)
        lower, upper = tree.edges[t]
        cores = list(self.cores)
        cores[lower] = absorb(cores[lower], tree.axis(lower, t), p[:, :keep].T)
        cores[upper] = absorb(cores[upper], tree.axis(upper, t), qt[:keep])
        return HTensor(
            tree, self.mode_sizes, tuple(cores), t, np.diag(s[:keep]),
            orthonormal=True, canonical=True,
        )

    def with_gauge_spectrum(self, sigma: np.ndarray) -> "HTensor":
        """
        Replace the canonical gauge values, dropping trailing directions.

        Args:
            sigma: New nonincreasing positive values, at most the current rank

        Returns:
            HTensor canonical at the same edge
        """
        if not self.canonical:
            raise ValueError("with_gauge_spectrum requires a canonical representation")
        k = len(sigma)
        if k == 0:
            return zeros(self.tree, self.mode_sizes)
        tree = self.tree
        t = self.gauge_edge
        lower, upper = tree.edges[t]
        cores = list(self.cores)
        cores[lower] = take(cores[lower], tree.axis(lower, t), k)
        cores[upper] = take(cores[upper], tree.axis(upper, t), k)
        return HTensor(
            tree, self.mode_sizes, tuple(cores), t, np.diag(np.asarray(sigma, dtype=float)),
            orthonormal=True, canonical=True,
        )


# -- constructors -----------------------------------------------------------


def zeros(tree: DimensionTree, mode_sizes: Sequence[int]) -> HTensor:
    """Zero tensor: every rank is 0."""
    mode_sizes = tuple(int(n) for n in mode_sizes)
    _check_modes(tree, mode_sizes)
    cores: List[np.ndarray | None] = [None] * len(tree.nodes)
    for v in tree.vertices:
        if tree.is_leaf(v):
            cores[v] = np.zeros((mode_sizes[tree.nodes[v][0] - 1], 0))
        else:
            cores[v] = np.zeros((0, 0, 0))
    return HTensor(
        tree, mode_sizes, tuple(cores), tree.root_edge, np.zeros((0, 0)),
        orthonormal=True, canonical=True,
    )


def from_cp(
    tree: DimensionTree,
    factors: Sequence[np.ndarray],
    weights: Sequence[float] | None = None,
) -> HTensor:
    """
    Exact HT representation of sum_j w_j a_1j x ... x a_dj.

    Args:
        tree: Dimension tree
        factors: d matrices of shape (n_i, R)
        weights: R weights (default all ones)

    Returns:
        HTensor with every representation rank equal to R
    """
    factors = [np.asarray(f, dtype=float) for f in factors]
    if len(factors) != tree.d:
        raise TreeMismatchError(f"expected {tree.d} factors, got {len(factors)}")
    terms = factors[0].shape[1]
    if any(f.ndim != 2 or f.shape[1] != terms for f in factors):
        raise TreeMismatchError("all factors need the same number of columns")
    mode_sizes = tuple(f.shape[0] for f in factors)
    weights = np.ones(terms) if weights is None else np.asarray(weights, dtype=float)
    if terms == 0 or not np.any(weights):
        return zeros(tree, mode_sizes)

    diagonal = np.zeros((terms, terms, terms))
    idx = np.arange(terms)
    diagonal[idx, idx, idx] = 1.0
    cores: List[np.ndarray | None] = [None] * len(tree.nodes)
    for v in tree.vertices:
        cores[v] = factors[tree.nodes[v][0] - 1] if tree.is_leaf(v) else diagonal
    return HTensor(tree, mode_sizes, tuple(cores), tree.root_edge, np.diag(weights))


def rank_one(tree: DimensionTree, vectors: Sequence[np.ndarray], scale: float = 1.0) -> HTensor:
    """Elementary tensor scale * v_1 x ... x v_d."""
    return from_cp(tree, [np.asarray(v, dtype=float).reshape(-1, 1) for v in vectors], [scale])


def random(
    tree: DimensionTree,
    mode_sizes: Sequence[int],
    rank: int | Sequence[int],
    rng: np.random.Generator,
) -> HTensor:
    """
    Gaussian cores with the given representation rank per edge.

    Args:
        tree: Dimension tree
        mode_sizes: n_1..n_d
        rank: One rank for all edges or one per edge
        rng: Source of randomness

    Returns:
        Non-orthonormal HTensor
    """
    mode_sizes = tuple(int(n) for n in mode_sizes)
    _check_modes(tree, mode_sizes)
    bonds = [int(rank)] * tree.num_edges if np.isscalar(rank) else [int(r) for r in rank]
    cores: List[np.ndarray | None] = [None] * len(tree.nodes)
    for v in tree.vertices:
        up = bonds[tree.up_edge[v]]
        if tree.is_leaf(v):
            cores[v] = rng.standard_normal((mode_sizes[tree.nodes[v][0] - 1], up))
        else:
            left, right = tree.children[v]
            cores[v] = rng.standard_normal((bonds[tree.up_edge[left]], bonds[tree.up_edge[right]], up))
    root = bonds[tree.root_edge]
    tensor = HTensor(tree, mode_sizes, tuple(cores), tree.root_edge, rng.standard_normal((root, root)))
    return zeros(tree, mode_sizes) if tensor.is_zero else tensor


def from_dense(
    x: np.ndarray,
    tree: DimensionTree,
    tol: float = 0.0,
    cap: int | None = None,
) -> HTensor:
    """
    HSVD of a dense array: column bases of every node unfolding.

    Args:
        x: Dense d-way array
        tree: Dimension tree with d == x.ndim
        tol: Absolute error budget; 0 keeps every nonzero singular direction
        cap: Maximum number of entries (default: settings.dense_cap)

    Returns:
        HTensor with ||to_dense(result) - x|| <= tol
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != tree.d:
        raise TreeMismatchError(f"array has {x.ndim} modes, tree has {tree.d}")
    cap = get_settings().dense_cap if cap is None else cap
    if x.size > cap:
        logger.error(f"Refusing to decompose {x.size} entries (cap {cap})")
        raise CapacityError(x.size, cap)
    if not np.any(x):
        return zeros(tree, x.shape)

    bases: Dict[int, np.ndarray] = {}
    for v in tree.postorder():
        u, s, _ = robust_svd(unfold(x, tree.nodes[v]))
        keep = int(np.count_nonzero(s > ZERO_CUTOFF * s[0]))
        bases[v] = u[:, :keep]

    cores: List[np.ndarray | None] = [None] * len(tree.nodes)
    for v in tree.vertices:
        if tree.is_leaf(v):
            cores[v] = bases[v]
            continue
        left, right = tree.children[v]
        ul, ur, uv = bases[left], bases[right], bases[v]
        stacked = uv.reshape(ul.shape[0], ur.shape[0], uv.shape[1])
        cores[v] = np.einsum("ia,jb,ijk->abk", ul, ur, stacked)

    left_root, right_root = tree.root_children
    gauge = bases[left_root].T @ unfold(x, tree.nodes[left_root]) @ bases[right_root]
    tensor = HTensor(tree, tuple(x.shape), tuple(cores), tree.root_edge, gauge)
    if tol > 0:
        tensor = hard_truncate(tensor, tol=tol)
    return tensor


# -- dense views ------------------------------------------------------------


def to_dense(u: HTensor, cap: int | None = None) -> np.ndarray:
    """
    Contract all cores into a dense array.

    Args:
        u: Hierarchical tensor
        cap: Maximum number of entries (default: settings.dense_cap)

    Returns:
        Array of shape u.mode_sizes
    """
    cap = get_settings().dense_cap if cap is None else cap
    total = int(np.prod(u.mode_sizes, dtype=np.int64))
    if total > cap:
        logger.error(f"Refusing to materialize {total} entries (cap {cap})")
        raise CapacityError(total, cap)
    if u.is_zero:
        return np.zeros(u.mode_sizes)
    tree = u.tree
    cores = u.flat_cores()
    partial: Dict[int, np.ndarray] = {}
    for v in tree.postorder():
        if tree.is_leaf(v):
            partial[v] = cores[v]
            continue
        left, right = tree.children[v]
        step = np.tensordot(partial[left], cores[v], axes=(1, 0))
        combined = np.einsum("ibk,jb->ijk", step, partial[right])
        partial[v] = combined.reshape(-1, combined.shape[-1])
    left_root, right_root = tree.root_children
    return (partial[left_root] @ partial[right_root].T).reshape(u.mode_sizes)


def rank_one_factors(u: HTensor) -> List[np.ndarray]:
    """
    Vectors v_i with u = v_1 x ... x v_d (scale folded into v_1).

    Raises:
        PreconditionError: u has some rank_t > 1
    """
    if u.is_zero:
        return [np.zeros(n) for n in u.mode_sizes]
    w = u
    for t in u.tree.schedule:
        w = canonicalize_at(w, t)
        if w.is_zero:
            return [np.zeros(n) for n in u.mode_sizes]
    if w.rank_max > 1:
        raise PreconditionError(f"tensor is not rank one (ranks {w.ranks})")
    tree = u.tree
    cores = w.flat_cores()
    weight = 1.0
    for v in tree.vertices:
        if not tree.is_leaf(v):
            weight *= float(cores[v][0, 0, 0])
    vectors = [cores[leaf][:, 0].copy() for leaf in tree.leaves]
    vectors[0] = weight * vectors[0]
    return vectors


# -- arithmetic -------------------------------------------------------------


def axpy(a: float, u: HTensor, v: HTensor) -> HTensor:
    """
    Exact a*u + v by block-diagonal stacking of cores.

    Args:
        a: Scalar applied to u
        u: First operand
        v: Second operand

    Returns:
        HTensor with rank_t <= rank_t(u) + rank_t(v)
    """
    _check_same(u, v)
    if a == 0 or u.is_zero:
        return v
    if v.is_zero:
        return u.scale(a)
    tree = u.tree
    cu = u.flat_cores()
    cv = v.flat_cores()
    left_root, _ = tree.root_children
    cu[left_root] = a * cu[left_root]

    cores: List[np.ndarray | None] = [None] * len(tree.nodes)
    for node in tree.vertices:
        x, y = cu[node], cv[node]
        if tree.is_leaf(node):
            cores[node] = np.concatenate([x, y], axis=1)
        else:
            block = np.zeros(tuple(p + q for p, q in zip(x.shape, y.shape)))
            block[: x.shape[0], : x.shape[1], : x.shape[2]] = x
            block[x.shape[0]:, x.shape[1]:, x.shape[2]:] = y
            cores[node] = block
    root = cores[left_root].shape[tree.axis(left_root, tree.root_edge)]
    return HTensor(tree, u.mode_sizes, tuple(cores), tree.root_edge, np.eye(root))


def sub(u: HTensor, v: HTensor) -> HTensor:
    """u - v."""
    return axpy(-1.0, v, u)


def inner(u: HTensor, v: HTensor) -> float:
    """
    Euclidean inner product by bottom-up Gram contraction.

    Args:
        u: First tensor
        v: Second tensor on the same tree

    Returns:
        <u, v>
    """
    _check_same(u, v)
    if u.is_zero or v.is_zero:
        return 0.0
    tree = u.tree
    cu = u.flat_cores()
    cv = v.flat_cores()
    gram: Dict[int, np.ndarray] = {}
    for node in tree.postorder():
        if tree.is_leaf(node):
            gram[node] = cu[node].T @ cv[node]
            continue
        left, right = tree.children[node]
        step = np.einsum("abk,ac->cbk", cu[node], gram[left])
        step = np.einsum("cbk,bd->cdk", step, gram[right])
        gram[node] = np.einsum("cdk,cdl->kl", step, cv[node])
    left_root, right_root = tree.root_children
    return float(np.sum(gram[left_root] * gram[right_root]))


def norm(u: HTensor) -> float:
    """||u|| read off the gauge of an orthonormal representation."""
    if u.is_zero:
        return 0.0
    if not u.orthonormal:
        u = u.orthogonalize(u.tree.root_edge)
    return float(np.linalg.norm(u.gauge))


# -- HSVD and truncation -------------------------------------------------------


def canonicalize_at(u: HTensor, t: int) -> HTensor:
    """
    Re-gauge u so that edge t carries diag(sigma_t(u)).

    Args:
        u: Hierarchical tensor
        t: Edge index

    Returns:
        Same tensor, canonical at t
    """
    if not 0 <= t < u.tree.num_edges:
        raise ValueError(f"edge {t} out of range for {u.tree.num_edges} edges")
    if u.is_zero:
        return u
    if u.canonical and u.gauge_edge == t:
        return u
    base = u.move_gauge(t) if u.orthonormal else u.orthogonalize(t)
    return base.diagonalize()


def hsvd_spectra(u: HTensor) -> List[EdgeSpectrum]:
    """
    Singular values of every matricization, one sweep in schedule order.

    Args:
        u: Hierarchical tensor

    Returns:
        EdgeSpectrum for t = 0..E-1
    """
    if u.is_zero:
        return [EdgeSpectrum(t, np.zeros(0)) for t in u.tree.schedule]
    spectra = []
    w = u
    for t in u.tree.schedule:
        w = canonicalize_at(w, t)
        spectra.append(EdgeSpectrum(t, np.diag(w.gauge).copy()))
    return spectra


def rank_profile(u: HTensor) -> Tuple[int, ...]:
    """Exact rank_t(u) for every edge."""
    return tuple(s.rank for s in hsvd_spectra(u))


def _rank_for_budget(sigma: np.ndarray, budget: float) -> int:
    tails = np.sqrt(np.cumsum(sigma[::-1] ** 2))[::-1]
    tails = np.concatenate([tails, [0.0]])
    return int(np.argmax(tails <= budget))


def hard_truncate(
    u: HTensor,
    tol: float | None = None,
    rank_caps: int | Sequence[int] | None = None,
) -> HTensor:
    """
    Sequential HSVD truncation in schedule order.

    In tolerance mode each edge may discard a share of the remaining budget,
    so the discarded norms sum to at most tol and ||result - u|| <= tol.

    Args:
        u: Hierarchical tensor
        tol: Absolute error budget
        rank_caps: One cap for all edges or one per edge

    Returns:
        Truncated HTensor
    """
    if tol is None and rank_caps is None:
        raise ValueError("hard_truncate needs tol or rank_caps")
    if tol is not None and tol < 0:
        raise ValueError(f"tolerance must be nonnegative, got {tol}")
    if u.is_zero:
        return u
    edges = u.tree.schedule
    if rank_caps is None:
        caps = None
    elif np.isscalar(rank_caps):
        caps = [int(rank_caps)] * len(edges)
    else:
        caps = [int(c) for c in rank_caps]

    remaining = tol
    discarded_total = 0.0
    w = u
    for position, t in enumerate(edges):
        w = canonicalize_at(w, t)
        sigma = np.diag(w.gauge)
        keep = len(sigma)
        if caps is not None:
            keep = min(keep, max(caps[t], 0))
        if tol is not None:
            budget = remaining / (len(edges) - position)
            keep = min(keep, _rank_for_budget(sigma, budget))
        discarded = float(np.sqrt(np.sum(sigma[keep:] ** 2)))
        discarded_total += discarded
        if tol is not None:
            remaining = max(remaining - discarded, 0.0)
        w = w.with_gauge_spectrum(sigma[:keep])
        if w.is_zero:
            break
    logger.debug(f"hard_truncate: ranks {u.ranks} -> {w.ranks}, discarded {discarded_total:.3e}")
    return w


# -- checks -----------------------------------------------------------------


def _check_modes(tree: DimensionTree, mode_sizes: Tuple[int, ...]) -> None:
    if len(mode_sizes) != tree.d:
        raise TreeMismatchError(f"{len(mode_sizes)} mode sizes for a tree with d={tree.d}")


def _check_same(u: HTensor, v: HTensor) -> None:
    if (u.tree is not v.tree and u.tree != v.tree) or u.mode_sizes != v.mode_sizes:
        logger.error(f"Operands differ: d={u.d}/{v.d}, modes {u.mode_sizes}/{v.mode_sizes}")
        raise TreeMismatchError("operands live on different trees or mode sizes")
