"""
Binary dimension trees over tensor modes {1..d}.
Provides the edge enumeration used as the sweep schedule and the
edge/vertex bookkeeping needed for root moves.
"""
from collections import deque
from dataclasses import dataclass
from typing import Callable, List, Tuple

from loguru import logger

from src.utils.errors import InvalidOrderError


ROOT = 0


@dataclass(frozen=True)
class Edge:
    """One cut {n_t, [n_t]} of the mode set."""
    index: int
    modes: Tuple[int, ...]
    complement: Tuple[int, ...]

    def flipped(self) -> "Edge":
        return Edge(self.index, self.complement, self.modes)

    @property
    def label(self) -> str:
        left = ",".join(str(m) for m in self.modes)
        right = ",".join(str(m) for m in self.complement)
        return f"{{{left}}}|{{{right}}}"


@dataclass(frozen=True)
class DimensionTree:
    """
    Binary tree whose nodes are contiguous mode intervals.

    Node 0 is the root. The root carries no core: its two children are joined
    directly by the root edge, so the non-root nodes ("vertices") and the
    E = 2d - 3 edges form the tensor network. Each edge is stored as
    (lower, upper): lower is the child node, upper its parent, except for the
    root edge where lower/upper are the left/right root children.
    """
    d: int
    nodes: Tuple[Tuple[int, ...], ...]
    children: Tuple[Tuple[int, int] | None, ...]
    parent: Tuple[int, ...]
    edges: Tuple[Tuple[int, int], ...]
    edge_labels: Tuple[Tuple[int, ...], ...]
    up_edge: Tuple[int, ...]

    # -- structure -----------------------------------------------------

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def schedule(self) -> Tuple[int, ...]:
        """Sweep order; equal to the enumeration order."""
        return tuple(range(len(self.edges)))

    @property
    def root_children(self) -> Tuple[int, int]:
        return self.children[ROOT]

    @property
    def root_edge(self) -> int:
        return self.up_edge[self.root_children[0]]

    @property
    def vertices(self) -> Tuple[int, ...]:
        return tuple(range(1, len(self.nodes)))

    @property
    def leaves(self) -> Tuple[int, ...]:
        """Leaf node per mode, in mode order."""
        by_mode = {self.nodes[v][0]: v for v in self.vertices if self.is_leaf(v)}
        return tuple(by_mode[m] for m in range(1, self.d + 1))

    def is_leaf(self, v: int) -> bool:
        return self.children[v] is None

    def postorder(self) -> List[int]:
        """Vertices with children before parents (root excluded)."""
        order: List[int] = []

        def visit(v: int) -> None:
            if self.children[v] is not None:
                for c in self.children[v]:
                    visit(c)
            if v != ROOT:
                order.append(v)

        visit(ROOT)
        return order

    # -- edges ---------------------------------------------------------

    def edge(self, t: int) -> Edge:
        modes = self.edge_labels[t]
        return Edge(t, modes, self.complement(modes))

    def complement(self, modes: Tuple[int, ...]) -> Tuple[int, ...]:
        chosen = set(modes)
        return tuple(m for m in range(1, self.d + 1) if m not in chosen)

    def label(self, t: int) -> str:
        return self.edge(t).label

    def lower_modes(self, t: int) -> Tuple[int, ...]:
        """Modes on the lower side of edge t (rows of its gauge matrix)."""
        return self.nodes[self.edges[t][0]]

    def incident_edges(self, v: int) -> Tuple[int, ...]:
        """Edges touching vertex v, ordered by core axis."""
        ups = (self.up_edge[v],)
        if self.children[v] is None:
            return ups
        left, right = self.children[v]
        return (self.up_edge[left], self.up_edge[right]) + ups

    def axis(self, v: int, t: int) -> int:
        """Core axis of vertex v that carries edge t."""
        incident = self.incident_edges(v)
        if t not in incident:
            raise ValueError(f"edge {t} does not touch vertex {v}")
        if self.children[v] is None:
            return 1
        return incident.index(t)

    def other_end(self, t: int, v: int) -> int:
        lower, upper = self.edges[t]
        return upper if v == lower else lower

    def neighbors(self, v: int) -> List[Tuple[int, int]]:
        return [(t, self.other_end(t, v)) for t in self.incident_edges(v)]

    def shared_vertex(self, s: int, t: int) -> int:
        common = set(self.edges[s]) & set(self.edges[t])
        if len(common) != 1:
            raise ValueError(f"edges {s} and {t} are not adjacent")
        return common.pop()

    def edge_path(self, s: int, t: int) -> List[int]:
        """Edges visited when moving the gauge from s to t, both included."""
        if s == t:
            return [s]
        previous = {s: s}
        queue = deque([s])
        while queue:
            e = queue.popleft()
            for v in self.edges[e]:
                for f in self.incident_edges(v):
                    if f not in previous:
                        previous[f] = e
                        queue.append(f)
        path = [t]
        while path[-1] != s:
            path.append(previous[path[-1]])
        return path[::-1]

    def orthogonalization_plan(self, t: int) -> List[Tuple[int, int]]:
        """
        (vertex, edge toward t) pairs, farthest vertices first.

        Both endpoints of t come last and point at t itself.
        """
        lower, upper = self.edges[t]
        toward = {lower: t, upper: t}
        order = [lower, upper]
        queue = deque(order)
        while queue:
            v = queue.popleft()
            for e, w in self.neighbors(v):
                if w not in toward:
                    toward[w] = e
                    order.append(w)
                    queue.append(w)
        return [(v, toward[v]) for v in reversed(order)]


def _build(d: int, split: Callable[[int, int], int]) -> DimensionTree:
    if d < 2:
        logger.error(f"Dimension tree requires d >= 2, got {d}")
        raise InvalidOrderError(f"tensor order must be at least 2, got {d}")

    nodes: List[Tuple[int, ...]] = []
    children: List[Tuple[int, int] | None] = []
    parent: List[int] = []

    def grow(lo: int, hi: int, up: int) -> int:
        v = len(nodes)
        nodes.append(tuple(range(lo + 1, hi + 1)))
        children.append(None)
        parent.append(up)
        if hi - lo > 1:
            mid = split(lo, hi)
            left = grow(lo, mid, v)
            right = grow(mid, hi, v)
            children[v] = (left, right)
        return v

    grow(0, d, -1)

    left_root, right_root = children[ROOT]
    edges: List[Tuple[int, int]] = []
    labels: List[Tuple[int, ...]] = []
    up_edge = [-1] * len(nodes)

    def enumerate_edges(v: int) -> None:
        if children[v] is not None:
            for c in children[v]:
                enumerate_edges(c)
        if v == ROOT or v == right_root:
            return
        if v == left_root:
            up_edge[left_root] = up_edge[right_root] = len(edges)
            edges.append((left_root, right_root))
            smaller = right_root if len(nodes[right_root]) < len(nodes[left_root]) else left_root
            labels.append(nodes[smaller])
        else:
            up_edge[v] = len(edges)
            edges.append((v, parent[v]))
            labels.append(nodes[v])

    enumerate_edges(ROOT)

    tree = DimensionTree(
        d=d,
        nodes=tuple(nodes),
        children=tuple(children),
        parent=tuple(parent),
        edges=tuple(edges),
        edge_labels=tuple(labels),
        up_edge=tuple(up_edge),
    )
    logger.debug(f"Built dimension tree d={d} with {tree.num_edges} edges")
    return tree


def linear_tree(d: int) -> DimensionTree:
    """
    Degenerate (TT-shaped) tree with interior nodes {1..k}.

    Args:
        d: Tensor order (>= 2)

    Returns:
        DimensionTree whose depth-first edge order moves the root by one step
    """
    return _build(d, lambda lo, hi: hi - 1)


def balanced_tree(d: int) -> DimensionTree:
    """Tree built by halving contiguous mode intervals."""
    return _build(d, lambda lo, hi: (lo + hi) // 2)


def edge_enumeration(tree: DimensionTree) -> List[Edge]:
    """
    Fixed enumeration of all edges with their complements.

    Args:
        tree: Dimension tree

    Returns:
        Edges in sweep order
    """
    return [tree.edge(t) for t in tree.schedule]
