"""Tree communication graphs with a leader/follower partition.

Vertices are numbered 1..n. Followers occupy the prefix 1..n_f and leaders the
suffix n_f+1..n. Edge ``k = (i, j)`` is oriented with head ``i`` and tail
``j`` so that the relative state on that edge is ``x_i - x_j``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class TopologyError(ValueError):
    """Base class for invalid graph descriptions."""


class NotATree(TopologyError):
    pass


class BadPartition(TopologyError):
    pass


class DuplicateEdge(TopologyError):
    pass


@dataclass(frozen=True)
class Topology:
    """Validated tree with oriented edges and a followers-first partition."""

    n: int
    edges: tuple[tuple[int, int], ...]
    leaders: frozenset[int]

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def n_l(self) -> int:
        return len(self.leaders)

    @property
    def n_f(self) -> int:
        return self.n - self.n_l

    @property
    def followers(self) -> tuple[int, ...]:
        return tuple(range(1, self.n_f + 1))

    def neighbors(self) -> dict[int, list[tuple[int, int]]]:
        """Map each vertex to ``(neighbor, edge_index)`` pairs."""
        adj: dict[int, list[tuple[int, int]]] = {v: [] for v in range(1, self.n + 1)}
        for k, (i, j) in enumerate(self.edges):
            adj[i].append((j, k))
            adj[j].append((i, k))
        return adj


def build_topology(n: int, edges: Iterable[Sequence[int]], leaders: Iterable[int]) -> Topology:
    """Validate a tree description and return an immutable :class:`Topology`.

    Raises
    ------
    NotATree
        Wrong edge count, self-loop, or disconnected graph.
    DuplicateEdge
        The same unordered vertex pair appears twice.
    BadPartition
        Empty leader set, out-of-range leader, or followers not a prefix.
    """
    n = int(n)
    if n < 2:
        raise NotATree(f"need at least 2 vertices, got n={n}")
    edge_list = [(int(e[0]), int(e[1])) for e in edges]
    if not edge_list:
        raise NotATree("edge list is empty")

    seen: set[frozenset[int]] = set()
    for i, j in edge_list:
        if not (1 <= i <= n and 1 <= j <= n):
            raise NotATree(f"edge ({i}, {j}) has a vertex outside 1..{n}")
        if i == j:
            raise NotATree(f"self-loop at vertex {i}")
        key = frozenset((i, j))
        if key in seen:
            raise DuplicateEdge(f"edge ({i}, {j}) listed twice")
        seen.add(key)

    if len(edge_list) != n - 1:
        raise NotATree(f"a tree on {n} vertices has {n - 1} edges, got {len(edge_list)}")

    adj: dict[int, list[int]] = {v: [] for v in range(1, n + 1)}
    for i, j in edge_list:
        adj[i].append(j)
        adj[j].append(i)
    reached = {1}
    queue = deque([1])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in reached:
                reached.add(w)
                queue.append(w)
    if len(reached) != n:
        raise NotATree("graph is disconnected")

    leader_set = frozenset(int(v) for v in leaders)
    if not leader_set:
        raise BadPartition("at least one leader is required")
    if any(not 1 <= v <= n for v in leader_set):
        raise BadPartition(f"leader index outside 1..{n}")
    n_f = n - len(leader_set)
    if leader_set != frozenset(range(n_f + 1, n + 1)):
        raise BadPartition(
            f"leaders must be the last {len(leader_set)} vertices {{{n_f + 1}..{n}}}, "
            f"got {sorted(leader_set)}"
        )

    return Topology(n=n, edges=tuple(edge_list), leaders=leader_set)


def make_chain(n: int, n_f: int) -> Topology:
    """Path 1-2-...-n with edges ``(i, i+1)`` and followers ``1..n_f``."""
    if n < 2:
        raise NotATree("a chain needs n >= 2")
    if not 1 <= n_f < n:
        raise BadPartition(f"need 1 <= n_f < n, got n_f={n_f}, n={n}")
    return build_topology(n, [(i, i + 1) for i in range(1, n)], range(n_f + 1, n + 1))


def make_star(n: int, leaders: Iterable[int]) -> Topology:
    """Star centred on vertex ``n``; each edge ``(i, n)`` has its head at the leaf."""
    if n < 2:
        raise NotATree("a star needs n >= 2")
    return build_topology(n, [(i, n) for i in range(1, n)], leaders)


@dataclass(frozen=True)
class DerivedMatrices:
    """Dense matrices derived from a :class:`Topology`."""

    topology: Topology
    D: np.ndarray
    L: np.ndarray
    L_e: np.ndarray
    D_f: np.ndarray
    D_i: np.ndarray
    DiTDi: np.ndarray
    B: np.ndarray
    # edges with at least one leader endpoint, i.e. nonzero columns of D_i
    leader_edges: np.ndarray = field(repr=False)


def incidence_matrix(t: Topology) -> np.ndarray:
    D = np.zeros((t.n, t.m))
    for k, (i, j) in enumerate(t.edges):
        D[i - 1, k] = 1.0
        D[j - 1, k] = -1.0
    return D


def derive_matrices(t: Topology) -> DerivedMatrices:
    D = incidence_matrix(t)
    n_f = t.n_f
    D_f = D[:n_f]
    D_i = D[n_f:]
    B = np.zeros((t.n, t.n_l))
    B[n_f:] = np.eye(t.n_l)
    arrays = dict(
        D=D,
        L=D @ D.T,
        L_e=D.T @ D,
        D_f=D_f,
        D_i=D_i,
        DiTDi=D_i.T @ D_i,
        B=B,
        leader_edges=np.flatnonzero(np.any(D_i != 0, axis=0)),
    )
    for a in arrays.values():
        a.setflags(write=False)
    return DerivedMatrices(topology=t, **arrays)


def node_partition(dm: DerivedMatrices) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Blocks ``(A_f, B_f, A_i)`` of the followers/leaders split of ``L``.

    ``L == [[A_f, B_f], [B_f.T, A_i]]``; the closed loop uses ``-L``.
    """
    return dm.D_f @ dm.D_f.T, dm.D_f @ dm.D_i.T, dm.D_i @ dm.D_i.T


def relative_positions(dm: DerivedMatrices, x: np.ndarray) -> np.ndarray:
    return dm.D.T @ np.asarray(x, dtype=float)


def positions_from_relative(t: Topology, xbar: Sequence[float]) -> np.ndarray:
    """Absolute positions reproducing ``xbar`` with vertex ``n`` pinned at 0.

    Walks the tree outward from vertex ``n`` (the highest-index leader); on a
    tree the result is unique once one vertex is pinned.
    """
    xbar = np.asarray(xbar, dtype=float)
    if xbar.shape != (t.m,):
        raise ValueError(f"expected {t.m} relative positions, got shape {xbar.shape}")
    x = np.full(t.n, np.nan)
    x[t.n - 1] = 0.0
    adj = t.neighbors()
    queue = deque([t.n])
    while queue:
        v = queue.popleft()
        for w, k in adj[v]:
            if np.isnan(x[w - 1]):
                head, _ = t.edges[k]
                # xbar_k = x_head - x_tail
                x[w - 1] = x[v - 1] - xbar[k] if head == v else x[v - 1] + xbar[k]
                queue.append(w)
    return x
