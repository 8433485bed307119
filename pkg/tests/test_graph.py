import numpy as np
import pytest

from leadppc.graph import (
    BadPartition,
    DuplicateEdge,
    NotATree,
    build_topology,
    derive_matrices,
    make_chain,
    make_star,
    node_partition,
    positions_from_relative,
)

from conftest import random_tree


def laplacian_from_adjacency(t):
    A = np.zeros((t.n, t.n))
    for i, j in t.edges:
        A[i - 1, j - 1] = A[j - 1, i - 1] = 1
    return np.diag(A.sum(axis=1)) - A


def edge_laplacian_by_rule(t):
    """Two distinct edges sharing a vertex get +1 if it plays the same role in both."""
    m = t.m
    Le = 2.0 * np.eye(m)
    for a in range(m):
        for b in range(m):
            if a == b:
                continue
            shared = set(t.edges[a]) & set(t.edges[b])
            for v in shared:
                same_role = t.edges[a].index(v) == t.edges[b].index(v)
                Le[a, b] = 1.0 if same_role else -1.0
    return Le


def test_smallest_tree():
    t = build_topology(2, [(1, 2)], {2})
    assert t.m == 1 and t.n_f == 1
    assert derive_matrices(t).L_e.tolist() == [[2.0]]


def test_reference_chain_layout():
    t = build_topology(5, [(1, 2), (2, 3), (3, 4), (4, 5)], {3, 4, 5})
    assert t.followers == (1, 2)
    assert t == make_chain(5, 2)


@pytest.mark.parametrize(
    "n, edges, leaders, exc",
    [
        (3, [(1, 2), (2, 3), (1, 3)], {3}, NotATree),
        (4, [(1, 2), (3, 4), (1, 2)], {4}, DuplicateEdge),
        (4, [(1, 2), (2, 1), (3, 4)], {4}, DuplicateEdge),
        (4, [(1, 2), (1, 2)], {4}, DuplicateEdge),
        (4, [(1, 2), (2, 3)], {4}, NotATree),
        (4, [(1, 2), (3, 4), (4, 3)], {4}, DuplicateEdge),
        (3, [(1, 1), (2, 3)], {3}, NotATree),
        (3, [(1, 2), (2, 4)], {3}, NotATree),
        (3, [(1, 2), (2, 3)], {1}, BadPartition),
        (3, [(1, 2), (2, 3)], set(), BadPartition),
        (3, [(1, 2), (2, 3)], {1, 3}, BadPartition),
        (3, [], {3}, NotATree),
    ],
)
def test_invalid_topologies(n, edges, leaders, exc):
    with pytest.raises(exc):
        build_topology(n, edges, leaders)


def test_disconnected_with_right_edge_count():
    # 4 vertices, 3 edges, but a cycle on {1,2,3} leaves vertex 4 isolated
    with pytest.raises(NotATree):
        build_topology(4, [(1, 2), (2, 3), (3, 1)], {4})


def test_chain_and_star_edge_laplacians():
    assert derive_matrices(make_chain(3, 1)).L_e.tolist() == [[2, -1], [-1, 2]]
    dm = derive_matrices(make_star(3, {3}))
    assert dm.L_e.tolist() == [[2, 1], [1, 2]]
    assert dm.DiTDi.tolist() == [[1, 1], [1, 1]]


def test_generators():
    assert make_chain(2, 1).edges == ((1, 2),)
    assert make_star(2, {2}) == make_chain(2, 1)
    assert make_star(11, {11}).edges == tuple((i, 11) for i in range(1, 11))
    with pytest.raises(BadPartition):
        make_chain(5, 5)
    with pytest.raises(BadPartition):
        make_star(4, {1})


@pytest.mark.parametrize("n", range(2, 12))
def test_generated_sign_patterns(n):
    Le = derive_matrices(make_chain(n, 1)).L_e
    expected = 2 * np.eye(n - 1) - np.eye(n - 1, k=1) - np.eye(n - 1, k=-1)
    assert np.array_equal(Le, expected)
    Le = derive_matrices(make_star(n, {n})).L_e
    assert np.array_equal(Le, np.ones((n - 1, n - 1)) + np.eye(n - 1))


def test_random_trees_match_brute_force(rng):
    for _ in range(60):
        t = random_tree(rng, int(rng.integers(2, 51)))
        dm = derive_matrices(t)
        assert np.array_equal(dm.L, laplacian_from_adjacency(t))
        assert np.array_equal(dm.L_e, edge_laplacian_by_rule(t))
        assert np.all(dm.L.sum(axis=1) == 0)
        assert np.array_equal(np.vstack([dm.D_f, dm.D_i]), dm.D)
        assert np.linalg.eigvalsh(dm.L_e)[0] > 1e-9


def test_relative_state_identities(rng):
    for _ in range(10):
        t = random_tree(rng, int(rng.integers(2, 15)))
        dm = derive_matrices(t)
        X = rng.normal(size=(100, t.n))
        Xbar = X @ dm.D
        assert np.max(np.abs(X @ dm.L - Xbar @ dm.D.T)) < 1e-12


def test_node_partition():
    A_f, B_f, A_i = node_partition(derive_matrices(make_chain(2, 1)))
    assert (A_f.tolist(), B_f.tolist(), A_i.tolist()) == ([[1]], [[-1]], [[1]])
    A_f, _, _ = node_partition(derive_matrices(make_star(3, {3})))
    assert np.array_equal(A_f, np.eye(2))


def test_node_partition_reassembles_laplacian(rng):
    for _ in range(20):
        t = random_tree(rng, int(rng.integers(2, 12)))
        dm = derive_matrices(t)
        A_f, B_f, A_i = node_partition(dm)
        assert np.array_equal(np.block([[A_f, B_f], [B_f.T, A_i]]), dm.L)
        for blk in (A_f, A_i):
            if blk.size:
                assert np.allclose(blk, blk.T) and np.linalg.eigvalsh(blk)[0] > -1e-12


def test_matrices_are_read_only():
    dm = derive_matrices(make_chain(3, 1))
    with pytest.raises(ValueError):
        dm.L[0, 0] = 5


def test_positions_from_relative(rng):
    for _ in range(20):
        t = random_tree(rng, int(rng.integers(2, 15)))
        xbar = rng.normal(size=t.m)
        x = positions_from_relative(t, xbar)
        assert x[-1] == 0.0
        assert np.allclose(derive_matrices(t).D.T @ x, xbar, atol=1e-12)
