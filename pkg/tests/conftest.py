import numpy as np
import pytest

from leadppc.graph import build_topology

ACCEPTANCE_LINES: list[str] = []


def random_tree(rng: np.random.Generator, n: int, n_l: int | None = None):
    """Random labelled tree from a Pruefer sequence, random edge orientation."""
    if n == 2:
        edges = [(1, 2)]
    else:
        seq = list(rng.integers(1, n + 1, size=n - 2))
        degree = [1] * (n + 1)
        for v in seq:
            degree[v] += 1
        edges = []
        for v in seq:
            leaf = min(u for u in range(1, n + 1) if degree[u] == 1)
            edges.append((leaf, int(v)))
            degree[leaf] -= 1
            degree[v] -= 1
        u, w = [u for u in range(1, n + 1) if degree[u] == 1]
        edges.append((u, w))
    edges = [(j, i) if rng.random() < 0.5 else (i, j) for i, j in edges]
    if n_l is None:
        n_l = int(rng.integers(1, n + 1))
    return build_topology(n, edges, range(n - n_l + 1, n + 1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
