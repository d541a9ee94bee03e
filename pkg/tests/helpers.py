"""Shared test oracles, kept independent of the package internals.

The dense-matrix scalar oracle here is built from scratch (kron chains and
explicit matmuls) so it cross-checks both the engine and the package's own
reference module.
"""
from itertools import permutations

import numpy as np

from falqon_lab.problem import Graph

X = np.array([[0.0, 1.0], [1.0, 0.0]])
I2 = np.eye(2)


def kron_chain(mats):
    out = np.array([[1.0]])
    for m in mats:
        out = np.kron(m, out)
    return out


def dense_hd(n):
    """-sum_i X_i with qubit i on bit i of the basis index."""
    return -sum(kron_chain([X if j == i else I2 for j in range(n)]) for i in range(n))


def dense_hp(diag):
    return np.diag(diag)


def oracle_scalars(psi, diag):
    """(a, b, c) from explicit commutator matrices."""
    n = int(np.log2(len(diag)) + 0.5)
    hd = dense_hd(n)
    hp = dense_hp(diag)
    comm = hd @ hp - hp @ hd

    def ev(m):
        val = np.vdot(psi, m @ psi)
        assert abs(val.imag) < 1e-9 * max(1.0, abs(val))
        return val.real

    return ev(1j * comm), ev(0.5 * (comm @ hd - hd @ comm)), ev(comm @ hp - hp @ comm)


def random_state(rng, n):
    psi = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return psi / np.linalg.norm(psi)


def brute_force_isomorphic(g1: Graph, g2: Graph) -> bool:
    """Exhaustive permutation check; only sensible for small n."""
    if g1.n != g2.n or g1.edge_count != g2.edge_count:
        return False
    target = set(g2.edges)
    for perm in permutations(range(g1.n)):
        mapped = {(min(perm[i], perm[j]), max(perm[i], perm[j])) for i, j in g1.edges}
        if mapped == target:
            return True
    return False


def relabel(g: Graph, perm) -> Graph:
    return Graph.from_edges(g.n, [(perm[i], perm[j]) for i, j in g.edges])


K4 = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
TRIANGLE = Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)])
K33 = Graph.from_edges(6, [(i, j) for i in range(3) for j in range(3, 6)])
PRISM = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5),
                             (0, 3), (1, 4), (2, 5)])
