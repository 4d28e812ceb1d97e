"""Shared construction helpers for the test suite."""

from __future__ import annotations

import numpy as np

from dgdlab import (
    NetworkGraph,
    Problem,
    generate_mixing,
    polynomial_objective,
    validate_mixing,
)


def random_connected_graph(rng: np.random.Generator, m: int) -> NetworkGraph:
    """Random spanning tree plus a few extra edges."""
    edges = set()
    order = rng.permutation(m)
    for idx in range(1, m):
        a = int(order[idx])
        b = int(order[rng.integers(0, idx)])
        edges.add((min(a, b), max(a, b)))
    for i in range(m):
        for j in range(i + 1, m):
            if (i, j) not in edges and rng.random() < 0.3:
                edges.add((i, j))
    return NetworkGraph(m, sorted(edges))


def random_polynomial(rng: np.random.Generator, n: int):
    """Random low-degree polynomial objective in n variables."""
    num_terms = int(rng.integers(1, 6))
    terms = []
    for _ in range(num_terms):
        powers = tuple(int(p) for p in rng.integers(0, 3, size=n))
        if sum(powers) == 0:
            powers = tuple(1 if k == 0 else 0 for k in range(n))
        coeff = float(rng.uniform(-1.0, 1.0))
        terms.append((powers, coeff))
    return polynomial_objective(terms, dim=n)


def random_problem(
    rng: np.random.Generator, m_max: int = 6, n_max: int = 4
) -> Problem:
    m = int(rng.integers(1, m_max + 1))
    n = int(rng.integers(1, n_max + 1))
    graph = random_connected_graph(rng, m)
    beta = float(rng.uniform(0.05, 0.45))
    mixing = validate_mixing(generate_mixing(graph, beta=beta), graph)
    objectives = tuple(random_polynomial(rng, n) for _ in range(m))
    return Problem(objectives=objectives, graph=graph, mixing=mixing)


def random_state(rng: np.random.Generator, p: Problem) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(p.num_agents, p.dim))


def dense_lifted(w: np.ndarray, n: int) -> np.ndarray:
    """Explicit Kronecker-product matrix ``W (kron) I_n`` (oracle only)."""
    return np.kron(w, np.eye(n))
