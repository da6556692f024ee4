"""Random graphs, CNF encodings of four graph problems, and brute-force checkers."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..circuit import CnfFormula


@dataclass(frozen=True)
class RandomGraph:
    num_vertices: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        norm = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise ValueError(f"edge ({u}, {v}) out of range")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))

    def adjacent(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    def neighbours(self, v: int) -> list[int]:
        return [u for u in range(self.num_vertices) if u != v and self.adjacent(u, v)]


def gen_graph(n_range=(6, 10), edge_prob: float = 0.37, seed=0) -> RandomGraph:
    """Erdos-Renyi graph with a vertex count drawn uniformly from ``n_range``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lo, hi = n_range
    n = int(rng.integers(lo, hi + 1))
    edges = [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < edge_prob]
    return RandomGraph(n, frozenset(edges))


# ---------------------------------------------------------------------------
# encodings


def _at_most_one(xs: list[int]) -> list[list[int]]:
    return [[-a, -b] for a, b in itertools.combinations(xs, 2)]


def _slots(n: int, k: int):
    """Selector variable for slot i choosing vertex v, plus per-slot exactly-one clauses."""

    def s(i: int, v: int) -> int:
        return i * n + v + 1

    clauses = []
    for i in range(k):
        row = [s(i, v) for v in range(n)]
        clauses.append(row)
        clauses += _at_most_one(row)
    return s, clauses


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")


def encode_coloring(g: RandomGraph, k: int) -> CnfFormula:
    _check_k(k)
    n = g.num_vertices

    def x(v, c):
        return v * k + c + 1

    clauses = []
    for v in range(n):
        row = [x(v, c) for c in range(k)]
        clauses.append(row)
        clauses += _at_most_one(row)
    for u, v in sorted(g.edges):
        for c in range(k):
            clauses.append([-x(u, c), -x(v, c)])
    return CnfFormula.from_ints(n * k, clauses)


def encode_clique(g: RandomGraph, k: int) -> CnfFormula:
    _check_k(k)
    n = g.num_vertices
    s, clauses = _slots(n, k)
    for v in range(n):
        clauses += _at_most_one([s(i, v) for i in range(k)])
    for u, v in itertools.combinations(range(n), 2):
        if g.adjacent(u, v):
            continue
        for i, j in itertools.permutations(range(k), 2):
            clauses.append([-s(i, u), -s(j, v)])
    return CnfFormula.from_ints(n * k, clauses)


def encode_vertex_cover(g: RandomGraph, k: int) -> CnfFormula:
    _check_k(k)
    n = g.num_vertices
    s, clauses = _slots(n, k)
    for u, v in sorted(g.edges):
        clauses.append([s(i, w) for i in range(k) for w in (u, v)])
    return CnfFormula.from_ints(n * k, clauses)


def encode_domset(g: RandomGraph, k: int) -> CnfFormula:
    _check_k(k)
    n = g.num_vertices
    s, clauses = _slots(n, k)
    for v in range(n):
        closed = [v] + g.neighbours(v)
        clauses.append([s(i, w) for i in range(k) for w in closed])
    return CnfFormula.from_ints(n * k, clauses)


# ---------------------------------------------------------------------------
# brute-force checkers


def has_coloring(g: RandomGraph, k: int) -> bool:
    n = g.num_vertices
    colors = [-1] * n

    def place(v: int) -> bool:
        if v == n:
            return True
        for c in range(k):
            if all(colors[u] != c for u in g.neighbours(v) if u < v):
                colors[v] = c
                if place(v + 1):
                    return True
        colors[v] = -1
        return False

    return place(0)


def has_clique(g: RandomGraph, k: int) -> bool:
    return any(
        all(g.adjacent(u, v) for u, v in itertools.combinations(sub, 2))
        for sub in itertools.combinations(range(g.num_vertices), k)
    )


def has_vertex_cover(g: RandomGraph, k: int) -> bool:
    size = min(k, g.num_vertices)
    return any(
        all(u in sub or v in sub for u, v in g.edges)
        for sub in map(set, itertools.combinations(range(g.num_vertices), size))
    )


def has_domset(g: RandomGraph, k: int) -> bool:
    size = min(k, g.num_vertices)
    return any(
        all(v in sub or any(u in sub for u in g.neighbours(v)) for v in range(g.num_vertices))
        for sub in map(set, itertools.combinations(range(g.num_vertices), size))
    )


ENCODERS = {
    "coloring": (encode_coloring, has_coloring, (3, 5)),
    "domset": (encode_domset, has_domset, (2, 4)),
    "clique": (encode_clique, has_clique, (3, 5)),
    "vcover": (encode_vertex_cover, has_vertex_cover, (4, 6)),
}
