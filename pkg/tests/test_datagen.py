import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aigsat.circuit import CnfFormula, parse_dimacs
from aigsat.datagen import (
    ENCODERS,
    RandomGraph,
    build_benchmark,
    dpll_solve,
    encode_coloring,
    expected_clause_length,
    gen_graph,
    gen_sr,
    is_satisfiable,
)
from aigsat.datagen.sr import P_GEO, P_K2
from helpers import PHI, cnfs


def brute_force_sat(f: CnfFormula) -> bool:
    return any(f.evaluate(a) for a in itertools.product((0, 1), repeat=f.num_variables))


# --- DPLL -------------------------------------------------------------------


def test_dpll_phi():
    a = dpll_solve(PHI)
    assert a is not None and PHI.evaluate(a)
    assert PHI.evaluate([0, 0, 1])


def test_dpll_contradiction():
    assert dpll_solve(CnfFormula.from_ints(1, [[1], [-1]])) is None


def test_dpll_empty_formula():
    f = CnfFormula.from_ints(4, [])
    a = dpll_solve(f)
    assert a is not None and len(a) == 4


@settings(max_examples=300, deadline=None)
@given(cnfs(max_vars=8, max_clauses=16))
def test_dpll_matches_enumeration(f):
    a = dpll_solve(f)
    assert (a is not None) == brute_force_sat(f)
    if a is not None:
        assert f.evaluate(a)


# --- SR(n) ------------------------------------------------------------------


@pytest.mark.parametrize("n", [3, 5, 8, 12])
def test_sr_pair_tags_and_single_literal(n):
    for seed in range(10):
        pair = gen_sr(n, seed)
        assert is_satisfiable(pair.sat_instance)
        assert not is_satisfiable(pair.unsat_instance)
        sat, unsat = pair.sat_instance.int_clauses(), pair.unsat_instance.int_clauses()
        assert sat[:-1] == unsat[:-1]
        diff = [(a, b) for a, b in zip(sat[-1], unsat[-1]) if a != b]
        assert len(sat[-1]) == len(unsat[-1]) and len(diff) == 1
        assert diff[0][0] == -diff[0][1]


def test_sr_rejects_tiny_n():
    with pytest.raises(ValueError):
        gen_sr(2, 0)


def test_sr_deterministic():
    assert gen_sr(9, 42) == gen_sr(9, 42)


def truncated_mean_length(n: int, p_k2: float = P_K2, p_geo: float = P_GEO) -> float:
    """E[min(1 + Bernoulli + Geometric, n)], summed out explicitly."""
    total = 0.0
    for b, pb in ((0, 1 - p_k2), (1, p_k2)):
        for g in range(1, 400):
            pg = (1 - p_geo) ** (g - 1) * p_geo
            total += pb * pg * min(1 + b + g, n)
    return total


def test_expected_clause_length_closed_form():
    assert expected_clause_length() == pytest.approx(4.2)
    assert truncated_mean_length(10_000) == pytest.approx(4.2, abs=1e-9)


def test_sr10_mean_clause_length():
    lengths = [len(c) for s in range(150) for c in gen_sr(10, s).unsat_instance.int_clauses()]
    assert len(lengths) > 5000
    # clause lengths cap at n, which pulls the mean slightly under 4.2
    assert np.mean(lengths) == pytest.approx(truncated_mean_length(10), abs=0.1)


# --- graphs -----------------------------------------------------------------


def test_graph_rejects_self_loop():
    with pytest.raises(ValueError):
        RandomGraph(3, frozenset({(1, 1)}))


def test_graph_deduplicates_orientation():
    g = RandomGraph(3, frozenset({(0, 1), (1, 0)}))
    assert g.edges == {(0, 1)}


def test_graph_extreme_probabilities():
    assert gen_graph((8, 8), 0.0, 1).edges == frozenset()
    full = gen_graph((8, 8), 1.0, 1)
    assert len(full.edges) == 28


def test_graph_vertex_range():
    sizes = {gen_graph((6, 10), 0.37, s).num_vertices for s in range(200)}
    assert sizes == set(range(6, 11))


def test_graph_edge_density():
    rng = np.random.default_rng(7)
    density = np.mean([len(gen_graph((10, 10), 0.37, rng).edges) / 45 for _ in range(1000)])
    assert abs(density - 0.37) <= 0.03


# --- encoders ---------------------------------------------------------------

TRIANGLE = RandomGraph(3, frozenset({(0, 1), (1, 2), (0, 2)}))


def test_triangle_coloring():
    assert is_satisfiable(encode_coloring(TRIANGLE, 3))
    assert not is_satisfiable(encode_coloring(TRIANGLE, 2))


@pytest.mark.parametrize("kind", sorted(ENCODERS))
def test_encoder_rejects_bad_k(kind):
    with pytest.raises(ValueError):
        ENCODERS[kind][0](TRIANGLE, 0)


@pytest.mark.parametrize("kind", sorted(ENCODERS))
@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 7), bits=st.integers(0, 2**21 - 1), k=st.integers(1, 5))
def test_encoders_agree_with_brute_force(kind, n, bits, k):
    pairs = list(itertools.combinations(range(n), 2))
    g = RandomGraph(n, frozenset(p for i, p in enumerate(pairs) if bits >> i & 1))
    encode, check, _ = ENCODERS[kind]
    assert is_satisfiable(encode(g, k)) == check(g, k)


def test_clique_on_random_8_vertex_graphs():
    for seed in range(30):
        g = gen_graph((8, 8), 0.37, seed)
        found = any(
            all(g.adjacent(u, v) for u, v in itertools.combinations(t, 2))
            for t in itertools.combinations(range(8), 3)
        )
        assert is_satisfiable(ENCODERS["clique"][0](g, 3)) == found


# --- benchmark files ----------------------------------------------------------


def test_benchmark_count_zero(tmp_path):
    assert build_benchmark("sr", 0, 1, tmp_path) == []
    assert (tmp_path / "manifest.jsonl").read_text() == ""


def test_benchmark_sr_files_and_tags(tmp_path):
    rows = build_benchmark("sr", 6, 3, tmp_path)
    assert len(rows) == 12
    for row in rows:
        f = parse_dimacs((tmp_path / row["file"]).read_text())
        assert is_satisfiable(f) == (row["tag"] == "SAT")
        assert row["tag"].lower() in row["file"]


def test_benchmark_graph_kinds(tmp_path):
    for kind in ENCODERS:
        rows = build_benchmark(kind, 4, 5, tmp_path / kind)
        for row in rows:
            g = RandomGraph(row["n"], frozenset(tuple(e) for e in row["edges"]))
            assert (row["tag"] == "SAT") == ENCODERS[kind][1](g, row["k"])


def test_benchmark_deterministic(tmp_path):
    build_benchmark("sr", 5, 9, tmp_path / "a")
    build_benchmark("sr", 5, 9, tmp_path / "b")
    a = (tmp_path / "a" / "manifest.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "manifest.jsonl").read_bytes()
    assert all(json.loads(line)["seed"] == 9 for line in a.decode().splitlines())


def test_benchmark_unknown_kind(tmp_path):
    with pytest.raises(ValueError):
        build_benchmark("sudoku", 1, 0, tmp_path)
