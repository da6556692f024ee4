"""SAT instance generation and the DPLL oracle."""

from .benchmark import KINDS, build_benchmark
from .dpll import dpll_solve, is_satisfiable
from .graphs import (
    ENCODERS,
    RandomGraph,
    encode_clique,
    encode_coloring,
    encode_domset,
    encode_vertex_cover,
    gen_graph,
    has_clique,
    has_coloring,
    has_domset,
    has_vertex_cover,
)
from .sr import SrPair, expected_clause_length, gen_sr

__all__ = [
    "ENCODERS", "KINDS", "RandomGraph", "SrPair", "build_benchmark", "dpll_solve",
    "encode_clique", "encode_coloring", "encode_domset", "encode_vertex_cover",
    "expected_clause_length", "gen_graph", "gen_sr", "has_clique", "has_coloring",
    "has_domset", "has_vertex_cover", "is_satisfiable",
]
