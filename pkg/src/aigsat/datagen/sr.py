"""SR(n): paired random k-SAT instances that differ in a single literal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..circuit import CnfFormula
from .dpll import dpll_solve

# clause length k = 1 + Bernoulli(P_K2) + Geometric(P_GEO)
P_K2 = 0.7
P_GEO = 0.4


@dataclass(frozen=True)
class SrPair:
    sat_instance: CnfFormula
    unsat_instance: CnfFormula


def expected_clause_length(p_k2: float = P_K2, p_geo: float = P_GEO) -> float:
    """Mean of the untruncated clause-length distribution."""
    return 1 + p_k2 + 1 / p_geo


def sample_clause(n: int, rng: np.random.Generator, p_k2: float = P_K2, p_geo: float = P_GEO) -> list[int]:
    k = 1 + int(rng.binomial(1, p_k2)) + int(rng.geometric(p_geo))
    k = min(k, n)
    variables = rng.choice(n, size=k, replace=False) + 1
    signs = rng.random(k) < 0.5
    return [int(-v if s else v) for v, s in zip(variables, signs)]


def gen_sr(n: int, seed: int | np.random.Generator, p_k2: float = P_K2, p_geo: float = P_GEO) -> SrPair:
    if n < 3:
        raise ValueError(f"SR(n) needs n >= 3, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    clauses: list[list[int]] = []
    model: list[int] | None = [0] * n
    while True:
        clause = sample_clause(n, rng, p_k2, p_geo)
        clauses.append(clause)
        # the previous model still works if it satisfies the new clause
        if any((model[abs(l) - 1] == 1) == (l > 0) for l in clause):
            continue
        model = dpll_solve(CnfFormula.from_ints(n, clauses))
        if model is None:
            break
    unsat = CnfFormula.from_ints(n, clauses)
    last = clauses[-1]
    sat = CnfFormula.from_ints(n, clauses[:-1] + [[-last[0]] + last[1:]])
    return SrPair(sat, unsat)
