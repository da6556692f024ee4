"""A small complete DPLL solver used as the satisfiability oracle."""

from __future__ import annotations

from collections import Counter

from ..circuit import CnfFormula


class VerificationError(AssertionError):
    pass


def _assign(clauses: list[list[int]], lit: int) -> list[list[int]] | None:
    out = []
    for c in clauses:
        if lit in c:
            continue
        if -lit in c:
            c = [x for x in c if x != -lit]
            if not c:
                return None
        out.append(c)
    return out


def _search(clauses: list[list[int]], trail: list[int]) -> list[int] | None:
    while True:
        unit = next((c[0] for c in clauses if len(c) == 1), None)
        if unit is not None:
            clauses = _assign(clauses, unit)
            if clauses is None:
                return None
            trail.append(unit)
            continue
        counts = Counter(l for c in clauses for l in c)
        pure = next((l for l in counts if -l not in counts), None)
        if pure is not None:
            clauses = _assign(clauses, pure)
            trail.append(pure)
            continue
        break
    if not clauses:
        return trail
    shortest = min(clauses, key=len)
    lit = max(shortest, key=lambda l: counts[l])
    for choice in (lit, -lit):
        reduced = _assign(clauses, choice)
        if reduced is not None:
            got = _search(reduced, trail + [choice])
            if got is not None:
                return got
    return None


def dpll_solve(f: CnfFormula) -> list[int] | None:
    """A satisfying 0/1 assignment (one entry per variable), or None if UNSAT.

    Unit propagation and pure-literal elimination; the model is checked
    against the formula before it is returned.
    """
    trail = _search(f.int_clauses(), [])
    if trail is None:
        return None
    assignment = [0] * f.num_variables
    for lit in trail:
        assignment[abs(lit) - 1] = 1 if lit > 0 else 0
    if not f.evaluate(assignment):
        raise VerificationError("DPLL produced an assignment that does not satisfy the formula")
    return assignment


def is_satisfiable(f: CnfFormula) -> bool:
    return dpll_solve(f) is not None
