"""Shared circuit fixtures and a hypothesis strategy for random AIGs."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from aigsat.circuit import AigBuilder, AigCircuit, CnfFormula, cnf_to_aig
from aigsat.sim import _exhaustive_words, simulate_block

PHI = CnfFormula.from_ints(3, [[-1, 2], [-2, -3], [1, 3]])


def and2() -> AigCircuit:
    b = AigBuilder(2)
    return b.build(b.and_(b.pi(0), b.pi(1)))


def nand2() -> AigCircuit:
    b = AigBuilder(2)
    return b.build(b.not_(b.and_(b.pi(0), b.pi(1))))


def chain(n: int) -> AigCircuit:
    b = AigBuilder(n)
    acc = b.pi(0)
    for i in range(1, n):
        acc = b.and_(acc, b.pi(i))
    return b.build(acc)


def balanced(n: int) -> AigCircuit:
    b = AigBuilder(n)
    layer = [b.pi(i) for i in range(n)]
    while len(layer) > 1:
        layer = [b.and_(layer[i], layer[i + 1]) for i in range(0, len(layer), 2)]
    return b.build(layer[0])


def phi_aig() -> AigCircuit:
    return cnf_to_aig(PHI)


def po_table(c: AigCircuit) -> np.ndarray:
    """PO value for every PI assignment (index bit i = PI i), bit-parallel."""
    total = 1 << c.num_pis
    words = _exhaustive_words(c.num_pis, 0, (total + 63) // 64)
    po = simulate_block(c, words)[c.po]
    bits = np.unpackbits(po.view(np.uint8), bitorder="little")[:total]
    return bits


def random_po_values(c: AigCircuit, num_patterns: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    words = rng.integers(0, 2**64, size=(c.num_pis, (num_patterns + 63) // 64), dtype=np.uint64)
    return words, simulate_block(c, words)[c.po]


def build_random(rng: np.random.Generator, num_pis: int, num_gates: int, strash: bool = True) -> AigCircuit:
    b = AigBuilder(num_pis, strash=strash)
    pool = [b.pi(i) for i in range(num_pis)]
    for _ in range(num_gates):
        if rng.random() < 0.3:
            pool.append(b.not_(pool[int(rng.integers(len(pool)))]))
        else:
            i, j = rng.choice(len(pool), size=2, replace=len(pool) < 2)
            pool.append(b.and_(pool[int(i)], pool[int(j)]))
    return b.build(pool[-1])


@st.composite
def circuits(draw, max_pis: int = 6, max_gates: int = 30, strash: bool = True):
    n = draw(st.integers(1, max_pis))
    g = draw(st.integers(1, max_gates))
    seed = draw(st.integers(0, 2**32 - 1))
    return build_random(np.random.default_rng(seed), n, g, strash)


@st.composite
def cnfs(draw, max_vars: int = 8, max_clauses: int = 12):
    n = draw(st.integers(1, max_vars))
    lit = st.integers(1, n).flatmap(lambda v: st.sampled_from([v, -v]))
    clauses = draw(st.lists(st.lists(lit, min_size=1, max_size=4), min_size=0, max_size=max_clauses))
    return CnfFormula.from_ints(n, clauses)




def from_truth_table(num_pis: int, table: int) -> AigCircuit:
    """Shannon expansion of ``table`` (bit k = PO value under assignment k, PI i = bit i of k)."""
    b = AigBuilder(num_pis)

    def expand(var: int, offset: int) -> int:
        if var < 0:
            return b.const1() if table >> offset & 1 else b.const0()
        lo = expand(var - 1, offset)
        hi = expand(var - 1, offset + (1 << var))
        x = b.pi(var)
        return b.or_(b.and_(x, hi), b.and_(b.not_(x), lo))

    return b.build(expand(num_pis - 1, 0))
