"""CNF formulas, and-inverter graphs, and the conversions between them.

Circuits use explicit NOT nodes.  Node ids are dense and topologically
ordered, with the primary inputs occupying ids ``0 .. num_pis - 1``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class ParseError(ValueError):
    pass


class CircuitError(ValueError):
    pass


# ---------------------------------------------------------------------------
# CNF


@dataclass(frozen=True)
class Literal:
    variable_index: int
    negated: bool = False

    def __post_init__(self):
        if self.variable_index < 1:
            raise ValueError(f"variable index must be >= 1, got {self.variable_index}")

    @classmethod
    def from_int(cls, lit: int) -> "Literal":
        if lit == 0:
            raise ValueError("0 is not a literal")
        return cls(abs(lit), lit < 0)

    def to_int(self) -> int:
        return -self.variable_index if self.negated else self.variable_index

    def __neg__(self) -> "Literal":
        return Literal(self.variable_index, not self.negated)


@dataclass(frozen=True)
class CnfFormula:
    num_variables: int
    clauses: tuple[tuple[Literal, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(tuple(c) for c in self.clauses))
        for i, clause in enumerate(self.clauses):
            if not clause:
                raise ValueError(f"clause {i} is empty")
            for lit in clause:
                if lit.variable_index > self.num_variables:
                    raise ValueError(
                        f"literal {lit.to_int()} exceeds declared variable count {self.num_variables}"
                    )

    @classmethod
    def from_ints(cls, num_variables: int, clauses: Iterable[Iterable[int]]) -> "CnfFormula":
        return cls(num_variables, tuple(tuple(Literal.from_int(l) for l in c) for c in clauses))

    def int_clauses(self) -> list[list[int]]:
        return [[lit.to_int() for lit in c] for c in self.clauses]

    def evaluate(self, assignment: Sequence[int]) -> bool:
        """True iff ``assignment`` (one 0/1 entry per variable) satisfies every clause."""
        for clause in self.clauses:
            if not any(bool(assignment[l.variable_index - 1]) != l.negated for l in clause):
                return False
        return True


def parse_dimacs(text: str) -> CnfFormula:
    num_vars = None
    num_clauses = None
    clauses: list[list[int]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if num_vars is not None:
                raise ParseError(f"line {lineno}: duplicate header")
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError(f"line {lineno}: malformed header {line!r}")
            try:
                num_vars, num_clauses = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"line {lineno}: malformed header {line!r}") from None
            if num_vars < 0 or num_clauses < 0:
                raise ParseError(f"line {lineno}: negative counts in header")
            continue
        if num_vars is None:
            raise ParseError(f"line {lineno}: clause before 'p cnf' header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ParseError(f"line {lineno}: bad token {tok!r}") from None
            if lit == 0:
                if not current:
                    raise ParseError(f"line {lineno}: empty clause")
                clauses.append(current)
                current = []
            else:
                if abs(lit) > num_vars:
                    raise ParseError(
                        f"line {lineno}: literal {lit} exceeds declared variable count {num_vars}"
                    )
                current.append(lit)
    if num_vars is None:
        raise ParseError("missing 'p cnf' header")
    if current:
        clauses.append(current)
    return CnfFormula.from_ints(num_vars, clauses)


def write_dimacs(f: CnfFormula, comments: Sequence[str] = ()) -> str:
    lines = [f"c {c}" for c in comments]
    lines.append(f"p cnf {f.num_variables} {len(f.clauses)}")
    for clause in f.clauses:
        lines.append(" ".join(str(l.to_int()) for l in clause) + " 0")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# AIG


class NodeKind(enum.IntEnum):
    PI = 0
    AND2 = 1
    NOT = 2
    CONST0 = 3


_ARITY = {NodeKind.PI: 0, NodeKind.CONST0: 0, NodeKind.NOT: 1, NodeKind.AND2: 2}


class AigNode(NamedTuple):
    id: int
    kind: NodeKind
    fanins: tuple[int, ...] = ()


@dataclass(frozen=True, eq=False)
class AigCircuit:
    """Immutable single-output AIG in topological order."""

    nodes: tuple[AigNode, ...]
    num_pis: int
    po: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        n = len(self.nodes)
        if not 0 <= self.po < n:
            raise CircuitError(f"PO id {self.po} out of range")
        for i, node in enumerate(self.nodes):
            if node.id != i:
                raise CircuitError(f"node at position {i} has id {node.id}")
            if (i < self.num_pis) != (node.kind == NodeKind.PI):
                raise CircuitError("primary inputs must occupy the first num_pis ids")
            if len(node.fanins) != _ARITY[node.kind]:
                raise CircuitError(f"node {i}: {node.kind.name} with {len(node.fanins)} fanins")
            for f in node.fanins:
                if not 0 <= f < i:
                    raise CircuitError(f"node {i}: fanin {f} violates topological order")

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def kinds(self) -> np.ndarray:
        return np.array([n.kind for n in self.nodes], dtype=np.int8)

    @cached_property
    def fanouts(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in self.nodes]
        for node in self.nodes:
            for f in node.fanins:
                out[f].append(node.id)
        return tuple(tuple(o) for o in out)

    @property
    def num_ands(self) -> int:
        return int(np.count_nonzero(self.kinds == NodeKind.AND2))

    @cached_property
    def levels(self) -> tuple[int, ...]:
        return tuple(topo_order(self)[1])

    @property
    def depth(self) -> int:
        return self.levels[self.po]

    def __eq__(self, other):
        if not isinstance(other, AigCircuit):
            return NotImplemented
        return (self.num_pis, self.po, self.nodes) == (other.num_pis, other.po, other.nodes)

    def __hash__(self):
        return hash((self.num_pis, self.po, self.nodes))

    def dump(self) -> str:
        """Canonical text form: one ``id kind fanins...`` line per node, then the PO."""
        lines = [f"{n.id} {n.kind.name} " + " ".join(map(str, n.fanins)) for n in self.nodes]
        lines = [l.rstrip() for l in lines]
        lines.append(f"po {self.po}")
        return "\n".join(lines) + "\n"

    def cleanup(self) -> "AigCircuit":
        """Drop nodes outside the PO's fan-in cone (PIs are always kept)."""
        live = [False] * len(self.nodes)
        live[self.po] = True
        for i in range(len(self.nodes) - 1, -1, -1):
            if live[i]:
                for f in self.nodes[i].fanins:
                    live[f] = True
        for i in range(self.num_pis):
            live[i] = True
        if all(live):
            return self
        remap: dict[int, int] = {}
        nodes = []
        for node in self.nodes:
            if live[node.id]:
                remap[node.id] = len(nodes)
                nodes.append(AigNode(len(nodes), node.kind, tuple(remap[f] for f in node.fanins)))
        return AigCircuit(tuple(nodes), self.num_pis, remap[self.po])


class AigBuilder:
    """Incremental AIG construction with optional structural hashing.

    With ``strash=True`` the builder applies the local simplifications
    AND(x,0)=0, AND(x,1)=x, AND(x,x)=x, AND(x,NOT x)=0, NOT(NOT x)=x and
    merges structurally identical gates.
    """

    def __init__(self, num_pis: int, strash: bool = True):
        self.strash = strash
        self.num_pis = num_pis
        self.nodes: list[AigNode] = [AigNode(i, NodeKind.PI) for i in range(num_pis)]
        self._table: dict[tuple, int] = {}
        self._const0: int | None = None

    def pi(self, i: int) -> int:
        return i

    def const0(self) -> int:
        if self._const0 is None:
            self._const0 = self._add(NodeKind.CONST0, ())
        return self._const0

    def const1(self) -> int:
        return self.not_(self.const0())

    def _add(self, kind: NodeKind, fanins: tuple[int, ...]) -> int:
        nid = len(self.nodes)
        self.nodes.append(AigNode(nid, kind, fanins))
        return nid

    def _is_const(self, x: int) -> int | None:
        """0 or 1 if ``x`` is a constant node (or its complement), else None."""
        node = self.nodes[x]
        if node.kind == NodeKind.CONST0:
            return 0
        if node.kind == NodeKind.NOT and self.nodes[node.fanins[0]].kind == NodeKind.CONST0:
            return 1
        return None

    def _complement_of(self, x: int) -> int | None:
        node = self.nodes[x]
        return node.fanins[0] if node.kind == NodeKind.NOT else None

    def not_(self, x: int) -> int:
        if self.strash:
            inner = self._complement_of(x)
            if inner is not None:
                return inner
            key = ("n", x)
            hit = self._table.get(key)
            if hit is not None:
                return hit
            nid = self._add(NodeKind.NOT, (x,))
            self._table[key] = nid
            return nid
        return self._add(NodeKind.NOT, (x,))

    def and_(self, a: int, b: int) -> int:
        if not self.strash:
            return self._add(NodeKind.AND2, (a, b))
        ca, cb = self._is_const(a), self._is_const(b)
        if ca == 0 or cb == 0:
            return self.const0()
        if ca == 1:
            return b
        if cb == 1:
            return a
        if a == b:
            return a
        if self._complement_of(a) == b or self._complement_of(b) == a:
            return self.const0()
        if a > b:
            a, b = b, a
        key = ("a", a, b)
        hit = self._table.get(key)
        if hit is not None:
            return hit
        nid = self._add(NodeKind.AND2, (a, b))
        self._table[key] = nid
        return nid

    def or_(self, a: int, b: int) -> int:
        return self.not_(self.and_(self.not_(a), self.not_(b)))

    def build(self, po: int, cleanup: bool = True) -> AigCircuit:
        c = AigCircuit(tuple(self.nodes), self.num_pis, po)
        return c.cleanup() if cleanup else c


def cnf_to_aig(f: CnfFormula) -> AigCircuit:
    """Clause-wise De Morgan construction with structural hashing.

    Each clause becomes NOT(AND of negated literals) built left-deep; the
    clause outputs are combined by a left-deep AND chain.
    """
    b = AigBuilder(f.num_variables)

    def lit_node(lit: Literal) -> int:
        x = b.pi(lit.variable_index - 1)
        return b.not_(x) if lit.negated else x

    root = None
    for clause in f.clauses:
        acc = None
        for lit in clause:
            neg = lit_node(-lit)
            acc = neg if acc is None else b.and_(acc, neg)
        c_out = b.not_(acc)
        root = c_out if root is None else b.and_(root, c_out)
    if root is None:
        root = b.const1()
    return b.build(root)


# ---------------------------------------------------------------------------
# structure and evaluation


def topo_order(c: AigCircuit) -> tuple[list[int], list[int], int]:
    """Return (order, per-node logic level, depth).  NOT nodes add no level."""
    levels = [0] * len(c.nodes)
    for node in c.nodes:
        if node.kind == NodeKind.AND2:
            levels[node.id] = 1 + max(levels[node.fanins[0]], levels[node.fanins[1]])
        elif node.kind == NodeKind.NOT:
            levels[node.id] = levels[node.fanins[0]]
    return list(range(len(c.nodes))), levels, levels[c.po]


def propagation_levels(c: AigCircuit) -> np.ndarray:
    """Topological rank where every gate (NOT included) sits above its fanins."""
    rank = np.zeros(len(c.nodes), dtype=np.int64)
    for node in c.nodes:
        if node.fanins:
            rank[node.id] = 1 + max(rank[f] for f in node.fanins)
    return rank


def fanin_cone_sizes(c: AigCircuit) -> list[int]:
    """Size of each node's transitive fan-in cone, the node itself included."""
    cones: list[int] = []
    for node in c.nodes:
        mask = 1 << node.id
        for f in node.fanins:
            mask |= cones[f]
        cones.append(mask)
    return [m.bit_count() for m in cones]


def balance_ratio(c: AigCircuit) -> float:
    """Mean over AND2 nodes of larger-to-smaller fan-in cone size."""
    sizes = fanin_cone_sizes(c)
    ratios = []
    for node in c.nodes:
        if node.kind == NodeKind.AND2:
            s0, s1 = sizes[node.fanins[0]], sizes[node.fanins[1]]
            ratios.append(max(s0, s1) / max(min(s0, s1), 1))
    if not ratios:
        raise CircuitError("balance ratio is undefined for a circuit without AND2 nodes")
    return float(np.mean(ratios))


def evaluate(c: AigCircuit, assignment: Sequence[int]) -> list[int]:
    if len(assignment) != c.num_pis:
        raise CircuitError(f"assignment has {len(assignment)} bits, circuit has {c.num_pis} PIs")
    val = [0] * len(c.nodes)
    for node in c.nodes:
        k = node.kind
        if k == NodeKind.PI:
            val[node.id] = 1 if assignment[node.id] else 0
        elif k == NodeKind.AND2:
            val[node.id] = val[node.fanins[0]] & val[node.fanins[1]]
        elif k == NodeKind.NOT:
            val[node.id] = 1 - val[node.fanins[0]]
    return val


def structural_key(c: AigCircuit) -> tuple:
    """Id-independent signature; AND inputs are unordered.

    Canonical ids are handed out level by level in sorted key order, so two
    circuits with equal keys are the same DAG up to node numbering.
    """
    rank = propagation_levels(c)
    canon = [0] * c.num_nodes
    layers = []
    next_id = 0
    for lv in range(int(rank.max(initial=0)) + 1):
        keyed = {}
        for v in np.flatnonzero(rank == lv):
            node = c.nodes[v]
            if node.kind == NodeKind.PI:
                k = (-1, node.id)
            else:
                k = (int(node.kind), *sorted(canon[f] for f in node.fanins))
            keyed.setdefault(k, []).append(int(v))
        ordered = sorted(keyed)
        for k in ordered:
            for v in keyed[k]:
                canon[v] = next_id
            next_id += 1
        layers.append(tuple((k, len(keyed[k])) for k in ordered))
    return (c.num_pis, c.num_nodes, tuple(layers), canon[c.po])


def circuit_stats(c: AigCircuit) -> dict:
    try:
        br = balance_ratio(c)
    except CircuitError:
        br = None
    return {"nodes": c.num_nodes, "ands": c.num_ands, "depth": c.depth, "br": br}


# ---------------------------------------------------------------------------
# AIGER ASCII


def write_aiger(c: AigCircuit) -> str:
    """Serialize as single-output combinational ``aag``; NOT nodes become complemented edges."""
    lit = [0] * len(c.nodes)
    var = c.num_pis
    and_lines = []
    for node in c.nodes:
        if node.kind == NodeKind.PI:
            lit[node.id] = 2 * (node.id + 1)
        elif node.kind == NodeKind.CONST0:
            lit[node.id] = 0
        elif node.kind == NodeKind.NOT:
            lit[node.id] = lit[node.fanins[0]] ^ 1
        else:
            var += 1
            lit[node.id] = 2 * var
            a, b = lit[node.fanins[0]], lit[node.fanins[1]]
            and_lines.append(f"{2 * var} {max(a, b)} {min(a, b)}")
    header = f"aag {var} {c.num_pis} 0 1 {len(and_lines)}"
    lines = [header]
    lines += [str(2 * (i + 1)) for i in range(c.num_pis)]
    lines.append(str(lit[c.po]))
    lines += and_lines
    return "\n".join(lines) + "\n"


_INT = re.compile(r"^\d+$")


def parse_aiger(text: str) -> AigCircuit:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty AIGER text")
    head = lines[0].split()
    if len(head) < 6 or head[0] != "aag":
        raise ParseError(f"bad AIGER magic/header {lines[0]!r}")
    try:
        m, i, l, o, a = (int(x) for x in head[1:6])
    except ValueError:
        raise ParseError(f"bad AIGER header {lines[0]!r}") from None
    if l != 0:
        raise ParseError("latches are not supported")
    if o != 1:
        raise ParseError(f"expected exactly one output, found {o}")
    if m < i + a:
        raise ParseError("header M is smaller than I + A")
    body = lines[1:]
    if len(body) < i + o + a:
        raise ParseError("truncated AIGER body")

    def ints(line: str, n: int) -> list[int]:
        toks = line.split()
        if len(toks) != n or not all(_INT.match(t) for t in toks):
            raise ParseError(f"malformed line {line!r}")
        return [int(t) for t in toks]

    for k in range(i):
        (x,) = ints(body[k], 1)
        if x != 2 * (k + 1):
            raise ParseError(f"input {k} has literal {x}; expected {2 * (k + 1)} (non-monotone numbering)")
    (out_lit,) = ints(body[i], 1)
    b = AigBuilder(i, strash=False)
    var_node: dict[int, int] = {v + 1: v for v in range(i)}
    not_of: dict[int, int] = {}

    def node_for(lit: int) -> int:
        v = lit >> 1
        if v == 0:
            base = b.const0()
        elif v in var_node:
            base = var_node[v]
        else:
            raise ParseError(f"literal {lit} used before definition")
        if lit & 1:
            if base not in not_of:
                not_of[base] = b.not_(base)
            return not_of[base]
        return base

    expected = 2 * (i + 1)
    for k in range(a):
        lhs, r0, r1 = ints(body[i + o + k], 3)
        if lhs != expected:
            raise ParseError(f"AND gate lhs {lhs}; expected {expected} (non-monotone numbering)")
        if r0 >= lhs or r1 >= lhs:
            raise ParseError(f"AND gate {lhs} references a later literal")
        expected += 2
        x0, x1 = node_for(r0), node_for(r1)
        var_node[lhs >> 1] = b._add(NodeKind.AND2, (x0, x1))
    if out_lit >> 1 > i + a:
        raise ParseError(f"output literal {out_lit} out of range")
    po = node_for(out_lit)
    return b.build(po, cleanup=False)
