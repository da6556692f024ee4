"""Mutable AIG with complemented edges, used internally by the synthesis passes.

Node 0 is constant false, nodes ``1..num_pis`` are the primary inputs, the
rest are AND gates.  A literal is ``2 * node + complemented``.  Gates created
after a replacement may carry ids larger than their fanouts, so id order is
not a topological order once the network has been edited.
"""

from __future__ import annotations

from ..circuit import AigBuilder, AigCircuit, NodeKind


def lit_node(l: int) -> int:
    return l >> 1


class Net:
    def __init__(self, num_pis: int):
        self.num_pis = num_pis
        n = num_pis + 1
        self.fanin0: list[int] = [-1] * n
        self.fanin1: list[int] = [-1] * n
        self.ref: list[int] = [0] * n
        self.fanouts: list[set[int]] = [set() for _ in range(n)]
        self.dead: list[bool] = [False] * n
        self.table: dict[tuple[int, int], int] = {}
        self.po = 0
        self.replaced: dict[int, int] = {}

    # construction --------------------------------------------------------

    @classmethod
    def from_circuit(cls, c: AigCircuit) -> "Net":
        net = cls(c.num_pis)
        lit = [0] * len(c.nodes)
        for node in c.nodes:
            if node.kind == NodeKind.PI:
                lit[node.id] = 2 * (node.id + 1)
            elif node.kind == NodeKind.CONST0:
                lit[node.id] = 0
            elif node.kind == NodeKind.NOT:
                lit[node.id] = lit[node.fanins[0]] ^ 1
            else:
                lit[node.id] = net.and_(lit[node.fanins[0]], lit[node.fanins[1]])
        net.set_po(lit[c.po])
        return net

    def is_and(self, v: int) -> bool:
        return v > self.num_pis

    def num_ands(self) -> int:
        return sum(1 for v in range(self.num_pis + 1, len(self.dead)) if not self.dead[v])

    def set_po(self, l: int) -> None:
        self.po = l
        self.ref[l >> 1] += 1

    @staticmethod
    def trivial(a: int, b: int) -> int | None:
        if a == 0 or b == 0 or a == b ^ 1:
            return 0
        if a == 1:
            return b
        if b == 1 or a == b:
            return a
        return None

    @staticmethod
    def key(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def lookup(self, a: int, b: int) -> int | None:
        """Literal of AND(a, b) if it already exists or simplifies, else None."""
        t = self.trivial(a, b)
        if t is not None:
            return t
        v = self.table.get(self.key(a, b))
        return None if v is None else 2 * v

    def and_(self, a: int, b: int) -> int:
        hit = self.lookup(a, b)
        if hit is not None:
            return hit
        a, b = self.key(a, b)
        v = len(self.dead)
        self.fanin0.append(a)
        self.fanin1.append(b)
        self.ref.append(0)
        self.fanouts.append(set())
        self.dead.append(False)
        self.table[(a, b)] = v
        for l in (a, b):
            self.ref[l >> 1] += 1
            self.fanouts[l >> 1].add(v)
        return 2 * v

    # editing -------------------------------------------------------------

    def _delete(self, v: int) -> None:
        stack = [v]
        while stack:
            u = stack.pop()
            if self.dead[u] or not self.is_and(u) or self.ref[u] > 0:
                continue
            self.dead[u] = True
            k = (self.fanin0[u], self.fanin1[u])
            if self.table.get(k) == u:
                del self.table[k]
            for l in k:
                w = l >> 1
                self.ref[w] -= 1
                self.fanouts[w].discard(u)
                if self.ref[w] == 0:
                    stack.append(w)

    def _resolve(self, l: int) -> int:
        while (l >> 1) in self.replaced:
            l = self.replaced[l >> 1] ^ (l & 1)
        return l

    def delete_if_dangling(self, v: int) -> None:
        if self.is_and(v) and not self.dead[v] and self.ref[v] == 0:
            self._delete(v)

    def replace(self, old: int, new_lit: int) -> None:
        """Redirect every fanout of node ``old`` to ``new_lit`` and drop dead logic.

        Fanouts that become trivial or duplicate an existing gate are
        themselves replaced, cascading toward the output.
        """
        stack = [(old, new_lit)]
        while stack:
            o, nl = stack.pop()
            nl = self._resolve(nl)
            if self.dead[o]:
                continue
            self.replaced[o] = nl
            if self.po >> 1 == o:
                self.ref[o] -= 1
                self.po = nl ^ (self.po & 1)
                self.ref[nl >> 1] += 1
            for u in sorted(self.fanouts[o]):
                if self.dead[u]:
                    continue
                f0, f1 = self.fanin0[u], self.fanin1[u]
                if self.table.get((f0, f1)) == u:
                    del self.table[(f0, f1)]
                n0 = nl ^ (f0 & 1) if f0 >> 1 == o else f0
                n1 = nl ^ (f1 & 1) if f1 >> 1 == o else f1
                for fo, fn in ((f0, n0), (f1, n1)):
                    if fo != fn:
                        self.ref[fo >> 1] -= 1
                        self.fanouts[fo >> 1].discard(u)
                        self.ref[fn >> 1] += 1
                        self.fanouts[fn >> 1].add(u)
                n0, n1 = self.key(n0, n1)
                self.fanin0[u], self.fanin1[u] = n0, n1
                hit = self.lookup(n0, n1)
                if hit is None:
                    self.table[(n0, n1)] = u
                else:
                    stack.append((u, hit))
            self.delete_if_dangling(o)

    # traversal -----------------------------------------------------------

    def topo_order(self) -> list[int]:
        """Live AND nodes reachable from the PO, fanins first."""
        order: list[int] = []
        seen = set()
        root = self.po >> 1
        if not self.is_and(root):
            return order
        stack = [(root, False)]
        while stack:
            v, expanded = stack.pop()
            if expanded:
                order.append(v)
                continue
            if v in seen:
                continue
            seen.add(v)
            stack.append((v, True))
            for l in (self.fanin1[v], self.fanin0[v]):
                w = l >> 1
                if self.is_and(w) and w not in seen:
                    stack.append((w, False))
        return order

    def levels(self) -> dict[int, int]:
        lev = {v: 0 for v in range(self.num_pis + 1)}
        for v in self.topo_order():
            lev[v] = 1 + max(lev[self.fanin0[v] >> 1], lev[self.fanin1[v] >> 1])
        return lev

    def to_circuit(self) -> AigCircuit:
        b = AigBuilder(self.num_pis)
        node = {v + 1: v for v in range(self.num_pis)}

        def get(l: int) -> int:
            v = l >> 1
            x = b.const0() if v == 0 else node[v]
            return b.not_(x) if l & 1 else x

        for v in self.topo_order():
            node[v] = b.and_(get(self.fanin0[v]), get(self.fanin1[v]))
        return b.build(get(self.po))
