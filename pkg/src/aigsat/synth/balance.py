"""Level-minimizing AND-tree balancing."""

from __future__ import annotations

import heapq

from ..circuit import AigCircuit, structural_key
from .net import Net


def _supergate(net: Net, v: int) -> list[int]:
    """Leaf literals of the maximal single-fanout, uncomplemented AND tree rooted at ``v``."""
    leaves = []
    stack = [net.fanin1[v], net.fanin0[v]]
    while stack:
        l = stack.pop()
        w = l >> 1
        if not (l & 1) and net.is_and(w) and net.ref[w] == 1:
            stack += [net.fanin1[w], net.fanin0[w]]
        else:
            leaves.append(l)
    return leaves


def balance_net(old: Net) -> Net:
    new = Net(old.num_pis)
    level = [0] * (old.num_pis + 1)

    def make_and(a: int, b: int) -> int:
        g = new.and_(a, b)
        v = g >> 1
        while len(level) <= v:
            level.append(0)
        if new.is_and(v) and level[v] == 0:
            level[v] = 1 + max(level[a >> 1], level[b >> 1])
        return g

    order = old.topo_order()
    root = old.po >> 1
    needed = {root}
    groups: dict[int, list[int]] = {}
    for v in reversed(order):
        if v in needed:
            groups[v] = _supergate(old, v)
            needed.update(l >> 1 for l in groups[v])

    mapped = {v: 2 * v for v in range(old.num_pis + 1)}
    for v in order:
        if v not in groups:
            continue
        lits = {mapped[l >> 1] ^ (l & 1) for l in groups[v]}
        if any(l ^ 1 in lits for l in lits) or 0 in lits:
            mapped[v] = 0
            continue
        lits.discard(1)
        if not lits:
            mapped[v] = 1
            continue
        heap = [(level[l >> 1], l) for l in lits]
        heapq.heapify(heap)
        while len(heap) > 1:
            _, a = heapq.heappop(heap)
            _, b = heapq.heappop(heap)
            g = make_and(a, b)
            heapq.heappush(heap, (level[g >> 1], g))
        mapped[v] = heap[0][1]
    new.set_po(mapped[root] ^ (old.po & 1))
    return new


def balance_pass(c: AigCircuit) -> AigCircuit:
    """Rebuild every AND tree by repeatedly joining its two shallowest operands.

    A circuit that comes back structurally identical is returned as given.
    """
    out = balance_net(Net.from_circuit(c)).to_circuit()
    return c if structural_key(out) == structural_key(c) else out
