"""K-feasible cut enumeration, local cut functions and maximum fanout-free cones."""

from __future__ import annotations

from typing import NamedTuple, Sequence

from ..circuit import AigCircuit, NodeKind
from .npn import FULL, VAR_TABLES
from .net import Net

PER_NODE_CAP = 20


class Cut(NamedTuple):
    root: int
    leaves: tuple[int, ...]


def merge_cuts(v: int, child_cuts: Sequence[Sequence[tuple[int, ...]]], k: int, cap: int):
    """Trivial cut plus every union of one cut per child with at most k leaves.

    Dominated cuts (strict supersets of another) are removed; the rest are
    ordered by size then leaves and capped.
    """
    merged: set[tuple[int, ...]] = set()
    if len(child_cuts) == 1:
        merged.update(child_cuts[0])
    else:
        for a in child_cuts[0]:
            for b in child_cuts[1]:
                u = set(a)
                u.update(b)
                if len(u) <= k:
                    merged.add(tuple(sorted(u)))
    cand = sorted(merged, key=lambda c: (len(c), c))
    kept: list[tuple[int, ...]] = []
    kept_sets: list[frozenset] = []
    for c in cand:
        s = frozenset(c)
        if any(ks <= s for ks in kept_sets):
            continue
        kept.append(c)
        kept_sets.append(s)
        if len(kept) >= cap - 1:
            break
    return [(v,)] + kept


def enumerate_cuts(c: AigCircuit, k: int = 4, per_node_cap: int = PER_NODE_CAP) -> list[list[tuple[int, ...]]]:
    cuts: list[list[tuple[int, ...]]] = []
    for node in c.nodes:
        if not node.fanins:
            cuts.append([(node.id,)])
        else:
            cuts.append(merge_cuts(node.id, [cuts[f] for f in node.fanins], k, per_node_cap))
    return cuts


def cut_function(c: AigCircuit, root: int, leaves: Sequence[int]) -> int:
    """Truth table of ``root`` over ``leaves`` (leaf i is input variable i)."""
    if len(leaves) > 4:
        raise ValueError("at most 4 leaves")
    tab = {leaf: VAR_TABLES[i] for i, leaf in enumerate(leaves)}

    def ev(v: int) -> int:
        if v in tab:
            return tab[v]
        node = c.nodes[v]
        if node.kind == NodeKind.AND2:
            r = ev(node.fanins[0]) & ev(node.fanins[1])
        elif node.kind == NodeKind.NOT:
            r = ev(node.fanins[0]) ^ FULL
        elif node.kind == NodeKind.CONST0:
            r = 0
        else:
            raise ValueError(f"leaves {tuple(leaves)} do not cut node {root}: reached PI {v}")
        tab[v] = r
        return r

    return ev(root)


def _deref_cone(root: int, leaves, fanins_of, ref: dict[int, int]) -> list[int]:
    cone = [root]
    stack = [root]
    while stack:
        v = stack.pop()
        for f in fanins_of(v):
            if f in leaves:
                continue
            ref[f] -= 1
            if ref[f] == 0:
                cone.append(f)
                stack.append(f)
    return cone


def mffc(c: AigCircuit, root: int, leaves: Sequence[int]) -> set[int]:
    """Nodes between ``root`` and ``leaves`` that disappear if ``root`` is re-expressed."""
    leaf_set = set(leaves)
    gates = {NodeKind.AND2, NodeKind.NOT}
    ref = {i: len(fo) + (1 if i == c.po else 0) for i, fo in enumerate(c.fanouts)}

    def fanins_of(v):
        return [f for f in c.nodes[v].fanins if c.nodes[f].kind in gates]

    return set(_deref_cone(root, leaf_set, fanins_of, ref))


# ---------------------------------------------------------------------------
# the same machinery on the mutable network


class NetCuts:
    """Memoized cut sets for a Net; stale entries are recomputed on demand."""

    def __init__(self, net: Net, k: int = 4, cap: int = PER_NODE_CAP):
        self.net, self.k, self.cap = net, k, cap
        self.memo: dict[int, list[tuple[int, ...]]] = {}

    def _valid(self, cuts) -> bool:
        dead = self.net.dead
        return all(not dead[l] for c in cuts for l in c)

    def cuts(self, v: int) -> list[tuple[int, ...]]:
        net = self.net
        stack = [v]
        while stack:
            u = stack[-1]
            got = self.memo.get(u)
            if got is not None and self._valid(got):
                stack.pop()
                continue
            if not net.is_and(u):
                self.memo[u] = [(u,)]
                stack.pop()
                continue
            c0, c1 = net.fanin0[u] >> 1, net.fanin1[u] >> 1
            missing = [w for w in (c0, c1) if w not in self.memo or not self._valid(self.memo[w])]
            if missing:
                stack.extend(missing)
                continue
            self.memo[u] = merge_cuts(u, [self.memo[c0], self.memo[c1]], self.k, self.cap)
            stack.pop()
        return self.memo[v]

    def invalidate(self, v: int) -> None:
        self.memo.pop(v, None)


def net_cut_function(net: Net, root: int, leaves: Sequence[int]) -> int:
    tab = {leaf: VAR_TABLES[i] for i, leaf in enumerate(leaves)}
    tab.setdefault(0, 0)
    stack = [root]
    while stack:
        v = stack[-1]
        if v in tab:
            stack.pop()
            continue
        kids = [net.fanin0[v] >> 1, net.fanin1[v] >> 1]
        todo = [w for w in kids if w not in tab]
        if todo:
            stack.extend(todo)
            continue
        a, b = net.fanin0[v], net.fanin1[v]
        tab[v] = (tab[a >> 1] ^ (FULL if a & 1 else 0)) & (tab[b >> 1] ^ (FULL if b & 1 else 0))
        stack.pop()
    return tab[root]


def net_mffc(net: Net, root: int, leaves: Sequence[int]) -> list[int]:
    leaf_set = set(leaves)
    ref: dict[int, int] = {}
    cone = [root]
    stack = [root]
    while stack:
        v = stack.pop()
        for l in (net.fanin0[v], net.fanin1[v]):
            w = l >> 1
            if w in leaf_set or not net.is_and(w):
                continue
            r = ref.get(w, net.ref[w]) - 1
            ref[w] = r
            if r == 0:
                cone.append(w)
                stack.append(w)
    return cone
