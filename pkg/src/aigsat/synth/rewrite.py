"""DAG-aware cut rewriting against the precomputed template library."""

from __future__ import annotations

from ..circuit import AigCircuit, structural_key
from .cuts import NetCuts, net_cut_function, net_mffc
from .library import RewriteLibrary, Template, default_library
from .net import Net
from .npn import NpnTransform, npn_canonicalize


def _input_literals(tr: NpnTransform, leaves) -> list[int]:
    lits = []
    for j in range(4):
        p = tr.perm[j]
        neg = (tr.neg >> j) & 1
        lits.append((2 * leaves[p] if p < len(leaves) else 0) ^ neg)
    return lits


def _template_lit(l: int, inputs, gates) -> int | None:
    v = l >> 1
    if v == 0:
        return l
    if v <= 4:
        return inputs[v - 1] ^ (l & 1)
    g = gates[v - 5]
    return None if g is None else g ^ (l & 1)


def _count_new(net: Net, tmpl: Template, tr: NpnTransform, leaves, root: int, cone: set[int], limit: int):
    """Gates the template would add after hashing, or None if it must be skipped."""
    inputs = _input_literals(tr, leaves)
    gates: list[int | None] = []
    added = 0
    for a, b in tmpl.ands:
        la, lb = _template_lit(a, inputs, gates), _template_lit(b, inputs, gates)
        hit = None if la is None or lb is None else net.lookup(la, lb)
        if hit is None:
            added += 1
        else:
            w = hit >> 1
            if w == root:
                return None
            if w in cone:
                added += 1
        gates.append(hit)
        if added >= limit:
            return None
    out = _template_lit(tmpl.out, inputs, gates)
    if out is not None and out >> 1 == root:
        return None
    return added


def _instantiate(net: Net, tmpl: Template, tr: NpnTransform, leaves) -> int:
    inputs = _input_literals(tr, leaves)
    gates: list[int] = []
    for a, b in tmpl.ands:
        gates.append(net.and_(_template_lit(a, inputs, gates), _template_lit(b, inputs, gates)))
    return _template_lit(tmpl.out, inputs, gates) ^ tr.out


def rewrite_net(net: Net, library: RewriteLibrary) -> dict:
    cuts = NetCuts(net)
    replacements = 0
    total_gain = 0
    for v in net.topo_order():
        if net.dead[v] or net.ref[v] == 0:
            continue
        best = None
        for leaves in cuts.cuts(v)[1:]:
            t = net_cut_function(net, v, leaves)
            canon, tr = npn_canonicalize(t)
            tmpl = library.get(canon)
            if tmpl is None:
                continue
            cone = net_mffc(net, v, leaves)
            added = _count_new(net, tmpl, tr, leaves, v, set(cone), len(cone))
            if added is None:
                continue
            gain = len(cone) - added
            key = (gain, -len(leaves), -t)
            if gain > 0 and (best is None or key > best[0]):
                best = (key, tmpl, tr, leaves)
        if best is None:
            continue
        _, tmpl, tr, leaves = best
        new_lit = _instantiate(net, tmpl, tr, leaves)
        if new_lit >> 1 == v:
            continue
        net.replace(v, new_lit)
        replacements += 1
        total_gain += best[0][0]
    return {"replacements": replacements, "estimated_gain": total_gain}


def rewrite_pass(c: AigCircuit, library: RewriteLibrary | None = None) -> tuple[AigCircuit, dict]:
    """One rewriting sweep in topological order.

    Each node takes the best strictly positive-gain replacement among its
    cuts; the result is rejected wholesale if it would grow the circuit.
    """
    lib = default_library() if library is None else library
    net = Net.from_circuit(c)
    stats = rewrite_net(net, lib)
    out = net.to_circuit()
    stats["nodes_before"] = c.num_nodes
    if out.num_nodes > c.num_nodes:
        out = c
        stats["rejected"] = True
    elif structural_key(out) == structural_key(c):
        out = c
    stats["nodes_after"] = out.num_nodes
    return out, stats
