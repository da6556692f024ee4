import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aigsat.circuit import AigBuilder, NodeKind, circuit_stats
from aigsat.synth import (
    NpnTransform,
    apply_transform,
    balance_pass,
    build_rewrite_library,
    cut_function,
    default_library,
    enumerate_cuts,
    mffc,
    npn_canonicalize,
    optimize,
    rewrite_pass,
    strash,
)
from aigsat.synth.cuts import PER_NODE_CAP
from aigsat.synth.library import LibraryError, RewriteLibrary
from aigsat.synth.npn import FULL, VAR_TABLES, all_transforms, canonical_classes, canonicalize_slow
from helpers import and2, balanced, chain, circuits, phi_aig, po_table

AND_T = VAR_TABLES[0] & VAR_TABLES[1]
OR_T = VAR_TABLES[0] | VAR_TABLES[1]
XOR_T = VAR_TABLES[0] ^ VAR_TABLES[1]


# -- strash ------------------------------------------------------------------


def test_strash_double_negation():
    b = AigBuilder(1, strash=False)
    c = strash(b.build(b.not_(b.not_(b.pi(0)))))
    assert c.num_ands == 0 and c.po == 0 and c.num_nodes == 1


def test_strash_contradiction():
    b = AigBuilder(1, strash=False)
    c = strash(b.build(b.and_(b.pi(0), b.not_(b.pi(0)))))
    assert c.nodes[c.po].kind == NodeKind.CONST0


def test_strash_merges_duplicates():
    b = AigBuilder(2, strash=False)
    g1, g2 = b.and_(b.pi(0), b.pi(1)), b.and_(b.pi(1), b.pi(0))
    raw = b.build(b.and_(g1, g2))
    c = strash(raw)
    assert c.num_ands == 1
    assert (po_table(c) == po_table(raw)).all()


@settings(max_examples=60, deadline=None)
@given(circuits(max_pis=6, max_gates=40, strash=False))
def test_strash_preserves_function_and_never_grows(c):
    s = strash(c)
    assert s.num_nodes <= c.num_nodes
    assert (po_table(s) == po_table(c)).all()


# -- NPN ---------------------------------------------------------------------


def test_and_or_same_class():
    assert npn_canonicalize(AND_T)[0] == npn_canonicalize(OR_T)[0]


def test_constant_class_invariant():
    canon, _ = npn_canonicalize(0)
    assert canon == 0
    assert {apply_transform(0, tr) for tr in all_transforms()} <= {0, FULL}
    assert npn_canonicalize(FULL)[0] == 0


def test_transform_count():
    assert len(list(all_transforms())) == 768


def test_class_count_golden():
    # frozen from one exhaustive pass over all 65536 tables
    assert len(np.unique(canonical_classes())) == 222


@settings(max_examples=300)
@given(st.integers(0, FULL), st.integers(0, 767))
def test_canonical_is_transform_invariant(t, k):
    tr = list(all_transforms())[k]
    assert npn_canonicalize(apply_transform(t, tr))[0] == npn_canonicalize(t)[0]


@settings(max_examples=200)
@given(st.integers(0, FULL))
def test_recorded_transform_reproduces_table(t):
    canon, tr = npn_canonicalize(t)
    assert apply_transform(canon, tr) == t
    assert canon == min(apply_transform(t, x) for x in all_transforms()) or canon <= t


@settings(max_examples=40, deadline=None)
@given(st.integers(0, FULL))
def test_fast_matches_reference(t):
    assert npn_canonicalize(t)[0] == canonicalize_slow(t)[0]


# -- library -----------------------------------------------------------------


def _and_count(t):
    tmpl = default_library().get(npn_canonicalize(t)[0])
    return None if tmpl is None else tmpl.size


def test_library_examples():
    assert _and_count(AND_T) == 1
    assert _and_count(XOR_T) == 3
    assert _and_count(VAR_TABLES[2]) == 0
    assert _and_count(0) == 0


def test_xor_has_no_two_gate_realization():
    # independent brute force over every 2-gate AIG on two inputs
    T = 0xF
    sig = [0, 0b1010, 0b1100]

    def lits(vals):
        return [v ^ m for v in vals for m in (0, T)]

    xor = 0b0110
    for a, b in itertools.product(lits(sig), repeat=2):
        g1 = a & b
        for c, d in itertools.product(lits(sig + [g1]), repeat=2):
            g2 = c & d
            assert xor not in (g1, g1 ^ T, g2, g2 ^ T)


def test_library_templates_compute_their_keys():
    lib = default_library()
    assert len(lib) == 136 and lib.max_template_nodes == 7
    for key, tmpl in lib.templates.items():
        assert tmpl.simulate() == key
        assert npn_canonicalize(key)[0] == key
        assert tmpl.size <= 7


def test_small_budget_rebuild_agrees_with_shipped_sizes():
    small = build_rewrite_library(4)
    lib = default_library()
    assert set(small.templates) <= set(lib.templates)
    for key, tmpl in small.templates.items():
        assert tmpl.size == lib.get(key).size
    assert not any(t.size <= 4 and k not in small.templates for k, t in lib.templates.items())


def test_library_round_trip_and_tamper_detection(tmp_path):
    lib = default_library()
    path = tmp_path / "lib.json"
    lib.save(path)
    again = RewriteLibrary.load(path)
    assert again.templates == lib.templates
    doc = json.loads(path.read_text())
    key = next(iter(doc["classes"]))
    doc["classes"][key]["out"] ^= 1
    with pytest.raises(LibraryError):
        RewriteLibrary.from_json(json.dumps(doc))
    doc["version"] = 99
    with pytest.raises(LibraryError):
        RewriteLibrary.from_json(json.dumps(doc))


# -- cuts and cones ----------------------------------------------------------


def test_pi_has_only_trivial_cut():
    assert enumerate_cuts(and2())[0] == [(0,)]


def test_and_cuts():
    assert enumerate_cuts(and2())[2] == [(2,), (0, 1)]


def test_balanced_root_has_full_cut():
    c = balanced(4)
    assert (0, 1, 2, 3) in enumerate_cuts(c)[c.po]


def test_cut_functions():
    assert cut_function(and2(), 2, (0, 1)) == AND_T
    b = AigBuilder(1)
    c = b.build(b.not_(b.pi(0)))
    assert cut_function(c, c.po, (0,)) == VAR_TABLES[0] ^ FULL


def test_phi_first_clause_cone():
    c = phi_aig()
    want = (VAR_TABLES[0] ^ FULL) | VAR_TABLES[1]
    found = []
    for v in range(c.num_pis, c.num_nodes):
        try:
            found.append(cut_function(c, v, (0, 1)))
        except ValueError:
            pass
    assert want in found


@settings(max_examples=40, deadline=None)
@given(circuits(max_pis=6, max_gates=40))
def test_cut_sets_are_valid(c):
    for v, cuts in enumerate(enumerate_cuts(c)):
        assert cuts[0] == (v,)
        assert len(cuts) <= PER_NODE_CAP
        rest = [frozenset(x) for x in cuts[1:]]
        for i, a in enumerate(rest):
            assert 1 <= len(a) <= 4
            assert not any(b < a for b in rest)
            cut_function(c, v, tuple(sorted(a)))  # raises if a PI path bypasses the leaves


def test_mffc_examples():
    assert mffc(and2(), 2, (0, 1)) == {2}
    b = AigBuilder(4)
    x = b.and_(b.pi(0), b.pi(1))
    y = b.and_(x, b.pi(2))
    z = b.and_(x, b.pi(3))
    c = b.build(b.and_(y, z))
    assert mffc(c, y, (0, 1, 2)) == {y}
    ch = chain(4)
    assert len(mffc(ch, ch.po, (0, 1, 2, 3))) == 3


# -- passes ------------------------------------------------------------------


def test_rewrite_removes_double_negation():
    b = AigBuilder(2, strash=False)
    raw = b.build(b.not_(b.not_(b.and_(b.pi(0), b.pi(1)))))
    out, _ = rewrite_pass(raw)
    assert out.num_nodes < raw.num_nodes
    assert out.dump() == and2().dump()


def test_rewrite_fixpoint_on_minimal_tree():
    c = balanced(4)
    out, stats = rewrite_pass(c)
    assert out.dump() == c.dump()
    assert stats["replacements"] == 0


def test_rewrite_merges_redundant_cones():
    b = AigBuilder(3)
    x1, x2, x3 = b.pi(0), b.pi(1), b.pi(2)
    f = b.and_(b.and_(x1, x2), x3)
    g = b.and_(x1, b.and_(x2, x3))
    c = b.build(b.and_(f, g))
    out, _ = rewrite_pass(c)
    assert c.num_ands - out.num_ands >= 1
    assert (po_table(out) == po_table(c)).all()


def test_balance_examples():
    assert balance_pass(chain(4)).depth == 2
    assert balance_pass(chain(8)).depth == 3
    assert balance_pass(balanced(4)).dump() == balanced(4).dump()


@settings(max_examples=60, deadline=None)
@given(circuits(max_pis=8, max_gates=60))
def test_rewrite_preserves_function_and_never_grows(c):
    out, _ = rewrite_pass(c)
    assert out.num_nodes <= c.num_nodes
    assert (po_table(out) == po_table(c)).all()


@settings(max_examples=60, deadline=None)
@given(circuits(max_pis=8, max_gates=60))
def test_balance_preserves_function_and_never_deepens(c):
    out = balance_pass(c)
    assert out.depth <= c.depth
    assert (po_table(out) == po_table(c)).all()


@settings(max_examples=40, deadline=None)
@given(circuits(max_pis=8, max_gates=60))
def test_optimize_preserves_function_and_is_non_worsening_twice(c):
    once, stats = optimize(c)
    twice, _ = optimize(once)
    assert (po_table(once) == po_table(c)).all()
    assert stats["before"] == circuit_stats(c) and stats["after"] == circuit_stats(once)
    assert twice.num_nodes <= once.num_nodes and twice.depth <= once.depth


def test_optimize_phi_exhaustive():
    c = phi_aig()
    out, _ = optimize(c)
    assert (po_table(out) == po_table(c)).all()


def test_optimize_fixpoint():
    c = balanced(8)
    out, _ = optimize(c)
    assert out.dump() == c.dump()
