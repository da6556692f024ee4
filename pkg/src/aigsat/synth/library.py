"""Precomputed minimal AIG templates for 4-input NPN classes.

Templates are found by exhaustive search over sets of gate functions,
growing one AND gate at a time, so a class first reached with k gates has
no realization with fewer.  Sets are reduced modulo input permutation and
negation to keep the search tractable.

Template literals: 0/1 are constants, ``2*(j+1) + c`` is formal input j
(possibly complemented), ``2*(5+k) + c`` is the k-th AND gate.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .npn import FULL, PERMS, VAR_TABLES, _source_index, _tables, npn_canonicalize

log = logging.getLogger(__name__)

LIBRARY_VERSION = 1
DEFAULT_MAX_NODES = 7
_FIRST_GATE = 5


class LibraryError(ValueError):
    pass


@dataclass(frozen=True)
class Template:
    ands: tuple[tuple[int, int], ...]
    out: int

    @property
    def size(self) -> int:
        return len(self.ands)

    def simulate(self) -> int:
        vals = [0] * (_FIRST_GATE + len(self.ands))
        for j in range(4):
            vals[j + 1] = VAR_TABLES[j]

        def lit(l):
            return vals[l >> 1] ^ (FULL if l & 1 else 0)

        for k, (a, b) in enumerate(self.ands):
            vals[_FIRST_GATE + k] = lit(a) & lit(b)
        return lit(self.out)


@dataclass
class RewriteLibrary:
    templates: dict[int, Template]
    max_template_nodes: int

    def get(self, canonical: int) -> Template | None:
        return self.templates.get(canonical)

    def __len__(self):
        return len(self.templates)

    # serialization -------------------------------------------------------

    def _payload(self) -> dict:
        return {
            f"{c:04x}": {"ands": [list(p) for p in t.ands], "out": t.out}
            for c, t in sorted(self.templates.items())
        }

    def to_json(self) -> str:
        classes = self._payload()
        body = json.dumps(classes, sort_keys=True, separators=(",", ":"))
        doc = {
            "format": "aigsat-rewrite-library",
            "version": LIBRARY_VERSION,
            "max_template_nodes": self.max_template_nodes,
            "checksum": hashlib.sha256(body.encode()).hexdigest(),
            "classes": classes,
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "RewriteLibrary":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise LibraryError(f"library is not valid JSON: {e}") from None
        if doc.get("format") != "aigsat-rewrite-library":
            raise LibraryError("not a rewrite library file")
        if doc.get("version") != LIBRARY_VERSION:
            raise LibraryError(f"unsupported library version {doc.get('version')}")
        body = json.dumps(doc["classes"], sort_keys=True, separators=(",", ":"))
        if hashlib.sha256(body.encode()).hexdigest() != doc.get("checksum"):
            raise LibraryError("library checksum mismatch")
        templates = {}
        for key, entry in doc["classes"].items():
            t = Template(tuple(tuple(p) for p in entry["ands"]), entry["out"])
            c = int(key, 16)
            if t.simulate() != c:
                raise LibraryError(f"template for class {key} does not compute its key")
            templates[c] = t
        return cls(templates, doc["max_template_nodes"])

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "RewriteLibrary":
        return cls.from_json(Path(path).read_text())


_default: RewriteLibrary | None = None


def default_library() -> RewriteLibrary:
    """The library shipped with the package (budget of 7 AND gates)."""
    global _default
    if _default is None:
        text = resources.files("aigsat.synth").joinpath("rewrite_library.json").read_text()
        _default = RewriteLibrary.from_json(text)
    return _default


# ---------------------------------------------------------------------------
# offline search


def _norm(f: int) -> int:
    return f ^ FULL if f & 1 else f


def _input_maps() -> np.ndarray:
    t = np.arange(1 << 16, dtype=np.uint32)
    maps = []
    for perm in PERMS:
        for neg in range(16):
            src = _source_index(perm, neg)
            c = np.zeros_like(t)
            for z in range(16):
                c |= ((t >> src[z]) & 1) << z
            maps.append(c.astype(np.uint16))
    return np.stack(maps)


def _gates_from(signals) -> set[tuple[int, int, int, int, int]]:
    """All new normalized gate functions from AND-ing two signal literals."""
    present = set(signals)
    out = {}
    n = len(signals)
    for i in range(n):
        a = signals[i]
        for j in range(i + 1, n):
            b = signals[j]
            for pa in (0, 1):
                for pb in (0, 1):
                    g = _norm((a ^ (FULL * pa)) & (b ^ (FULL * pb)))
                    if g and g not in present and g not in out:
                        out[g] = (i, pa, j, pb)
    return out


def _realize(gate_set, final) -> Template:
    """Order ``gate_set`` so each gate is an AND of earlier literals, then add ``final``."""
    signals = list(VAR_TABLES)
    lits = [2 * (j + 1) for j in range(4)]
    ands: list[tuple[int, int]] = []
    pending = list(gate_set)

    def find(g):
        n = len(signals)
        for i in range(n):
            for j in range(i + 1, n):
                for pa in (0, 1):
                    for pb in (0, 1):
                        r = (signals[i] ^ (FULL * pa)) & (signals[j] ^ (FULL * pb))
                        if r == g or r == g ^ FULL:
                            return lits[i] ^ pa, lits[j] ^ pb, int(r != g)
        return None

    while pending:
        for g in pending:
            hit = find(g)
            if hit is not None:
                a, b, flip = hit
                ands.append((a, b))
                signals.append(g)
                lits.append(2 * (_FIRST_GATE + len(ands) - 1) ^ flip)
                pending.remove(g)
                break
        else:
            raise RuntimeError("gate set is not realizable")
    lit_of = dict(zip(signals, lits))
    original = list(VAR_TABLES) + list(gate_set)
    i, pa, j, pb = final
    ands.append((lit_of[original[i]] ^ pa, lit_of[original[j]] ^ pb))
    t = Template(tuple(ands), 2 * (_FIRST_GATE + len(ands) - 1))
    return _prune(t)


def _prune(t: Template) -> Template:
    """Drop gates outside the output cone and renumber."""
    live = set()
    stack = [t.out >> 1]
    while stack:
        v = stack.pop()
        if v >= _FIRST_GATE and v not in live:
            live.add(v)
            a, b = t.ands[v - _FIRST_GATE]
            stack += [a >> 1, b >> 1]
    order = sorted(live)
    remap = {v: _FIRST_GATE + k for k, v in enumerate(order)}

    def m(l):
        v = l >> 1
        return 2 * remap[v] + (l & 1) if v >= _FIRST_GATE else l

    ands = tuple((m(t.ands[v - _FIRST_GATE][0]), m(t.ands[v - _FIRST_GATE][1])) for v in order)
    return Template(ands, m(t.out))


def _to_canonical(t: Template) -> tuple[int, Template]:
    """Rewire ``t`` so that it computes the canonical member of its class."""
    r = t.simulate()
    c, tr = npn_canonicalize(r)
    # c(z) = out ^ r(x) with x[perm[j]] = z_j ^ neg_j
    input_lit = {}
    for j in range(4):
        input_lit[tr.perm[j] + 1] = 2 * (j + 1) + ((tr.neg >> j) & 1)

    def m(l):
        v = l >> 1
        if 1 <= v <= 4:
            return input_lit[v] ^ (l & 1)
        return l

    ands = tuple((m(a), m(b)) for a, b in t.ands)
    out = m(t.out) ^ tr.out
    new = Template(ands, out)
    if new.simulate() != c:
        raise RuntimeError("canonical rewiring failed")
    return c, new


def build_rewrite_library(max_template_nodes: int = DEFAULT_MAX_NODES) -> RewriteLibrary:
    """Minimal templates for every NPN class reachable within the gate budget."""
    canon, _ = _tables()
    maps = _input_maps()
    templates: dict[int, Template] = {}
    for base in (Template((), 0), Template((), 2)):  # constant 0, identity
        c, t = _to_canonical(base)
        templates.setdefault(c, t)

    def canon_set(members):
        m = maps[:, members]
        m = np.where(m & 1, m ^ FULL, m)
        m.sort(axis=1)
        row = np.lexsort(m.T[::-1])[0]
        return tuple(int(x) for x in m[row])

    level: list[tuple[int, ...]] = [()]
    for k in range(1, max_template_nodes + 1):
        nxt: dict[tuple[int, ...], None] = {}
        found = 0
        for gate_set in level:
            signals = list(VAR_TABLES) + list(gate_set)
            for g, pair in _gates_from(signals).items():
                c = int(canon[g])
                if c not in templates:
                    _, t = _to_canonical(_realize(gate_set, pair))
                    templates[c] = t
                    found += 1
                if k < max_template_nodes:
                    nxt[canon_set(list(gate_set) + [g])] = None
        level = list(nxt)
        log.info("gates=%d sets=%d new classes=%d total=%d", k, len(level), found, len(templates))
    return RewriteLibrary(templates, max_template_nodes)
