"""4-input truth tables and NPN canonicalization.

A table is a 16-bit int; bit ``i`` is the function value when input ``j``
takes bit ``j`` of ``i``.  A transform ``(perm, neg, out)`` maps a canonical
table ``c`` to the original ``t`` by

    t(x) = out XOR c(z),   z_j = x[perm[j]] XOR neg_j

so a template realizing ``c`` over formal inputs ``z`` realizes ``t`` once
formal input ``j`` is wired to leaf ``perm[j]`` (complemented when ``neg_j``)
and the output is complemented when ``out``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import NamedTuple

import numpy as np

FULL = 0xFFFF
VAR_TABLES = (0xAAAA, 0xCCCC, 0xF0F0, 0xFF00)
PERMS = tuple(itertools.permutations(range(4)))


class NpnTransform(NamedTuple):
    perm: tuple[int, int, int, int]
    neg: int
    out: int


def _source_index(perm, neg) -> list[int]:
    """For each canonical minterm z, the original minterm x it reads."""
    src = []
    for z in range(16):
        x = 0
        for j in range(4):
            if ((z >> j) & 1) ^ ((neg >> j) & 1):
                x |= 1 << perm[j]
        src.append(x)
    return src


def apply_transform(c: int, tr: NpnTransform) -> int:
    """Original table obtained from canonical ``c`` under ``tr``."""
    src = _source_index(tr.perm, tr.neg)
    t = 0
    for z in range(16):
        if (c >> z) & 1:
            t |= 1 << src[z]
    return t ^ (FULL if tr.out else 0)


def pull_back(t: int, tr: NpnTransform) -> int:
    """The table ``c`` with ``apply_transform(c, tr) == t``."""
    src = _source_index(tr.perm, tr.neg)
    c = 0
    for z in range(16):
        if (t >> src[z]) & 1:
            c |= 1 << z
    return c ^ (FULL if tr.out else 0)


def all_transforms():
    for perm in PERMS:
        for neg in range(16):
            for out in (0, 1):
                yield NpnTransform(perm, neg, out)


def canonicalize_slow(t: int) -> tuple[int, NpnTransform]:
    """Direct minimum over all 768 transforms (reference path)."""
    best = None
    for tr in all_transforms():
        c = pull_back(t, tr)
        if best is None or c < best[0]:
            best = (c, tr)
    return best


@lru_cache(maxsize=1)
def _tables() -> tuple[np.ndarray, np.ndarray]:
    """Canonical form and transform index for all 65536 tables."""
    t = np.arange(1 << 16, dtype=np.uint32)
    best = np.full(1 << 16, 1 << 17, dtype=np.uint32)
    best_idx = np.zeros(1 << 16, dtype=np.uint16)
    idx = 0
    for perm in PERMS:
        for neg in range(16):
            src = _source_index(perm, neg)
            c = np.zeros_like(t)
            for z in range(16):
                c |= ((t >> src[z]) & 1) << z
            for out in (0, 1):
                cand = c ^ FULL if out else c
                better = cand < best
                best = np.where(better, cand, best)
                best_idx = np.where(better, idx + out, best_idx)
            idx += 2
    return best.astype(np.uint16), best_idx


_TRANSFORMS = tuple(all_transforms())


def npn_canonicalize(t: int) -> tuple[int, NpnTransform]:
    if not 0 <= t <= FULL:
        raise ValueError(f"table {t} is not 16-bit")
    canon, idx = _tables()
    return int(canon[t]), _TRANSFORMS[int(idx[t])]


def canonical_classes() -> np.ndarray:
    """Sorted array of distinct canonical tables."""
    return np.unique(_tables()[0])


def depends_on(t: int, j: int) -> bool:
    shift = 1 << j
    v = VAR_TABLES[j]
    return ((t & v) >> shift) != (t & (FULL ^ v))


def support(t: int) -> list[int]:
    return [j for j in range(4) if depends_on(t, j)]
