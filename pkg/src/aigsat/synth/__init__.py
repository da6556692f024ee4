"""Logic synthesis: structural hashing, cut rewriting and balancing."""

from __future__ import annotations

from ..circuit import AigCircuit, circuit_stats
from .balance import balance_pass
from .cuts import Cut, cut_function, enumerate_cuts, mffc
from .library import RewriteLibrary, Template, build_rewrite_library, default_library
from .net import Net
from .npn import NpnTransform, apply_transform, npn_canonicalize
from .rewrite import rewrite_pass

__all__ = [
    "Cut",
    "NpnTransform",
    "RewriteLibrary",
    "Template",
    "apply_transform",
    "balance_pass",
    "build_rewrite_library",
    "cut_function",
    "default_library",
    "enumerate_cuts",
    "mffc",
    "npn_canonicalize",
    "optimize",
    "rewrite_pass",
    "strash",
]

PIPELINE_ROUNDS = 3


def strash(c: AigCircuit) -> AigCircuit:
    return Net.from_circuit(c).to_circuit()


def optimize(
    c: AigCircuit, library: RewriteLibrary | None = None, rounds: int = PIPELINE_ROUNDS
) -> tuple[AigCircuit, dict]:
    """Run ``rw; b`` ``rounds`` times and report node count, depth and BR before and after."""
    before = circuit_stats(c)
    out = c
    for _ in range(rounds):
        out, _ = rewrite_pass(out, library)
        out = balance_pass(out)
    return out, {"before": before, "after": circuit_stats(out)}
