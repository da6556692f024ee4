"""Write generated instances to disk as DIMACS files plus a JSON-lines manifest."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..circuit import write_dimacs
from .dpll import is_satisfiable
from .graphs import ENCODERS, gen_graph
from .sr import gen_sr

KINDS = ("sr",) + tuple(ENCODERS)


def instance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _tag(f) -> str:
    return "SAT" if is_satisfiable(f) else "UNSAT"


def build_benchmark(
    kind: str,
    count: int,
    seed: int,
    out_dir,
    n_range: tuple[int, int] = (3, 10),
    edge_prob: float = 0.37,
    k_range: tuple[int, int] | None = None,
) -> list[dict]:
    """Generate ``count`` SR pairs (``kind="sr"``) or graph instances.

    Every tag in the manifest is decided by the DPLL oracle; for SR pairs the
    tags are additionally checked against the construction.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown benchmark kind {kind!r}; expected one of {KINDS}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows: list[dict] = []
    for i in range(count):
        rng = instance_rng(seed, i)
        if kind == "sr":
            n = int(rng.integers(n_range[0], n_range[1] + 1))
            pair = gen_sr(n, rng)
            for label, f in (("sat", pair.sat_instance), ("unsat", pair.unsat_instance)):
                tag = _tag(f)
                if tag != label.upper():
                    raise AssertionError(f"pair {i}: {label} instance verified as {tag}")
                name = f"sr{n}_{i:06d}_{label}.cnf"
                (out / name).write_text(write_dimacs(f, [f"SR({n}) pair {i} seed {seed}"]))
                rows.append({"file": name, "kind": kind, "index": i, "n": n, "tag": tag, "seed": seed})
        else:
            encode, _, default_k = ENCODERS[kind]
            lo, hi = k_range or default_k
            g = gen_graph((n_range[0], n_range[1]), edge_prob, rng)
            k = int(rng.integers(lo, hi + 1))
            f = encode(g, k)
            name = f"{kind}{g.num_vertices}_k{k}_{i:06d}.cnf"
            (out / name).write_text(write_dimacs(f, [f"{kind} k={k} graph {i} seed {seed}"]))
            rows.append({
                "file": name, "kind": kind, "index": i, "n": g.num_vertices, "k": k,
                "edges": sorted(list(e) for e in g.edges), "tag": _tag(f), "seed": seed,
            })
    with open(out / "manifest.jsonl", "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return rows
