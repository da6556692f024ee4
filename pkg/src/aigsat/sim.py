"""Bit-parallel logic simulation and (conditional) logic-1 probability estimation.

Patterns are packed 64 per ``uint64`` word: pattern ``p`` lives in bit
``p % 64`` of word ``p // 64``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .circuit import AigCircuit, NodeKind, parse_aiger, propagation_levels

ALL_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)
MAX_EXACT_PIS = 26


class SimulationError(RuntimeError):
    pass


class InsufficientSamples(SimulationError):
    def __init__(self, accepted: int, required: int):
        super().__init__(f"only {accepted} patterns satisfied the condition; {required} required")
        self.accepted = accepted
        self.required = required


class UnsatisfiableCondition(SimulationError):
    pass


@dataclass(frozen=True)
class SimConfig:
    num_patterns: int = 15000
    seed: int = 0
    min_accepted: int = 100

    def __post_init__(self):
        if not self.num_patterns >= self.min_accepted >= 1:
            raise ValueError("need num_patterns >= min_accepted >= 1")


@dataclass
class SimProfile:
    theta_hat: np.ndarray
    accepted_samples: int


@dataclass
class DatasetRecord:
    circuit: AigCircuit
    mask: np.ndarray
    theta: SimProfile
    circuit_ref: str | None = None

    def __post_init__(self):
        if len(self.mask) != self.circuit.num_nodes or len(self.theta.theta_hat) != self.circuit.num_nodes:
            raise ValueError("mask and theta must have one entry per node")


# ---------------------------------------------------------------------------
# simulation core


class _Plan:
    """Level-grouped gate indices so each level is one vectorized step."""

    def __init__(self, c: AigCircuit):
        rank = propagation_levels(c)
        kinds = c.kinds
        f0 = np.array([n.fanins[0] if n.fanins else 0 for n in c.nodes], dtype=np.int64)
        f1 = np.array([n.fanins[1] if len(n.fanins) > 1 else 0 for n in c.nodes], dtype=np.int64)
        self.steps = []
        for lv in range(1, int(rank.max(initial=0)) + 1):
            at = np.flatnonzero(rank == lv)
            ands = at[kinds[at] == NodeKind.AND2]
            nots = at[kinds[at] == NodeKind.NOT]
            self.steps.append((ands, f0[ands], f1[ands], nots, f0[nots]))
        self.consts = np.flatnonzero(kinds == NodeKind.CONST0)


_plans: dict[int, tuple[AigCircuit, _Plan]] = {}


def _plan(c: AigCircuit) -> _Plan:
    hit = _plans.get(id(c))
    if hit is not None and hit[0] is c:
        return hit[1]
    p = _Plan(c)
    if len(_plans) > 4096:
        _plans.clear()
    _plans[id(c)] = (c, p)
    return p


def simulate_block(c: AigCircuit, pattern_words: np.ndarray) -> np.ndarray:
    """Per-node pattern words given one row of words per PI."""
    words = np.asarray(pattern_words, dtype=np.uint64)
    if words.ndim != 2 or words.shape[0] != c.num_pis:
        raise ValueError(f"expected ({c.num_pis}, W) pattern words, got {words.shape}")
    vals = np.zeros((c.num_nodes, words.shape[1]), dtype=np.uint64)
    vals[: c.num_pis] = words
    plan = _plan(c)
    vals[plan.consts] = 0
    for ands, a0, a1, nots, n0 in plan.steps:
        if len(ands):
            vals[ands] = vals[a0] & vals[a1]
        if len(nots):
            vals[nots] = ~vals[n0]
    return vals


def _lane_mask(num_patterns: int) -> np.ndarray:
    w = (num_patterns + 63) // 64
    m = np.full(w, ALL_ONES, dtype=np.uint64)
    rem = num_patterns % 64
    if rem:
        m[-1] = np.uint64((1 << rem) - 1)
    return m


def _popcount(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


def validate_mask(c: AigCircuit, mask) -> np.ndarray:
    m = np.asarray(mask, dtype=np.int8)
    if m.shape != (c.num_nodes,):
        raise ValueError(f"mask has shape {m.shape}; circuit has {c.num_nodes} nodes")
    if not np.isin(m, (-1, 0, 1)).all():
        raise ValueError("mask entries must be in {-1, 0, 1}")
    gates = np.arange(c.num_nodes) >= c.num_pis
    gate_entries = m[gates]
    po_is_gate = c.po >= c.num_pis
    if po_is_gate:
        if m[c.po] == -1:
            raise ValueError("the PO may only be conditioned to 1")
        gate_entries = np.delete(m[c.num_pis:], c.po - c.num_pis)
    if np.any(gate_entries != 0):
        raise ValueError("only PIs and the PO may be masked")
    return m


def po_mask(c: AigCircuit) -> np.ndarray:
    m = np.zeros(c.num_nodes, dtype=np.int8)
    m[c.po] = 1
    return m


def sim_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by a seed and stream indices."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *stream])))


def _random_words(rng: np.random.Generator, num_pis: int, num_patterns: int) -> np.ndarray:
    w = (num_patterns + 63) // 64
    return rng.bit_generator.random_raw((num_pis, w)).astype(np.uint64)


def _run_masked(c: AigCircuit, m: np.ndarray, words: np.ndarray, lanes: np.ndarray):
    """Force masked PIs, simulate, and return (node words, accepted-lane words)."""
    for i in np.flatnonzero(m[: c.num_pis]):
        words[i] = ALL_ONES if m[i] == 1 else np.uint64(0)
    vals = simulate_block(c, words)
    accept = lanes.copy()
    if m[c.po] == 1:
        accept &= vals[c.po]
    return vals, accept


def _profile(vals: np.ndarray, accept: np.ndarray, min_accepted: int) -> SimProfile:
    accepted = int(_popcount(accept))
    if accepted < min_accepted:
        raise InsufficientSamples(accepted, min_accepted)
    ones = _popcount(vals & accept)
    return SimProfile(ones / accepted, accepted)


def estimate_probabilities(c: AigCircuit, cfg: SimConfig = SimConfig(), rng: np.random.Generator | None = None) -> SimProfile:
    """Fraction of uniform random patterns under which each node is 1."""
    return conditional_estimate(c, np.zeros(c.num_nodes, dtype=np.int8), cfg, rng)


def conditional_estimate(
    c: AigCircuit, mask, cfg: SimConfig = SimConfig(), rng: np.random.Generator | None = None
) -> SimProfile:
    """Logic-1 frequencies over the random patterns that meet the mask.

    Masked PIs are forced to their values; a PO mask of 1 rejects every
    pattern under which the PO evaluates to 0.
    """
    m = validate_mask(c, mask)
    rng = sim_rng(cfg.seed) if rng is None else rng
    words = _random_words(rng, c.num_pis, cfg.num_patterns)
    vals, accept = _run_masked(c, m, words, _lane_mask(cfg.num_patterns))
    return _profile(vals, accept, cfg.min_accepted)


def _exhaustive_words(num_free: int, start_word: int, num_words: int) -> np.ndarray:
    """Words enumerating assignments of ``num_free`` variables, pattern index = assignment."""
    base = np.array(
        [0xAAAAAAAAAAAAAAAA, 0xCCCCCCCCCCCCCCCC, 0xF0F0F0F0F0F0F0F0,
         0xFF00FF00FF00FF00, 0xFFFF0000FFFF0000, 0xFFFFFFFF00000000],
        dtype=np.uint64,
    )
    idx = np.arange(start_word, start_word + num_words, dtype=np.uint64)
    out = np.empty((num_free, num_words), dtype=np.uint64)
    for j in range(num_free):
        if j < 6:
            out[j] = base[j]
        else:
            bit = (idx >> np.uint64(j - 6)) & np.uint64(1)
            out[j] = np.where(bit == 1, ALL_ONES, np.uint64(0))
    return out


def exact_profile(c: AigCircuit, mask=None, chunk_words: int = 1 << 12) -> SimProfile:
    """Exact conditional logic-1 probabilities by enumerating every free-PI assignment."""
    m = np.zeros(c.num_nodes, dtype=np.int8) if mask is None else validate_mask(c, mask)
    free = [i for i in range(c.num_pis) if m[i] == 0]
    if len(free) > MAX_EXACT_PIS:
        raise ValueError(f"{len(free)} free PIs exceed the enumeration budget of {MAX_EXACT_PIS}")
    total = 1 << len(free)
    num_words = (total + 63) // 64
    ones = np.zeros(c.num_nodes, dtype=np.int64)
    accepted = 0
    for start in range(0, num_words, chunk_words):
        nw = min(chunk_words, num_words - start)
        words = np.zeros((c.num_pis, nw), dtype=np.uint64)
        if free:
            words[free] = _exhaustive_words(len(free), start, nw)
        lanes = np.full(nw, ALL_ONES, dtype=np.uint64)
        if total < 64:
            lanes[0] = np.uint64((1 << total) - 1)
        vals, accept = _run_masked(c, m, words, lanes)
        accepted += int(_popcount(accept))
        ones += _popcount(vals & accept)
    if accepted == 0:
        raise UnsatisfiableCondition("no assignment satisfies the condition")
    return SimProfile(ones / accepted, accepted)


# ---------------------------------------------------------------------------
# studies and datasets


def simulation_error_study(
    circuits: Sequence[AigCircuit],
    sample_counts: Sequence[int] = (100, 1000, 10000, 100000),
    seed: int = 0,
    reference_loss: float = 0.04,
) -> list[dict]:
    """Mean |estimate - exact| per sample count, unconditioned, averaged over circuits."""
    exact = [exact_profile(c).theta_hat for c in circuits]
    rows = []
    for n in sample_counts:
        diffs = []
        for i, (c, th) in enumerate(zip(circuits, exact)):
            est = estimate_probabilities(c, SimConfig(num_patterns=n, seed=seed, min_accepted=1), sim_rng(seed, i, n))
            diffs.append(float(np.mean(np.abs(est.theta_hat - th))))
        d = float(np.mean(diffs))
        rows.append({"samples": n, "difference": d, "error_rate": d / reference_loss})
    return rows


@dataclass
class DatasetStats:
    circuits: int = 0
    records: int = 0
    dropped: int = 0


def build_dataset(
    circuits: Sequence[AigCircuit],
    extra_masks: int = 0,
    cfg: SimConfig = SimConfig(),
    circuit_refs: Sequence[str] | None = None,
    circuit_ids: Sequence[int] | None = None,
) -> tuple[list[DatasetRecord], DatasetStats]:
    """Supervision records: a PO-only condition plus ``extra_masks`` PI-conditioned ones.

    Extra conditions fix k ~ U{1..I-1} random PIs to the values of a random
    accepted pattern, so each is satisfiable by construction.  Records with
    fewer than ``cfg.min_accepted`` accepted patterns are dropped; a rare but
    satisfiable PO condition still seeds the PI-conditioned records.
    """
    records: list[DatasetRecord] = []
    stats = DatasetStats()
    for idx, c in enumerate(circuits):
        cid = idx if circuit_ids is None else circuit_ids[idx]
        ref = None if circuit_refs is None else circuit_refs[idx]
        stats.circuits += 1
        base = po_mask(c)
        rng = sim_rng(cfg.seed, cid, 0)
        words = _random_words(rng, c.num_pis, cfg.num_patterns)
        vals, accept = _run_masked(c, base, words, _lane_mask(cfg.num_patterns))
        try:
            records.append(DatasetRecord(c, base, _profile(vals, accept, cfg.min_accepted), ref))
        except InsufficientSamples:
            stats.dropped += 1
        lanes = np.flatnonzero(np.unpackbits(accept.view(np.uint8), bitorder="little"))
        if len(lanes) == 0:
            continue
        for r in range(1, extra_masks + 1):
            if c.num_pis < 2:
                break
            rng_r = sim_rng(cfg.seed, cid, r)
            k = int(rng_r.integers(1, c.num_pis))
            pis = rng_r.choice(c.num_pis, size=k, replace=False)
            lane = int(lanes[rng_r.integers(len(lanes))])
            w, b = divmod(lane, 64)
            m = base.copy()
            for i in pis:
                m[i] = 1 if (int(vals[i, w]) >> b) & 1 else -1
            try:
                prof = conditional_estimate(c, m, cfg, rng_r)
            except InsufficientSamples:
                stats.dropped += 1
                continue
            records.append(DatasetRecord(c, m, prof, ref))
    stats.records = len(records)
    return records, stats


def write_dataset(records: Sequence[DatasetRecord], path, cfg: SimConfig | None = None, stats: DatasetStats | None = None) -> None:
    """JSON lines: circuit reference, signed-integer mask, theta with 6 decimals."""
    path = Path(path)
    with open(path, "w") as fh:
        for rec in records:
            theta = ", ".join(f"{x:.6f}" for x in rec.theta.theta_hat)
            mask = json.dumps([int(x) for x in rec.mask])
            fh.write(
                f'{{"circuit": {json.dumps(rec.circuit_ref)}, "mask": {mask}, '
                f'"accepted": {rec.theta.accepted_samples}, "theta": [{theta}]}}\n'
            )
    manifest = {
        "records": len(records),
        "config": asdict(cfg) if cfg else None,
        "stats": asdict(stats) if stats else None,
    }
    path.with_suffix(".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_dataset(path, base_dir=None) -> list[DatasetRecord]:
    path = Path(path)
    base = Path(base_dir) if base_dir is not None else path.parent
    cache: dict[str, AigCircuit] = {}
    out = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        ref = row["circuit"]
        if ref not in cache:
            cache[ref] = parse_aiger((base / ref).read_text())
        c = cache[ref]
        out.append(DatasetRecord(
            c, np.array(row["mask"], dtype=np.int8),
            SimProfile(np.array(row["theta"], dtype=np.float64), row.get("accepted", 0)), ref,
        ))
    return out
