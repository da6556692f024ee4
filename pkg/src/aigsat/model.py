"""Conditional probability model: two-pass DAG propagation with attention and GRU updates.

A circuit batch is the disjoint union of its circuits.  Nodes are updated
level by level: the forward layer walks from the PIs to the PO, the reverse
layer walks back from the PO.  Masked nodes are pinned to fixed polarity
prototypes (all ones / all minus ones) before and after each layer.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.func import functional_call, vmap

from .circuit import AigBuilder, AigCircuit, NodeKind, propagation_levels
from .sim import DatasetRecord

HIDDEN_DIM = 64
NUM_GATE_TYPES = 3


class NonFiniteLoss(RuntimeError):
    def __init__(self, batch_id: int, value: float):
        super().__init__(f"non-finite loss {value} in batch {batch_id}")
        self.batch_id = batch_id


class CheckpointError(ValueError):
    pass


# ---------------------------------------------------------------------------
# graph structure


@dataclass
class _Schedule:
    nodes: list[torch.Tensor]  # nodes updated at each level
    src: list[torch.Tensor]  # neighbour feeding each edge
    dst: list[torch.Tensor]  # position of the receiving node inside ``nodes[l]``


def _levels_schedule(num_nodes: int, rank: np.ndarray, edges_src: np.ndarray, edges_dst: np.ndarray) -> _Schedule:
    nodes, src, dst = [], [], []
    order = np.argsort(rank[edges_dst], kind="stable")
    es, ed = edges_src[order], edges_dst[order]
    er = rank[ed]
    for lv in range(1, int(rank.max(initial=0)) + 1):
        at = np.flatnonzero(rank == lv)
        pos = np.full(num_nodes, -1, dtype=np.int64)
        pos[at] = np.arange(len(at))
        lo, hi = np.searchsorted(er, lv), np.searchsorted(er, lv, side="right")
        nodes.append(torch.from_numpy(at))
        src.append(torch.from_numpy(es[lo:hi].copy()))
        dst.append(torch.from_numpy(pos[ed[lo:hi]]))
    return _Schedule(nodes, src, dst)


def _reverse_rank(c: AigCircuit) -> np.ndarray:
    rr = np.zeros(c.num_nodes, dtype=np.int64)
    for n in reversed(c.nodes):
        for u in n.fanins:
            rr[u] = max(rr[u], rr[n.id] + 1)
    return rr


def gate_one_hot(c: AigCircuit) -> np.ndarray:
    """One-hot over (PI, AND2, NOT); a constant node is encoded like a PI (it has no fan-in)."""
    f = np.zeros((c.num_nodes, NUM_GATE_TYPES), dtype=np.float32)
    col = {NodeKind.PI: 0, NodeKind.CONST0: 0, NodeKind.AND2: 1, NodeKind.NOT: 2}
    for n in c.nodes:
        f[n.id, col[n.kind]] = 1.0
    return f


@dataclass
class _CircuitArrays:
    num_nodes: int
    gate: np.ndarray
    src: np.ndarray  # fan-in edge u -> v as (src=u, dst=v)
    dst: np.ndarray
    rank: np.ndarray
    rrank: np.ndarray


def _arrays(c: AigCircuit) -> _CircuitArrays:
    src = np.array([u for n in c.nodes for u in n.fanins], dtype=np.int64)
    dst = np.array([n.id for n in c.nodes for _ in n.fanins], dtype=np.int64)
    return _CircuitArrays(c.num_nodes, gate_one_hot(c), src, dst, propagation_levels(c).astype(np.int64), _reverse_rank(c))


class GraphBatch:
    """Disjoint union of circuits with level schedules for both propagation directions."""

    def __init__(self, circuits: Sequence[AigCircuit], _cache: dict | None = None):
        arrs = []
        for c in circuits:
            a = None if _cache is None else _cache.get(id(c))
            if a is None:
                a = _arrays(c)
                if _cache is not None:
                    _cache[id(c)] = a
            arrs.append(a)
        offsets = np.cumsum([0] + [a.num_nodes for a in arrs])
        self.offsets = offsets
        self.num_nodes = int(offsets[-1])
        self.gate = torch.from_numpy(np.concatenate([a.gate for a in arrs])) if arrs else torch.zeros((0, 3))
        src = np.concatenate([a.src + o for a, o in zip(arrs, offsets)]) if arrs else np.zeros(0, np.int64)
        dst = np.concatenate([a.dst + o for a, o in zip(arrs, offsets)]) if arrs else np.zeros(0, np.int64)
        rank = np.concatenate([a.rank for a in arrs]) if arrs else np.zeros(0, np.int64)
        rrank = np.concatenate([a.rrank for a in arrs]) if arrs else np.zeros(0, np.int64)
        self.forward = _levels_schedule(self.num_nodes, rank, src, dst)
        # reverse direction: information flows from a node's fan-outs back into it
        self.reverse = _levels_schedule(self.num_nodes, rrank, dst, src)


# ---------------------------------------------------------------------------
# parameters


class PropLayer(nn.Module):
    """Additive attention over neighbours followed by a GRU update."""

    def __init__(self, d: int):
        super().__init__()
        bound = 1.0 / math.sqrt(d)
        self.w1 = nn.Parameter(torch.empty(d).uniform_(-bound, bound))
        self.w2 = nn.Parameter(torch.empty(d).uniform_(-bound, bound))
        self.gru = nn.GRUCell(d + NUM_GATE_TYPES, d)


class ModelParams(nn.Module):
    def __init__(self, hidden_dim: int = HIDDEN_DIM, seed: int = 0):
        super().__init__()
        self.hidden_dim = hidden_dim
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.fwd = PropLayer(hidden_dim)
            self.rev = PropLayer(hidden_dim)
            self.regressor = nn.Sequential(
                nn.Linear(hidden_dim, hidden_dim), nn.ReLU(),
                nn.Linear(hidden_dim, hidden_dim), nn.ReLU(),
                nn.Linear(hidden_dim, 1), nn.Sigmoid(),
            )

    def forward(self, g: "GraphBatch", mask: np.ndarray, h_init: torch.Tensor) -> torch.Tensor:
        return run_model(self, g, mask, h_init)


# ---------------------------------------------------------------------------
# propagation


def apply_mask(h: torch.Tensor, m) -> torch.Tensor:
    """Rows with mask 1 become all ones, rows with -1 all minus ones, others pass through."""
    m = torch.as_tensor(np.asarray(m), dtype=torch.int8, device=h.device).reshape(-1, 1)
    one = torch.ones((), dtype=h.dtype)
    return torch.where(m == 1, one, torch.where(m == -1, -one, h))


def _scatter_softmax(scores: torch.Tensor, group: torch.Tensor, num_groups: int) -> torch.Tensor:
    top = torch.full((num_groups,), -torch.inf, dtype=scores.dtype).scatter_reduce(0, group, scores, "amax")
    e = torch.exp(scores - top[group].detach())
    total = torch.zeros(num_groups, dtype=scores.dtype).index_add(0, group, e)
    return e / total[group]


def gru_update(cell: nn.GRUCell, x: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
    """The GRUCell equations written out (same parameters and gate order r, z, n)."""
    gi = x @ cell.weight_ih.T + cell.bias_ih
    gh = h @ cell.weight_hh.T + cell.bias_hh
    i_r, i_z, i_n = gi.chunk(3, dim=1)
    h_r, h_z, h_n = gh.chunk(3, dim=1)
    r = torch.sigmoid(i_r + h_r)
    z = torch.sigmoid(i_z + h_z)
    n = torch.tanh(i_n + r * h_n)
    return (1 - z) * n + z * h


def _propagate(g: GraphBatch, sched: _Schedule, h: torch.Tensor, layer: PropLayer, attention: list | None):
    for nodes, src, dst in zip(sched.nodes, sched.src, sched.dst):
        h_self = h[nodes]
        h_nb = h[src]
        scores = (h_self @ layer.w1)[dst] + h_nb @ layer.w2
        alpha = _scatter_softmax(scores, dst, len(nodes))
        if attention is not None:
            attention.append((nodes, dst, alpha.detach()))
        agg = torch.zeros_like(h_self).index_add(0, dst, alpha.unsqueeze(1) * h_nb)
        x = torch.cat([agg, g.gate[nodes].to(h.dtype)], dim=1)
        h = h.index_copy(0, nodes, gru_update(layer.gru, x, h_self))
    return h


def forward_prop(g: GraphBatch, h_init: torch.Tensor, layer: PropLayer, attention: list | None = None) -> torch.Tensor:
    """PIs to PO; nodes without predecessors keep their incoming state."""
    return _propagate(g, g.forward, h_init, layer, attention)


def reverse_prop(g: GraphBatch, h: torch.Tensor, layer: PropLayer, attention: list | None = None) -> torch.Tensor:
    """PO back to PIs over fan-out edges; nodes without fan-outs keep their state."""
    return _propagate(g, g.reverse, h, layer, attention)


def run_model(params: ModelParams, g: GraphBatch, mask: np.ndarray, h_init: torch.Tensor) -> torch.Tensor:
    """mask -> forward -> mask -> reverse -> mask -> regressor; raw per-node outputs."""
    h = apply_mask(h_init, mask)
    h = apply_mask(forward_prop(g, h, params.fwd), mask)
    h = apply_mask(reverse_prop(g, h, params.rev), mask)
    return params.regressor(h).squeeze(1)


def init_hidden(num_nodes: int, d: int, seed: int | torch.Generator, dtype=torch.float32) -> torch.Tensor:
    gen = seed if isinstance(seed, torch.Generator) else torch.Generator().manual_seed(int(seed))
    return torch.randn((num_nodes, d), generator=gen, dtype=dtype)


def _override(pred: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = pred.astype(np.float64)
    out[mask == 1] = 1.0
    out[mask == -1] = 0.0
    return out


@torch.no_grad()
def predict(c: AigCircuit, m, params: ModelParams, seed: int = 0) -> np.ndarray:
    """Per-node logic-1 probability under the mask; masked nodes report their mask value."""
    mask = np.asarray(m, dtype=np.int8)
    g = GraphBatch([c])
    dtype = next(params.parameters()).dtype
    h0 = init_hidden(c.num_nodes, params.hidden_dim, seed, dtype)
    return _override(run_model(params, g, mask, h0).numpy(), mask)


def loss(predictions, record: DatasetRecord) -> float:
    """Mean absolute error over the unmasked nodes of one record."""
    free = np.asarray(record.mask) == 0
    if not free.any():
        raise ValueError("every node is masked; the loss is undefined")
    p = np.asarray(predictions, dtype=np.float64)
    return float(np.mean(np.abs(p[free] - record.theta.theta_hat[free])))


def _batch_loss(pred: torch.Tensor, target: torch.Tensor, free: torch.Tensor) -> torch.Tensor:
    return (pred - target).abs()[free].mean()


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-4
    weight_decay: float = 1e-10
    seed: int = 0
    hidden_dim: int = HIDDEN_DIM
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")


class _Batch:
    def __init__(self, records: Sequence[DatasetRecord], cache: dict):
        self.graph = GraphBatch([r.circuit for r in records], cache)
        self.mask = np.concatenate([r.mask for r in records]).astype(np.int8)
        self.target = torch.from_numpy(np.concatenate([r.theta.theta_hat for r in records]).astype(np.float32))
        self.free = torch.from_numpy(self.mask == 0)
        self.num_free = int(self.free.sum())


def _batches(records, batch_size, order, cache):
    for i in range(0, len(order), batch_size):
        chosen = [records[j] for j in order[i : i + batch_size]]
        b = _Batch(chosen, cache)
        if b.num_free:
            yield b


@torch.no_grad()
def prediction_error(params: ModelParams, records: Sequence[DatasetRecord], seed: int = 0, batch_size: int = 64) -> float:
    """Mean absolute error over all unmasked nodes of ``records``."""
    total, count = 0.0, 0
    gen = torch.Generator().manual_seed(seed)
    for b in _batches(records, batch_size, np.arange(len(records)), {}):
        h0 = init_hidden(b.graph.num_nodes, params.hidden_dim, gen)
        pred = run_model(params, b.graph, b.mask, h0)
        total += float((pred - b.target).abs()[b.free].sum())
        count += b.num_free
    return total / max(count, 1)


def split_records(records: Sequence[DatasetRecord], val_fraction: float, seed: int):
    """Split by circuit so no held-out circuit is seen in training."""
    groups: dict[int, list[int]] = {}
    for i, r in enumerate(records):
        groups.setdefault(id(r.circuit), []).append(i)
    keys = list(groups)
    rng = np.random.default_rng(seed)
    rng.shuffle(keys)
    n_val = int(round(len(keys) * val_fraction))
    val = [records[i] for k in keys[:n_val] for i in groups[k]]
    train = [records[i] for k in keys[n_val:] for i in groups[k]]
    return train, val


def train(
    dataset: Sequence[DatasetRecord],
    cfg: TrainConfig = TrainConfig(),
    val: Sequence[DatasetRecord] | None = None,
    log_path=None,
    params: ModelParams | None = None,
) -> tuple[ModelParams, list[dict]]:
    """Adam on the L1 loss; returns the parameters and one row per epoch.

    Each row holds the mean training PE, the held-out PE and wall time.
    Without an explicit ``val`` split a ``cfg.val_fraction`` share of the
    circuits is held out.
    """
    if val is None:
        train_set, val = split_records(dataset, cfg.val_fraction, cfg.seed)
    else:
        train_set = list(dataset)
    if not train_set:
        raise ValueError("empty training set")
    params = params or ModelParams(cfg.hidden_dim, cfg.seed)
    opt = torch.optim.Adam(params.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)
    gen = torch.Generator().manual_seed(cfg.seed)
    cache: dict = {}
    curve = []
    writer = None
    if log_path is not None:
        fh = open(log_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_pe", "val_pe", "wall_s"])
    start = time.perf_counter()
    batch_id = 0
    try:
        for epoch in range(1, cfg.epochs + 1):
            params.train()
            err_sum, err_n = 0.0, 0
            for b in _batches(train_set, cfg.batch_size, rng.permutation(len(train_set)), cache):
                h0 = init_hidden(b.graph.num_nodes, params.hidden_dim, gen)
                pred = run_model(params, b.graph, b.mask, h0)
                value = _batch_loss(pred, b.target, b.free)
                if not torch.isfinite(value):
                    raise NonFiniteLoss(batch_id, value.item())
                opt.zero_grad()
                value.backward()
                opt.step()
                err_sum += value.item() * b.num_free
                err_n += b.num_free
                batch_id += 1
            params.eval()
            row = {
                "epoch": epoch,
                "train_pe": err_sum / max(err_n, 1),
                "val_pe": prediction_error(params, val, cfg.seed) if val else float("nan"),
                "wall_s": time.perf_counter() - start,
            }
            curve.append(row)
            if writer:
                writer.writerow([row["epoch"], f"{row['train_pe']:.6f}", f"{row['val_pe']:.6f}", f"{row['wall_s']:.2f}"])
                fh.flush()
    finally:
        if writer:
            fh.close()
    return params, curve


# ---------------------------------------------------------------------------
# gradient verification


@dataclass
class GradCheckReport:
    max_deviation: float
    per_parameter: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= 1e-3


def _relative(a: np.ndarray, b: np.ndarray, floor: float = 1e-10) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if max(na, nb) < floor:
        return 0.0
    return float(np.linalg.norm(a - b) / max(na, nb))


def gradcheck_circuit() -> AigCircuit:
    """Six nodes with every gate type, two-input attention in both directions."""
    b = AigBuilder(2)
    x0, x1 = b.pi(0), b.pi(1)
    n = b.not_(b.and_(x0, x1))
    return b.build(b.not_(b.and_(n, x1)))


def grad_check(
    params: ModelParams,
    circuit: AigCircuit,
    eps: float = 1e-4,
    seed: int = 0,
    mask=None,
    corrupt: str | None = None,
    chunk: int = 512,
) -> GradCheckReport:
    """Compare autograd gradients of the L1 loss with central differences, in float64.

    Every scalar of every parameter tensor is perturbed; perturbations are
    evaluated ``chunk`` at a time with ``vmap``.  Targets are random
    0/1 labels so the loss stays smooth (sigmoid outputs never reach 0 or 1).
    The deviation per tensor is ||g_auto - g_fd|| / max(||g_auto||, ||g_fd||);
    tensors whose gradients both vanish count as agreeing.  ``corrupt`` names
    a parameter whose analytic gradient is deliberately scaled, as a control.
    """
    model = ModelParams(params.hidden_dim)
    model.load_state_dict(params.state_dict())
    model = model.double()
    g = GraphBatch([circuit])
    m = np.zeros(circuit.num_nodes, np.int8) if mask is None else np.asarray(mask, np.int8)
    if mask is None:
        m[circuit.po] = 1
    rng = np.random.default_rng(seed)
    target = torch.from_numpy(rng.integers(0, 2, circuit.num_nodes).astype(np.float64))
    free = torch.from_numpy(m == 0)
    if not bool(free.any()):
        raise ValueError("every node is masked; nothing to check")
    h0 = init_hidden(circuit.num_nodes, model.hidden_dim, seed, torch.float64)

    base = {k: v.detach().clone() for k, v in model.named_parameters()}

    def objective(overrides: dict) -> torch.Tensor:
        return _batch_loss(functional_call(model, {**base, **overrides}, (g, m, h0)), target, free)

    model.zero_grad()
    _batch_loss(model(g, m, h0), target, free).backward()
    report = GradCheckReport(0.0)
    with torch.no_grad():
        for name, p in model.named_parameters():
            auto = np.zeros(p.numel()) if p.grad is None else p.grad.detach().numpy().ravel().copy()
            if corrupt == name:
                auto = auto * 1.5 + 1e-3
            centre = base[name]
            n = centre.numel()

            def shifted(delta, name=name, centre=centre):
                return objective({name: centre + delta.view_as(centre)})

            fd = []
            for lo in range(0, n, chunk):
                idx = torch.arange(lo, min(n, lo + chunk))
                delta = torch.zeros((len(idx), n), dtype=torch.float64)
                delta[torch.arange(len(idx)), idx] = eps
                fd.append((vmap(shifted)(delta) - vmap(shifted)(-delta)) / (2 * eps))
            report.per_parameter[name] = _relative(auto, torch.cat(fd).numpy())
    report.max_deviation = max(report.per_parameter.values())
    return report


# ---------------------------------------------------------------------------
# checkpoints

_MAGIC = b"AIGSAT-CKPT\n"
_VERSION = 1


def save_checkpoint(params: ModelParams, path) -> None:
    """Header line (JSON: version, dims, tensor shapes, sha256) followed by raw float32 data."""
    blob = io.BytesIO()
    layout = []
    for name, t in params.state_dict().items():
        arr = t.detach().cpu().numpy().astype("<f4")
        layout.append({"name": name, "shape": list(arr.shape)})
        blob.write(arr.tobytes())
    data = blob.getvalue()
    header = {
        "version": _VERSION,
        "hidden_dim": params.hidden_dim,
        "tensors": layout,
        "bytes": len(data),
        "sha256": hashlib.sha256(data).hexdigest(),
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(data)


def load_checkpoint(path, hidden_dim: int | None = None) -> ModelParams:
    raw = Path(path).read_bytes()
    if not raw.startswith(_MAGIC):
        raise CheckpointError("not a model checkpoint")
    end = raw.find(b"\n", len(_MAGIC))
    if end < 0:
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(raw[len(_MAGIC) : end])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    if header.get("version") != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")
    d = int(header["hidden_dim"])
    if hidden_dim is not None and d != hidden_dim:
        raise CheckpointError(f"checkpoint hidden dimension {d} does not match the configured {hidden_dim}")
    data = raw[end + 1 :]
    if len(data) != header["bytes"]:
        raise CheckpointError(f"checkpoint data is {len(data)} bytes, expected {header['bytes']}")
    if hashlib.sha256(data).hexdigest() != header["sha256"]:
        raise CheckpointError("checkpoint checksum mismatch")
    params = ModelParams(d)
    expected = params.state_dict()
    state, offset = {}, 0
    for entry in header["tensors"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if name not in expected or tuple(expected[name].shape) != shape:
            raise CheckpointError(f"tensor {name} with shape {shape} does not fit a d={d} model")
        n = int(np.prod(shape)) * 4
        state[name] = torch.from_numpy(np.frombuffer(data[offset : offset + n], dtype="<f4").reshape(shape).copy())
        offset += n
    if set(state) != set(expected):
        raise CheckpointError("checkpoint is missing tensors")
    params.load_state_dict(state)
    return params
