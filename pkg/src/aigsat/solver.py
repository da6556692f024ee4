"""Solution sampling by iterative most-confident PI assignment, with flipping rounds."""

from __future__ import annotations

import csv
import json
import time
import zlib
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol, Sequence

import numpy as np

from .circuit import AigCircuit, evaluate
from .sim import UnsatisfiableCondition, exact_profile


class Status(str, Enum):
    SATISFIED = "Satisfied"
    UNKNOWN = "Unknown"


class Predictor(Protocol):
    def __call__(self, c: AigCircuit, mask: np.ndarray) -> np.ndarray:
        """Per-node logic-1 probabilities in [0, 1] under the mask."""


class OraclePredictor:
    """Exact conditional probabilities by enumeration (small circuits only)."""

    def __call__(self, c, mask):
        return exact_profile(c, mask).theta_hat


class RandomPredictor:
    """Uniform noise; a pure function of (seed, circuit size, mask)."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def __call__(self, c, mask):
        m = np.asarray(mask, dtype=np.int8)
        rng = np.random.default_rng([self.seed, c.num_nodes, zlib.crc32(m.tobytes())])
        out = rng.random(c.num_nodes)
        out[m == 1] = 1.0
        out[m == -1] = 0.0
        return out


class ModelPredictor:
    def __init__(self, params, seed: int = 0):
        self.params = params
        self.seed = seed

    def __call__(self, c, mask):
        from .model import predict

        return predict(c, mask, self.params, self.seed)


@dataclass
class SolveResult:
    status: Status
    assignment: list[int] | None
    rounds_used: int
    predictor_calls: int

    @property
    def solved(self) -> bool:
        return self.status is Status.SATISFIED


def verify(c: AigCircuit, a: Sequence[int]) -> bool:
    return bool(evaluate(c, a)[c.po])


def _condition(c: AigCircuit, agn: np.ndarray) -> np.ndarray:
    mask = np.zeros(c.num_nodes, dtype=np.int8)
    mask[: c.num_pis] = agn
    if c.po >= c.num_pis or agn[c.po] == 0:
        mask[c.po] = 1
    return mask


def iterative_solve(
    c: AigCircuit, predictor: Predictor, pre_assignment: Sequence[int] | None = None, most_certain: bool = True
) -> tuple[list[int], list[int], int]:
    """Fix one PI per predictor query until every PI is determined.

    Returns (0/1 assignment, decision order, predictor calls).  The chosen PI
    is the undetermined one whose prediction is furthest from 0.5 (closest,
    when ``most_certain`` is False); ties go to the lowest PI index, and a
    prediction of exactly 0.5 assigns 1.
    """
    agn = np.zeros(c.num_pis, dtype=np.int8) if pre_assignment is None else np.array(pre_assignment, dtype=np.int8)
    if agn.shape != (c.num_pis,) or not np.isin(agn, (-1, 0, 1)).all():
        raise ValueError("pre_assignment needs one entry in {-1, 0, 1} per PI")
    order: list[int] = []
    calls = 0
    while True:
        open_pis = np.flatnonzero(agn == 0)
        if len(open_pis) == 0:
            break
        theta = np.asarray(predictor(c, _condition(c, agn)), dtype=np.float64)[: c.num_pis]
        calls += 1
        conf = np.abs(theta[open_pis] - 0.5)
        pick = int(open_pis[np.argmax(conf) if most_certain else np.argmin(conf)])
        agn[pick] = -1 if theta[pick] < 0.5 else 1
        order.append(pick)
    return [int(v == 1) for v in agn], order, calls


def solve_with_flipping(c: AigCircuit, predictor: Predictor) -> SolveResult:
    """Initial sample, then for r = 1..I keep the first r-1 decisions, flip the r-th and resample."""
    calls = 0
    try:
        first, order, n = iterative_solve(c, predictor)
    except UnsatisfiableCondition:
        return SolveResult(Status.UNKNOWN, None, 1, 1)
    calls += n
    if verify(c, first):
        return SolveResult(Status.SATISFIED, first, 1, calls)
    rounds = 1
    signed = [1 if v else -1 for v in first]
    for r in range(len(order)):
        rounds += 1
        pre = np.zeros(c.num_pis, dtype=np.int8)
        for j in order[:r]:
            pre[j] = signed[j]
        pre[order[r]] = -signed[order[r]]
        try:
            a, _, n = iterative_solve(c, predictor, pre)
        except UnsatisfiableCondition:
            calls += 1
            continue
        calls += n
        if verify(c, a):
            return SolveResult(Status.SATISFIED, a, rounds, calls)
    return SolveResult(Status.UNKNOWN, None, rounds, calls)


def baseline_schemes(c: AigCircuit, predictor: Predictor) -> dict[str, list[int]]:
    """Assignments of three simplified samplers (no flipping)."""
    mask = _condition(c, np.zeros(c.num_pis, dtype=np.int8))
    theta = np.asarray(predictor(c, mask), dtype=np.float64)[: c.num_pis]
    return {
        "one_shot": [int(t >= 0.5) for t in theta],
        "most_uncertain": iterative_solve(c, predictor, most_certain=False)[0],
        "most_certain": iterative_solve(c, predictor)[0],
    }


# ---------------------------------------------------------------------------
# evaluation harness


@dataclass
class SuiteReport:
    total: int
    solved: int
    mean_rounds: float
    histogram: dict = field(default_factory=dict)
    results: list[dict] = field(default_factory=list)

    @property
    def problems_solved(self) -> float:
        return self.solved / self.total if self.total else 0.0

    def metrics(self) -> dict:
        return {
            "total": self.total,
            "solved": self.solved,
            "problems_solved": self.problems_solved,
            "mean_rounds": self.mean_rounds,
            "histogram": self.histogram,
        }


def _solve_one(item, predictor):
    name, c = item
    t = time.perf_counter()
    res = solve_with_flipping(c, predictor)
    if res.solved and not verify(c, res.assignment):
        raise AssertionError(f"{name}: unverified assignment reported as satisfied")
    return {
        "instance": name,
        "status": res.status.value,
        "assignment": res.assignment,
        "rounds": res.rounds_used,
        "predictor_calls": res.predictor_calls,
        "wall_ms": round((time.perf_counter() - t) * 1000, 3),
    }


def evaluate_suite(instances: Sequence[tuple[str, AigCircuit]], predictor: Predictor, jobs: int = 1) -> SuiteReport:
    """Solve every instance; the histogram counts solved instances by rounds used."""
    items = list(instances)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            rows = list(pool.map(lambda it: _solve_one(it, predictor), items))
    else:
        rows = [_solve_one(it, predictor) for it in items]
    solved = [r for r in rows if r["status"] == Status.SATISFIED.value]
    hist = Counter(r["rounds"] for r in solved)
    hist_out = {str(k): hist[k] for k in sorted(hist)}
    hist_out["unsolved"] = len(rows) - len(solved)
    mean = float(np.mean([r["rounds"] for r in solved])) if solved else float("nan")
    return SuiteReport(len(rows), len(solved), mean, hist_out, rows)


def evaluate_baselines(instances: Sequence[tuple[str, AigCircuit]], predictor: Predictor) -> dict[str, float]:
    """Fraction of instances each baseline sampler solves (assignments are verified)."""
    wins = Counter()
    for _, c in instances:
        try:
            assignments = baseline_schemes(c, predictor)
        except UnsatisfiableCondition:
            continue
        for scheme, a in assignments.items():
            wins[scheme] += verify(c, a)
    n = max(len(instances), 1)
    return {s: wins[s] / n for s in ("one_shot", "most_uncertain", "most_certain")}


def write_results(report: SuiteReport, jsonl_path, csv_path=None) -> None:
    with open(jsonl_path, "w") as fh:
        for row in report.results:
            fh.write(json.dumps(row) + "\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["total", "solved", "problems_solved", "mean_rounds", "histogram"])
            w.writerow([report.total, report.solved, f"{report.problems_solved:.4f}",
                        f"{report.mean_rounds:.4f}", json.dumps(report.histogram)])
