"""Command-line front end: ``aigsat <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error (unparsable or missing
input, failed check, incompatible checkpoint).
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import AigCircuit, CircuitError, ParseError, circuit_stats, cnf_to_aig, parse_aiger, parse_dimacs, write_aiger

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
RUN_ROOT_ENV = "AIGSAT_RUN_ROOT"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# helpers


def _read(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such file: {p}")
    return p.read_text()


def load_circuit(path) -> AigCircuit:
    """An ``.aag`` file, or a DIMACS ``.cnf`` converted on the fly."""
    text = _read(path)
    if str(path).endswith(".cnf"):
        return cnf_to_aig(parse_dimacs(text))
    return parse_aiger(text)


def _expand(inputs, suffixes) -> list[Path]:
    out = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            out += sorted(q for q in p.iterdir() if q.suffix in suffixes)
        elif p.is_file():
            out.append(p)
        else:
            raise DataError(f"no such file or directory: {p}")
    return out


def _pmap(fn, items, jobs: int):
    """Ordered map, across processes when ``jobs > 1``."""
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [fn(x) for x in items]


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_manifest(args, extra: dict | None = None) -> Path:
    """Record the resolved configuration of this run in ``<run dir>/manifest.json``."""
    run_dir = Path(args.run_dir) if args.run_dir else Path(os.environ.get(RUN_ROOT_ENV, "aigsat-runs")) / args.command
    run_dir.mkdir(parents=True, exist_ok=True)
    resolved = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    manifest = {
        "command": args.command,
        "args": resolved,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if extra:
        manifest["result"] = extra
    path = run_dir / "manifest.json"
    path.write_text(_dump(manifest) + "\n")
    return path


# ---------------------------------------------------------------------------
# subcommands


def _convert_one(job):
    src, dst, do_opt = job
    c = load_circuit(src)
    stats = None
    if do_opt:
        from .synth import optimize

        c, stats = optimize(c)
    Path(dst).write_text(write_aiger(c))
    return {"input": str(src), "output": str(dst), "stats": stats or circuit_stats(c)}


def cmd_convert(args):
    inputs = _expand(args.inputs, {".cnf"})
    out = Path(args.output)
    if len(inputs) == 1 and out.suffix == ".aag":
        jobs = [(inputs[0], out, args.optimize)]
    else:
        out.mkdir(parents=True, exist_ok=True)
        jobs = [(p, out / (p.stem + ".aag"), args.optimize) for p in inputs]
    rows = _pmap(_convert_one, jobs, args.jobs)
    print(_dump(rows if len(rows) > 1 else rows[0]))
    return {"converted": len(rows)}


def cmd_optimize(args):
    from .synth import optimize

    c = load_circuit(args.input)
    out, stats = optimize(c, rounds=args.rounds)
    Path(args.output).write_text(write_aiger(out))
    stats["node_change"] = stats["after"]["nodes"] - stats["before"]["nodes"]
    print(_dump(stats))
    return stats


def cmd_stats(args):
    stats = circuit_stats(load_circuit(args.input))
    print(_dump(stats))
    return stats


def _mask_from_args(c: AigCircuit, args) -> np.ndarray:
    m = np.zeros(c.num_nodes, dtype=np.int8)
    if args.po:
        m[c.po] = 1
    for item in args.fix or []:
        try:
            idx, val = item.split("=")
            idx, val = int(idx), int(val)
        except ValueError:
            raise UsageError(f"--fix expects PI=VALUE, got {item!r}") from None
        if not 0 <= idx < c.num_pis or val not in (0, 1):
            raise DataError(f"--fix {item}: PI index must be < {c.num_pis} and value 0 or 1")
        m[idx] = 1 if val else -1
    return m


def cmd_simulate(args):
    from .sim import SimConfig, conditional_estimate, exact_profile

    c = load_circuit(args.input)
    m = _mask_from_args(c, args)
    if args.exact:
        prof = exact_profile(c, m)
    else:
        prof = conditional_estimate(c, m, SimConfig(args.patterns, args.seed, args.min_accepted))
    out = {"accepted": prof.accepted_samples, "theta": [round(float(x), 6) for x in prof.theta_hat]}
    print(_dump(out))
    return {"accepted": prof.accepted_samples}


def cmd_gen(args):
    from .datagen import build_benchmark

    k_range = (args.k_min, args.k_max) if args.k_min is not None and args.k_max is not None else None
    rows = build_benchmark(args.kind, args.count, args.seed, args.out, (args.n_min, args.n_max), args.edge_prob, k_range)
    summary = {"files": len(rows), "sat": sum(r["tag"] == "SAT" for r in rows)}
    print(_dump(summary))
    return summary


def _label_one(job):
    from .sim import SimConfig, build_dataset

    path, cid, extra, cfg = job
    c = parse_aiger(_read(path))
    return build_dataset([c], extra, SimConfig(**cfg), circuit_ids=[cid])


def cmd_label(args):
    from .sim import DatasetStats, SimConfig, write_dataset

    cfg = SimConfig(args.patterns, args.seed, args.min_accepted)
    files = _expand(args.inputs, {".aag"})
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    jobs = [(p, i, args.extra_masks, vars(cfg)) for i, p in enumerate(files)]
    records, stats = [], DatasetStats()
    for p, (recs, st) in zip(files, _pmap(_label_one, jobs, args.jobs)):
        ref = os.path.relpath(p.resolve(), out.parent.resolve())
        for r in recs:
            r.circuit_ref = ref
        records += recs
        stats.circuits += st.circuits
        stats.dropped += st.dropped
    stats.records = len(records)
    write_dataset(records, out, cfg, stats)
    summary = {"records": stats.records, "circuits": stats.circuits, "dropped": stats.dropped}
    print(_dump(summary))
    return summary


def cmd_train(args):
    from .model import TrainConfig, save_checkpoint, train
    from .sim import load_dataset

    records = load_dataset(args.dataset)
    cfg = TrainConfig(args.epochs, args.batch_size, args.lr, args.weight_decay, args.seed, args.hidden_dim, args.val_fraction)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    log = Path(args.log) if args.log else out.with_suffix(".log.csv")
    params, curve = train(records, cfg, log_path=log)
    save_checkpoint(params, out)
    print(_dump(curve[-1]))
    return {"epochs": len(curve), "final": curve[-1], "log": str(log)}


def _predictor(args):
    from .solver import ModelPredictor, OraclePredictor, RandomPredictor

    if args.predictor == "oracle":
        return OraclePredictor()
    if args.predictor == "random":
        return RandomPredictor(args.seed)
    if not args.model:
        raise UsageError("--predictor model requires --model CHECKPOINT")
    from .model import load_checkpoint

    return ModelPredictor(load_checkpoint(args.model, args.hidden_dim), args.seed)


def cmd_solve(args):
    from .solver import solve_with_flipping

    c = load_circuit(args.input)
    res = solve_with_flipping(c, _predictor(args))
    out = {
        "status": res.status.value,
        "assignment": res.assignment,
        "rounds": res.rounds_used,
        "predictor_calls": res.predictor_calls,
    }
    print(_dump(out))
    return out


def cmd_eval(args):
    from .solver import evaluate_baselines, evaluate_suite, write_results

    files = _expand(args.inputs, {".aag", ".cnf"})
    instances = [(p.name, load_circuit(p)) for p in files]
    pred = _predictor(args)
    report = evaluate_suite(instances, pred, args.jobs)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(report, out, out.with_suffix(".summary.csv"))
    metrics = report.metrics()
    if args.baselines:
        metrics["baselines"] = evaluate_baselines(instances, pred)
    print(_dump(metrics))
    return metrics


def cmd_gradcheck(args):
    from .model import ModelParams, grad_check, gradcheck_circuit, load_checkpoint

    params = load_checkpoint(args.model, args.hidden_dim) if args.model else ModelParams(args.hidden_dim, args.seed)
    c = load_circuit(args.circuit) if args.circuit else gradcheck_circuit()
    report = grad_check(params, c, args.eps, args.seed)
    out = {"max_relative_deviation": report.max_deviation, "passed": report.passed, "per_parameter": report.per_parameter}
    print(_dump(out))
    if not report.passed:
        write_manifest(args, out)
        raise DataError(f"gradient check failed: max relative deviation {report.max_deviation:.3e} > 1e-3")
    return out


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aigsat", description="Circuit-based SAT sampling toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--config", help="JSON file of flag defaults (flags override it)")
        sp.add_argument("--run-dir", help=f"where the run manifest goes (default ${RUN_ROOT_ENV}/<command>)")
        return sp

    sp = add("convert", cmd_convert, "CNF (DIMACS) to AIG (aag)")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("-o", "--output", required=True, help="an .aag file for one input, else a directory")
    sp.add_argument("--optimize", action="store_true", help="run the synthesis pipeline on each circuit")
    sp.add_argument("--jobs", type=int, default=1)

    sp = add("optimize", cmd_optimize, "rewrite and balance an AIG")
    sp.add_argument("input")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--rounds", type=int, default=3)

    sp = add("stats", cmd_stats, "node count, depth and balance ratio")
    sp.add_argument("input")

    sp = add("simulate", cmd_simulate, "logic-1 probabilities by random simulation")
    sp.add_argument("input")
    sp.add_argument("--patterns", type=int, default=15000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--min-accepted", type=int, default=100)
    sp.add_argument("--po", action="store_true", help="condition on PO = 1")
    sp.add_argument("--fix", action="append", metavar="PI=VALUE", help="force a PI (repeatable)")
    sp.add_argument("--exact", action="store_true", help="enumerate instead of sampling")

    sp = add("gen", cmd_gen, "generate SR(n) pairs or graph-problem instances")
    sp.add_argument("kind", choices=["sr", "coloring", "domset", "clique", "vcover"])
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-min", type=int, default=3)
    sp.add_argument("--n-max", type=int, default=10)
    sp.add_argument("--edge-prob", type=float, default=0.37)
    sp.add_argument("--k-min", type=int)
    sp.add_argument("--k-max", type=int)

    sp = add("label", cmd_label, "simulate circuits into a training dataset")
    sp.add_argument("inputs", nargs="+", help=".aag files or directories")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--extra-masks", type=int, default=3, help="PI-conditioned records per circuit")
    sp.add_argument("--patterns", type=int, default=15000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--min-accepted", type=int, default=100)
    sp.add_argument("--jobs", type=int, default=1)

    sp = add("train", cmd_train, "train the probability model")
    sp.add_argument("dataset")
    sp.add_argument("-o", "--output", required=True, help="checkpoint path")
    sp.add_argument("--log", help="CSV log path (default next to the checkpoint)")
    sp.add_argument("--epochs", type=int, default=20)
    sp.add_argument("--batch-size", type=int, default=64)
    sp.add_argument("--lr", type=float, default=1e-4)
    sp.add_argument("--weight-decay", type=float, default=1e-10)
    sp.add_argument("--hidden-dim", type=int, default=64)
    sp.add_argument("--val-fraction", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)

    for name, func, help_ in (("solve", cmd_solve, "sample a satisfying assignment"),
                              ("eval", cmd_eval, "solve a set of instances and report metrics")):
        sp = add(name, func, help_)
        if name == "solve":
            sp.add_argument("input", help=".aag or .cnf")
        else:
            sp.add_argument("inputs", nargs="+", help=".aag/.cnf files or directories")
            sp.add_argument("-o", "--output", required=True, help="results JSON-lines path")
            sp.add_argument("--jobs", type=int, default=1)
            sp.add_argument("--baselines", action="store_true", help="also score the simplified samplers")
        sp.add_argument("--predictor", choices=["oracle", "model", "random"], default="model")
        sp.add_argument("--model", help="checkpoint for --predictor model")
        sp.add_argument("--hidden-dim", type=int, default=None)
        sp.add_argument("--seed", type=int, default=0)

    sp = add("gradcheck", cmd_gradcheck, "compare analytic and finite-difference gradients")
    sp.add_argument("--model", help="checkpoint (default: fresh parameters)")
    sp.add_argument("--circuit", help="small .aag/.cnf circuit (default: a built-in 6-node one)")
    sp.add_argument("--eps", type=float, default=1e-4)
    sp.add_argument("--hidden-dim", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv):
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        values = json.loads(_read(args.config))
    except json.JSONDecodeError as exc:
        raise DataError(f"config {args.config}: {exc}") from None
    if not isinstance(values, dict):
        raise DataError(f"config {args.config} must hold a JSON object")
    known = vars(args)
    unknown = [k for k in values if k.replace("-", "_") not in known]
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    # re-parse with config values as defaults so explicit flags still win
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**{k.replace("-", "_"): v for k, v in values.items()})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        result = args.func(args)
        write_manifest(args, result)
        return EXIT_OK
    except UsageError as exc:
        print(f"aigsat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"aigsat: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ParseError, CircuitError, ValueError, OSError, RuntimeError) as exc:
        print(f"aigsat: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
