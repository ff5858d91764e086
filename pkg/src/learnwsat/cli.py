"""Command line: gen, train, solve, eval, compare, noise, sweep.

Exit codes: 0 success, 2 usage or configuration error, 3 resource budget
exceeded, 10 no solution found (UNKNOWN).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import plotting
from .cnf import CnfError, read_cnf
from .engine import SlsConfig, WalkSAT, run_sls, write_trace
from .evaluator import (EvalConfig, UnsolvedWithinBudget, compare, evaluate, noise_trace, report_json, sweep)
from .generate import (BudgetExceeded, DistributionSpec, InvalidSpec, ManifestMismatch, MissingFile,
                       build_dataset, load_dataset, load_instances, save_dataset)
from .policy import PolicyFileError, load_policy, save_policy
from .trainer import NonFiniteGradient, TrainConfig, train

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_UNKNOWN = 0, 2, 3, 10

ENV_SEED = "LEARNWSAT_SEED"
ENV_THREADS = "LEARNWSAT_THREADS"

log = logging.getLogger("learnwsat")


class UsageError(Exception):
    pass


def _env_int(name):
    val = os.environ.get(name)
    if val is None:
        return None
    try:
        return int(val)
    except ValueError:
        raise UsageError(f"{name}={val!r} is not an integer") from None


def _file_config(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    return cfg


def _resolve(args, name, file_cfg, default):
    """flag > config file > environment (seed/threads) > default."""
    val = getattr(args, name, None)
    if val is not None:
        return val
    if name in file_cfg:
        return file_cfg[name]
    env = {"seed": ENV_SEED, "threads": ENV_THREADS}.get(name)
    if env is not None:
        from_env = _env_int(env)
        if from_env is not None:
            return from_env
    return default


def _eval_config(args, file_cfg=None) -> EvalConfig:
    file_cfg = file_cfg or {}
    try:
        return EvalConfig(
            max_tries=_resolve(args, "max_tries", file_cfg, 10),
            max_flips=_resolve(args, "max_flips", file_cfg, 10_000),
            runs=_resolve(args, "runs", file_cfg, 1),
            seed=_resolve(args, "seed", file_cfg, 0),
            threads=_resolve(args, "threads", file_cfg, 1),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


_TRAIN_FLAGS = [f.name for f in fields(TrainConfig)]


def _train_config(args, file_cfg) -> TrainConfig:
    train_cfg = dict(file_cfg.get("train", {}))
    values = {}
    for name in _TRAIN_FLAGS:
        default = getattr(TrainConfig, name)
        values[name] = _resolve(args, name, train_cfg if name in train_cfg else file_cfg, default)
    try:
        return TrainConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _load_dataset(path):
    try:
        return load_dataset(path)
    except (MissingFile, ManifestMismatch) as exc:
        raise UsageError(f"bad dataset {path}: {exc}") from None


def _load_instances(path, split):
    try:
        if split and Path(path, "manifest.json").is_file():
            instances = load_dataset(path).split(split)
        else:
            instances = load_instances(path)
    except (MissingFile, ManifestMismatch, CnfError, OSError) as exc:
        raise UsageError(f"cannot read instances from {path}: {exc}") from None
    if not instances:
        raise UsageError(f"no instances found in {path}")
    return instances


def _load_policy(path):
    try:
        return load_policy(path)
    except (OSError, PolicyFileError) as exc:
        raise UsageError(f"cannot read policy {path}: {exc}") from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    file_cfg = _file_config(args)
    k = _resolve(args, "k", file_cfg, 3)
    n = _resolve(args, "n", file_cfg, None)
    if n is None:
        raise UsageError("--n is required")
    try:
        spec = DistributionSpec.make(k, n, _resolve(args, "m", file_cfg, None), _resolve(args, "label", file_cfg, ""))
    except InvalidSpec as exc:
        raise UsageError(str(exc)) from None
    sizes = {s: _resolve(args, s, file_cfg, 0) for s in ("train", "val", "test")}
    seed = _resolve(args, "seed", file_cfg, 0)
    check = not _resolve(args, "no_check", file_cfg, False)
    budget = _resolve(args, "node_budget", file_cfg, 10**7)
    ds = build_dataset(spec, sizes, seed, check_sat=check, node_budget=budget)
    config = {"spec": spec.to_dict(), "sizes": sizes, "seed": seed, "check_sat": check, "node_budget": budget}
    save_dataset(ds, args.out, config=config)
    total = sum(sizes.values())
    print(f"{spec.label}: wrote {total} instances to {args.out} "
          f"({ds.filtered_out} unsatisfiable draws discarded{'' if check else ', unchecked'})")
    return EXIT_OK


def cmd_train(args) -> int:
    file_cfg = _file_config(args)
    cfg = _train_config(args, file_cfg)
    ds = _load_dataset(args.dataset)
    if not ds.train or not ds.val:
        raise UsageError("dataset needs non-empty train and val splits")
    out = Path(args.out)
    ckpt = out / "checkpoints"
    ckpt.mkdir(parents=True, exist_ok=True)

    def on_epoch(epoch, params, val):
        save_policy(params, ckpt / f"epoch_{epoch:03d}.txt")

    report = train(ds.train, ds.val, cfg, label=ds.spec.label, on_epoch=on_epoch)
    save_policy(report.params.with_vector(report.params.vector(), selected_epoch=report.selected_epoch),
                out / "policy.txt")
    _write(out / "config.json", report_json({"command": "train", "dataset": str(args.dataset),
                                             "train": cfg.to_dict()}))
    _write(out / "report.json", report.to_json())
    lines = ["epoch,val_m_flips,best_so_far"] + [f"{i},{v},{b}" for i, (v, b) in
                                                  enumerate(zip(report.val_mflips, report.best_so_far))]
    _write(out / "training.csv", "\n".join(lines) + "\n")
    plotting.training_curves({ds.spec.label: report.val_mflips}, out / "training.png")
    p = report.params
    print(f"selected epoch {report.selected_epoch}: val m-flips {report.val_mflips[report.selected_epoch]}")
    print("theta = " + " ".join(f"{x:.3f}" for x in p.theta) + f"  p_w(0) = {p.noise(0.0):.4f}")
    return EXIT_OK


def _solver_from_args(args):
    if args.walksat:
        return WalkSAT(args.p)
    if not args.policy:
        raise UsageError("give --policy FILE or --walksat")
    return _load_policy(args.policy)


def cmd_solve(args) -> int:
    try:
        formula = read_cnf(args.cnf)
    except (OSError, CnfError) as exc:
        raise UsageError(f"cannot read {args.cnf}: {exc}") from None
    solver = _solver_from_args(args)
    ec = _eval_config(args)
    from .evaluator import make_picker
    picker = make_picker(solver)
    cfg = SlsConfig(ec.max_flips, ec.max_tries, ec.seed)
    out = run_sls(formula, cfg, picker, trace=bool(args.trace))
    if args.trace:
        write_trace(out.trace, args.trace)
    print(f"c solver {picker.describe()} max_flips {cfg.max_flips} max_tries {cfg.max_tries} seed {cfg.rng_seed}")
    print(f"c flips {out.flips_total} tries {out.tries_used}")
    if not out.solved:
        print("UNKNOWN")
        return EXIT_UNKNOWN
    print("SAT")
    lits = [str(i + 1) if v else str(-(i + 1)) for i, v in enumerate(out.witness)]
    for start in range(0, len(lits), 20):
        print("v " + " ".join(lits[start:start + 20]))
    print("v 0")
    return EXIT_OK


def cmd_eval(args) -> int:
    instances = _load_instances(args.instances, args.split)
    solver = _solver_from_args(args)
    ec = _eval_config(args)
    rep = evaluate(solver, instances, ec)
    out = Path(args.out)
    _write(out / "instances.csv", rep.instance_csv())
    _write(out / "summary.json", report_json({"command": "eval", "instances": str(args.instances),
                                              "split": args.split, **rep.to_dict()}))
    plotting.flips_cdf({rep.solver: rep}, out / "flips.png")
    print(f"{rep.solver}: m-flips {rep.m_flips} a-flips {rep.a_flips:.1f} solved {rep.solved_pct:.1f}%")
    return EXIT_OK


def cmd_compare(args) -> int:
    instances = _load_instances(args.instances, args.split)
    solvers = [_load_policy(p) for p in args.policy] + [WalkSAT(p) for p in args.walksat_p]
    if not solvers:
        raise UsageError("nothing to compare: give --policy and/or --walksat-p")
    ec = _eval_config(args)
    label = args.label
    if not label and Path(args.instances, "manifest.json").is_file():
        label = load_dataset(args.instances).spec.label
    cmp = compare(solvers, instances, ec, label)
    out = Path(args.out)
    _write(out / "comparison.csv", cmp.to_csv())
    for j, rep in enumerate(cmp.reports):
        _write(out / f"instances_{j}.csv", rep.instance_csv())
    _write(out / "summary.json", report_json({"command": "compare", "instances": str(args.instances),
                                              "split": args.split, "distribution": label,
                                              "config": ec.to_dict(),
                                              "solvers": [r.to_dict() for r in cmp.reports]}))
    plotting.comparison_bars(cmp, out / "comparison.png")
    plotting.flips_cdf({r.solver: r for r in cmp.reports}, out / "flips.png")
    print(cmp.to_csv(), end="")
    return EXIT_OK


def cmd_noise(args) -> int:
    params = _load_policy(args.policy)
    instances = _load_instances(args.instances, args.split)[:args.count]
    ec = _eval_config(args)
    traces = {}
    rows = ["instance,t,p_noise"]
    for i, f in enumerate(instances):
        try:
            series = noise_trace(params, f, ec, i)
        except UnsolvedWithinBudget:
            log.warning("instance %d unsolved within budget; skipped", i)
            continue
        traces[f"instance {i}"] = series
        rows += [f"{i},{t},{p!r}" for t, p in series]
    if not traces:
        print("UNKNOWN: no instance solved")
        return EXIT_UNKNOWN
    out = Path(args.out)
    _write(out / "noise.csv", "\n".join(rows) + "\n")
    _write(out / "config.json", report_json({"command": "noise", "policy": str(args.policy), "config": ec.to_dict()}))
    plotting.noise_traces(traces, out / "noise.png")
    for label, series in traces.items():
        ps = [p for _, p in series]
        print(f"{label}: {len(ps)} steps, noise in [{min(ps):.4f}, {max(ps):.4f}]")
    return EXIT_OK


def cmd_sweep(args) -> int:
    file_cfg = _file_config(args)
    cfg = _train_config(args, file_cfg)
    ds = _load_dataset(args.dataset)
    if not ds.test:
        raise UsageError("dataset has no test split")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --values {args.values!r}") from None
    if not values:
        raise UsageError("--values is empty")
    if args.axis == "train_size":
        values = [int(v) for v in values]
    ec = _eval_config(args, file_cfg)
    try:
        rep = sweep(args.axis, values, ds, cfg, ec, args.p)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    _write(out / "sweep.csv", rep.to_csv())
    _write(out / "sweep.json", report_json(rep.to_dict()))
    plotting.sweep_plot(rep, out / "sweep.png")
    print(rep.to_csv(), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_search_flags(p):
    p.add_argument("--max-flips", type=int, help="flips per try (default 10000)")
    p.add_argument("--max-tries", type=int, help="restarts (default 10)")
    p.add_argument("--runs", type=int, help="runs per instance (default 1)")
    p.add_argument("--seed", type=int, help=f"random seed (env {ENV_SEED}, default 0)")
    p.add_argument("--threads", type=int, help=f"worker processes (env {ENV_THREADS}, default 1)")


def _add_solver_flags(p):
    p.add_argument("--policy", help="policy file written by 'train'")
    p.add_argument("--walksat", action="store_true", help="use the WalkSAT baseline instead of a policy")
    p.add_argument("--p", type=float, default=0.5, help="WalkSAT noise (default 0.5)")


def _add_train_flags(p):
    p.add_argument("--config", help="JSON file with training options; flags override it")
    p.add_argument("--epochs", type=int)
    p.add_argument("--warmup-epochs", type=int)
    p.add_argument("--gamma", type=float, help="discount factor")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--max-flips-train", type=int)
    p.add_argument("--lr-max", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--noise-variant", choices=("constant", "delta"))
    p.add_argument("--p-init", type=float)
    p.add_argument("--warmup-lr", type=float)
    p.add_argument("--warmup-batch", type=int)
    p.add_argument("--warmup-noise", type=float)
    p.add_argument("--baseline", action="store_true", default=None, help="subtract the batch mean reward")
    p.add_argument("--val-max-tries", type=int)
    p.add_argument("--val-max-flips", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="learnwsat", description="Learned WalkSAT-style local search for SAT.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random k-SAT dataset")
    p.add_argument("--config", help="JSON file with generator options")
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int, help="clauses (default: threshold ratio times n)")
    p.add_argument("--label")
    p.add_argument("--train", type=int)
    p.add_argument("--val", type=int)
    p.add_argument("--test", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-check", action="store_true", default=None, help="keep instances without a DPLL check")
    p.add_argument("--node-budget", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="warm-up plus REINFORCE on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="run directory")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", help="solve one DIMACS file")
    p.add_argument("cnf")
    _add_solver_flags(p)
    _add_search_flags(p)
    p.add_argument("--trace", help="write a newline-delimited JSON step trace here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="evaluate one solver on a set of instances")
    p.add_argument("instances", help="dataset directory, directory of .cnf files, or one .cnf")
    p.add_argument("--split", default="test", help="dataset split (default test)")
    _add_solver_flags(p)
    _add_search_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="paired comparison of several solvers")
    p.add_argument("instances")
    p.add_argument("--split", default="test")
    p.add_argument("--policy", action="append", default=[])
    p.add_argument("--walksat-p", type=float, action="append", default=[])
    p.add_argument("--label", default="")
    _add_search_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("noise", help="noise probability along solved runs")
    p.add_argument("instances")
    p.add_argument("--split", default="test")
    p.add_argument("--policy", required=True)
    p.add_argument("--count", type=int, default=1, help="instances to trace (default 1)")
    _add_search_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("sweep", help="train and evaluate across discount factors or training sizes")
    p.add_argument("--dataset", required=True)
    p.add_argument("--axis", required=True, choices=("discount", "train_size"))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--p", type=float, default=0.5, help="WalkSAT noise for the baseline line")
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.add_argument("--max-flips", type=int)
    p.add_argument("--max-tries", type=int)
    p.add_argument("--runs", type=int)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"learnwsat {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"learnwsat {args.command}: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NonFiniteGradient as exc:
        print(f"learnwsat {args.command}: training diverged: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
