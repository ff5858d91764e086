"""Run pickers over instance sets and aggregate flip statistics."""
from __future__ import annotations

import csv
import io
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .cnf import CnfFormula, evaluate as check_assignment
from .engine import SlsConfig, WalkSAT, run_sls
from .policy import PolicyParams, PolicyPicker
from .rng import derive_seed

Solver = Union[WalkSAT, PolicyParams]


class UnsolvedWithinBudget(RuntimeError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    max_tries: int = 10
    max_flips: int = 10_000
    runs: int = 1
    seed: int = 0
    noise_override: Optional[float] = None
    threads: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.max_tries < 1 or self.max_flips < 1:
            raise ValueError("max_tries and max_flips must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)


def make_picker(solver: Solver, noise_override: Optional[float] = None):
    if isinstance(solver, PolicyParams):
        return PolicyPicker(solver)
    if isinstance(solver, WalkSAT):
        return WalkSAT(noise_override) if noise_override is not None else solver
    raise TypeError(f"cannot build a picker from {type(solver).__name__}")


def solver_name(solver: Solver) -> str:
    return make_picker(solver).describe()


def run_seed(seed: int, instance: int, run: int) -> int:
    return derive_seed(seed, instance, run)


@dataclass
class EvalReport:
    solver: str
    config: dict
    flips: list            # flips[i][r]: cumulative flips of run r on instance i
    solved: list           # solved[i][r]
    tries: list
    m_flips: float
    a_flips: float
    solved_pct: float
    verified: bool = True

    def to_dict(self) -> dict:
        return {"solver": self.solver, "config": self.config, "m_flips": self.m_flips,
                "a_flips": self.a_flips, "solved_pct": self.solved_pct, "verified": self.verified,
                "instances": len(self.flips)}

    def instance_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance", "run", "solved", "flips", "tries"])
        for i, (fl, so, tr) in enumerate(zip(self.flips, self.solved, self.tries)):
            for r in range(len(fl)):
                w.writerow([i, r, int(so[r]), fl[r], tr[r]])
        return buf.getvalue()


def aggregate(flips: Sequence[Sequence[int]]) -> tuple[float, float]:
    """(median of per-instance medians, mean of per-instance means); lower medians throughout."""
    med = statistics.median_low([statistics.median_low(f) for f in flips])
    avg = statistics.fmean([statistics.fmean(f) for f in flips])
    return med, avg


def _run_one(args):
    formula, solver, config, i, r = args
    cfg = SlsConfig(config.max_flips, config.max_tries, run_seed(config.seed, i, r))
    out = run_sls(formula, cfg, make_picker(solver, config.noise_override))
    ok = (not out.solved) or check_assignment(formula, out.witness)
    return out.solved, out.flips_total, out.tries_used, ok


def evaluate(solver: Solver, instances: Sequence[CnfFormula], config: EvalConfig = EvalConfig()) -> EvalReport:
    if not instances:
        raise ValueError("no instances to evaluate")
    jobs = [(f, solver, config, i, r) for i, f in enumerate(instances) for r in range(config.runs)]
    if config.threads > 1:
        with ProcessPoolExecutor(config.threads) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * config.threads))))
    else:
        results = [_run_one(j) for j in jobs]
    R = config.runs
    flips = [[res[1] for res in results[i * R:(i + 1) * R]] for i in range(len(instances))]
    solved = [[res[0] for res in results[i * R:(i + 1) * R]] for i in range(len(instances))]
    tries = [[res[2] for res in results[i * R:(i + 1) * R]] for i in range(len(instances))]
    m, a = aggregate(flips)
    pct = 100.0 * sum(map(sum, solved)) / (len(instances) * R)
    return EvalReport(solver_name(solver), config.to_dict(), flips, solved, tries, m, a, pct,
                      all(res[3] for res in results))


@dataclass
class Comparison:
    distribution: str
    reports: list = field(default_factory=list)

    METRICS = ("m_flips", "a_flips", "solved_pct")

    def rows(self) -> list[list]:
        return [[self.distribution, metric] + [getattr(r, metric) for r in self.reports] for metric in self.METRICS]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["distribution", "metric"] + [r.solver for r in self.reports])
        for row in self.rows():
            w.writerow(row[:2] + [repr(float(x)) for x in row[2:]])
        return buf.getvalue()

    @staticmethod
    def parse_csv(text: str) -> dict:
        """{(metric, solver): value} from ``to_csv`` output."""
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        out = {}
        for row in reader:
            for solver, val in zip(header[2:], row[2:]):
                out[(row[1], solver)] = float(val)
        return out


def compare(solvers: Sequence[Solver], instances: Sequence[CnfFormula], config: EvalConfig = EvalConfig(),
            distribution: str = "") -> Comparison:
    """Evaluate every solver with the same per-(instance, run) seeds."""
    return Comparison(distribution, [evaluate(s, instances, config) for s in solvers])


def noise_trace(params: PolicyParams, instance: CnfFormula, config: EvalConfig = EvalConfig(),
                instance_index: int = 0) -> list[tuple[int, float]]:
    """(iteration, noise probability) for every pick of the solving try."""
    cfg = SlsConfig(config.max_flips, config.max_tries, run_seed(config.seed, instance_index, 0))
    out = run_sls(instance, cfg, PolicyPicker(params), trace=True)
    if not out.solved:
        raise UnsolvedWithinBudget("policy did not solve the instance within budget")
    last = out.tries_used - 1
    return [(rec.t, rec.p_noise) for rec in out.trace if rec.try_index == last]


def bootstrap_median_ci(values: Sequence[float], seed: int = 0, resamples: int = 1000,
                        level: float = 0.95) -> tuple[float, float]:
    vals = np.sort(np.asarray(values, dtype=float))
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(vals), size=(resamples, len(vals)))
    boot = np.sort(vals[idx], axis=1)[:, (len(vals) - 1) // 2]
    alpha = (1 - level) / 2
    return float(np.quantile(boot, alpha)), float(np.quantile(boot, 1 - alpha))


def report_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


SWEEP_STREAM = 31
SWEEP_AXES = ("discount", "train_size")


@dataclass
class SweepReport:
    axis: str
    rows: list                # dicts: value, seed, m_flips, ci_low, ci_high, a_flips, solved_pct, selected_epoch
    baseline: dict            # WalkSAT on the same test set
    config: dict

    COLUMNS = ("axis", "value", "seed", "m_flips", "ci_low", "ci_high", "a_flips", "solved_pct", "selected_epoch")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for row in self.rows:
            w.writerow([self.axis] + [row[c] for c in self.COLUMNS[1:]])
        b = self.baseline
        w.writerow([self.axis, "walksat", "", b["m_flips"], b["ci_low"], b["ci_high"], b["a_flips"], b["solved_pct"], ""])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"axis": self.axis, "rows": self.rows, "baseline": self.baseline, "config": self.config}


def _median_summary(report: EvalReport, seed: int) -> dict:
    per_instance = [statistics.median_low(f) for f in report.flips]
    lo, hi = bootstrap_median_ci(per_instance, seed)
    return {"m_flips": report.m_flips, "ci_low": lo, "ci_high": hi,
            "a_flips": report.a_flips, "solved_pct": report.solved_pct}


def sweep(axis: str, values: Sequence[float], dataset, train_config, eval_config: EvalConfig = EvalConfig(),
          baseline_p: float = 0.5) -> SweepReport:
    """Train one policy per value along an axis and evaluate each on the test split.

    ``discount`` varies gamma; ``train_size`` trains on the first N training
    formulas.  Row j trains with its own seed derived from the base seed,
    so repeated values give independent replicates.
    """
    from dataclasses import replace

    from .trainer import train

    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    if not values:
        raise ValueError("no sweep values")
    rows = []
    for j, value in enumerate(values):
        seed = derive_seed(train_config.seed, SWEEP_STREAM, j)
        if axis == "discount":
            cfg = replace(train_config, gamma=float(value), seed=seed)
            train_set = dataset.train
        else:
            size = int(value)
            if not 1 <= size <= len(dataset.train):
                raise ValueError(f"train size {size} outside 1..{len(dataset.train)}")
            cfg = replace(train_config, seed=seed)
            train_set = dataset.train[:size]
        rep = train(train_set, dataset.val, cfg, label=dataset.spec.label)
        ev = evaluate(rep.params, dataset.test, eval_config)
        rows.append({"value": value, "seed": seed, "selected_epoch": rep.selected_epoch,
                     **_median_summary(ev, derive_seed(eval_config.seed, SWEEP_STREAM, j))})
    base = evaluate(WalkSAT(baseline_p), dataset.test, eval_config)
    return SweepReport(axis, rows, _median_summary(base, eval_config.seed),
                       {"train": train_config.to_dict(), "eval": eval_config.to_dict(), "values": list(values)})
