import statistics

import numpy as np
import pytest

from learnwsat.cnf import CnfFormula
from learnwsat.engine import WalkSAT
from learnwsat.evaluator import (Comparison, EvalConfig, SweepReport, UnsolvedWithinBudget, aggregate,
                                 bootstrap_median_ci, compare, evaluate, noise_trace, run_seed, sweep)
from learnwsat.generate import DistributionSpec, build_dataset
from learnwsat.policy import PolicyParams
from learnwsat.trainer import TrainConfig

SMALL = EvalConfig(max_tries=3, max_flips=500, runs=2, seed=1)


@pytest.fixture(scope="module")
def instances():
    ds = build_dataset(DistributionSpec.make(3, 15), {"train": 0, "val": 0, "test": 8}, seed=4)
    return ds.test


def test_trivial_instances_solved_without_search():
    # a single clause is always one flip from satisfied
    trivial = [CnfFormula(2, ((1, 2),)), CnfFormula(1, ((1,),))]
    rep = evaluate(WalkSAT(0.5), trivial, EvalConfig(max_tries=1, max_flips=10, runs=3))
    assert rep.solved_pct == 100.0
    assert all(fl <= 1 for row in rep.flips for fl in row)


def test_empty_instance_list_rejected():
    with pytest.raises(ValueError):
        evaluate(WalkSAT(0.5), [], SMALL)


def test_shapes_and_verification(instances):
    rep = evaluate(WalkSAT(0.5), instances, SMALL)
    assert len(rep.flips) == len(instances) and all(len(r) == 2 for r in rep.flips)
    assert rep.verified
    assert 0 <= rep.solved_pct <= 100


def test_unsolved_runs_count_at_cap():
    unsat = CnfFormula(1, ((1,), (-1,)))
    cfg = EvalConfig(max_tries=3, max_flips=7, runs=2)
    rep = evaluate(WalkSAT(0.5), [unsat], cfg)
    assert rep.solved_pct == 0.0
    assert rep.flips == [[21, 21]]
    assert rep.m_flips == 21


def test_aggregate_uses_lower_medians():
    flips = [[1, 10], [5, 6], [2, 3], [100, 200]]
    m, a = aggregate(flips)
    assert m == statistics.median_low([1, 5, 2, 100]) == 2
    assert a == pytest.approx(statistics.fmean([5.5, 5.5, 2.5, 150]))


def test_compare_with_itself_is_identical(instances):
    cmp = compare([WalkSAT(0.5), WalkSAT(0.5)], instances, SMALL, "rand3(15,64)")
    a, b = cmp.reports
    assert a.flips == b.flips and a.m_flips == b.m_flips


def test_paired_seeds_are_solver_independent():
    assert run_seed(3, 1, 0) == run_seed(3, 1, 0)
    assert len({run_seed(3, i, r) for i in range(10) for r in range(10)}) == 100


def test_comparison_csv_round_trip(instances):
    cmp = compare([WalkSAT(0.5), PolicyParams.initial("constant")], instances, SMALL, "d")
    parsed = Comparison.parse_csv(cmp.to_csv())
    for rep in cmp.reports:
        for metric in Comparison.METRICS:
            assert parsed[(metric, rep.solver)] == float(getattr(rep, metric))


def test_threads_match_serial(instances):
    serial = evaluate(WalkSAT(0.5), instances[:4], SMALL)
    parallel = evaluate(WalkSAT(0.5), instances[:4], EvalConfig(3, 500, 2, 1, threads=2))
    assert serial.flips == parallel.flips


def test_noise_override_only_touches_baselines(instances):
    a = evaluate(WalkSAT(0.5), instances[:3], EvalConfig(2, 300, seed=2, noise_override=0.0))
    b = evaluate(WalkSAT(0.0), instances[:3], EvalConfig(2, 300, seed=2))
    assert a.flips == b.flips


def test_constant_variant_noise_trace_is_flat(instances):
    p = PolicyParams.initial("constant", p_init=0.3)
    series = noise_trace(p, instances[0], EvalConfig(10, 10_000))
    assert series and len({v for _, v in series}) == 1
    assert series[0][1] == pytest.approx(0.3)


def test_delta_variant_noise_stays_open_interval(instances):
    p = PolicyParams((0, -5, 0, 0, 0, 0), (0.0, 0.3, 0.05), "delta")
    series = noise_trace(p, instances[1], EvalConfig(10, 10_000))
    assert all(0 < v < 0.5 for _, v in series)
    ts = [t for t, _ in series]
    assert ts == sorted(ts)


def test_noise_trace_raises_when_unsolved():
    unsat = CnfFormula(1, ((1,), (-1,)))
    with pytest.raises(UnsolvedWithinBudget):
        noise_trace(PolicyParams.initial("constant"), unsat, EvalConfig(1, 5))


def test_bootstrap_ci_brackets_median():
    vals = list(np.random.default_rng(0).exponential(100, size=200))
    lo, hi = bootstrap_median_ci(vals, seed=1)
    med = statistics.median_low(vals)
    assert lo <= med <= hi
    assert bootstrap_median_ci(vals, seed=1) == (lo, hi)
    assert bootstrap_median_ci([5.0] * 10) == (5.0, 5.0)


@pytest.fixture(scope="module")
def tiny_dataset():
    return build_dataset(DistributionSpec.make(3, 12), {"train": 6, "val": 3, "test": 4}, seed=9)


TINY_TRAIN = TrainConfig(epochs=1, warmup_epochs=1, batch_size=3, max_flips_train=300,
                         val_max_tries=2, val_max_flips=300)


def test_sweep_single_value_one_row(tiny_dataset):
    rep = sweep("discount", [0.5], tiny_dataset, TINY_TRAIN, EvalConfig(2, 300))
    assert isinstance(rep, SweepReport)
    assert len(rep.rows) == 1
    lines = rep.to_csv().strip().splitlines()
    assert lines[0].split(",") == list(SweepReport.COLUMNS)
    assert len(lines) == 3          # header, one row, WalkSAT baseline
    assert lines[-1].startswith("discount,walksat")


def test_sweep_repeated_values_get_distinct_seeds(tiny_dataset):
    rep = sweep("train_size", [3, 3], tiny_dataset, TINY_TRAIN, EvalConfig(2, 300))
    assert len(rep.rows) == 2
    assert rep.rows[0]["seed"] != rep.rows[1]["seed"]


def test_sweep_rejects_unknown_axis(tiny_dataset):
    with pytest.raises(ValueError):
        sweep("lr", [0.1], tiny_dataset, TINY_TRAIN, EvalConfig(2, 300))
