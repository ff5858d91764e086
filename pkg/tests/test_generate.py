import itertools
import json
import random

import pytest

from learnwsat.cnf import CnfFormula, evaluate
from learnwsat.generate import (BudgetExceeded, Dataset, DistributionSpec, InvalidSpec, ManifestMismatch,
                                MissingFile, UnsupportedWidth, build_dataset, default_ratio, dpll_sat,
                                gen_random_ksat, load_dataset, save_dataset)

from oracles import truth_table_sat


def test_default_ratio():
    assert default_ratio(3) == 4.26
    assert default_ratio(4) == 9.75
    with pytest.raises(UnsupportedWidth):
        default_ratio(5)


def test_default_sizes():
    assert DistributionSpec.make(3, 50).m == 213
    assert DistributionSpec.make(4, 50).m == 488  # round(487.5) rounds half to even
    assert DistributionSpec.make(3, 75).m == 320
    assert DistributionSpec.make(3, 200).m == 852
    assert DistributionSpec.make(3, 50).label == "rand3(50,213)"


@pytest.mark.parametrize("args", [(1, 5, 3), (4, 3, 5), (3, 5, 0)])
def test_invalid_spec(args):
    with pytest.raises(InvalidSpec):
        DistributionSpec(*args)


def test_three_of_three():
    f = gen_random_ksat(DistributionSpec(3, 3, 1), random.Random(0))
    assert f.num_clauses == 1
    assert sorted(abs(l) for l in f.clauses[0]) == [1, 2, 3]


def test_clause_shape():
    spec = DistributionSpec.make(4, 30)
    f = gen_random_ksat(spec, random.Random(1))
    assert f.num_vars == 30 and f.num_clauses == spec.m
    assert all(len({abs(l) for l in c}) == 4 for c in f.clauses)


def test_polarity_balanced():
    rng = random.Random(123)
    spec = DistributionSpec(3, 50, 1000)
    neg = total = 0
    while total < 100_000:
        f = gen_random_ksat(spec, rng)
        for c in f.clauses:
            neg += sum(l < 0 for l in c)
            total += len(c)
    assert 0.49 <= neg / total <= 0.51


def test_variable_usage_uniform():
    rng = random.Random(5)
    counts = [0] * 10
    spec = DistributionSpec(3, 10, 3000)
    for c in gen_random_ksat(spec, rng).clauses:
        for l in c:
            counts[abs(l) - 1] += 1
    # each variable expected 900 times, sd ~ 26
    assert all(abs(c - 900) < 120 for c in counts)


def test_dpll_unit_chain():
    r = dpll_sat(CnfFormula(2, ((1,), (-1, 2))))
    assert r.sat and r.assignment == (True, True)


def test_dpll_contradiction():
    assert not dpll_sat(CnfFormula(1, ((1,), (-1,)))).sat


def test_dpll_budget():
    # pigeonhole 5 into 4 needs real search
    holes, pigeons = 4, 5
    var = lambda p, h: p * holes + h + 1
    clauses = [tuple(var(p, h) for h in range(holes)) for p in range(pigeons)]
    for h in range(holes):
        for p, q in itertools.combinations(range(pigeons), 2):
            clauses.append((-var(p, h), -var(q, h)))
    f = CnfFormula(pigeons * holes, tuple(clauses))
    with pytest.raises(BudgetExceeded):
        dpll_sat(f, node_budget=5)
    assert not dpll_sat(f).sat


@pytest.mark.parametrize("seed", range(200))
def test_dpll_matches_truth_table(seed):
    f = gen_random_ksat(DistributionSpec(3, 12, 51), random.Random(seed))
    r = dpll_sat(f)
    assert r.sat == truth_table_sat(f.num_vars, f.clauses)
    if r.sat:
        assert evaluate(f, r.assignment)


def test_build_dataset_small():
    spec = DistributionSpec.make(3, 20)
    ds = build_dataset(spec, {"train": 0, "val": 0, "test": 1}, seed=3)
    assert (len(ds.train), len(ds.val), len(ds.test)) == (0, 0, 1)
    assert dpll_sat(ds.test[0]).sat


def test_build_dataset_deterministic_and_satisfiable():
    spec = DistributionSpec.make(3, 20)
    sizes = {"train": 5, "val": 2, "test": 3}
    a = build_dataset(spec, sizes, seed=11)
    b = build_dataset(spec, sizes, seed=11)
    assert a == b
    assert a != build_dataset(spec, sizes, seed=12)
    for f in a.train + a.val + a.test:
        r = dpll_sat(f)
        assert r.sat and evaluate(f, r.assignment)
    assert len({f.clauses for f in a.train + a.val + a.test}) == 10


def test_build_dataset_unchecked():
    spec = DistributionSpec.make(3, 20)
    ds = build_dataset(spec, {"test": 4}, seed=1, check_sat=False)
    assert len(ds.test) == 4 and ds.filtered_out == 0 and not ds.checked


def test_build_dataset_budget_reports_draw():
    with pytest.raises(BudgetExceeded) as info:
        build_dataset(DistributionSpec.make(3, 40), {"test": 1}, seed=0, node_budget=1)
    assert info.value.draw_index == 0


def test_save_load_round_trip(tmp_path):
    spec = DistributionSpec.make(3, 15)
    ds = build_dataset(spec, {"train": 3, "val": 1, "test": 2}, seed=4)
    save_dataset(ds, tmp_path / "d")
    back = load_dataset(tmp_path / "d")
    assert back == ds
    manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
    assert set(manifest) >= {"spec", "seed", "splits", "version"}
    assert manifest["splits"]["test"] == ["0004.cnf", "0005.cnf"]


def test_hand_built_dataset(tmp_path):
    spec = DistributionSpec(2, 2, 1, "tiny")
    ds = Dataset(spec, 0, train=[CnfFormula(2, ((1, 2),))], test=[CnfFormula(2, ((-1, 2),))])
    save_dataset(ds, tmp_path)
    back = load_dataset(tmp_path)
    assert back.train[0].clauses == ((1, 2),)
    assert back.test[0].clauses == ((-1, 2),)
    assert back.spec == spec


def test_save_is_byte_identical(tmp_path):
    spec = DistributionSpec.make(3, 15)
    for name in ("a", "b"):
        save_dataset(build_dataset(spec, {"train": 2, "test": 2}, seed=9), tmp_path / name)
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_corrupted_manifest(tmp_path):
    ds = build_dataset(DistributionSpec.make(3, 10), {"test": 1}, seed=1)
    save_dataset(ds, tmp_path)
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(ManifestMismatch):
        load_dataset(tmp_path)
    (tmp_path / "manifest.json").write_text(json.dumps({"version": 99}))
    with pytest.raises(ManifestMismatch):
        load_dataset(tmp_path)


def test_manifest_size_mismatch(tmp_path):
    ds = build_dataset(DistributionSpec.make(3, 10), {"test": 1}, seed=1)
    save_dataset(ds, tmp_path)
    m = json.loads((tmp_path / "manifest.json").read_text())
    m["spec"]["n"] = 11
    (tmp_path / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(ManifestMismatch):
        load_dataset(tmp_path)


def test_missing_file(tmp_path):
    ds = build_dataset(DistributionSpec.make(3, 10), {"test": 2}, seed=1)
    save_dataset(ds, tmp_path)
    (tmp_path / "0001.cnf").unlink()
    with pytest.raises(MissingFile):
        load_dataset(tmp_path)
    with pytest.raises(MissingFile):
        load_dataset(tmp_path / "nope")
