"""Random k-SAT instances, a DPLL satisfiability filter and datasets on disk."""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .cnf import CnfError, CnfFormula, evaluate, read_cnf, write_dimacs
from .rng import sample_without_replacement, substream

FORMAT_VERSION = 1
GEN_STREAM = 1

# clause/variable ratios at the satisfiability threshold
_RATIOS = {3: 4.26, 4: 9.75}


class InvalidSpec(ValueError):
    pass


class UnsupportedWidth(InvalidSpec):
    pass


class BudgetExceeded(RuntimeError):
    def __init__(self, msg, draw_index=None):
        super().__init__(msg)
        self.draw_index = draw_index


class ManifestMismatch(ValueError):
    pass


class MissingFile(FileNotFoundError):
    pass


def default_ratio(k: int) -> float:
    try:
        return _RATIOS[k]
    except KeyError:
        raise UnsupportedWidth(f"no default clause ratio for k={k}; pass m explicitly") from None


@dataclass(frozen=True)
class DistributionSpec:
    k: int
    n: int
    m: int
    label: str = ""

    def __post_init__(self):
        if self.k < 2:
            raise InvalidSpec("clause width k must be at least 2")
        if self.k > self.n:
            raise InvalidSpec(f"k={self.k} exceeds n={self.n}")
        if self.m < 1:
            raise InvalidSpec("m must be at least 1")
        if not self.label:
            object.__setattr__(self, "label", f"rand{self.k}({self.n},{self.m})")

    @classmethod
    def make(cls, k: int, n: int, m: Optional[int] = None, label: str = "") -> "DistributionSpec":
        """Build a spec, filling m from the threshold ratio when omitted."""
        if m is None:
            if n < 1:
                raise InvalidSpec("n must be positive")
            m = int(round(default_ratio(k) * n))
        return cls(k, n, m, label)

    def to_dict(self) -> dict:
        return {"k": self.k, "n": self.n, "m": self.m, "label": self.label}

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        return cls(int(d["k"]), int(d["n"]), int(d["m"]), str(d.get("label", "")))


def gen_random_ksat(spec: DistributionSpec, rng) -> CnfFormula:
    """Sample m clauses of k distinct variables with independent fair signs."""
    clauses = []
    for _ in range(spec.m):
        vs = sample_without_replacement(rng, spec.n, spec.k)
        clauses.append(tuple(-(v + 1) if rng.random() < 0.5 else v + 1 for v in vs))
    return CnfFormula(spec.n, tuple(clauses))


@dataclass
class DpllResult:
    sat: bool
    assignment: Optional[tuple[bool, ...]] = None
    nodes: int = 0


def dpll_sat(formula: CnfFormula, node_budget: int = 10**7) -> DpllResult:
    """Complete DPLL search with unit propagation.

    Branches on the unassigned variable occurring most often in clauses
    not yet satisfied, trying its more frequent polarity first.  Raises
    BudgetExceeded once more than ``node_budget`` branches were opened.
    """
    if node_budget <= 0:
        raise ValueError("node_budget must be positive")
    n = formula.num_vars
    clauses = formula.clauses
    vals: list[Optional[bool]] = [None] * (n + 1)
    trail: list[int] = []
    nodes = 0

    def undo(mark):
        while len(trail) > mark:
            vals[trail.pop()] = None

    def propagate() -> bool:
        changed = True
        while changed:
            changed = False
            for c in clauses:
                free = 0
                unit = 0
                for lit in c:
                    v = vals[abs(lit)]
                    if v is None:
                        free += 1
                        unit = lit
                    elif v == (lit > 0):
                        break
                else:
                    if free == 0:
                        return False
                    if free == 1:
                        vals[abs(unit)] = unit > 0
                        trail.append(abs(unit))
                        changed = True
        return True

    def branch_literal() -> int:
        counts: dict[int, int] = {}
        for c in clauses:
            if any(vals[abs(l)] == (l > 0) for l in c):
                continue
            for l in c:
                if vals[abs(l)] is None:
                    counts[l] = counts.get(l, 0) + 1
        if not counts:
            return 0
        best = max(range(1, n + 1), key=lambda v: (counts.get(v, 0) + counts.get(-v, 0), -v))
        return best if counts.get(best, 0) >= counts.get(-best, 0) else -best

    def solve() -> bool:
        nonlocal nodes
        mark = len(trail)
        if not propagate():
            undo(mark)
            return False
        lit = branch_literal()
        if lit == 0:
            return True
        for choice_lit in (lit, -lit):
            nodes += 1
            if nodes > node_budget:
                raise BudgetExceeded(f"DPLL exceeded {node_budget} nodes")
            inner = len(trail)
            vals[abs(choice_lit)] = choice_lit > 0
            trail.append(abs(choice_lit))
            if solve():
                return True
            undo(inner)
        undo(mark)
        return False

    limit = sys.getrecursionlimit()
    if limit < 4 * n + 100:
        sys.setrecursionlimit(4 * n + 100)
    try:
        found = solve()
    finally:
        sys.setrecursionlimit(limit)
    if not found:
        return DpllResult(False, None, nodes)
    x = tuple(bool(v) for v in vals[1:])
    assert evaluate(formula, x)
    return DpllResult(True, x, nodes)


SPLITS = ("train", "val", "test")


@dataclass
class Dataset:
    spec: DistributionSpec
    seed: int
    train: list[CnfFormula] = field(default_factory=list)
    val: list[CnfFormula] = field(default_factory=list)
    test: list[CnfFormula] = field(default_factory=list)
    checked: bool = True
    filtered_out: int = field(default=0, compare=False)

    def split(self, name: str) -> list[CnfFormula]:
        if name not in SPLITS:
            raise KeyError(name)
        return getattr(self, name)


def build_dataset(spec: DistributionSpec, sizes: dict, seed: int, *,
                  check_sat: bool = True, node_budget: int = 10**7) -> Dataset:
    """Draw instances until every split is full, keeping satisfiable ones.

    Draw ``i`` uses its own substream of ``seed`` so the result depends only
    on (spec, sizes, seed).  With ``check_sat=False`` instances are kept
    unfiltered, which is the only option once DPLL gets too slow.
    """
    wanted = [(name, int(sizes.get(name, 0))) for name in SPLITS]
    if any(size < 0 for _, size in wanted):
        raise ValueError("split sizes must be non-negative")
    ds = Dataset(spec, seed, checked=check_sat)
    draw = 0
    for name, size in wanted:
        target = ds.split(name)
        while len(target) < size:
            f = gen_random_ksat(spec, substream(seed, GEN_STREAM, draw))
            keep = True
            if check_sat:
                try:
                    keep = dpll_sat(f, node_budget).sat
                except BudgetExceeded as exc:
                    raise BudgetExceeded(f"{exc} on draw {draw}", draw) from None
            draw += 1
            if keep:
                target.append(f)
            else:
                ds.filtered_out += 1
    return ds


def save_dataset(ds: Dataset, path, config: Optional[dict] = None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    splits = {}
    idx = 0
    for name in SPLITS:
        files = []
        for f in ds.split(name):
            fname = f"{idx:04d}.cnf"
            (path / fname).write_bytes(write_dimacs(f))
            files.append(fname)
            idx += 1
        splits[name] = files
    manifest = {
        "version": FORMAT_VERSION,
        "spec": ds.spec.to_dict(),
        "seed": ds.seed,
        "checked": ds.checked,
        "filtered_out": ds.filtered_out,
        "splits": splits,
    }
    if config is not None:
        manifest["config"] = config
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_dataset(path) -> Dataset:
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.is_file():
        raise MissingFile(f"{mpath} not found")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
        if manifest["version"] != FORMAT_VERSION:
            raise ManifestMismatch(f"unsupported dataset version {manifest['version']}")
        spec = DistributionSpec.from_dict(manifest["spec"])
        seed = int(manifest["seed"])
        splits = {name: list(manifest["splits"][name]) for name in SPLITS}
    except ManifestMismatch:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ManifestMismatch(f"corrupted manifest {mpath}: {exc}") from None
    ds = Dataset(spec, seed, checked=bool(manifest.get("checked", True)),
                 filtered_out=int(manifest.get("filtered_out", 0)))
    for name in SPLITS:
        for fname in splits[name]:
            fpath = path / fname
            if not fpath.is_file():
                raise MissingFile(f"{fpath} listed in manifest but missing")
            try:
                f = read_cnf(fpath)
            except CnfError as exc:
                raise ManifestMismatch(f"{fpath}: {exc}") from None
            if f.num_vars != spec.n or f.num_clauses != spec.m:
                raise ManifestMismatch(f"{fpath} has ({f.num_vars},{f.num_clauses}), manifest says ({spec.n},{spec.m})")
            ds.split(name).append(f)
    return ds


def load_instances(path) -> list[CnfFormula]:
    """Instances from a .cnf file, a dataset directory (test split) or a plain directory of .cnf files."""
    path = Path(path)
    if path.is_file():
        return [read_cnf(path)]
    if (path / "manifest.json").is_file():
        return load_dataset(path).test
    if path.is_dir():
        return [read_cnf(p) for p in sorted(path.glob("*.cnf"))]
    raise MissingFile(f"{path} not found")
