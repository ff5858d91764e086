"""Incremental local-search state, the generic SLS loop and the WalkSAT move.

Variables are 0-based inside the engine; ``SolverState`` translates the
formula's signed DIMACS literals once at construction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .cnf import CnfFormula
from .rng import substream

INIT_STREAM = 11
PICK_STREAM = 12


class NoUnsatClause(LookupError):
    pass


class SolverState:
    """Assignment plus the counters needed to flip and score in O(occurrences).

    ``true_count[c]`` is the number of satisfied literals of clause ``c``;
    ``unsat`` lists the clauses with a zero count and ``where[c]`` is a
    clause's slot in that list (-1 when satisfied).
    """

    __slots__ = ("formula", "n", "m", "clause_vars", "occ_pos", "occ_neg", "assignment",
                 "true_count", "unsat", "where", "t", "age1", "age2",
                 "best_unsat", "stagnation", "ops")

    def __init__(self, formula: CnfFormula, assignment: Sequence[bool]):
        n, m = formula.num_vars, formula.num_clauses
        if len(assignment) != n:
            raise ValueError(f"assignment has {len(assignment)} values, expected {n}")
        self.formula = formula
        self.n, self.m = n, m
        self.clause_vars = [tuple(abs(l) - 1 for l in c) for c in formula.clauses]
        self.occ_pos: list[list[int]] = [[] for _ in range(n)]
        self.occ_neg: list[list[int]] = [[] for _ in range(n)]
        for ci, c in enumerate(formula.clauses):
            for lit in c:
                (self.occ_pos if lit > 0 else self.occ_neg)[abs(lit) - 1].append(ci)
        self.assignment = [bool(v) for v in assignment]
        self.t = 0
        self.age1 = [0] * n
        self.age2 = [0] * n
        self.ops = 0
        self.recount()

    def recount(self) -> None:
        """Rebuild true counts and the unsat list from the assignment."""
        x = self.assignment
        self.true_count = [sum(1 for lit in c if x[abs(lit) - 1] == (lit > 0)) for c in self.formula.clauses]
        self.unsat = [ci for ci, k in enumerate(self.true_count) if k == 0]
        self.where = [-1] * self.m
        for pos, ci in enumerate(self.unsat):
            self.where[ci] = pos
        self.best_unsat = len(self.unsat)
        self.stagnation = 0

    @property
    def num_unsat(self) -> int:
        return len(self.unsat)

    def is_satisfied(self) -> bool:
        return not self.unsat

    @property
    def best_sat(self) -> int:
        return self.m - self.best_unsat

    def break_value(self, v: int) -> int:
        """Clauses for which v is the only satisfied literal."""
        occ = self.occ_pos[v] if self.assignment[v] else self.occ_neg[v]
        tc = self.true_count
        b = 0
        for ci in occ:
            if tc[ci] == 1:
                b += 1
        return b

    def pick_unsat_clause(self, rng) -> int:
        if not self.unsat:
            raise NoUnsatClause("all clauses are satisfied")
        return self.unsat[int(rng.random() * len(self.unsat))]

    def flip(self, v: int, by_policy: bool = False) -> None:
        x = self.assignment
        tc, unsat, where = self.true_count, self.unsat, self.where
        if x[v]:
            gain, lose = self.occ_neg[v], self.occ_pos[v]
        else:
            gain, lose = self.occ_pos[v], self.occ_neg[v]
        before = len(unsat)
        x[v] = not x[v]
        for ci in gain:
            if tc[ci] == 0:
                # swap-remove from the unsat list
                pos = where[ci]
                last = unsat.pop()
                if last != ci:
                    unsat[pos] = last
                    where[last] = pos
                where[ci] = -1
            tc[ci] += 1
        for ci in lose:
            tc[ci] -= 1
            if tc[ci] == 0:
                where[ci] = len(unsat)
                unsat.append(ci)
        self.ops += len(gain) + len(lose)
        self.t += 1
        self.age1[v] = self.t
        if by_policy:
            self.age2[v] = self.t
        # stagnation counts flips since the last flip that satisfied more clauses
        if len(unsat) < before:
            self.stagnation = 0
        else:
            self.stagnation += 1
        if len(unsat) < self.best_unsat:
            self.best_unsat = len(unsat)


def random_assignment(n: int, rng) -> list[bool]:
    return [rng.random() < 0.5 for _ in range(n)]


def init_state(formula: CnfFormula, rng=None, assignment: Optional[Sequence[bool]] = None) -> SolverState:
    """Fresh state from a uniform random assignment (or a given one)."""
    if assignment is None:
        if rng is None:
            raise ValueError("need an rng or an explicit assignment")
        assignment = random_assignment(formula.num_vars, rng)
    return SolverState(formula, assignment)


@dataclass(slots=True)
class StepRecord:
    """One variable choice, with whatever the picker chose to expose."""
    t: int
    clause: int
    candidates: tuple
    action: int
    noise_branch: bool
    features: Optional[list] = None
    probs: Optional[list] = None
    breaks: Optional[list] = None
    delta: float = 0.0
    p_noise: Optional[float] = None
    try_index: int = 0

    @property
    def action_index(self) -> int:
        return self.candidates.index(self.action)

    def to_json(self) -> str:
        return json.dumps({
            "try": self.try_index, "t": self.t, "clause": self.clause,
            "candidates": [v + 1 for v in self.candidates],
            "features": self.features, "probs": self.probs, "breaks": self.breaks,
            "delta": self.delta, "p_noise": self.p_noise,
            "action": self.action + 1, "noise_branch": self.noise_branch,
        })


# picker(state, clause, rng, record) -> (variable, chosen_by_scoring, StepRecord or None)
Picker = Callable[[SolverState, int, object, bool], tuple]


def walksat_pickvar(s: SolverState, c: int, p: float, rng) -> tuple[int, bool]:
    """Random variable of clause c with probability p, else a least-break one.

    Ties among least-break variables are broken uniformly.  Returns the
    variable and whether the greedy branch made the choice.
    """
    vs = s.clause_vars[c]
    if rng.random() < p:
        return vs[int(rng.random() * len(vs))], False
    best = None
    ties: list[int] = []
    for v in vs:
        b = s.break_value(v)
        if best is None or b < best:
            best, ties = b, [v]
        elif b == best:
            ties.append(v)
    if len(ties) == 1:
        return ties[0], True
    return ties[int(rng.random() * len(ties))], True


class WalkSAT:
    """The baseline picker: fixed noise p, least break value otherwise."""

    def __init__(self, p: float = 0.5):
        if not 0.0 <= p <= 1.0:
            raise ValueError("noise must be in [0, 1]")
        self.p = p

    def __call__(self, s: SolverState, c: int, rng, record: bool = False):
        v, greedy = walksat_pickvar(s, c, self.p, rng)
        if not record:
            return v, greedy, None
        vs = s.clause_vars[c]
        rec = StepRecord(s.t + 1, c, vs, v, not greedy,
                         breaks=[s.break_value(u) for u in vs], p_noise=self.p)
        return v, greedy, rec

    def describe(self) -> str:
        return f"walksat(p={self.p:g})"


@dataclass(frozen=True)
class SlsConfig:
    max_flips: int = 10_000
    max_tries: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_flips < 1 or self.max_tries < 1:
            raise ValueError("max_flips and max_tries must be at least 1")


@dataclass
class SlsOutcome:
    solved: bool
    witness: Optional[tuple[bool, ...]]
    flips_total: int
    flips_last_try: int
    tries_used: int
    trace: Optional[list] = field(default=None, repr=False)


def run_sls(formula: CnfFormula, config: SlsConfig, picker: Picker, *,
            trace: bool = False, on_step: Optional[Callable[[SolverState], None]] = None) -> SlsOutcome:
    """Restarting local search: up to max_tries tries of max_flips flips.

    Satisfaction is checked before every pick and once more after the
    final flip of a try.  Try ``i`` draws its initial assignment from its
    own substream of the seed, so two pickers run with the same seed start
    every try from the same assignment.
    """
    rng = substream(config.rng_seed, PICK_STREAM)
    steps: Optional[list] = [] if trace else None
    total = 0
    for attempt in range(config.max_tries):
        s = init_state(formula, substream(config.rng_seed, INIT_STREAM, attempt))
        flips = 0
        unsat = s.unsat
        while flips < config.max_flips and unsat:
            if on_step is not None:
                on_step(s)
            c = unsat[int(rng.random() * len(unsat))]
            v, greedy, rec = picker(s, c, rng, trace)
            if rec is not None:
                rec.try_index = attempt
                steps.append(rec)
            s.flip(v, greedy)
            flips += 1
        total += flips
        if not unsat:
            return SlsOutcome(True, tuple(s.assignment), total, flips, attempt + 1, steps)
    return SlsOutcome(False, None, total, 0, config.max_tries, steps)


def write_trace(steps: Sequence[StepRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in steps:
            fh.write(rec.to_json() + "\n")
