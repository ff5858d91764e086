"""CNF formulas, DIMACS I/O and assignment evaluation.

Clauses are stored as tuples of signed DIMACS integers (``3`` is x3,
``-3`` is not x3).  Assignments are sequences of booleans where index
``i`` holds the value of variable ``i + 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Iterable, NamedTuple, Sequence, Union


class CnfError(ValueError):
    pass


class MalformedHeader(CnfError):
    pass


class VariableOutOfRange(CnfError):
    pass


class ClauseCountMismatch(CnfError):
    pass


class TautologicalClause(CnfError):
    pass


class EmptyClause(CnfError):
    pass


class LengthMismatch(CnfError):
    pass


class Literal(NamedTuple):
    var: int
    negated: bool

    @classmethod
    def from_int(cls, lit: int) -> "Literal":
        return cls(abs(lit), lit < 0)

    def to_int(self) -> int:
        return -self.var if self.negated else self.var


def normalize_clause(lits: Iterable[int]) -> tuple[int, ...]:
    """Drop repeated literals, keeping first-occurrence order.

    Raises on empty or tautological input.
    """
    out: list[int] = []
    seen: set[int] = set()
    for lit in lits:
        if lit == 0:
            raise CnfError("0 is not a literal")
        if -lit in seen:
            raise TautologicalClause(f"clause contains {abs(lit)} and -{abs(lit)}")
        if lit not in seen:
            seen.add(lit)
            out.append(lit)
    if not out:
        raise EmptyClause("empty clause")
    return tuple(out)


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple[tuple[int, ...], ...]
    comments: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        clauses = tuple(normalize_clause(c) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        if not clauses:
            raise CnfError("a formula needs at least one clause")
        if self.num_vars < 1:
            raise CnfError("a formula needs at least one variable")
        for c in clauses:
            for lit in c:
                if abs(lit) > self.num_vars:
                    raise VariableOutOfRange(f"literal {lit} exceeds {self.num_vars} variables")

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def literals(self, i: int) -> list[Literal]:
        return [Literal.from_int(l) for l in self.clauses[i]]


Source = Union[str, bytes, IO]


def parse_dimacs(source: Source) -> CnfFormula:
    """Read a DIMACS CNF formula from text, bytes or an open file.

    Clauses may span lines; each is terminated by ``0``.  Repeated
    literals are dropped, tautologies and empty clauses are rejected.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")

    comments: list[str] = []
    header = None
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("c"):
            comments.append(line[1:].strip())
            continue
        if line.startswith("%"):
            # some generators end the file with "%\n0"
            break
        if line.startswith("p"):
            if header is not None:
                raise MalformedHeader(f"line {lineno}: second header")
            fields = line.split()
            if len(fields) != 4 or fields[1] != "cnf":
                raise MalformedHeader(f"line {lineno}: bad header {line!r}")
            try:
                header = (int(fields[2]), int(fields[3]))
            except ValueError:
                raise MalformedHeader(f"line {lineno}: bad header {line!r}") from None
            if header[0] < 1 or header[1] < 1:
                raise MalformedHeader(f"line {lineno}: counts must be positive")
            continue
        if header is None:
            raise MalformedHeader(f"line {lineno}: clause before header")
        try:
            nums = [int(tok) for tok in line.split()]
        except ValueError:
            raise CnfError(f"line {lineno}: non-integer token") from None
        for lit in nums:
            if lit == 0:
                clauses.append(normalize_clause(current))
                current = []
            elif abs(lit) > header[0]:
                raise VariableOutOfRange(f"line {lineno}: literal {lit} exceeds {header[0]}")
            else:
                current.append(lit)
    if header is None:
        raise MalformedHeader("missing 'p cnf' header")
    if current:
        # tolerate a missing final terminator
        clauses.append(normalize_clause(current))
    if len(clauses) != header[1]:
        raise ClauseCountMismatch(f"header declares {header[1]} clauses, found {len(clauses)}")
    return CnfFormula(header[0], tuple(clauses), tuple(comments))


def write_dimacs(formula: CnfFormula) -> bytes:
    lines = [f"p cnf {formula.num_vars} {formula.num_clauses}"]
    lines.extend(" ".join(map(str, c)) + " 0" for c in formula.clauses)
    return ("\n".join(lines) + "\n").encode("utf-8")


def read_cnf(path) -> CnfFormula:
    with open(path, "rb") as fh:
        return parse_dimacs(fh)


def write_cnf(formula: CnfFormula, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_dimacs(formula))


def _check_length(formula: CnfFormula, x: Sequence[bool]) -> None:
    if len(x) != formula.num_vars:
        raise LengthMismatch(f"assignment has {len(x)} values, formula has {formula.num_vars} variables")


def clause_satisfied(clause: Sequence[int], x: Sequence[bool]) -> bool:
    for lit in clause:
        if x[abs(lit) - 1] == (lit > 0):
            return True
    return False


def count_satisfied(formula: CnfFormula, x: Sequence[bool]) -> int:
    _check_length(formula, x)
    return sum(1 for c in formula.clauses if clause_satisfied(c, x))


def evaluate(formula: CnfFormula, x: Sequence[bool]) -> bool:
    _check_length(formula, x)
    return all(clause_satisfied(c, x) for c in formula.clauses)
