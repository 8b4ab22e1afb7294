"""CNF formulas, DIMACS I/O and the incremental search state.

Variables are 1-based at the public surface (DIMACS convention) and 0-based
inside arrays: public variable ``v`` lives at array index ``v - 1``.
"""

from __future__ import annotations

import itertools
import re
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _engine


class CNFError(ValueError):
    """Invalid formula or assignment."""


class DimacsError(CNFError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Literal(NamedTuple):
    variable: int
    polarity: bool = True

    @classmethod
    def from_dimacs(cls, value: int) -> "Literal":
        if value == 0:
            raise CNFError("0 is not a literal")
        return cls(abs(value), value > 0)

    def to_dimacs(self) -> int:
        return self.variable if self.polarity else -self.variable

    def __neg__(self) -> "Literal":
        return Literal(self.variable, not self.polarity)

    def __str__(self) -> str:
        return f"x{self.variable}" if self.polarity else f"~x{self.variable}"


def _clause_ints(ci: int, clause: Iterable, num_vars: int) -> tuple[int, ...]:
    lits = tuple(clause)
    if not all(type(l) is int for l in lits):
        lits = tuple(_as_literal(l).to_dimacs() for l in lits)
    if not lits:
        raise CNFError(f"clause {ci} is empty")
    variables = [abs(l) for l in lits]
    if 0 in variables:
        raise CNFError("0 is not a literal")
    if max(variables) > num_vars or len(set(variables)) != len(variables):
        seen = set()
        for v in variables:
            if v > num_vars:
                raise CNFError(f"clause {ci}: variable {v} exceeds declared n={num_vars}")
            if v in seen:
                raise CNFError(f"clause {ci}: variable {v} occurs twice")
            seen.add(v)
    return lits


def _as_literal(lit) -> Literal:
    if isinstance(lit, Literal):
        return lit
    if isinstance(lit, (int, np.integer)) and not isinstance(lit, bool):
        return Literal.from_dimacs(int(lit))
    raise CNFError(f"cannot interpret {lit!r} as a literal")


class Formula:
    """Immutable CNF formula with a literal -> clause occurrence index.

    Clauses may be given as DIMACS integers or :class:`Literal` tuples.  A
    clause may not mention the same variable twice, either as a repeat or
    as a complementary pair.
    """

    __slots__ = ("num_vars", "_ints", "_clauses", "arrays", "_occ_ptr", "_occ_clause")

    def __init__(self, num_vars: int, clauses: Iterable[Iterable]):
        num_vars = int(num_vars)
        if num_vars < 1:
            raise CNFError("a formula needs at least one variable")
        built = [_clause_ints(ci, clause, num_vars) for ci, clause in enumerate(clauses)]
        if not built:
            raise CNFError("a formula needs at least one clause")

        object.__setattr__(self, "num_vars", num_vars)
        object.__setattr__(self, "_ints", tuple(built))
        object.__setattr__(self, "_clauses", None)

        sizes = np.fromiter((len(c) for c in built), dtype=np.int64, count=len(built))
        clause_ptr = np.zeros(len(built) + 1, dtype=np.int64)
        np.cumsum(sizes, out=clause_ptr[1:])
        flat = np.fromiter(itertools.chain.from_iterable(built), dtype=np.int64, count=int(clause_ptr[-1]))
        lit_var = (np.abs(flat) - 1).astype(np.int32)
        lit_neg = (flat < 0).astype(np.uint8)
        codes = 2 * lit_var.astype(np.int64) + lit_neg
        owner = np.repeat(np.arange(len(built), dtype=np.int32), sizes)
        # stable sort keeps clause ids ascending within each literal's list
        order = np.argsort(codes, kind="stable")
        occ_clause = owner[order]
        occ_ptr = np.zeros(2 * num_vars + 1, dtype=np.int64)
        np.cumsum(np.bincount(codes, minlength=2 * num_vars), out=occ_ptr[1:])
        arrays = (lit_var, lit_neg, clause_ptr, occ_ptr, occ_clause)
        for arr in arrays:
            arr.flags.writeable = False
        object.__setattr__(self, "arrays", arrays)
        object.__setattr__(self, "_occ_ptr", occ_ptr)
        object.__setattr__(self, "_occ_clause", occ_clause)

    def __setattr__(self, name, value):
        raise AttributeError("Formula is immutable")

    def __reduce__(self):
        return (Formula, (self.num_vars, self.to_ints()))

    @classmethod
    def from_ints(cls, num_vars: int, clauses: Iterable[Iterable[int]]) -> "Formula":
        return cls(num_vars, clauses)

    @property
    def clauses(self) -> tuple[tuple[Literal, ...], ...]:
        if self._clauses is None:
            built = tuple(tuple(Literal(abs(l), l > 0) for l in c) for c in self._ints)
            object.__setattr__(self, "_clauses", built)
        return self._clauses

    @property
    def num_clauses(self) -> int:
        return len(self._ints)

    def to_ints(self) -> list[list[int]]:
        return [list(c) for c in self._ints]

    def occurrences(self, literal: Literal | int) -> tuple[int, ...]:
        """Ids of the clauses containing ``literal``, ascending."""
        lit = _as_literal(literal)
        if lit.variable > self.num_vars:
            raise CNFError(f"variable {lit.variable} out of range")
        code = 2 * (lit.variable - 1) + (not lit.polarity)
        lo, hi = self._occ_ptr[code], self._occ_ptr[code + 1]
        return tuple(int(c) for c in self._occ_clause[lo:hi])

    @property
    def occurrence_index(self) -> dict[Literal, tuple[int, ...]]:
        index = {}
        for v in range(1, self.num_vars + 1):
            for pol in (True, False):
                index[Literal(v, pol)] = self.occurrences(Literal(v, pol))
        return index

    def evaluate(self, assignment: Sequence[int]) -> int:
        """Number of clauses violated by ``assignment`` (plain recount)."""
        a = as_assignment(assignment, self.num_vars)
        return sum(
            1
            for clause in self._ints
            if not any(bool(a[abs(l) - 1]) == (l > 0) for l in clause)
        )

    def __eq__(self, other):
        if not isinstance(other, Formula):
            return NotImplemented
        return self.num_vars == other.num_vars and self._ints == other._ints

    def __hash__(self):
        return hash((self.num_vars, self._ints))

    def __repr__(self):
        return f"Formula(n={self.num_vars}, m={self.num_clauses})"


def as_assignment(values: Sequence[int], num_vars: int | None = None) -> np.ndarray:
    """Validate and copy a 0/1 sequence into a uint8 bit-vector."""
    a = np.array(values, dtype=np.int64).reshape(-1)
    if num_vars is not None and a.size != num_vars:
        raise CNFError(f"assignment has length {a.size}, formula has {num_vars} variables")
    if np.any((a != 0) & (a != 1)):
        raise CNFError("assignment entries must be 0 or 1")
    return a.astype(np.uint8)


_INT = re.compile(rb"-?\d+")


def parse_dimacs(data: bytes | str) -> Formula:
    """Parse DIMACS CNF text.

    Accepts CRLF line endings and stops at a ``%`` trailer line.  A clause
    may span several lines; a final clause missing its terminating 0 is
    accepted at end of input.
    """
    if isinstance(data, str):
        data = data.encode()
    header = None
    header_line = None
    clauses: list[list[int]] = []
    current: list[int] = []
    current_line = 0
    lineno = 0
    for lineno, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(b"c"):
            continue
        if line.startswith(b"%"):
            break
        if line.startswith(b"p"):
            if header is not None:
                raise DimacsError(f"duplicate header (first on line {header_line})", lineno)
            fields = line.split()
            if len(fields) != 4 or fields[1] != b"cnf":
                raise DimacsError(f"malformed header {line.decode(errors='replace')!r}", lineno)
            try:
                header = (int(fields[2]), int(fields[3]))
            except ValueError:
                raise DimacsError("header counts must be integers", lineno) from None
            if header[0] < 1 or header[1] < 1:
                raise DimacsError("header needs n >= 1 and m >= 1", lineno)
            header_line = lineno
            continue
        if header is None:
            raise DimacsError("clause data before 'p cnf' header", lineno)
        for tok in line.split():
            if not _INT.fullmatch(tok):
                raise DimacsError(f"non-integer token {tok.decode(errors='replace')!r}", lineno)
            value = int(tok)
            if not current:
                current_line = lineno
            if value == 0:
                if not current:
                    raise DimacsError("empty clause", lineno)
                clauses.append(_check_clause(current, header[0], current_line))
                current = []
                continue
            current.append(value)
    if header is None:
        raise DimacsError("missing 'p cnf' header", lineno or None)
    if current:
        clauses.append(_check_clause(current, header[0], current_line))
    if len(clauses) != header[1]:
        raise DimacsError(f"header declares {header[1]} clauses, found {len(clauses)}", lineno)
    return Formula(header[0], clauses)


def _check_clause(lits: list[int], num_vars: int, line: int) -> list[int]:
    seen = set()
    for lit in lits:
        var = abs(lit)
        if var > num_vars:
            raise DimacsError(f"variable {var} exceeds declared n={num_vars}", line)
        if var in seen:
            raise DimacsError(f"variable {var} occurs twice in one clause", line)
        seen.add(var)
    return lits


def read_dimacs(path) -> Formula:
    with open(path, "rb") as fh:
        return parse_dimacs(fh.read())


def write_dimacs(formula: Formula, comments: Iterable[str] = ()) -> bytes:
    lines = [f"c {text}" for text in comments]
    lines.append(f"p cnf {formula.num_vars} {formula.num_clauses}")
    for clause in formula._ints:
        lines.append(" ".join(map(str, clause)) + " 0")
    return ("\n".join(lines) + "\n").encode()


class SearchState:
    """Assignment plus incremental clause bookkeeping.

    ``sat_count[c]`` is the number of true literals of clause ``c`` and the
    violated clauses are kept in a dense array with a position index, so a
    uniform pick and every flip update are cheap.
    """

    __slots__ = ("formula", "arrays")

    def __init__(self, formula: Formula, arrays):
        self.formula = formula
        self.arrays = arrays

    @property
    def assignment(self) -> np.ndarray:
        return self.arrays[0]

    @property
    def sat_count(self) -> np.ndarray:
        return self.arrays[1]

    @property
    def energy(self) -> int:
        return int(self.arrays[4][0])

    @property
    def violated(self) -> list[int]:
        return [int(c) for c in self.arrays[2][: self.energy]]

    def is_violated(self, clause_id: int) -> bool:
        return bool(self.arrays[3][clause_id] >= 0)

    def _index(self, variable: int) -> int:
        if not 1 <= variable <= self.formula.num_vars:
            raise IndexError(f"variable {variable} out of range 1..{self.formula.num_vars}")
        return variable - 1

    def flip(self, variable: int) -> "SearchState":
        _engine.flip(self._index(variable), self.formula.arrays, self.arrays)
        return self

    def break_value(self, variable: int) -> int:
        return int(_engine.break_value(self._index(variable), self.formula.arrays, self.arrays))

    def make_value(self, variable: int) -> int:
        return int(_engine.make_value(self._index(variable), self.formula.arrays, self.arrays))

    def copy(self) -> "SearchState":
        return SearchState(self.formula, tuple(a.copy() for a in self.arrays))

    def __eq__(self, other):
        # the violated list's order is an artifact of update history, so only
        # its membership takes part in equality
        if not isinstance(other, SearchState):
            return NotImplemented
        return (
            self.formula is other.formula
            and np.array_equal(self.assignment, other.assignment)
            and np.array_equal(self.sat_count, other.sat_count)
            and set(self.violated) == set(other.violated)
            and np.array_equal(self.arrays[3] >= 0, other.arrays[3] >= 0)
        )

    __hash__ = None

    def __repr__(self):
        return f"SearchState(energy={self.energy}, n={self.formula.num_vars})"


def init_state(formula: Formula, assignment: Sequence[int]) -> SearchState:
    a = as_assignment(assignment, formula.num_vars)
    m = formula.num_clauses
    arrays = (
        a,
        np.zeros(m, dtype=np.int32),
        np.zeros(m, dtype=np.int32),
        np.full(m, -1, dtype=np.int32),
        np.zeros(1, dtype=np.int64),
    )
    _engine.recount(formula.arrays, arrays)
    return SearchState(formula, arrays)
