#!/usr/bin/python
# -*- coding:utf-8 -*-
"""
kCNF formulas: DIMACS parsing and serialization, validation, evaluation
and a brute-force satisfiability oracle.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from services.errors import ValidationError, check_guard

logger = logging.getLogger(__name__)

_SAT_CHUNK_BITS = 16


@dataclass(frozen=True)
class Literal:
    variable: int  # 1-based
    negated: bool = False

    def to_int(self) -> int:
        return -self.variable if self.negated else self.variable

    @classmethod
    def from_int(cls, value: int) -> 'Literal':
        return cls(abs(value), value < 0)

    def satisfied_by(self, bit: int) -> bool:
        return bool(bit) != self.negated


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: Tuple[Tuple[Literal, ...], ...] = field(default_factory=tuple)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    @property
    def max_width(self) -> int:
        return max((len(c) for c in self.clauses), default=0)

    @classmethod
    def from_ints(cls, num_vars: int, clauses: Sequence[Sequence[int]]) -> 'CnfFormula':
        """Build a formula from DIMACS-style signed integers"""
        return cls(num_vars, tuple(tuple(Literal.from_int(v) for v in c) for c in clauses))

    def invariant_violations(self) -> List[str]:
        """
        List every broken formula invariant

        Returns:
            List[str]: Human-readable problems, empty when the formula is well formed
        """
        problems = []
        if self.num_vars < 0:
            problems.append(f"negative variable count {self.num_vars}")
        for i, clause in enumerate(self.clauses):
            if not clause:
                problems.append(f"clause {i + 1} is empty")
                continue
            seen = set()
            for lit in clause:
                if lit.variable < 1 or lit.variable > self.num_vars:
                    problems.append(f"clause {i + 1}: variable {lit.variable} out of range 1..{self.num_vars}")
                if lit.variable in seen:
                    problems.append(f"clause {i + 1}: variable {lit.variable} appears twice")
                seen.add(lit.variable)
        return problems


@dataclass
class ValidationReport:
    valid: bool
    k: int
    num_vars: int
    num_clauses: int
    max_width: int
    offending_clauses: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'valid': self.valid,
            'k': self.k,
            'n': self.num_vars,
            'm': self.num_clauses,
            'k_max': self.max_width,
            'offending_clauses': self.offending_clauses,
        }


def parse_dimacs(text: str) -> CnfFormula:
    """
    Parse DIMACS CNF text

    Args:
        text (str): File contents (`c` comments, `p cnf n m` header, 0-terminated clauses)

    Returns:
        CnfFormula: Clauses in file order

    Raises:
        ValidationError: On a malformed header, out-of-range literal, duplicate
            variable inside a clause, empty clause or clause-count mismatch
    """
    num_vars = None
    declared_clauses = None
    clauses = []
    current = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('c') or line.startswith('%'):
            continue
        if line.startswith('p'):
            parts = line.split()
            if num_vars is not None:
                raise ValidationError(f"line {line_no}: duplicate header")
            if len(parts) != 4 or parts[1] != 'cnf':
                raise ValidationError(f"line {line_no}: malformed header {line!r}")
            try:
                num_vars, declared_clauses = int(parts[2]), int(parts[3])
            except ValueError:
                raise ValidationError(f"line {line_no}: malformed header {line!r}")
            if num_vars < 0 or declared_clauses < 0:
                raise ValidationError(f"line {line_no}: negative counts in header")
            continue
        if num_vars is None:
            raise ValidationError(f"line {line_no}: clause before header")
        for tok in line.split():
            try:
                value = int(tok)
            except ValueError:
                raise ValidationError(f"line {line_no}: bad literal {tok!r}")
            if value == 0:
                if not current:
                    raise ValidationError(f"line {line_no}: empty clause")
                clauses.append(current)
                current = []
                continue
            if abs(value) > num_vars:
                raise ValidationError(f"line {line_no}: literal {value} out of range 1..{num_vars}")
            current.append(value)

    if num_vars is None:
        raise ValidationError("missing 'p cnf' header")
    if current:
        clauses.append(current)
    if len(clauses) != declared_clauses:
        raise ValidationError(f"header declares {declared_clauses} clauses, found {len(clauses)}")

    formula = CnfFormula.from_ints(num_vars, clauses)
    problems = formula.invariant_violations()
    if problems:
        raise ValidationError("; ".join(problems))
    logger.debug(f"Parsed DIMACS formula n={num_vars} m={len(clauses)}")
    return formula


def serialize_dimacs(formula: CnfFormula) -> str:
    """Canonical DIMACS text for a formula"""
    lines = [f"p cnf {formula.num_vars} {formula.num_clauses}"]
    for clause in formula.clauses:
        lines.append(" ".join(str(lit.to_int()) for lit in clause) + " 0")
    return "\n".join(lines) + "\n"


def validate_kcnf(formula: CnfFormula, k: int) -> ValidationReport:
    """
    Check that the formula is a well-formed kCNF

    Args:
        formula (CnfFormula): Formula to check
        k (int): Maximum clause width (an upper bound)

    Returns:
        ValidationReport: valid iff all invariants hold and every clause has width <= k
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    offending = []
    for i, clause in enumerate(formula.clauses):
        if len(clause) > k:
            offending.append({
                'index': i + 1,
                'clause': [lit.to_int() for lit in clause],
                'reason': f"width {len(clause)} > k={k}",
            })
    for problem in formula.invariant_violations():
        offending.append({'index': None, 'clause': None, 'reason': problem})
    return ValidationReport(
        valid=not offending,
        k=k,
        num_vars=formula.num_vars,
        num_clauses=formula.num_clauses,
        max_width=formula.max_width,
        offending_clauses=offending,
    )


def _as_bits(assignment, n: int) -> Tuple[int, ...]:
    bits = tuple(int(b) for b in assignment)
    if len(bits) != n:
        raise ValidationError(f"assignment has length {len(bits)}, formula has {n} variables")
    if any(b not in (0, 1) for b in bits):
        raise ValidationError(f"assignment must be a bit string, got {assignment!r}")
    return bits


def clause_value(clause: Sequence[Literal], bits: Sequence[int]) -> int:
    """1 iff some literal of the clause is satisfied by bits (bits[0] is x1)"""
    return int(any(lit.satisfied_by(bits[lit.variable - 1]) for lit in clause))


def evaluate(formula: CnfFormula, assignment) -> int:
    """
    Evaluate Φ(x)

    Args:
        formula (CnfFormula): The formula
        assignment (str | Sequence[int]): Bits x1..xn, e.g. "01"

    Returns:
        int: 1 iff every clause contains a satisfied literal
    """
    bits = _as_bits(assignment, formula.num_vars)
    return int(all(clause_value(c, bits) for c in formula.clauses))


def count_satisfied(formula: CnfFormula, assignment) -> int:
    """Number of satisfied clauses"""
    bits = _as_bits(assignment, formula.num_vars)
    return sum(clause_value(c, bits) for c in formula.clauses)


def brute_force_sat(formula: CnfFormula) -> Optional[str]:
    """
    Exhaustive search for the lexicographically smallest model

    Args:
        formula (CnfFormula): The formula

    Returns:
        str: Satisfying assignment as a bit string (x1 first), or None

    Raises:
        GuardError: If n exceeds the configured enumeration guard
    """
    n = formula.num_vars
    check_guard('variables for brute-force SAT', n, settings.sat_guard)
    if n == 0:
        return '' if not formula.clauses else None

    # x1 is the most significant bit so integer order is lexicographic order
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    chunk = 1 << min(n, _SAT_CHUNK_BITS)
    for start in range(0, 1 << n, chunk):
        values = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        bits = ((values[:, None] >> shifts[None, :]) & 1).astype(bool)
        ok = np.ones(len(values), dtype=bool)
        for clause in formula.clauses:
            sat = np.zeros(len(values), dtype=bool)
            for lit in clause:
                column = bits[:, lit.variable - 1]
                sat |= ~column if lit.negated else column
            ok &= sat
            if not ok.any():
                break
        hits = np.flatnonzero(ok)
        if hits.size:
            return format(int(values[hits[0]]), f'0{n}b')
    return None


def random_kcnf(n: int, m: int, k: int, seed: int = 0) -> CnfFormula:
    """
    Seeded random formula with m clauses of width min(k, n) over distinct variables

    Args:
        n (int): Variable count (>= 1)
        m (int): Clause count
        k (int): Clause width
        seed (int): RNG seed

    Returns:
        CnfFormula: The formula
    """
    if n < 1 or k < 1:
        raise ValidationError(f"need n >= 1 and k >= 1, got n={n} k={k}")
    rng = np.random.default_rng(seed)
    width = min(k, n)
    clauses = []
    for _ in range(m):
        variables = rng.choice(np.arange(1, n + 1), size=width, replace=False)
        signs = rng.integers(0, 2, size=width)
        clauses.append([int(v) if s else -int(v) for v, s in zip(variables, signs)])
    return CnfFormula.from_ints(n, clauses)
