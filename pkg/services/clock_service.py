#!/usr/bin/python
# -*- coding:utf-8 -*-
"""
Clock registers for the circuit-to-Hamiltonian construction.

Three schedules are supported: the unary clock, the Johnson (a,d) clock whose
legal states are the d-subsets of [a] along a revolving-door path, and the
dual clock that pairs an (a,d-1) Johnson clock with an a-qubit unary clock
sweeping back and forth. Clock qubits are 0-based inside the clock register;
Table-style 1-based positions are converted where the operators are built.
"""
import logging
import math
from itertools import combinations
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from services.cache_service import cache_service
from services.errors import ValidationError, check_guard
from services.operator_utils import basis_bits, outer_bits, projector_bits

logger = logging.getLogger(__name__)

ROLES = ('stay', 'add', 'add2')


# --- Johnson paths -----------------------------------------------------------------------

def _revolving_door(n: int, k: int) -> List[Tuple[int, ...]]:
    if k == 0:
        return [()]
    if k == n:
        return [tuple(range(1, n + 1))]
    head = _revolving_door(n - 1, k)
    tail = [s + (n,) for s in reversed(_revolving_door(n - 1, k - 1))]
    return head + tail


@dataclass(frozen=True)
class JohnsonPath:
    a: int
    d: int
    subsets: Tuple[Tuple[int, ...], ...]  # 1-based elements, sorted

    @property
    def T(self) -> int:
        return len(self.subsets) - 1

    def indicator(self, index: int) -> str:
        members = set(self.subsets[index])
        return ''.join('1' if i in members else '0' for i in range(1, self.a + 1))


def revolving_door_path(a: int, d: int) -> JohnsonPath:
    """
    Hamiltonian path through J(a,d) via the revolving-door combination Gray code

    Args:
        a (int): Universe size
        d (int): Subset size, 1 <= d < a

    Returns:
        JohnsonPath: C(a,d) subsets, consecutive ones sharing d-1 elements
    """
    if d < 1 or d >= a:
        raise ValidationError(f"Johnson path needs 1 <= d < a, got a={a} d={d}")
    return cache_service.memoize(
        'johnson_path', (a, d),
        lambda: JohnsonPath(a, d, tuple(_revolving_door(a, d))))


def g_map(t: int, a: int, total: Optional[int] = None) -> Tuple[int, int]:
    """
    Timestep -> (t1, t2) for the dual clock; t2 sweeps up for odd t1, down for even t1

    Args:
        t (int): Timestep
        a (int): Unary clock length
        total (int, optional): T, to range-check t

    Returns:
        Tuple[int, int]: (t1, t2) with t1 >= 1 and 0 <= t2 <= a
    """
    if t < 0 or (total is not None and t > total):
        raise ValidationError(f"timestep {t} outside 0..{total}")
    m = t % (2 * a + 2)
    return 1 + t // (a + 1), min(m, 2 * a + 1 - m)


def g_inverse(t1: int, t2: int, a: int) -> int:
    base = (t1 - 1) * (a + 1)
    return base + (t2 if t1 % 2 == 1 else a - t2)


# --- schedules -----------------------------------------------------------------------------

@dataclass(frozen=True)
class ClockSchedule:
    variant: str  # 'unary' | 'johnson' | 'dual'
    T: int
    width: int
    a: Optional[int] = None
    d: Optional[int] = None
    path: Optional[JohnsonPath] = field(default=None, compare=False)

    @classmethod
    def unary(cls, T: int) -> 'ClockSchedule':
        if T < 1:
            raise ValidationError(f"unary clock needs T >= 1, got {T}")
        return cls('unary', T, T)

    @classmethod
    def johnson(cls, a: int, d: int) -> 'ClockSchedule':
        path = revolving_door_path(a, d)
        return cls('johnson', path.T, a, a, d, path)

    @classmethod
    def dual(cls, a: int, d: int) -> 'ClockSchedule':
        if d < 2:
            raise ValidationError("the dual clock needs d >= 2; d = 1 is the unary clock")
        path = revolving_door_path(a, d - 1)
        return cls('dual', math.comb(a, d - 1) * (a + 1) - 1, 2 * a, a, d, path)

    @classmethod
    def for_parameters(cls, params) -> 'ClockSchedule':
        """Schedule matching a canonicalized circuit's ClockParameters"""
        if params.a is None:
            return cls.unary(params.T)
        return cls.dual(params.a, params.d)

    @property
    def locality_limit(self) -> int:
        if self.variant == 'unary':
            return 2
        return self.d + 1

    def check_t(self, t: int, upper: Optional[int] = None) -> None:
        upper = self.T if upper is None else upper
        if t < 0 or t > upper:
            raise ValidationError(f"timestep {t} outside 0..{upper}")

    def g(self, t: int) -> Tuple[int, int]:
        if self.variant != 'dual':
            raise ValidationError("g is defined for the dual clock only")
        return g_map(t, self.a, self.T)


def legal_state(schedule: ClockSchedule, t: int) -> str:
    """
    Encoded clock basis string |γ_t⟩

    Args:
        schedule (ClockSchedule): Clock
        t (int): Timestep, 0..T

    Returns:
        str: Bit string over the clock register
    """
    schedule.check_t(t)
    if schedule.variant == 'unary':
        return '1' * t + '0' * (schedule.T - t)
    if schedule.variant == 'johnson':
        return schedule.path.indicator(t)
    t1, t2 = schedule.g(t)
    a = schedule.a
    return schedule.path.indicator(t1 - 1) + '1' * t2 + '0' * (a - t2)


def legal_states(schedule: ClockSchedule) -> List[str]:
    return [legal_state(schedule, t) for t in range(schedule.T + 1)]


# --- clock operators -----------------------------------------------------------------------

@dataclass(frozen=True)
class ClockOp:
    role: str
    t: int
    support: Tuple[int, ...]
    ket: Tuple[int, ...]
    bra: Tuple[int, ...]

    @property
    def matrix(self) -> np.ndarray:
        return outer_bits(self.ket, self.bra)

    @property
    def locality(self) -> int:
        return len(self.support)

    @property
    def is_diagonal(self) -> bool:
        return self.ket == self.bra

    def dagger(self) -> 'ClockOp':
        return ClockOp(self.role + '†', self.t, self.support, self.bra, self.ket)

    @classmethod
    def from_assignment(cls, role: str, t: int, assignment: Dict[int, Tuple[int, int]]) -> 'ClockOp':
        """assignment maps clock qubit -> (ket bit, bra bit)"""
        support = tuple(sorted(assignment))
        return cls(role, t, support,
                   tuple(assignment[q][0] for q in support),
                   tuple(assignment[q][1] for q in support))


def _unit(bits: Dict[int, int]) -> Dict[int, Tuple[int, int]]:
    return {q: (b, b) for q, b in bits.items()}


def pause_assignment(path: JohnsonPath, index: int, offset: int = 0) -> Dict[int, Tuple[int, int]]:
    """P = |1^d⟩⟨1^d| on S_index"""
    return {offset + e - 1: (1, 1) for e in path.subsets[index]}


def forward_assignment(path: JohnsonPath, index: int, offset: int = 0) -> Dict[int, Tuple[int, int]]:
    """
    F maps |γ_{index-1}⟩ to |γ_index⟩: |0⟩⟨1| on S_{index-1}\\S_index,
    |1⟩⟨0| on S_index\\S_{index-1}, |1⟩⟨1| on the intersection
    """
    prev, cur = set(path.subsets[index - 1]), set(path.subsets[index])
    assignment = {}
    for e in prev - cur:
        assignment[offset + e - 1] = (0, 1)
    for e in cur - prev:
        assignment[offset + e - 1] = (1, 0)
    for e in prev & cur:
        assignment[offset + e - 1] = (1, 1)
    return assignment


def compose_assignments(later: Dict[int, Tuple[int, int]], earlier: Dict[int, Tuple[int, int]]):
    """later · earlier for outer-product operators; None when the product vanishes"""
    result = dict(earlier)
    for q, (k2, b2) in later.items():
        if q in earlier:
            k1, b1 = earlier[q]
            if k1 != b2:
                return None
            result[q] = (k2, b1)
        else:
            result[q] = (k2, b2)
    return result


def pause_op(path: JohnsonPath, t: int) -> ClockOp:
    return ClockOp.from_assignment('P', t, pause_assignment(path, t))


def forward_op(path: JohnsonPath, t: int) -> ClockOp:
    if t < 1 or t > path.T:
        raise ValidationError(f"forward operator index {t} outside 1..{path.T}")
    return ClockOp.from_assignment('F', t, forward_assignment(path, t))


def _unary_stay(T: int, t: int, offset: int = 0) -> Dict[int, Tuple[int, int]]:
    if t == 0:
        return _unit({offset: 0})
    if t == T:
        return _unit({offset + T - 1: 1})
    return _unit({offset + t - 1: 1, offset + t: 0})


def _role_range(schedule: ClockSchedule, role: str) -> int:
    return {'stay': schedule.T, 'add': schedule.T - 1, 'add2': schedule.T - 2}[role]


def build_clock_op(schedule: ClockSchedule, role: str, t: int) -> ClockOp:
    """
    Local implementation of stay(t), add(t) or add2(t)

    Args:
        schedule (ClockSchedule): Clock
        role (str): 'stay', 'add' or 'add2'
        t (int): Timestep inside the role's range

    Returns:
        ClockOp: Outer-product operator on a few clock qubits
    """
    if role not in ROLES:
        raise ValidationError(f"unknown clock role {role!r}")
    schedule.check_t(t, _role_range(schedule, role))

    if schedule.variant == 'unary':
        if role == 'stay':
            assignment = _unary_stay(schedule.T, t)
        elif role == 'add':
            assignment = {t: (1, 0)}
        else:
            assignment = {t: (1, 0), t + 1: (1, 0)}
        return ClockOp.from_assignment(role, t, assignment)

    path = schedule.path
    if schedule.variant == 'johnson':
        if role == 'stay':
            assignment = pause_assignment(path, t)
        elif role == 'add':
            assignment = forward_assignment(path, t + 1)
        else:
            assignment = compose_assignments(forward_assignment(path, t + 2), forward_assignment(path, t + 1))
        return ClockOp.from_assignment(role, t, assignment)

    return ClockOp.from_assignment(role, t, _dual_assignment(schedule, role, t))


def _dual_assignment(schedule: ClockSchedule, role: str, t: int) -> Dict[int, Tuple[int, int]]:
    a, path = schedule.a, schedule.path
    last = len(path.subsets)
    t1, t2 = schedule.g(t)
    odd = t1 % 2 == 1
    u = a  # offset of the unary register; unary position p lives at u + p - 1

    def pause():
        return pause_assignment(path, t1 - 1)

    def forward():
        if t1 >= last:
            raise ValidationError(f"{role}({t}) at (t1={t1}, t2={t2}) has no next Johnson state")
        return forward_assignment(path, t1)

    if role == 'stay':
        return {**pause(), **_unary_stay(a, t2, u)}

    if role == 'add':
        if odd:
            if t2 < a:
                return {**pause(), u + t2: (1, 0)}
            return {**forward(), u + a - 1: (1, 1)}
        if t2 >= 1:
            return {**pause(), u + t2 - 1: (0, 1)}
        return {**forward(), u: (0, 0)}

    if odd:
        if t2 <= a - 2:
            return {**pause(), u + t2: (1, 0), u + t2 + 1: (1, 0)}
        if t2 == a - 1:
            return {**forward(), u + a - 1: (1, 0)}
        return {**forward(), u + a - 1: (0, 1)}
    if t2 >= 2:
        return {**pause(), u + t2 - 2: (0, 1), u + t2 - 1: (0, 1)}
    if t2 == 1:
        return {**forward(), u: (0, 1)}
    return {**forward(), u: (1, 0)}


# --- clock penalties ---------------------------------------------------------------------------

class ClockTerm(NamedTuple):
    support: Tuple[int, ...]
    matrix: np.ndarray
    coefficient: float


def build_h_stab(a: int, d: int, offset: int = 0) -> List[ClockTerm]:
    """
    C(a,d)·H_{>d} + H_{<d} - (C(a,d)-1)·I, zero exactly on weight-d strings

    Args:
        a (int): Register size
        d (int): Target weight, 1 <= d < a
        offset (int): First qubit of the register

    Returns:
        List[ClockTerm]: Local terms; the identity shift has empty support
    """
    if d < 1 or d >= a:
        raise ValidationError(f"H_stab needs 1 <= d < a, got a={a} d={d}")
    big = math.comb(a, d)
    terms = []
    ones_up = projector_bits([1] * (d + 1))
    for subset in _subsets(a, d + 1):
        terms.append(ClockTerm(tuple(offset + q for q in subset), ones_up, float(big)))
    not_all_ones = np.eye(1 << d, dtype=complex) - projector_bits([1] * d)
    for subset in _subsets(a, d):
        terms.append(ClockTerm(tuple(offset + q for q in subset), not_all_ones, 1.0))
    terms.append(ClockTerm((), np.ones((1, 1), dtype=complex), -float(big - 1)))
    return terms


def _subsets(a: int, size: int) -> List[Tuple[int, ...]]:
    return list(combinations(range(a), size))


def _unary_penalty(length: int, offset: int = 0) -> List[ClockTerm]:
    p01 = projector_bits([0, 1])
    return [ClockTerm((offset + i, offset + j), p01, 1.0) for i, j in _subsets(length, 2)]


def build_h_clock(schedule: ClockSchedule) -> List[ClockTerm]:
    """
    Penalty whose kernel on basis states is exactly the legal clock states

    Returns:
        List[ClockTerm]: Unary 01-penalties, H_stab, or H_stab(a,d-1) plus the unary penalty
    """
    if schedule.variant == 'unary':
        return _unary_penalty(schedule.T)
    if schedule.variant == 'johnson':
        return build_h_stab(schedule.a, schedule.d)
    return build_h_stab(schedule.a, schedule.d - 1) + _unary_penalty(schedule.a, schedule.a)


def diagonal_energies(terms: Sequence[ClockTerm], width: int) -> np.ndarray:
    """⟨x|Σ terms|x⟩ for every basis string x of the register"""
    bits = basis_bits(width)
    energies = np.zeros(1 << width)
    for term in terms:
        if not term.support:
            energies += term.coefficient * term.matrix[0, 0].real
            continue
        local = np.zeros(1 << width, dtype=np.int64)
        for q in term.support:
            local = (local << 1) | bits[:, q]
        energies += term.coefficient * np.real(np.diag(term.matrix))[local]
    return energies


# --- verification ------------------------------------------------------------------------------

@dataclass
class ConditionReport:
    schedule: str
    passed: bool
    checked: int
    violations: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {'schedule': self.schedule, 'passed': self.passed,
                'checked': self.checked, 'violations': self.violations[:50]}


_CONDITION = {'stay': 'C4', 'add': 'C5', 'add2': 'C6'}
_SHIFT = {'stay': 0, 'add': 1, 'add2': 2}


def verify_conditions(schedule: ClockSchedule,
                      op_builder: Optional[Callable[[ClockSchedule, str, int], ClockOp]] = None) -> ConditionReport:
    """
    Exhaustively check that every stay/add/add2 implementation acts like the ideal
    operator on |γ_t⟩ and never maps any other basis state into the legal subspace

    Args:
        schedule (ClockSchedule): Clock to check
        op_builder (Callable, optional): Replacement for build_clock_op

    Returns:
        ConditionReport: Violations tagged with condition, role, t and input state
    """
    width = schedule.width
    check_guard('clock width for exhaustive verification', width, settings.clock_exhaustive_guard)
    builder = op_builder or build_clock_op
    legal = legal_states(schedule)
    legal_index = {int(s, 2): t for t, s in enumerate(legal)}
    bits = basis_bits(width)
    indices = np.arange(1 << width, dtype=np.int64)

    violations = []
    checked = 0
    for role in ROLES:
        for t in range(_role_range(schedule, role) + 1):
            op = builder(schedule, role, t)
            checked += 1
            mask = np.ones(1 << width, dtype=bool)
            for q, b in zip(op.support, op.bra):
                mask &= bits[:, q] == b
            sources = indices[mask]
            ket_set = 0
            clear = 0
            for q, k in zip(op.support, op.ket):
                shift = width - 1 - q
                clear |= 1 << shift
                ket_set |= k << shift
            images = (sources & ~clear) | ket_set
            start = int(legal[t], 2)
            expected = int(legal[t + _SHIFT[role]], 2)
            hit = sources == start
            if not hit.any() or int(images[hit][0]) != expected:
                violations.append({'condition': _CONDITION[role], 'role': role, 't': t,
                                   'state': legal[t], 'reason': 'wrong action on the clock state'})
            for src, img in zip(sources[~hit], images[~hit]):
                if int(img) in legal_index:
                    violations.append({'condition': _CONDITION[role], 'role': role, 't': t,
                                       'state': format(int(src), f'0{width}b'),
                                       'reason': f"maps into legal state t={legal_index[int(img)]}"})
    passed = not violations
    if not passed:
        logger.warning(f"{schedule.variant} clock fails {len(violations)} condition checks")
    return ConditionReport(schedule.variant, passed, checked, violations)


def clock_table_csv(schedule: ClockSchedule) -> str:
    """timestep -> basis string table; dual clocks also list (t1, t2)"""
    rows = ['t,t1,t2,state' if schedule.variant == 'dual' else 't,state']
    for t in range(schedule.T + 1):
        state = legal_state(schedule, t)
        if schedule.variant == 'dual':
            t1, t2 = schedule.g(t)
            rows.append(f"{t},{t1},{t2},{state[:schedule.a]} {state[schedule.a:]}")
        else:
            rows.append(f"{t},{state}")
    return "\n".join(rows) + "\n"
