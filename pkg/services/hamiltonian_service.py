#!/usr/bin/python
# -*- coding:utf-8 -*-
"""
Local Hamiltonians and the circuit-to-Hamiltonian construction.

The combined register puts the N circuit qubits first (0..N-1) and the clock
register after them. Dense vectors use qubit 0 as the most significant bit.
"""
import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from services.circuit_service import (CanonicalCircuit, Circuit, GateKind, _SINGLE, _initial_state,
                                      apply_gate)
from services.clock_service import ClockOp, ClockSchedule, build_clock_op, build_h_clock, legal_state
from services.errors import ValidationError, check_guard
from services.operator_utils import apply_block, projector_bits

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class LocalTerm:
    support: Tuple[int, ...]
    matrix: np.ndarray
    coefficient: float
    label: str = ''

    def __post_init__(self):
        dim = 1 << len(self.support)
        if self.matrix.shape != (dim, dim):
            raise ValidationError(f"term on {self.support} needs a {dim}x{dim} block, got {self.matrix.shape}")
        if len(set(self.support)) != len(self.support):
            raise ValidationError(f"term support {self.support} repeats a qubit")
        if not np.allclose(self.matrix, self.matrix.conj().T, atol=HERMITIAN_TOL):
            raise ValidationError(f"term '{self.label}' on {self.support} is not Hermitian")
        if self.support and self.coefficient < 0:
            raise ValidationError(f"term '{self.label}' has negative coefficient {self.coefficient}")

    @property
    def norm(self) -> float:
        return abs(self.coefficient) * float(np.linalg.norm(self.matrix, 2))


@dataclass(frozen=True)
class CoefficientSet:
    alpha_in: float
    alpha_out: float
    alpha_A: float
    alpha_B: float
    alpha_clock: float

    @classmethod
    def default(cls, T: int, c1: Optional[float] = None, c2: Optional[float] = None) -> 'CoefficientSet':
        """α_A = α_B = 1, α_in = α_out = C1·T², α_clock = C2·T³"""
        c1 = settings.coeff_c1 if c1 is None else c1
        c2 = settings.coeff_c2 if c2 is None else c2
        return cls(c1 * T ** 2, c1 * T ** 2, 1.0, 1.0, c2 * T ** 3)

    @classmethod
    def calibrated(cls, T: int, epsilon: Optional[float] = None) -> 'CoefficientSet':
        """
        Default set scaled so the rejecting walk's gap clears ½-ε by 25%

        The lowest energy of the propagation walk with a penalized endpoint is
        1 - cos(π/(2T+1)) under the default set.
        """
        epsilon = settings.epsilon if epsilon is None else epsilon
        walk_gap = 1.0 - math.cos(math.pi / (2 * T + 1))
        return cls.default(T).scaled((0.5 - epsilon) * 1.25 / walk_gap)

    def scaled(self, s: float) -> 'CoefficientSet':
        return CoefficientSet(*(s * v for v in self.as_tuple()))

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.alpha_in, self.alpha_out, self.alpha_A, self.alpha_B, self.alpha_clock)

    def is_bounded(self, width: int, T: int) -> bool:
        limit = 64.0 * (width + T) ** 5
        return all(math.isfinite(v) and 0 <= v <= limit for v in self.as_tuple())

    def to_dict(self) -> dict:
        return dict(zip(('alpha_in', 'alpha_out', 'alpha_A', 'alpha_B', 'alpha_clock'), self.as_tuple()))


class LocalHamiltonian:
    """Sum of coefficient-weighted local blocks plus a scalar offset"""

    def __init__(self, width: int, terms: Iterable[LocalTerm] = (), offset: float = 0.0,
                 locality: Optional[int] = None):
        self.logger = logging.getLogger(__name__)
        self.width = int(width)
        kept = []
        for term in terms:
            if any(q < 0 or q >= self.width for q in term.support):
                raise ValidationError(f"term support {term.support} outside width {self.width}")
            if not term.support:
                offset += term.coefficient * float(term.matrix[0, 0].real)
            else:
                kept.append(term)
        self.terms = tuple(kept)
        self.offset = float(offset)
        actual = max((len(t.support) for t in self.terms), default=0)
        if locality is not None and actual > locality:
            raise ValidationError(f"declared locality {locality} but a term acts on {actual} qubits")
        self.locality = actual if locality is None else locality
        self.norm_bound = sum(t.norm for t in self.terms) + abs(self.offset)
        if not math.isfinite(self.norm_bound):
            raise ValidationError("norm bound is not finite")
        self._fingerprint = None

    @property
    def max_support(self) -> int:
        return max((len(t.support) for t in self.terms), default=0)

    def fingerprint(self) -> str:
        """Stable digest used as a cache key"""
        if self._fingerprint is None:
            digest = hashlib.sha1(f"{self.width}|{self.offset!r}".encode())
            for term in self.terms:
                digest.update(repr((term.support, term.coefficient)).encode())
                digest.update(np.ascontiguousarray(term.matrix).tobytes())
            self._fingerprint = digest.hexdigest()
        return self._fingerprint

    def select(self, labels: Sequence[str]) -> 'LocalHamiltonian':
        """Sub-Hamiltonian made of the terms carrying one of the labels (no offset)"""
        return LocalHamiltonian(self.width, [t for t in self.terms if t.label in labels])

    def scaled(self, s: float, shift: float = 0.0) -> 'LocalHamiltonian':
        """s·H + shift·I"""
        if s < 0:
            raise ValidationError("scale must be nonnegative")
        terms = [LocalTerm(t.support, t.matrix, s * t.coefficient, t.label) for t in self.terms]
        return LocalHamiltonian(self.width, terms, s * self.offset + shift)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """
        Matrix-free H·v

        Args:
            v (np.ndarray): 2^width amplitudes

        Returns:
            np.ndarray: H applied to v
        """
        v = np.asarray(v, dtype=complex)
        if v.shape != (1 << self.width,):
            raise ValidationError(f"vector has {v.shape[0]} amplitudes, Hamiltonian needs {1 << self.width}")
        out = self.offset * v
        for term in self.terms:
            out = out + term.coefficient * apply_block(v, term.matrix, term.support, self.width)
        return out

    def to_dense(self) -> np.ndarray:
        """
        Full 2^n matrix, built entry-wise from each block

        Returns:
            np.ndarray: Hermitian matrix

        Raises:
            GuardError: If the width exceeds the dense guard
        """
        check_guard('dense Hamiltonian width', self.width, settings.dense_guard)
        n = self.width
        dim = 1 << n
        dense = np.zeros((dim, dim), dtype=complex)
        dense[np.diag_indices(dim)] += self.offset
        all_idx = np.arange(dim, dtype=np.int64)
        for term in self.terms:
            support = term.support
            s = len(support)
            mask = sum(1 << (n - 1 - q) for q in support)
            base = all_idx[(all_idx & mask) == 0]
            local_offsets = np.zeros(1 << s, dtype=np.int64)
            for local in range(1 << s):
                for pos, q in enumerate(support):
                    if (local >> (s - 1 - pos)) & 1:
                        local_offsets[local] |= 1 << (n - 1 - q)
            rows, cols = np.nonzero(term.matrix)
            for i, j in zip(rows, cols):
                dense[base | local_offsets[i], base | local_offsets[j]] += term.coefficient * term.matrix[i, j]
        return dense

    def to_dict(self) -> dict:
        return {
            'width': self.width,
            'locality': self.locality,
            'offset': self.offset,
            'norm_bound': self.norm_bound,
            'terms': [{
                'support': list(t.support),
                'coefficient': t.coefficient,
                'label': t.label,
                'matrix': [[[float(z.real), float(z.imag)] for z in row] for row in t.matrix],
            } for t in self.terms],
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'LocalHamiltonian':
        try:
            terms = [LocalTerm(tuple(int(q) for q in t['support']),
                               np.array([[complex(re, im) for re, im in row] for row in t['matrix']],
                                        dtype=complex),
                               float(t['coefficient']), t.get('label', ''))
                     for t in data['terms']]
            return cls(int(data['width']), terms, float(data.get('offset', 0.0)), data.get('locality'))
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"malformed Hamiltonian JSON: {e}")


# --- construction -------------------------------------------------------------------------------

def _clock_term(op: ClockOp, offset: int, coefficient: float, label: str, hermitize: bool = False,
                sign: float = 1.0) -> LocalTerm:
    matrix = op.matrix
    if hermitize:
        matrix = matrix + matrix.conj().T
    return LocalTerm(tuple(offset + q for q in op.support), sign * matrix, coefficient, label)


def _joint_term(circuit_support: Tuple[int, ...], circuit_block: np.ndarray, op: ClockOp, offset: int,
                coefficient: float, label: str, hermitize: bool = False, sign: float = 1.0) -> LocalTerm:
    matrix = np.kron(circuit_block, op.matrix)
    if hermitize:
        matrix = matrix + matrix.conj().T
    support = tuple(circuit_support) + tuple(offset + q for q in op.support)
    return LocalTerm(support, sign * matrix, coefficient, label)


_P0 = projector_bits([0])
_P1 = projector_bits([1])
# per-qubit factor of H_qubit
_QUBIT_LOCAL = 0.5 * (-2 * _P0 + _P1)
# H_time window: (role, offset from t, weight)
_TIME_WINDOW = (
    ('stay', 0, 1), ('stay', 1, 6), ('stay', 2, 1), ('add2', 0, 2), ('add', 0, 1), ('add', 1, 1),
    ('stay', -3, 1), ('stay', -2, 6), ('stay', -1, 1), ('add2', -1, 2), ('add', -3, 1), ('add', -1, 1),
)


def circuit_to_hamiltonian(canonical: CanonicalCircuit, d: Optional[int] = None,
                           coeffs: Optional[CoefficientSet] = None) -> LocalHamiltonian:
    """
    H = α_in H_in + α_out H_out + α_A Σ H_prop,t + α_B Σ (H_qubit,t + H_time,t) + α_clock I⊗H_clock

    Args:
        canonical (CanonicalCircuit): Output of canonicalize_for_construction
        d (int, optional): Must match the canonicalization's d when given
        coeffs (CoefficientSet, optional): Defaults to CoefficientSet.default(T)

    Returns:
        LocalHamiltonian: (d+1)-local for the dual clock, 2-local for the unary clock
    """
    params = canonical.params
    if d is not None and d != params.d:
        raise ValidationError(f"circuit was canonicalized for d={params.d}, not d={d}")
    circuit = canonical.circuit
    T = params.T
    if circuit.gate_count != T:
        raise ValidationError(f"canonical circuit has {circuit.gate_count} gates, expected T={T}")
    schedule = ClockSchedule.for_parameters(params)
    coeffs = coeffs or CoefficientSet.default(T)
    N = circuit.width
    width = N + schedule.width

    def op(role, t):
        return build_clock_op(schedule, role, t)

    terms: List[LocalTerm] = []
    for i in range(circuit.proof_size, N):
        terms.append(_joint_term((i,), _P1, op('stay', 0), N, coeffs.alpha_in, 'in'))
    terms.append(_joint_term((circuit.out_index,), _P0, op('stay', T), N, coeffs.alpha_out, 'out'))

    half_A = coeffs.alpha_A / 2
    for t in range(1, T + 1):
        gate = circuit.gates[t - 1]
        if gate.kind in _SINGLE:
            terms.append(_clock_term(op('stay', t), N, half_A, 'prop'))
            terms.append(_clock_term(op('stay', t - 1), N, half_A, 'prop'))
            if gate.kind is GateKind.IDENTITY:
                terms.append(_clock_term(op('add', t - 1), N, half_A, 'prop', hermitize=True, sign=-1.0))
            else:
                terms.append(_joint_term(gate.qubits, _SINGLE[gate.kind], op('add', t - 1), N, half_A,
                                         'prop', hermitize=True, sign=-1.0))
        elif gate.kind is GateKind.CZ:
            if t - 3 < 0 or t + 2 > T:
                raise ValidationError(f"two-qubit gate at t={t} needs timesteps t-3..t+2 inside 0..{T}")
            for q in gate.qubits:
                terms.append(_joint_term((q,), _QUBIT_LOCAL, op('add', t - 1), N, coeffs.alpha_B,
                                         'qubit', hermitize=True))
            for role, shift, weight in _TIME_WINDOW:
                hermitize = role != 'stay'
                terms.append(_clock_term(op(role, t + shift), N, coeffs.alpha_B * weight / 8, 'time',
                                         hermitize=hermitize))
        else:
            raise ValidationError(f"gate {gate.kind.value} at t={t} is not canonical; canonicalize first")

    for term in build_h_clock(schedule):
        terms.append(LocalTerm(tuple(N + q for q in term.support), term.matrix,
                               coeffs.alpha_clock * term.coefficient, 'clock'))

    H = LocalHamiltonian(width, terms)
    logger.info(f"Built {schedule.variant} Hamiltonian: width={width} terms={len(H.terms)} "
                f"locality={H.locality} T={T}")
    if H.locality > schedule.locality_limit:
        logger.warning(f"locality {H.locality} exceeds the expected {schedule.locality_limit}")
    return H


def history_state(circuit: Circuit, schedule: Optional[ClockSchedule], proof_state) -> np.ndarray:
    """
    (T+1)^{-1/2} Σ_t U_t…U_1|ψ⟩|0^{n_a}⟩ ⊗ |γ_t⟩

    Args:
        circuit (Circuit): Gate list U_1..U_T
        schedule (ClockSchedule | None): Clock with matching T; None only for an empty circuit
        proof_state (np.ndarray | str): Proof-register state or basis bits

    Returns:
        np.ndarray: Normalized state over circuit ⊗ clock
    """
    T = circuit.gate_count
    if schedule is None:
        if T:
            raise ValidationError("a clock schedule is required for a non-empty circuit")
        clock_width = 0
    else:
        if schedule.T != T:
            raise ValidationError(f"schedule has T={schedule.T}, circuit has {T} gates")
        clock_width = schedule.width
    check_guard('history state width', circuit.width + clock_width, settings.dense_guard)
    psi = _initial_state(circuit, proof_state).reshape((2,) * circuit.width)
    history = np.zeros(1 << (circuit.width + clock_width), dtype=complex)
    for t in range(T + 1):
        if t > 0:
            apply_gate(psi, circuit.gates[t - 1], circuit.width)
        clock = np.zeros(1 << clock_width, dtype=complex)
        clock[int(legal_state(schedule, t), 2) if schedule is not None else 0] = 1.0
        history += np.kron(psi.reshape(-1), clock)
    return history / math.sqrt(T + 1)


def expectation(H: LocalHamiltonian, psi: np.ndarray) -> float:
    """⟨ψ|H|ψ⟩ (real part)"""
    return float(np.vdot(psi, H.apply(psi)).real)


def random_local_hamiltonian(n: int, num_terms: int, k: int = 3, seed: int = 0,
                             max_coefficient: float = 1.0) -> LocalHamiltonian:
    """
    Seeded random k-local Hamiltonian

    Each term is a random Hermitian block of unit spectral norm on k distinct
    qubits with a coefficient drawn from [0, max_coefficient].

    Args:
        n (int): Width (>= k)
        num_terms (int): Number of terms
        k (int): Qubits per term
        seed (int): RNG seed
        max_coefficient (float): Coefficient upper bound

    Returns:
        LocalHamiltonian: The instance, norm bound <= num_terms·max_coefficient
    """
    if not 1 <= k <= n:
        raise ValidationError(f"need 1 <= k <= n, got k={k} n={n}")
    if max_coefficient < 0:
        raise ValidationError(f"coefficient bound must be nonnegative, got {max_coefficient}")
    rng = np.random.default_rng(seed)
    dim = 1 << k
    terms = []
    for i in range(num_terms):
        support = tuple(int(q) for q in sorted(rng.choice(n, size=k, replace=False)))
        raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        block = (raw + raw.conj().T) / 2
        block /= np.linalg.norm(block, 2)
        terms.append(LocalTerm(support, block, float(rng.uniform(0, max_coefficient)), f'random{i}'))
    return LocalHamiltonian(n, terms, locality=k)
