#!/usr/bin/python
# -*- coding:utf-8 -*-
"""
Gate-level circuit IR with exact statevector simulation, the MCX/Toffoli
decompositions, the SAT verification circuit and the preprocessing that
prepares a circuit for the circuit-to-Hamiltonian construction.

Dense conventions: qubit 0 is the most significant bit of a basis index.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from services.cnf_service import CnfFormula, validate_kcnf
from services.errors import ValidationError, check_guard

logger = logging.getLogger(__name__)


class GateKind(Enum):
    IDENTITY = 'I'
    HADAMARD = 'H'
    PI_OVER_8 = 'T'
    PI_OVER_8_DAGGER = 'Tdg'
    PAULI_Z = 'Z'
    NOT = 'X'
    CNOT = 'CX'
    CZ = 'CZ'
    TOFFOLI = 'CCX'
    MCX = 'MCX'


_SQ2 = 1 / math.sqrt(2)
_SINGLE = {
    GateKind.IDENTITY: np.eye(2, dtype=complex),
    GateKind.HADAMARD: np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    GateKind.PI_OVER_8: np.diag([1, np.exp(1j * np.pi / 4)]),
    GateKind.PI_OVER_8_DAGGER: np.diag([1, np.exp(-1j * np.pi / 4)]),
    GateKind.PAULI_Z: np.diag([1, -1]).astype(complex),
    GateKind.NOT: np.array([[0, 1], [1, 0]], dtype=complex),
}
# controlled kinds -> matrix applied to the target
_CONTROLLED = {
    GateKind.CNOT: _SINGLE[GateKind.NOT],
    GateKind.CZ: _SINGLE[GateKind.PAULI_Z],
    GateKind.TOFFOLI: _SINGLE[GateKind.NOT],
    GateKind.MCX: _SINGLE[GateKind.NOT],
}
_ARITY = {
    GateKind.CNOT: 2,
    GateKind.CZ: 2,
    GateKind.TOFFOLI: 3,
}
MACRO_KINDS = frozenset({GateKind.TOFFOLI, GateKind.MCX})
ELEMENTARY_KINDS = frozenset({GateKind.HADAMARD, GateKind.PI_OVER_8, GateKind.PI_OVER_8_DAGGER,
                              GateKind.NOT, GateKind.CNOT})


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: Tuple[int, ...]  # controls then target
    work: Tuple[int, ...] = ()  # clean ancillas an MCX may borrow when decomposed

    @property
    def controls(self) -> Tuple[int, ...]:
        return self.qubits[:-1]

    @property
    def target(self) -> int:
        return self.qubits[-1]

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) == 2

    def to_dict(self) -> dict:
        data = {'kind': self.kind.value, 'qubits': list(self.qubits)}
        if self.work:
            data['work'] = list(self.work)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'Gate':
        try:
            kind = GateKind(data['kind'])
        except (KeyError, ValueError):
            raise ValidationError(f"unknown gate kind in {data!r}")
        return cls(kind, tuple(int(q) for q in data['qubits']), tuple(int(q) for q in data.get('work', ())))


def mcx(controls: Sequence[int], target: int, work: Sequence[int] = ()) -> Gate:
    """Multi-controlled Not; 1 and 2 controls collapse to CNOT and Toffoli"""
    controls = tuple(controls)
    if not controls:
        return Gate(GateKind.NOT, (target,))
    if len(controls) == 1:
        return Gate(GateKind.CNOT, controls + (target,))
    if len(controls) == 2:
        return Gate(GateKind.TOFFOLI, controls + (target,))
    return Gate(GateKind.MCX, controls + (target,), tuple(work))


@dataclass
class Circuit:
    width: int
    proof_size: int
    out_index: int
    gates: List[Gate] = field(default_factory=list)
    registers: Dict[str, List[int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.width < 1 or not 0 <= self.proof_size <= self.width:
            raise ValidationError(f"bad register sizes width={self.width} proof={self.proof_size}")
        if not 0 <= self.out_index < self.width:
            raise ValidationError(f"out index {self.out_index} outside 0..{self.width - 1}")
        for gate in self.gates:
            self.check_gate(gate)

    @property
    def ancilla_size(self) -> int:
        return self.width - self.proof_size

    @property
    def gate_count(self) -> int:
        return len(self.gates)

    def check_gate(self, gate: Gate) -> None:
        qubits = gate.qubits + gate.work
        if len(set(qubits)) != len(qubits):
            raise ValidationError(f"{gate.kind.value} gate has repeated qubits {qubits}")
        if any(q < 0 or q >= self.width for q in qubits):
            raise ValidationError(f"{gate.kind.value} gate qubits {qubits} outside width {self.width}")
        expected = _ARITY.get(gate.kind, 1 if gate.kind in _SINGLE else None)
        if expected is not None and len(gate.qubits) != expected:
            raise ValidationError(f"{gate.kind.value} expects {expected} qubits, got {len(gate.qubits)}")
        if gate.kind is GateKind.MCX and len(gate.qubits) < 2:
            raise ValidationError("MCX needs at least one control")

    def append(self, *gates: Gate) -> None:
        for gate in gates:
            self.check_gate(gate)
            self.gates.append(gate)

    def kind_counts(self) -> Dict[str, int]:
        counts = {}
        for gate in self.gates:
            counts[gate.kind.value] = counts.get(gate.kind.value, 0) + 1
        return counts

    def to_dict(self) -> dict:
        data = {
            'width': self.width,
            'proof_size': self.proof_size,
            'ancilla_size': self.ancilla_size,
            'out_index': self.out_index,
            'gates': [g.to_dict() for g in self.gates],
        }
        if self.registers:
            data['registers'] = {k: list(v) for k, v in self.registers.items()}
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'Circuit':
        try:
            width = int(data['width'])
            proof = int(data['proof_size'])
            out = int(data['out_index'])
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"malformed circuit JSON: {e}")
        if 'ancilla_size' in data and int(data['ancilla_size']) != width - proof:
            raise ValidationError("ancilla_size does not match width - proof_size")
        gates = [Gate.from_dict(g) for g in data.get('gates', [])]
        return cls(width, proof, out, gates, {k: list(v) for k, v in data.get('registers', {}).items()})


# --- statevector simulation ---------------------------------------------------

def basis_state(bits) -> np.ndarray:
    """|bits⟩ as a dense vector; bits[0] is qubit 0 (most significant)"""
    bits = [int(b) for b in bits]
    vec = np.zeros(1 << len(bits), dtype=complex)
    vec[int(''.join(map(str, bits)), 2) if bits else 0] = 1.0
    return vec


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random normalized state on n qubits"""
    vec = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return vec / np.linalg.norm(vec)


def apply_gate(psi: np.ndarray, gate: Gate, width: int) -> np.ndarray:
    """
    Apply one gate to a (2,)*width tensor in place and return it

    Args:
        psi (np.ndarray): State tensor of shape (2,)*width
        gate (Gate): Gate to apply; macro gates act natively
        width (int): Number of qubits

    Returns:
        np.ndarray: The same tensor, updated
    """
    if gate.kind in _SINGLE:
        matrix, controls = _SINGLE[gate.kind], ()
        if gate.kind is GateKind.IDENTITY:
            return psi
    else:
        matrix, controls = _CONTROLLED[gate.kind], gate.controls
    target = gate.target
    index = [slice(None)] * width
    for c in controls:
        index[c] = 1
    index = tuple(index)
    sub = psi[index]
    axis = target - sum(1 for c in controls if c < target)
    updated = np.moveaxis(np.tensordot(matrix, sub, axes=([1], [axis])), 0, axis)
    psi[index] = updated
    return psi


def _initial_state(circuit: Circuit, input_state) -> np.ndarray:
    if isinstance(input_state, str):
        proof = basis_state(input_state)
    else:
        proof = np.asarray(input_state, dtype=complex)
    if proof.shape != (1 << circuit.proof_size,):
        raise ValidationError(
            f"input state has {proof.shape[0]} amplitudes, proof register needs {1 << circuit.proof_size}")
    ancilla = np.zeros(1 << circuit.ancilla_size, dtype=complex)
    ancilla[0] = 1.0
    return np.kron(proof, ancilla)


def simulate(circuit: Circuit, input_state) -> np.ndarray:
    """
    Exact final state U|ψ⟩|0^{n_a}⟩

    Args:
        circuit (Circuit): Circuit to run (macro gates allowed)
        input_state (np.ndarray | str): Proof-register state or basis bit string

    Returns:
        np.ndarray: 2^width amplitudes
    """
    check_guard('statevector width', circuit.width, settings.lanczos_guard)
    psi = _initial_state(circuit, input_state).reshape((2,) * circuit.width)
    for gate in circuit.gates:
        apply_gate(psi, gate, circuit.width)
    return psi.reshape(-1)


def accept_probability(circuit: Circuit, input_state) -> float:
    """Probability of reading 1 on the out qubit after the circuit"""
    psi = simulate(circuit, input_state).reshape((2,) * circuit.width)
    index = [slice(None)] * circuit.width
    index[circuit.out_index] = 1
    return float(np.sum(np.abs(psi[tuple(index)]) ** 2))


def simulate_basis(circuit: Circuit, bits) -> List[int]:
    """
    Classical run of a reversible circuit (X/CX/CZ/Z/I/Toffoli/MCX only) on a basis input

    Args:
        circuit (Circuit): Circuit with classical reversible gates
        bits (str | Sequence[int]): Proof-register bits

    Returns:
        List[int]: Final bits of every qubit (phases from Z/CZ ignored)
    """
    state = [int(b) for b in bits] + [0] * circuit.ancilla_size
    if len(state) != circuit.width:
        raise ValidationError(f"expected {circuit.proof_size} input bits")
    for gate in circuit.gates:
        if gate.kind in (GateKind.IDENTITY, GateKind.PAULI_Z, GateKind.CZ):
            continue
        if gate.kind not in (GateKind.NOT, GateKind.CNOT, GateKind.TOFFOLI, GateKind.MCX):
            raise ValidationError(f"{gate.kind.value} is not a classical reversible gate")
        if all(state[c] for c in gate.controls):
            state[gate.target] ^= 1
    return state


def gate_unitary(gates: Sequence[Gate], width: int) -> np.ndarray:
    """Dense unitary of a gate sequence on `width` qubits"""
    dim = 1 << width
    columns = np.eye(dim, dtype=complex)
    out = np.empty_like(columns)
    for j in range(dim):
        psi = columns[:, j].reshape((2,) * width).copy()
        for gate in gates:
            apply_gate(psi, gate, width)
        out[:, j] = psi.reshape(-1)
    return out


# --- decompositions -------------------------------------------------------------

@dataclass
class McxDecomposition:
    gates: List[Gate]
    ancillas: Tuple[int, ...]


def decompose_mcx(gate: Gate, work: Optional[Sequence[int]] = None) -> McxDecomposition:
    """
    Toffoli V-chain: 2k-3 Toffolis on k-2 clean ancillas, restored to |0⟩

    Args:
        gate (Gate): MCX (or Toffoli) with k >= 2 controls
        work (Sequence[int], optional): Clean ancillas; defaults to gate.work

    Returns:
        McxDecomposition: Toffoli sequence and the ancillas it used

    Raises:
        ValidationError: If k < 2 or too few work qubits are supplied
    """
    controls, target = gate.controls, gate.target
    k = len(controls)
    if k < 2:
        raise ValidationError(f"MCX decomposition needs k >= 2 controls, got {k}")
    if k == 2:
        return McxDecomposition([Gate(GateKind.TOFFOLI, controls + (target,))], ())
    work = tuple(gate.work if work is None else work)
    if len(work) < k - 2:
        raise ValidationError(f"MCX with {k} controls needs {k - 2} work qubits, got {len(work)}")
    anc = work[:k - 2]
    chain = [Gate(GateKind.TOFFOLI, (controls[0], controls[1], anc[0]))]
    for i in range(2, k - 1):
        chain.append(Gate(GateKind.TOFFOLI, (controls[i], anc[i - 2], anc[i - 1])))
    middle = Gate(GateKind.TOFFOLI, (controls[k - 1], anc[k - 3], target))
    return McxDecomposition(chain + [middle] + chain[::-1], anc)


def decompose_toffoli(gate: Gate) -> List[Gate]:
    """
    Clifford+T form of a Toffoli: 15 gates from {H, T, T†, CNOT}

    Args:
        gate (Gate): Toffoli (c1, c2, t)

    Returns:
        List[Gate]: Elementary sequence equal to the Toffoli unitary
    """
    if gate.kind is not GateKind.TOFFOLI:
        raise ValidationError(f"expected a Toffoli, got {gate.kind.value}")
    a, b, c = gate.qubits
    H, T, Td, CX = GateKind.HADAMARD, GateKind.PI_OVER_8, GateKind.PI_OVER_8_DAGGER, GateKind.CNOT
    return [
        Gate(H, (c,)), Gate(CX, (b, c)), Gate(Td, (c,)), Gate(CX, (a, c)),
        Gate(T, (c,)), Gate(CX, (b, c)), Gate(Td, (c,)), Gate(CX, (a, c)),
        Gate(T, (b,)), Gate(T, (c,)), Gate(H, (c,)), Gate(CX, (a, b)),
        Gate(T, (a,)), Gate(Td, (b,)), Gate(CX, (a, b)),
    ]


def expand_pi8_dagger(gates: Sequence[Gate]) -> List[Gate]:
    """Replace every T† by seven T gates so only {H, T, X, CNOT} remain"""
    out = []
    for gate in gates:
        if gate.kind is GateKind.PI_OVER_8_DAGGER:
            out.extend([Gate(GateKind.PI_OVER_8, gate.qubits)] * 7)
        else:
            out.append(gate)
    return out


def decompose_circuit(circuit: Circuit, strict_gate_set: bool = False) -> Circuit:
    """
    Expand every MCX and Toffoli down to elementary gates

    Args:
        circuit (Circuit): Circuit possibly containing macro gates
        strict_gate_set (bool): Also rewrite T† as T^7

    Returns:
        Circuit: Equivalent circuit over {H, T, T†, X, CNOT} plus any CZ/Z/I already present
    """
    gates = []
    for gate in circuit.gates:
        if gate.kind is GateKind.MCX:
            toffolis = decompose_mcx(gate).gates
        elif gate.kind is GateKind.TOFFOLI:
            toffolis = [gate]
        else:
            gates.append(gate)
            continue
        for tof in toffolis:
            gates.extend(decompose_toffoli(tof))
    if strict_gate_set:
        gates = expand_pi8_dagger(gates)
    return Circuit(circuit.width, circuit.proof_size, circuit.out_index, gates, dict(circuit.registers))


# --- SAT verifier ---------------------------------------------------------------------

def counter_width(m: int) -> int:
    """Bits needed to hold counts 0..m"""
    return max(1, int(m).bit_length())


def build_clause_gadget(clause, inputs: Sequence[int], cls: int, work: Sequence[int]) -> List[Gate]:
    """
    W_i: leaves cls = clause value, with positive-literal inputs flipped

    Args:
        clause (Sequence[Literal]): The clause
        inputs (Sequence[int]): Qubit of each variable (index v-1)
        cls (int): Clause qubit, |0⟩ on entry
        work (Sequence[int]): Clean ancillas for the MCX

    Returns:
        List[Gate]: Not on positive literals, MCX onto cls, Not on cls
    """
    flips = [Gate(GateKind.NOT, (inputs[lit.variable - 1],)) for lit in clause if not lit.negated]
    controls = [inputs[lit.variable - 1] for lit in clause]
    return flips + [mcx(controls, cls, work), Gate(GateKind.NOT, (cls,))]


def build_addone(r: int, controlled: bool, counter: Optional[Sequence[int]] = None,
                 control: Optional[int] = None, work: Sequence[int] = ()) -> List[Gate]:
    """
    Increment an r-bit counter (counter[0] is the most significant bit)

    Args:
        r (int): Counter width
        controlled (bool): Condition every layer on `control`
        counter (Sequence[int], optional): Counter qubits, default 0..r-1
        control (int, optional): Control qubit, default r
        work (Sequence[int]): Clean ancillas for the wide layers

    Returns:
        List[Gate]: One MCX layer per bit, most significant first
    """
    if r < 1:
        raise ValidationError(f"counter width must be >= 1, got {r}")
    counter = list(range(r)) if counter is None else list(counter)
    if control is None:
        control = r
    gates = []
    for q in range(r):
        controls = counter[q + 1:] + ([control] if controlled else [])
        gates.append(mcx(controls, counter[q], work))
    return gates


def build_compare(r: int, m: int, counter: Optional[Sequence[int]] = None,
                  out: Optional[int] = None, work: Sequence[int] = ()) -> List[Gate]:
    """
    |y⟩|0⟩ -> |y⟩|[int(y) == m]⟩

    Args:
        r (int): Counter width
        m (int): Value to compare against
        counter (Sequence[int], optional): Counter qubits, default 0..r-1
        out (int, optional): Output qubit, default r
        work (Sequence[int]): Clean ancillas for the MCX

    Returns:
        List[Gate]: Nots on zero bits of bin(m), MCX onto out, Nots undone
    """
    if m < 0 or m >= (1 << r):
        raise ValidationError(f"m={m} is not representable in {r} bits")
    counter = list(range(r)) if counter is None else list(counter)
    out = r if out is None else out
    pattern = format(m, f'0{r}b')
    flips = [Gate(GateKind.NOT, (counter[i],)) for i, bit in enumerate(pattern) if bit == '0']
    return flips + [mcx(counter, out, work)] + flips


def build_sat_verifier(formula: CnfFormula) -> Circuit:
    """
    U_Φ = COMPARE · Π_i (W_i† · C-ADDONE · W_i) over registers in/cls/cnt/out/work

    Args:
        formula (CnfFormula): Valid kCNF with m >= 1

    Returns:
        Circuit: Macro-level verifier; on |x⟩ the out qubit ends as Φ(x)
    """
    if formula.num_clauses == 0:
        raise ValidationError("verifier needs at least one clause")
    report = validate_kcnf(formula, max(1, formula.max_width))
    if not report.valid:
        raise ValidationError(f"invalid formula: {report.offending_clauses}")

    n, m, k = formula.num_vars, formula.num_clauses, formula.max_width
    r = counter_width(m)
    pool = max(0, k - 3, r - 3)
    inputs = list(range(n))
    cls = n
    cnt = list(range(n + 1, n + 1 + r))
    out = n + 1 + r
    work = list(range(out + 1, out + 1 + pool))
    width = out + 1 + pool

    circuit = Circuit(width, n, out, [], {'in': inputs, 'cls': [cls], 'cnt': cnt, 'out': [out], 'work': work})
    # out is idle until COMPARE and cls is clean during it, so each lends itself as a work qubit
    for clause in formula.clauses:
        gadget = build_clause_gadget(clause, inputs, cls, [out] + work)
        circuit.append(*gadget)
        circuit.append(*build_addone(r, True, cnt, cls, [out] + work))
        circuit.append(*reversed(gadget))
    circuit.append(*build_compare(r, m, cnt, out, [cls] + work))
    logger.debug(f"Built verifier n={n} m={m} r={r} width={width} macro gates={circuit.gate_count}")
    return circuit


def clause_power(n: int, m: int) -> int:
    """Smallest c >= 1 with m <= n^c"""
    if n < 2:
        raise ValidationError("clause power needs n >= 2")
    c = 1
    while n ** c < m:
        c += 1
    return c


def gate_count_bound(n: int, m: int, k: int) -> float:
    """34c²nᶜlog²n + (70k+2)nᶜ + 35c·log n with logs base 2"""
    c = clause_power(n, m)
    log_n = math.log2(n)
    return 34 * c * c * n ** c * log_n ** 2 + (70 * k + 2) * n ** c + 35 * c * log_n


def verifier_report(formula: CnfFormula, circuit: Circuit) -> dict:
    """
    Register, ancilla and gate-count accounting for a verifier

    Returns:
        dict: Widths, counts and whether the ancilla and gate-count bounds hold
    """
    n, m, k = formula.num_vars, formula.num_clauses, formula.max_width
    elementary = decompose_circuit(circuit)
    ancillas = circuit.ancilla_size
    ancilla_bound = 2 * math.ceil(math.log2(m)) + 2 if m > 0 else 2
    report = {
        'n': n,
        'm': m,
        'k': k,
        'counter_width': len(circuit.registers.get('cnt', [])),
        'registers': circuit.registers,
        'width': circuit.width,
        'ancillas': ancillas,
        'ancilla_bound': ancilla_bound,
        'ancilla_bound_ok': ancillas <= ancilla_bound,
        'macro_gate_count': circuit.gate_count,
        'elementary_gate_count': elementary.gate_count,
        'elementary_kinds': elementary.kind_counts(),
    }
    if n >= 2:
        c = clause_power(n, m)
        bound = gate_count_bound(n, m, k)
        report.update({'c': c, 'gate_count_bound': bound,
                       'gate_count_bound_ok': elementary.gate_count <= bound})
    if not report['ancilla_bound_ok']:
        logger.warning(f"Ancilla count {ancillas} exceeds 2*ceil(log2 m)+2 = {ancilla_bound} for m={m}")
    return report


# --- canonicalization ----------------------------------------------------------------------

CANONICAL_KINDS = frozenset({GateKind.IDENTITY, GateKind.HADAMARD, GateKind.PI_OVER_8,
                             GateKind.PI_OVER_8_DAGGER, GateKind.PAULI_Z, GateKind.NOT,
                             GateKind.CNOT, GateKind.CZ})
CZ_STRIDE = 6


@dataclass
class ClockParameters:
    d: int
    T: int
    a: Optional[int] = None  # None for the unary schedule

    @property
    def variant(self) -> str:
        return 'unary' if self.a is None else 'dual'

    def to_dict(self) -> dict:
        return {'d': self.d, 'T': self.T, 'a': self.a, 'variant': self.variant}


@dataclass
class CanonicalCircuit:
    circuit: Circuit
    params: ClockParameters
    two_qubit_slots: List[int]
    usable_slots: int

    def gate_at(self, t: int) -> Gate:
        """U_t for t in 1..T"""
        return self.circuit.gates[t - 1]


def _dual_total(a: int, d: int) -> int:
    return math.comb(a, d - 1) * (a + 1) - 1


def _schedule(gates: Sequence[Gate], period: Optional[int]) -> Optional[Dict[int, Gate]]:
    """Greedy slot assignment; slots that are multiples of `period` stay empty"""
    def usable(t):
        return period is None or t % period != 0

    has_cz = any(g.kind is GateKind.CZ for g in gates)
    if has_cz and period is not None and period - 1 < 5:
        return None  # no run of five free slots

    placed = {}
    t = 1
    last_cz = -CZ_STRIDE
    i = 0
    while i < len(gates):
        gate = gates[i]
        if gate.kind is GateKind.CZ:
            f, s = gate.qubits
            block = [Gate(GateKind.PAULI_Z, (f,)), Gate(GateKind.PAULI_Z, (s,)), gate,
                     Gate(GateKind.PAULI_Z, (f,)), Gate(GateKind.PAULI_Z, (s,))]
            start = max(t, 2, last_cz + CZ_STRIDE - 2)
            while not all(usable(start + j) for j in range(5)):
                start += 1
            for j, g in enumerate(block):
                placed[start + j] = g
            last_cz = start + 2
            t = start + 5
        else:
            while not usable(t):
                t += 1
            placed[t] = gate
            t += 1
        i += 1
    return placed


def canonicalize_for_construction(circuit: Circuit, d: int) -> CanonicalCircuit:
    """
    Rewrite a decomposed circuit into the timestep layout the Hamiltonian construction needs

    Each CNOT becomes H·CZ·H; each CZ sits in a Z,Z,CZ,Z,Z block with at least
    three earlier and two later timesteps and at least CZ_STRIDE slots between CZs.
    For d >= 2 the clock is dual with T = C(a,d-1)(a+1)-1 for the smallest
    sufficient a, and every slot t with t % (a+1) == 0 (the transitions that move
    the Johnson clock) holds an identity. For d == 1 the clock is unary.

    Args:
        circuit (Circuit): Circuit without macro gates
        d (int): Locality parameter (d >= 1)

    Returns:
        CanonicalCircuit: Padded circuit of exactly T gates plus clock parameters
    """
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d}")
    rewritten = []
    for gate in circuit.gates:
        if gate.kind in MACRO_KINDS:
            raise ValidationError(f"macro gate {gate.kind.value} must be decomposed first")
        if gate.kind not in CANONICAL_KINDS:
            raise ValidationError(f"unsupported gate {gate.kind.value}")
        if gate.kind is GateKind.CNOT:
            c, tgt = gate.qubits
            rewritten += [Gate(GateKind.HADAMARD, (tgt,)), Gate(GateKind.CZ, (c, tgt)),
                          Gate(GateKind.HADAMARD, (tgt,))]
        else:
            rewritten.append(gate)

    identity = Gate(GateKind.IDENTITY, (0,))
    if d == 1:
        placed = _schedule(rewritten, None)
        T = max(placed, default=0) or 1
        params = ClockParameters(d=1, T=T)
        usable_count = T
    else:
        a = d
        while True:
            placed = _schedule(rewritten, a + 1)
            T = _dual_total(a, d)
            if placed is not None and max(placed, default=0) <= T:
                break
            a += 1
        params = ClockParameters(d=d, T=T, a=a)
        usable_count = math.comb(a, d - 1) * a

    gates = [placed.get(t, identity) for t in range(1, T + 1)]
    slots = [t for t in range(1, T + 1) if gates[t - 1].kind is GateKind.CZ]
    out = Circuit(circuit.width, circuit.proof_size, circuit.out_index, gates, dict(circuit.registers))
    logger.debug(f"Canonicalized {circuit.gate_count} gates to T={T} ({params.variant}, a={params.a})")
    return CanonicalCircuit(out, params, slots, usable_count)
