#!/usr/bin/python
# -*- coding:utf-8 -*-
"""
Reductions as executable pipelines: kSAT -> kLH (clause projectors),
SAT -> 3LH (verifier circuit through the dual-clock construction) and
LH -> QPF (threshold derivation plus a black-box partition-function decision).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Protocol, Union

import numpy as np

from config.settings import settings
from services.circuit_service import (build_sat_verifier, canonicalize_for_construction, decompose_circuit,
                                      verifier_report)
from services.cnf_service import CnfFormula, random_kcnf, validate_kcnf
from services.errors import LhError, StageError, ValidationError
from services.hamiltonian_service import CoefficientSet, LocalHamiltonian, LocalTerm, circuit_to_hamiltonian
from services.operator_utils import projector_bits
from services.spectrum_service import Decision, PartitionFunction, Thresholds, log_partition_function

logger = logging.getLogger(__name__)


class LogEstimate(Protocol):
    log_z: float


QpfSolver = Callable[[LocalHamiltonian, float, float], Union[float, LogEstimate]]


@dataclass
class LhInstance:
    H: LocalHamiltonian
    thresholds: Thresholds
    k: int
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.H.max_support > self.k:
            raise ValidationError(f"Hamiltonian acts on {self.H.max_support} qubits, instance declares k={self.k}")

    @property
    def width(self) -> int:
        return self.H.width

    def to_dict(self, include_hamiltonian: bool = False) -> dict:
        data = {
            'k': self.k,
            'width': self.width,
            'locality': self.H.max_support,
            'num_terms': len(self.H.terms),
            'norm_bound': self.H.norm_bound,
            'thresholds': self.thresholds.to_dict(),
            'provenance': self.provenance,
        }
        if include_hamiltonian:
            data['hamiltonian'] = self.H.to_dict()
        return data


@dataclass
class QpfInstance:
    H: LocalHamiltonian
    beta: float
    delta: float
    thresholds: Thresholds
    log_z_yes: float
    log_z_no: float
    log_z_no_loose: float

    def __post_init__(self):
        n = self.H.width
        if not 0 < self.delta < 1:
            raise ValidationError(f"δ must lie in (0,1), got {self.delta}")
        if (1 - self.delta) / (1 + self.delta) < math.exp(-0.3 * n) * (1 - 1e-12):
            raise ValidationError(f"δ={self.delta} too large for n={n}: (1-δ)/(1+δ) < e^(-0.3n)")
        if self.beta <= 0:
            raise ValidationError(f"β must be positive, got {self.beta}")

    @property
    def z_yes(self) -> float:
        return PartitionFunction(self.log_z_yes).z

    @property
    def z_no(self) -> float:
        return PartitionFunction(self.log_z_no).z

    @property
    def z_no_loose(self) -> float:
        return PartitionFunction(self.log_z_no_loose).z

    def to_dict(self) -> dict:
        return {
            'n': self.H.width,
            'beta': self.beta,
            'delta': self.delta,
            'thresholds': self.thresholds.to_dict(),
            'z_yes': self.z_yes,
            'z_no': self.z_no,
            'z_no_loose': self.z_no_loose,
            'log_z_yes': self.log_z_yes,
            'log_z_no': self.log_z_no,
            'log_z_no_loose': self.log_z_no_loose,
        }


def _require_valid(formula: CnfFormula, stage: str) -> int:
    k = max(1, formula.max_width)
    report = validate_kcnf(formula, k)
    if not report.valid:
        raise StageError(stage, ValidationError(f"invalid formula: {report.offending_clauses}"))
    return k


def trivial_thresholds(n: int) -> Thresholds:
    """(1/n, 1−1/n), with n raised to 3 so the gap stays open on tiny formulas"""
    n = max(n, 3)
    return Thresholds(1.0 / n, 1.0 - 1.0 / n)


def sat_to_klh_trivial(formula: CnfFormula) -> LhInstance:
    """
    One projector per clause onto its unique falsifying sub-assignment

    The term |y_i⟩⟨y_i| on S_i equals I minus the projector onto the clause's
    satisfying sub-assignments, so H|x⟩ = (#clauses x falsifies)·|x⟩.

    Args:
        formula (CnfFormula): Valid kCNF

    Returns:
        LhInstance: Width n, locality = max clause width, thresholds (1/n, 1−1/n)
    """
    k = _require_valid(formula, 'trivial')
    terms = []
    for i, clause in enumerate(formula.clauses):
        support = tuple(lit.variable - 1 for lit in clause)
        falsifying = [1 if lit.negated else 0 for lit in clause]
        terms.append(LocalTerm(support, projector_bits(falsifying), 1.0, f'clause{i + 1}'))
    H = LocalHamiltonian(formula.num_vars, terms, locality=k)
    provenance = {
        'reduction': 'ksat_to_klh',
        'n': formula.num_vars,
        'm': formula.num_clauses,
        'k': k,
        'stages': ['validate', 'clause_projectors'],
    }
    logger.info(f"Trivial reduction: n={formula.num_vars} m={formula.num_clauses} locality={k}")
    return LhInstance(H, trivial_thresholds(formula.num_vars), k, provenance)


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except LhError as e:
        raise StageError(name, e)


def _construction_stages(formula: CnfFormula, d: int):
    circuit = _stage('verifier', build_sat_verifier, formula)
    elementary = _stage('decompose', decompose_circuit, circuit)
    canonical = _stage('canonicalize', canonicalize_for_construction, elementary, d)
    return circuit, elementary, canonical


def sat_to_3lh(formula: CnfFormula, epsilon: Optional[float] = None,
               coeffs: Optional[Union[CoefficientSet, str]] = None, d: int = 2) -> LhInstance:
    """
    Verifier circuit -> elementary gates -> canonical layout -> clock Hamiltonian

    Args:
        formula (CnfFormula): Valid kCNF with at least one clause
        epsilon (float, optional): Error parameter, must be < 1/4
        coeffs (CoefficientSet | str, optional): A set, or 'default' / 'calibrated' to derive one from T
        d (int): Clock locality parameter; 2 gives the 3-local dual clock, 1 the unary clock

    Returns:
        LhInstance: Thresholds (ε, ½−ε); provenance records every stage

    Raises:
        ValidationError: If ε >= 1/4
        StageError: If a pipeline stage rejects its input
    """
    epsilon = settings.epsilon if epsilon is None else epsilon
    if not 0 < epsilon < 0.25:
        raise ValidationError(f"ε must lie in (0, 1/4), got {epsilon}")
    _require_valid(formula, 'validate')

    circuit, elementary, canonical = _construction_stages(formula, d)
    params = canonical.params
    if coeffs is None or coeffs == 'default':
        coeffs = CoefficientSet.default(params.T)
    elif coeffs == 'calibrated':
        coeffs = CoefficientSet.calibrated(params.T, epsilon)
    elif not isinstance(coeffs, CoefficientSet):
        raise ValidationError(f"unknown coefficient set {coeffs!r}")
    H = _stage('hamiltonian', circuit_to_hamiltonian, canonical, d, coeffs)

    n = formula.num_vars
    n_a = circuit.ancilla_size
    clock_width = H.width - circuit.width
    k = 2 if params.a is None else d + 1
    provenance = {
        'reduction': 'sat_to_3lh' if d == 2 else f'sat_to_{k}lh',
        'stages': ['validate', 'verifier', 'decompose', 'canonicalize', 'hamiltonian'],
        'n': n,
        'm': formula.num_clauses,
        'k_cnf': formula.max_width,
        'epsilon': epsilon,
        'schedule': params.to_dict(),
        'coefficients': coeffs.to_dict(),
        'coefficients_bounded': coeffs.is_bounded(H.width, params.T),
        'widths': {'n': n, 'n_a': n_a, 'clock': clock_width, 'a': params.a, 'n_H': H.width},
        'gate_counts': {
            'macro': circuit.gate_count,
            'elementary': elementary.gate_count,
            'canonical_T': params.T,
            'two_qubit_slots': len(canonical.two_qubit_slots),
        },
        'verifier': verifier_report(formula, circuit),
    }
    logger.info(f"SAT->LH: n={n} n_a={n_a} T={params.T} a={params.a} n_H={H.width} locality={H.max_support}")
    return LhInstance(H, Thresholds(epsilon, 0.5 - epsilon), k, provenance)


def width_sweep(ns: Iterable[int], clauses_per_var: float = 1.0, k: int = 3, d: int = 2,
                seed: int = 0) -> List[dict]:
    """
    Tabulate n, n_a, a, T, n_H and n_H/n for the SAT->LH pipeline

    The Hamiltonian itself is not built; widths follow from the canonical layout.
    """
    rows = []
    for n in ns:
        m = max(1, int(round(clauses_per_var * n)))
        formula = random_kcnf(n, m, k, seed)
        circuit, _, canonical = _construction_stages(formula, d)
        params = canonical.params
        clock = params.T if params.a is None else 2 * params.a
        n_H = circuit.width + clock
        rows.append({'n': n, 'm': m, 'n_a': circuit.ancilla_size, 'a': params.a, 'T': params.T,
                     'n_H': n_H, 'ratio': n_H / n})
        logger.debug(f"width sweep n={n}: T={params.T} a={params.a} n_H={n_H}")
    return rows


def boundary_parameters(n: int, thresholds: Thresholds):
    """δ₀ with (1−δ₀)/(1+δ₀) = e^{−0.3n} and β₀ = n/(E_no − E_yes)"""
    q = math.exp(-0.3 * n)
    return (1 - q) / (1 + q), n / thresholds.gap


def lh_to_qpf(instance: LhInstance, beta: Optional[float] = None, delta: Optional[float] = None) -> QpfInstance:
    """
    Derive (β, δ) and the decision thresholds for an LH instance

    z_yes = (1−δ)e^{−βE_yes}. Decisions use z_no = (1+δ)·2^n·e^{−βE_no}, the
    largest Z any NO instance can have; z_no_loose = (1+δ)e^{−βE_no+0.7n} is
    reported alongside. All three are kept as logarithms.

    Args:
        instance (LhInstance): Source instance over n = width qubits
        beta (float, optional): Override, must be >= β₀
        delta (float, optional): Override, must be <= δ₀

    Returns:
        QpfInstance: With z_yes > z_no

    Raises:
        ValidationError: On degenerate thresholds or out-of-range overrides
    """
    n = instance.width
    delta0, beta0 = boundary_parameters(n, instance.thresholds)
    beta = beta0 if beta is None else beta
    delta = delta0 if delta is None else delta
    if beta < beta0 * (1 - 1e-12):
        raise ValidationError(f"β={beta} below β₀={beta0}")
    if delta > delta0 * (1 + 1e-12):
        raise ValidationError(f"δ={delta} above δ₀={delta0}")
    if delta <= 0 or beta <= 0:
        raise ValidationError(f"degenerate thresholds for n={n}: β={beta} δ={delta}")

    E_yes, E_no = instance.thresholds.E_yes, instance.thresholds.E_no
    log_z_yes = math.log1p(-delta) - beta * E_yes
    log_z_no = math.log1p(delta) + n * math.log(2.0) - beta * E_no
    log_z_no_loose = math.log1p(delta) - beta * E_no + 0.7 * n
    if not log_z_yes > log_z_no:
        raise ValidationError(f"degenerate thresholds: log z_yes={log_z_yes:.6g} <= log z_no={log_z_no:.6g}")
    logger.info(f"LH->QPF: n={n} β={beta:.6g} δ={delta:.6g} log z_yes={log_z_yes:.6g} log z_no={log_z_no:.6g}")
    return QpfInstance(instance.H, beta, delta, instance.thresholds, log_z_yes, log_z_no, log_z_no_loose)


def exact_qpf_solver(H: LocalHamiltonian, beta: float, delta: float) -> PartitionFunction:
    """QPF solver with zero error"""
    return PartitionFunction(log_partition_function(H, beta))


def _log_estimate(result) -> float:
    """log Z̃ from a solver result: a plain Z̃, or anything carrying log_z"""
    log_z = getattr(result, 'log_z', None)
    if log_z is not None:
        log_z = float(log_z)
        if math.isnan(log_z) or log_z == float('inf'):
            raise ValidationError(f"QPF solver returned an invalid log estimate {log_z}")
        return log_z
    z = float(result)
    if not np.isfinite(z) or z < 0:
        raise ValidationError(f"QPF solver returned an invalid estimate {z}")
    return math.log(z) if z > 0 else float('-inf')


def decide_lh_via_qpf(instance: QpfInstance, qpf_solver: QpfSolver = exact_qpf_solver) -> Decision:
    """
    YES if Z̃ >= z_yes, NO if Z̃ <= z_no, INDETERMINATE otherwise; compared as logarithms

    Args:
        instance (QpfInstance): Output of lh_to_qpf
        qpf_solver (callable): (H, β, δ) -> Z̃, either a float or a result with log_z

    Returns:
        Decision: The verdict
    """
    log_z = _log_estimate(qpf_solver(instance.H, instance.beta, instance.delta))
    if log_z >= instance.log_z_yes:
        return Decision.YES
    if log_z <= instance.log_z_no:
        return Decision.NO
    logger.warning(f"log Z̃={log_z:.6g} lies between log z_no={instance.log_z_no:.6g} "
                   f"and log z_yes={instance.log_z_yes:.6g}")
    return Decision.INDETERMINATE
