#!/usr/bin/python
# -*- coding:utf-8 -*-
"""
Ground energies (dense and Lanczos), exact partition functions and the
promise-problem decision on λ(H).
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy import linalg, special

from config.settings import settings
from services.cache_service import cache_service
from services.errors import ValidationError, check_guard
from services.hamiltonian_service import LocalHamiltonian

logger = logging.getLogger(__name__)

_BREAKDOWN = 1e-12


class Decision(Enum):
    YES = 'YES'
    NO = 'NO'
    INDETERMINATE = 'INDETERMINATE'


@dataclass(frozen=True)
class Thresholds:
    E_yes: float
    E_no: float

    def __post_init__(self):
        if not self.E_no > self.E_yes:
            raise ValidationError(f"need E_no > E_yes, got E_yes={self.E_yes} E_no={self.E_no}")

    @property
    def gap(self) -> float:
        return self.E_no - self.E_yes

    def to_dict(self) -> dict:
        return {'E_yes': self.E_yes, 'E_no': self.E_no}


@dataclass
class SpectrumReport:
    ground_energy: float
    method: str
    residual: float = 0.0
    iterations: int = 0
    eigenvalues: Optional[List[float]] = None
    converged: bool = True

    def to_dict(self) -> dict:
        data = {
            'lambda': self.ground_energy,
            'method': self.method,
            'residual': self.residual,
            'iterations': self.iterations,
            'converged': self.converged,
        }
        if self.eigenvalues is not None:
            data['eigenvalues'] = list(self.eigenvalues)
        return data


def dense_eigenvalues(H: LocalHamiltonian) -> np.ndarray:
    """Sorted spectrum of H, memoized by Hamiltonian fingerprint"""
    def compute():
        values = linalg.eigh(H.to_dense(), eigvals_only=True)
        return np.sort(np.real(values))
    check_guard('dense Hamiltonian width', H.width, settings.dense_guard)
    return cache_service.memoize('spectrum', H.fingerprint(), compute)


def ground_energy_dense(H: LocalHamiltonian) -> SpectrumReport:
    """
    Exact λ(H) and full spectrum by Hermitian eigendecomposition

    Args:
        H (LocalHamiltonian): Hamiltonian within the dense guard

    Returns:
        SpectrumReport: method 'dense', residual 0, eigenvalues ascending
    """
    values = dense_eigenvalues(H)
    logger.debug(f"Dense spectrum of width {H.width}: λ={values[0]:.12g}")
    return SpectrumReport(float(values[0]), 'dense', 0.0, 0, [float(v) for v in values])


def ground_energy_lanczos(H: LocalHamiltonian, max_iters: Optional[int] = None, tol: Optional[float] = None,
                          seed: Optional[int] = None) -> SpectrumReport:
    """
    Lowest Ritz value of a fully reorthogonalized Krylov basis

    The Ritz value never undershoots λ(H). Non-convergence within max_iters is
    logged and reported through `converged` and `residual`.

    Args:
        H (LocalHamiltonian): Hamiltonian applied matrix-free
        max_iters (int, optional): Krylov dimension cap
        tol (float, optional): Target residual ‖Hx − θx‖
        seed (int, optional): Start-vector seed

    Returns:
        SpectrumReport: method 'lanczos'
    """
    check_guard('Lanczos width', H.width, settings.lanczos_guard)
    max_iters = settings.lanczos_max_iters if max_iters is None else max_iters
    tol = settings.lanczos_tol if tol is None else tol
    seed = settings.seed if seed is None else seed
    dim = 1 << H.width
    max_iters = max(1, min(max_iters, dim))

    rng = np.random.default_rng(seed)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v /= np.linalg.norm(v)
    basis = [v]
    alphas, betas = [], []
    theta, residual, converged = 0.0, float('inf'), False

    for it in range(1, max_iters + 1):
        w = H.apply(basis[-1])
        alpha = float(np.vdot(basis[-1], w).real)
        alphas.append(alpha)
        V = np.array(basis).T
        for _ in range(2):
            w = w - V @ (V.conj().T @ w)
        beta = float(np.linalg.norm(w))

        evals, evecs = linalg.eigh_tridiagonal(np.array(alphas), np.array(betas)) if betas else \
            (np.array(alphas), np.ones((1, 1)))
        theta = float(evals[0])
        y = evecs[:, 0]
        residual = abs(beta * y[-1])
        if residual <= tol or beta < _BREAKDOWN or it == max_iters:
            ritz = V @ y
            ritz /= np.linalg.norm(ritz)
            residual = float(np.linalg.norm(H.apply(ritz) - theta * ritz))
            converged = residual <= tol or beta < _BREAKDOWN
            if converged or it == max_iters:
                break
        betas.append(beta)
        basis.append(w / beta)

    if not converged:
        logger.warning(f"Lanczos stopped after {it} iterations with residual {residual:.3e} > tol {tol:.1e}")
    logger.debug(f"Lanczos width={H.width}: λ≈{theta:.12g} residual={residual:.2e} iterations={it}")
    return SpectrumReport(theta, 'lanczos', residual, it, None, converged)


def ground_energy(H: LocalHamiltonian, method: str = 'auto', seed: Optional[int] = None) -> SpectrumReport:
    """Dispatch on method: 'dense', 'lanczos' or 'auto' (dense while within the dense guard)"""
    if method == 'auto':
        method = 'dense' if H.width <= settings.dense_guard else 'lanczos'
    if method == 'dense':
        return ground_energy_dense(H)
    if method == 'lanczos':
        return ground_energy_lanczos(H, seed=seed)
    raise ValidationError(f"unknown spectrum method {method!r}")


@dataclass(frozen=True)
class PartitionFunction:
    """Z held as log Z; z is inf once it leaves the float range"""
    log_z: float

    @property
    def z(self) -> float:
        return math.exp(self.log_z) if self.log_z < 709 else float('inf')

    def __float__(self) -> float:
        return self.z


def log_partition_function(H: LocalHamiltonian, beta: float) -> float:
    """
    log tr e^{-βH} over the dense spectrum, finite for any β and spectrum

    Args:
        H (LocalHamiltonian): Hamiltonian within the dense guard
        beta (float): Inverse temperature, β ≥ 0

    Returns:
        float: log Z
    """
    if beta < 0:
        raise ValidationError(f"β must be nonnegative, got {beta}")
    if beta == 0:
        return H.width * math.log(2.0)
    values = dense_eigenvalues(H)
    return float(special.logsumexp(-beta * values))


def exact_partition_function(H: LocalHamiltonian, beta: float) -> float:
    """
    Z = tr e^{-βH} over the dense spectrum

    Args:
        H (LocalHamiltonian): Hamiltonian within the dense guard
        beta (float): Inverse temperature, β ≥ 0

    Returns:
        float: Partition function, inf when Z overflows (see log_partition_function)
    """
    if beta == 0:
        return float(1 << H.width)
    return PartitionFunction(log_partition_function(H, beta)).z


def classify(ground_energy: float, residual: float, thresholds: Thresholds) -> Decision:
    """YES below E_yes, NO when even λ − residual clears E_no, INDETERMINATE in between"""
    if ground_energy <= thresholds.E_yes:
        return Decision.YES
    if ground_energy - residual >= thresholds.E_no:
        return Decision.NO
    return Decision.INDETERMINATE


def decide_lh(H: LocalHamiltonian, thresholds: Thresholds, method: str = 'auto') -> Decision:
    """
    Decide λ(H) ≤ E_yes versus λ(H) ≥ E_no

    Args:
        H (LocalHamiltonian): Instance Hamiltonian
        thresholds (Thresholds): Promise thresholds
        method (str): 'dense', 'lanczos' or 'auto'

    Returns:
        Decision: INDETERMINATE when λ sits inside the promise gap
    """
    report = ground_energy(H, method)
    decision = classify(report.ground_energy, report.residual, thresholds)
    if decision is Decision.INDETERMINATE:
        logger.warning(f"λ={report.ground_energy:.6g} falls inside the promise gap "
                       f"({thresholds.E_yes:.6g}, {thresholds.E_no:.6g})")
    return decision
