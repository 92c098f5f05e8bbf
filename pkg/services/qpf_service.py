#!/usr/bin/python
# -*- coding:utf-8 -*-
"""
Shifted-grid approximation of the quantum partition function Z = tr e^{-βH}.

Counting backends:
    exact        noiseless interval counts from the dense spectrum
    oracle       ideal energy estimation with bounded injected noise and
                 Bernoulli failures, optionally adversarial at interval edges
    statevector  phase estimation on the system half of the EPR state, median
                 decision flag, Grover-iterate amplitude estimation of the
                 flag (tiny widths only)
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from config.settings import settings
from services.errors import ValidationError, check_guard
from services.hamiltonian_service import LocalHamiltonian, LocalTerm
from services.operator_utils import apply_block, embed_operator
from services.spectrum_service import dense_eigenvalues

logger = logging.getLogger(__name__)

BACKENDS = ('exact', 'oracle', 'statevector')
DEFAULT_MARGIN = 0.01
EIGENSTATE_TOL = 1e-8
KRAUS_FLOOR = 1e-12


# --- normalization ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalizedHamiltonian:
    """H = scale·H′ + shift·I with the spectrum of H′ inside [0, 1)"""
    H_prime: LocalHamiltonian
    scale: float
    shift: float

    @property
    def width(self) -> int:
        return self.H_prime.width

    def beta_prime(self, beta: float) -> float:
        return self.scale * beta

    def log_rescale(self, beta: float) -> float:
        """log of the factor e^{-β·shift} mapping Z(H′, sβ) back to Z(H, β)"""
        return -beta * self.shift


def normalize(H: LocalHamiltonian, margin: float = DEFAULT_MARGIN) -> NormalizedHamiltonian:
    """
    Shift and scale H so its spectrum lies in [0, 1)

    Args:
        H (LocalHamiltonian): Any Hamiltonian with finite norm bound
        margin (float): Relative headroom below 1

    Returns:
        NormalizedHamiltonian: shift = −‖H‖_bound, scale = 2‖H‖_bound(1+margin);
            the identity transform for H = 0
    """
    bound = H.norm_bound
    if not math.isfinite(bound):
        raise ValidationError("norm bound is not finite")
    if bound == 0:
        return NormalizedHamiltonian(H, 1.0, 0.0)
    scale = 2.0 * bound * (1.0 + margin)
    return NormalizedHamiltonian(H.scaled(1.0 / scale, bound / scale), scale, -bound)


# --- grids -----------------------------------------------------------------------------------

def grid_size(n: int, c: int, beta_prime: float) -> int:
    """L = ⌈4·n^c·β′⌉, at least 3"""
    return max(3, math.ceil(4 * max(n, 1) ** c * beta_prime))


@dataclass(frozen=True)
class GridPartition:
    L: int
    k: int

    def __post_init__(self):
        if not 0 <= self.k < self.L:
            raise ValidationError(f"shift index k={self.k} outside 0..{self.L - 1}")

    @property
    def ells(self) -> range:
        return range(self.L) if self.k == 0 else range(self.L + 1)

    @property
    def anchors(self) -> np.ndarray:
        return np.array([(ell - 1) / self.L + self.k / self.L ** 2 for ell in self.ells])

    def interval(self, ell: int) -> Tuple[float, float]:
        lo = (ell - 1) / self.L + self.k / self.L ** 2
        return lo, lo + 1.0 / self.L

    def boundaries(self) -> np.ndarray:
        anchors = self.anchors
        return np.concatenate([anchors, [anchors[-1] + 1.0 / self.L]])


def _membership(values: np.ndarray, anchors: np.ndarray, span: float) -> np.ndarray:
    """Boolean (len(anchors), len(values)) table of values ∈ [anchor, anchor + span)"""
    values = np.atleast_2d(values)
    upper = anchors + span
    return (values >= anchors[:, None]) & (values < upper[:, None])


def exact_counts(energies: np.ndarray, grid: GridPartition) -> np.ndarray:
    return _membership(energies, grid.anchors, 1.0 / grid.L).sum(axis=1)


def adversarial_boundary_spectrum(n: int, L: int) -> np.ndarray:
    """
    2^n normalized energies, half placed exactly on k=0 interval boundaries and
    half at interval midpoints, all inside [0, (L−2)/L]

    Args:
        n (int): Qubit count
        L (int): Grid size, at least 3

    Returns:
        np.ndarray: Energies in ascending order
    """
    if L < 3:
        raise ValidationError("adversarial spectrum needs L >= 3")
    N = 1 << n
    on_edges = N // 2
    edges = np.array([(j % (L - 1)) / L for j in range(on_edges)])
    mids = np.array([((j % (L - 2)) + 0.5) / L for j in range(N - on_edges)])
    return np.sort(np.concatenate([edges, mids]))


def boundary_hits(spectrum: Sequence[float], L: int, delta_E: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Count eigenvalues strictly within δE of an interval boundary, per grid

    Returns:
        Tuple[np.ndarray, np.ndarray]: hits per shift k, and per eigenvalue the
            number of shifts k whose boundaries it is near
    """
    spectrum = np.asarray(spectrum, dtype=float)
    per_grid = np.zeros(L, dtype=int)
    per_value = np.zeros(len(spectrum), dtype=int)
    for k in range(L):
        bounds = GridPartition(L, k).boundaries()
        near = (np.abs(spectrum[:, None] - bounds[None, :]) < delta_E).any(axis=1)
        per_grid[k] = int(near.sum())
        per_value += near
    return per_grid, per_value


def diagonal_hamiltonian(energies: Sequence[float]) -> LocalHamiltonian:
    """A single full-support diagonal term with the given spectrum"""
    energies = np.asarray(energies, dtype=float)
    n = int(round(math.log2(len(energies))))
    if 1 << n != len(energies):
        raise ValidationError(f"need 2^n energies, got {len(energies)}")
    return LocalHamiltonian(n, [LocalTerm(tuple(range(n)), np.diag(energies).astype(complex), 1.0, 'diagonal')])


# --- Hamiltonian evolution -------------------------------------------------------------------

@dataclass
class EvolutionMap:
    """State map v -> e^{-iH′t}v"""
    width: int
    t: float
    backend: str
    error_bound: float = 0.0
    _unitary: Optional[np.ndarray] = None
    _steps: List[Tuple[Tuple[int, ...], np.ndarray]] = field(default_factory=list)
    _repeats: int = 1
    _phase: complex = 1.0

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        if self._unitary is not None:
            return self._unitary @ v
        for _ in range(self._repeats):
            for support, block in self._steps:
                v = apply_block(v, block, support, self.width)
        return self._phase * v

    def power(self, p: int, v: np.ndarray) -> np.ndarray:
        for _ in range(p):
            v = self.apply(v)
        return v

    @property
    def matrix(self) -> np.ndarray:
        if self._unitary is None:
            raise ValidationError("the Trotter backend is matrix-free")
        return self._unitary


def _commutator_norm(a: LocalTerm, b: LocalTerm) -> float:
    order = sorted(set(a.support) | set(b.support))
    A = a.coefficient * embed_operator(a.matrix, a.support, order)
    B = b.coefficient * embed_operator(b.matrix, b.support, order)
    return float(np.linalg.norm(A @ B - B @ A, 2))


def trotter_error_bound(H: LocalHamiltonian, t: float, steps: int) -> float:
    """(t²/2s)·Σ over overlapping term pairs of ‖[h_j, h_k]‖"""
    total = 0.0
    terms = H.terms
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            if set(terms[i].support) & set(terms[j].support):
                total += _commutator_norm(terms[i], terms[j])
    return t * t / (2 * steps) * total


def hamiltonian_evolution(Hn: Union[NormalizedHamiltonian, LocalHamiltonian], t: float, backend: str = 'exact',
                          steps: int = 64) -> EvolutionMap:
    """
    e^{-iH′t} by dense eigendecomposition, dense matrix exponential or a first-order product formula

    Args:
        Hn (NormalizedHamiltonian | LocalHamiltonian): Generator
        t (float): Evolution time
        backend (str): 'exact' or 'expm' (width within the dense guard), or 'trotter'
        steps (int): Trotter steps

    Returns:
        EvolutionMap: With error_bound 0 for exact and expm
    """
    H = Hn.H_prime if isinstance(Hn, NormalizedHamiltonian) else Hn
    if backend == 'exact':
        check_guard('exact evolution width', H.width, settings.dense_guard)
        values, vectors = linalg.eigh(H.to_dense())
        unitary = (vectors * np.exp(-1j * values * t)) @ vectors.conj().T
        return EvolutionMap(H.width, t, 'exact', 0.0, unitary)
    if backend == 'expm':
        check_guard('exact evolution width', H.width, settings.dense_guard)
        return EvolutionMap(H.width, t, 'expm', 0.0, linalg.expm(-1j * t * H.to_dense()))
    if backend == 'trotter':
        check_guard('Trotter evolution width', H.width, settings.lanczos_guard)
        if steps < 1:
            raise ValidationError("Trotter needs at least one step")
        dt = t / steps
        blocks = [(term.support, linalg.expm(-1j * term.coefficient * dt * term.matrix)) for term in H.terms]
        bound = trotter_error_bound(H, t, steps)
        return EvolutionMap(H.width, t, 'trotter', bound, None, blocks, steps, np.exp(-1j * H.offset * t))
    raise ValidationError(f"unknown evolution backend {backend!r}")


# --- phase and energy estimation -------------------------------------------------------------

def phase_distribution(u_action: Callable[[int, np.ndarray], np.ndarray], state: np.ndarray,
                       r: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Outcome distribution of r-bit phase estimation on the joint register

    Args:
        u_action (callable): (power, state) -> U^power·state
        state (np.ndarray): System state
        r (int): Phase register bits

    Returns:
        Tuple[np.ndarray, np.ndarray]: probabilities over y in 0..2^r-1, and the
            unnormalized post-measurement system states for each y
    """
    size = 1 << r
    stack = np.empty((size, len(state)), dtype=complex)
    v = np.asarray(state, dtype=complex)
    for j in range(size):
        stack[j] = v
        v = u_action(1, v)
    amplitudes = np.fft.fft(stack, axis=0) / size
    probs = np.sum(np.abs(amplitudes) ** 2, axis=1)
    return probs / probs.sum(), amplitudes


@dataclass
class PhaseEstimate:
    outcomes: np.ndarray
    probabilities: np.ndarray
    r: int

    @property
    def phases(self) -> np.ndarray:
        """Estimated θ̃ = 2π·y/2^r"""
        return 2 * np.pi * self.outcomes / (1 << self.r)

    def within(self, theta: float, b: int) -> float:
        """Probability mass with circular |θ̃ − θ| <= 2π/2^b"""
        grid = 2 * np.pi * np.arange(1 << self.r) / (1 << self.r)
        diff = np.abs((grid - theta + np.pi) % (2 * np.pi) - np.pi)
        return float(self.probabilities[diff <= 2 * np.pi / (1 << b) + 1e-12].sum())


def phase_estimate(u_action: Callable[[int, np.ndarray], np.ndarray], eigenstate: np.ndarray, r: int,
                   samples: int = 1, rng: Optional[np.random.Generator] = None,
                   require_eigenstate: bool = True) -> PhaseEstimate:
    """
    Sample textbook phase estimation

    Args:
        u_action (callable): (power, state) -> U^power·state
        eigenstate (np.ndarray): Input state
        r (int): Register bits
        samples (int): Number of outcomes to draw
        rng (np.random.Generator, optional): Sampler
        require_eigenstate (bool): Reject states that are not eigenvectors of U

    Returns:
        PhaseEstimate: Sampled outcomes and the full outcome distribution
    """
    if r < 1:
        raise ValidationError("phase register needs at least one bit")
    psi = np.asarray(eigenstate, dtype=complex)
    if require_eigenstate:
        image = u_action(1, psi)
        eigenvalue = np.vdot(psi, image) / np.vdot(psi, psi)
        residual = float(np.linalg.norm(image - eigenvalue * psi))
        if residual > EIGENSTATE_TOL:
            raise ValidationError(f"input is not an eigenstate (residual {residual:.2e})")
    rng = rng or np.random.default_rng(settings.seed)
    probs, _ = phase_distribution(u_action, psi, r)
    outcomes = rng.choice(len(probs), size=samples, p=probs)
    return PhaseEstimate(outcomes, probs, r)


def median_amplify(estimates: Sequence[float]) -> float:
    """Lower median of repeated estimates"""
    if len(estimates) == 0:
        raise ValidationError("median of an empty list")
    ordered = sorted(estimates)
    return ordered[(len(ordered) - 1) // 2]


@dataclass(frozen=True)
class EnergyEstimationParams:
    delta_E: float
    b: int
    r: int
    m_rep: int

    def __post_init__(self):
        if self.r <= self.b + 1 or self.m_rep < 1:
            raise ValidationError(f"need r > b+1 and m_rep >= 1, got b={self.b} r={self.r} m_rep={self.m_rep}")

    @classmethod
    def from_tolerance(cls, delta_E: float, n: int = 1, m_rep: Optional[int] = None) -> 'EnergyEstimationParams':
        """b = ⌈log₂(2π/δE)⌉, r = b + 2, m_rep = n² unless given"""
        if delta_E <= 0:
            raise ValidationError("δE must be positive")
        b = math.ceil(math.log2(2 * math.pi / delta_E))
        return cls(delta_E, b, b + 2, m_rep if m_rep is not None else max(1, n * n))


def decode_energies(r: int) -> np.ndarray:
    """E′ for each outcome y of phase estimation on U = e^{-iπH′}"""
    fractions = np.arange(1 << r) / (1 << r)
    fractions = np.where(fractions >= 0.5, fractions - 1.0, fractions)
    return -2.0 * fractions


def energy_unitary(Hn: NormalizedHamiltonian, backend: str = 'exact') -> EvolutionMap:
    """U = e^{-iπH′}; eigenphase fraction −E/2 stays inside (−½, 0]"""
    return hamiltonian_evolution(Hn, math.pi, backend)


def energy_estimate(Hn: NormalizedHamiltonian, state: np.ndarray, params: EnergyEstimationParams,
                    backend: str = 'statevector', rng: Optional[np.random.Generator] = None,
                    failure_prob: float = 0.0) -> float:
    """
    Median of m_rep energy estimates on one system state

    Args:
        Hn (NormalizedHamiltonian): Normalized Hamiltonian
        state (np.ndarray): Eigenstate, or any superposition (measured coherently)
        params (EnergyEstimationParams): Tolerance and register sizes
        backend (str): 'statevector' (sequential phase-estimation emulation, alias
            'exact') or 'oracle' (eigenvalue plus uniform noise in [−δE, δE])
        rng (np.random.Generator, optional): Sampler
        failure_prob (float): Oracle-only chance of an arbitrary answer

    Returns:
        float: E′
    """
    rng = rng or np.random.default_rng(settings.seed)
    psi = np.asarray(state, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    if backend == 'oracle':
        check_guard('oracle energy estimation width', Hn.width, settings.dense_guard)
        values, vectors = linalg.eigh(Hn.H_prime.to_dense())
        weights = np.abs(vectors.conj().T @ psi) ** 2
        j = rng.choice(len(values), p=weights / weights.sum())
        if rng.random() < failure_prob:
            return float(rng.random())
        return float(values[j] + rng.uniform(-params.delta_E, params.delta_E))
    if backend not in ('statevector', 'exact'):
        raise ValidationError(f"unknown energy estimation backend {backend!r}")

    check_guard('statevector energy estimation width', Hn.width, settings.statevector_guard)
    unitary = energy_unitary(Hn)
    decoded = decode_energies(params.r)
    estimates = []
    for _ in range(params.m_rep):
        probs, amplitudes = phase_distribution(unitary.power, psi, params.r)
        y = rng.choice(len(probs), p=probs)
        estimates.append(float(decoded[y]))
        psi = amplitudes[y] / np.linalg.norm(amplitudes[y])
    return median_amplify(estimates)


# --- EPR state and amplitude estimation ------------------------------------------------------

def epr_state(n: int) -> np.ndarray:
    """2^{-n/2}·Σ_k |k⟩|k⟩ on 2n qubits"""
    if n < 1:
        raise ValidationError("EPR state needs n >= 1")
    check_guard('EPR system qubits', n, settings.statevector_guard)
    N = 1 << n
    state = np.zeros(N * N, dtype=complex)
    state[np.arange(N) * N + np.arange(N)] = 1.0 / math.sqrt(N)
    return state


def grover_bits(n: int, c: int) -> int:
    """⌈n/2⌉ + ⌈c·log₂ n⌉ + 3"""
    n = max(n, 1)
    return math.ceil(n / 2) + math.ceil(c * math.log2(n)) + 3


Preparer = Callable[[], Tuple[np.ndarray, np.ndarray]]


def amplitude_estimate(preparer: Preparer, grover_iters: int, extra_qubit: bool = False,
                       rng: Optional[np.random.Generator] = None, repetitions: int = 1,
                       population: Optional[int] = None) -> float:
    """
    Count marked states via phase estimation of the Grover iterate

    Args:
        preparer (callable): () -> (prepared state, boolean mask of marked basis states)
        grover_iters (int): Bits t of the iteration register (2^t controlled iterates)
        extra_qubit (bool): Tensor in |+⟩ and mark only its |1⟩ half, halving the fraction
        rng (np.random.Generator, optional): Sampler
        repetitions (int): Independent runs; the lower median is returned
        population (int, optional): N the marked fraction refers to, default len(state)

    Returns:
        float: M̃ = N·sin²(πy/2^t), doubled back when extra_qubit is set
    """
    state, marked = preparer()
    state = np.asarray(state, dtype=complex)
    marked = np.asarray(marked, dtype=bool)
    if state.shape != marked.shape:
        raise ValidationError("preparer state and mark mask differ in size")
    if abs(np.linalg.norm(state) - 1.0) > 1e-8:
        raise ValidationError("preparer state is not normalized")
    population = len(state) if population is None else population
    if extra_qubit:
        plus = np.array([1.0, 1.0]) / math.sqrt(2)
        state = np.kron(state, plus)
        marked = np.kron(marked, np.array([False, True]))

    def grover(_power, v):
        v = np.where(marked, -v, v)
        return 2 * np.vdot(state, v) * state - v

    rng = rng or np.random.default_rng(settings.seed)
    probs, _ = phase_distribution(grover, state, grover_iters)
    outcomes = rng.choice(len(probs), size=max(1, repetitions), p=probs)
    fractions = np.sin(np.pi * outcomes / (1 << grover_iters)) ** 2
    fraction = median_amplify(list(fractions))
    if extra_qubit:
        fraction *= 2
    return float(population * fraction)


# --- interval counters -----------------------------------------------------------------------

class IntervalCounter:
    """Estimates how many eigenvalues of H′ fall in an interval"""

    name = 'exact'

    def __init__(self, Hn: NormalizedHamiltonian, delta_E: float, delta_C: float):
        self.logger = logging.getLogger(__name__)
        self.Hn = Hn
        self.N = 1 << Hn.width
        self.delta_E = delta_E
        self.delta_C = delta_C
        self.energies = self._spectrum()

    def _spectrum(self) -> Optional[np.ndarray]:
        return dense_eigenvalues(self.Hn.H_prime)

    def counts(self, anchors: np.ndarray, span: float, rng: np.random.Generator) -> np.ndarray:
        """M̃ for each interval [anchor, anchor + span)"""
        return _membership(self.energies, anchors, span).sum(axis=1).astype(float)

    def diagnostics(self) -> dict:
        return {}


class OracleCounter(IntervalCounter):
    name = 'oracle'

    def __init__(self, Hn, delta_E, delta_C, failure_prob: float, adversarial: bool = False):
        super().__init__(Hn, delta_E, delta_C)
        self.failure_prob = failure_prob
        self.adversarial = adversarial
        self.failures = 0

    def counts(self, anchors: np.ndarray, span: float, rng: np.random.Generator) -> np.ndarray:
        """M̃ for each interval [anchor, anchor + span)"""
        if self.adversarial:
            lower = anchors - self.delta_E
            upper = anchors + span + self.delta_E
            E = self.energies[None, :]
            widened = (E > lower[:, None]) & (E < upper[:, None])
            return (1 + self.delta_C) * widened.sum(axis=1)
        noisy = self.energies[None, :] + rng.uniform(-self.delta_E, self.delta_E,
                                                     size=(len(anchors), len(self.energies)))
        inside = (noisy >= anchors[:, None]) & (noisy < anchors[:, None] + span)
        counts = inside.sum(axis=1) * (1 + rng.uniform(-self.delta_C, self.delta_C, size=len(anchors)))
        failed = rng.random(len(anchors)) < self.failure_prob
        if failed.any():
            self.failures += int(failed.sum())
            counts[failed] = rng.integers(0, self.N + 1, size=int(failed.sum()))
        return counts

    def diagnostics(self) -> dict:
        return {'failure_prob': self.failure_prob, 'failures': self.failures, 'adversarial': self.adversarial}


class StatevectorCounter(IntervalCounter):
    """
    Flag probability of U_dec·U_EE on the EPR input, estimated by amplitude estimation

    Phase estimation runs on the system half of epr_state(n); no eigenbasis is
    ever computed. The m_rep readout registers are kept as tallies of readings
    below and inside the interval, which is exact because every readout effect
    is a function of U and they all commute. The joint state is
    [below tally][inside tally][flag][system][reference].
    """

    name = 'statevector'

    def __init__(self, Hn, delta_E, delta_C, c: int, repetitions: int, m_rep: Optional[int] = None):
        check_guard('statevector system qubits', Hn.width, settings.statevector_guard)
        super().__init__(Hn, delta_E, delta_C)
        self.params = EnergyEstimationParams.from_tolerance(delta_E, Hn.width, m_rep)
        check_guard('statevector readout table', (1 << self.params.r) * self.N * self.N,
                    settings.statevector_amplitude_guard)
        self.t = grover_bits(Hn.width, c)
        self.repetitions = repetitions
        self.decoded = decode_energies(self.params.r)
        self._epr = epr_state(Hn.width)
        self._sorted_values, self._cumulative = self._readout_effects()
        self._joint = {}

    def _spectrum(self) -> Optional[np.ndarray]:
        return None

    def _readout_effects(self) -> Tuple[np.ndarray, np.ndarray]:
        """Decoded values in ascending order and prefix sums of the effects f_y†f_y in that order"""
        N = self.N
        unitary = energy_unitary(self.Hn, 'expm').matrix

        def on_system(_power, v):
            return (unitary @ v.reshape(N, N)).ravel()

        _, amplitudes = phase_distribution(on_system, self._epr, self.params.r)
        # the reference half is I/√N, so each amplitude is f_y/√N
        readouts = amplitudes.reshape(-1, N, N) * math.sqrt(N)
        effects = np.einsum('yji,yjk->yik', readouts.conj(), readouts)
        order = np.argsort(self.decoded, kind='stable')
        cumulative = np.zeros((len(order) + 1, N, N), dtype=complex)
        cumulative[1:] = np.cumsum(effects[order], axis=0)
        return self.decoded[order], cumulative

    def _kraus_root(self, effect: np.ndarray) -> np.ndarray:
        effect = (effect + effect.conj().T) / 2 + KRAUS_FLOOR * np.eye(self.N)
        return linalg.sqrtm(effect)

    def joint_state(self, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        U_dec(I)·U_EE applied to the EPR state for I = [lo, hi)

        Returns:
            Tuple[np.ndarray, np.ndarray]: normalized joint state, and the mask of basis
                states with the decision flag set
        """
        i_lo = int(np.searchsorted(self._sorted_values, lo, 'left'))
        i_hi = int(np.searchsorted(self._sorted_values, hi, 'left'))
        if (i_lo, i_hi) in self._joint:
            return self._joint[(i_lo, i_hi)]

        total = self._cumulative
        effects = (total[i_lo], total[i_hi] - total[i_lo], total[-1] - total[i_hi])
        m = self.params.m_rep
        h = (m - 1) // 2 + 1
        powers = [[np.linalg.matrix_power(root, p) for p in range(m + 1)]
                  for root in map(self._kraus_root, effects)]
        system = self._epr.reshape(self.N, self.N)
        shape = (m + 1, m + 1, 2, self.N, self.N)
        state = np.zeros(shape, dtype=complex)
        for below in range(m + 1):
            for inside in range(m + 1 - below):
                weight = math.sqrt(math.comb(m, below) * math.comb(m - below, inside))
                flag = int(below < h <= below + inside)
                kraus = powers[0][below] @ powers[1][inside] @ powers[2][m - below - inside]
                state[below, inside, flag] = weight * (kraus @ system)
        state = state.ravel()
        state /= np.linalg.norm(state)
        marked = np.zeros(shape, dtype=bool)
        marked[:, :, 1] = True
        self._joint[(i_lo, i_hi)] = (state, marked.ravel())
        return self._joint[(i_lo, i_hi)]

    def counts(self, anchors: np.ndarray, span: float, rng: np.random.Generator) -> np.ndarray:
        """M̃ for each interval [anchor, anchor + span)"""
        counts = []
        for lo in anchors:
            joint = self.joint_state(float(lo), float(lo + span))
            counts.append(amplitude_estimate(lambda: joint, self.t, True, rng, self.repetitions, self.N))
        return np.array(counts)

    def diagnostics(self) -> dict:
        m = self.params.m_rep
        return {
            'phase_bits': self.params.r,
            'm_rep': m,
            'grover_bits': self.t,
            'repetitions': self.repetitions,
            'tally_states': (m + 1) * (m + 2) // 2,
            'joint_dimension': (m + 1) ** 2 * 2 * self.N * self.N,
            'a_EE': self.params.r * m + 1,
            'a_sim': 0,
        }


def _amplification_runs(failure_budget: float) -> int:
    """Odd run count whose median fails with probability below the budget (single-run success 8/π²)"""
    gap = 8 / math.pi ** 2 - 0.5
    runs = math.ceil(math.log(1 / max(failure_budget, 1e-12)) / (2 * gap * gap))
    return runs + (1 - runs % 2)


def _make_counter(Hn, backend, delta_E, delta_C, c, failure_budget, adversarial, m_rep=None) -> IntervalCounter:
    if backend == 'exact':
        check_guard('exact counting width', Hn.width, settings.dense_guard)
        return IntervalCounter(Hn, delta_E, delta_C)
    if backend == 'oracle':
        check_guard('oracle counting width', Hn.width, settings.dense_guard)
        return OracleCounter(Hn, delta_E, delta_C, failure_budget, adversarial)
    if backend == 'statevector':
        return StatevectorCounter(Hn, delta_E, delta_C, c, _amplification_runs(failure_budget), m_rep)
    raise ValidationError(f"unknown QPF backend {backend!r}; choose one of {BACKENDS}")


def count_in_interval(Hn: NormalizedHamiltonian, interval: Tuple[float, float], delta_C: float,
                      backend: str = 'exact', seed: Optional[int] = None, delta_E: Optional[float] = None,
                      c: int = 1) -> float:
    """
    Estimate |{j : E_j ∈ [lo, hi)}| for the normalized spectrum

    Args:
        Hn (NormalizedHamiltonian): Normalized Hamiltonian
        interval (Tuple[float, float]): [lo, hi)
        delta_C (float): Relative counting error
        backend (str): 'exact', 'oracle' or 'statevector'
        seed (int, optional): RNG seed
        delta_E (float, optional): Energy tolerance, default (hi − lo)²
        c (int): Precision exponent for the Grover register

    Returns:
        float: M̃
    """
    lo, hi = interval
    if not hi > lo:
        raise ValidationError(f"empty interval [{lo}, {hi})")
    delta_E = (hi - lo) ** 2 if delta_E is None else delta_E
    seed = settings.seed if seed is None else seed
    counter = _make_counter(Hn, backend, delta_E, delta_C, c, 0.0, False)
    return float(counter.counts(np.array([lo]), hi - lo, np.random.default_rng(seed))[0])


# --- the algorithm ---------------------------------------------------------------------------

@dataclass
class QpfEstimate:
    z: float
    log_z: float
    per_grid: List[float]
    counts: List[List[float]]
    best_k: int
    backend: str
    L: int
    c: int
    beta: float
    beta_prime: float
    scale: float
    shift: float
    delta_C: float
    delta_E: float
    seed: int
    diagnostics: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'z': self.z,
            'log_z': self.log_z,
            'best_k': self.best_k,
            'backend': self.backend,
            'parameters': {'L': self.L, 'c': self.c, 'beta': self.beta, 'beta_prime': self.beta_prime,
                           'scale': self.scale, 'shift': self.shift, 'seed': self.seed},
            'delta_C': self.delta_C,
            'delta_E': self.delta_E,
            'per_grid': self.per_grid,
            'counts': self.counts,
            'diagnostics': self.diagnostics,
        }


def _normalize_for_grid(H: LocalHamiltonian, beta: float, c: int) -> Tuple[NormalizedHamiltonian, int]:
    """Normalize, widening the margin until the k=0 grid covers the spectrum with one slot to spare"""
    margin = DEFAULT_MARGIN
    Hn = normalize(H, margin)
    L = grid_size(H.width, c, Hn.beta_prime(beta))
    if H.norm_bound > 0 and 1 / (1 + margin) > (L - 2) / L:
        margin = L / (L - 2) - 1 + 1e-12
        Hn = normalize(H, margin)
        L = grid_size(H.width, c, Hn.beta_prime(beta))
        logger.debug(f"Widened normalization margin to {margin:.4g} for L={L}")
    return Hn, L


def approximate_qpf(H: Union[LocalHamiltonian, NormalizedHamiltonian], beta: float, c: int = 1,
                    backend: str = 'oracle', seed: Optional[int] = None, confidence: Optional[float] = None,
                    adversarial: bool = False, m_rep: Optional[int] = None) -> QpfEstimate:
    """
    Z̃ = e^{-β·shift}·min_k Σ_ℓ M̃_{k,ℓ}·e^{-β′E_{k,ℓ}}

    Args:
        H (LocalHamiltonian | NormalizedHamiltonian): Hamiltonian, normalized here unless already
        beta (float): Inverse temperature β >= 0
        c (int): Precision exponent; target relative error 1/n^c
        backend (str): 'exact', 'oracle' or 'statevector'
        seed (int, optional): Seed; grid k draws from SeedSequence([seed, k])
        confidence (float, optional): Overall success probability
        adversarial (bool): Oracle only; count every eigenvalue within δE of an interval
        m_rep (int, optional): Statevector energy-estimation repetitions

    Returns:
        QpfEstimate: Estimate with per-grid breakdown
    """
    if beta < 0:
        raise ValidationError(f"β must be nonnegative, got {beta}")
    if c < 1:
        raise ValidationError(f"c must be >= 1, got {c}")
    seed = settings.seed if seed is None else seed
    confidence = settings.qpf_confidence if confidence is None else confidence
    if not 0 < confidence < 1:
        raise ValidationError(f"confidence must lie in (0,1), got {confidence}")
    if backend not in BACKENDS:
        raise ValidationError(f"unknown QPF backend {backend!r}; choose one of {BACKENDS}")
    if backend == 'statevector':
        width = H.width
        check_guard('statevector system qubits', width, settings.statevector_guard)

    if isinstance(H, NormalizedHamiltonian):
        Hn = H
        L = grid_size(Hn.width, c, Hn.beta_prime(beta))
    else:
        Hn, L = _normalize_for_grid(H, beta, c)
    check_guard('QPF grid size L', L, settings.qpf_grid_guard)

    n = Hn.width
    beta_prime = Hn.beta_prime(beta)
    delta_C = 1.0 / (4 * max(n, 1) ** c)
    delta_E = 1.0 / L ** 2
    failure_budget = (1 - confidence) / (L * (L + 1))
    counter = _make_counter(Hn, backend, delta_E, delta_C, c, failure_budget, adversarial, m_rep)
    if adversarial and backend != 'oracle':
        logger.warning("adversarial counting applies to the oracle backend only")
    top = None if counter.energies is None else float(counter.energies[-1])
    if top is not None and top > (L - 2) / L:
        logger.warning(f"normalized spectrum reaches {top:.4g}, above the k=0 grid's last full slot")

    per_grid, counts = [], []
    for k in range(L):
        grid = GridPartition(L, k)
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        m_tilde = counter.counts(grid.anchors, 1.0 / L, rng)
        counts.append([float(v) for v in m_tilde])
        per_grid.append(float(np.sum(m_tilde * np.exp(-beta_prime * grid.anchors))))

    best_k = int(np.argmin(per_grid))
    z_prime = per_grid[best_k]
    log_z = Hn.log_rescale(beta) + (math.log(z_prime) if z_prime > 0 else float('-inf'))
    z = math.exp(log_z) if log_z < 709 else float('inf')
    diagnostics = counter.diagnostics()
    diagnostics['failure_budget'] = failure_budget
    logger.info(f"QPF[{backend}] n={n} L={L} β′={beta_prime:.4g}: Z̃={z:.6g} (k*={best_k})")
    return QpfEstimate(z, log_z, per_grid, counts, best_k, backend, L, c, beta, beta_prime, Hn.scale,
                       Hn.shift, delta_C, delta_E, seed, diagnostics)


def qpf_solver(backend: str = 'oracle', c: int = 1, seed: Optional[int] = None) -> Callable:
    """(H, β, δ) -> QpfEstimate closure over approximate_qpf, for decide_lh_via_qpf"""
    def solve(H: LocalHamiltonian, beta: float, delta: float) -> QpfEstimate:
        return approximate_qpf(H, beta, c, backend, seed)
    return solve
