#!/usr/bin/python
# -*- coding:utf-8 -*-
import unittest
from unittest.mock import patch
import sys
import os
import math

import numpy as np
from scipy import linalg

# Add the project directory to sys.path to import services
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from services.circuit_service import random_state
from services.errors import GuardError, ValidationError
from services.hamiltonian_service import LocalHamiltonian, LocalTerm, random_local_hamiltonian
from services.operator_utils import projector_bits
from services.qpf_service import (EnergyEstimationParams, GridPartition, IntervalCounter, NormalizedHamiltonian,
                                  StatevectorCounter, adversarial_boundary_spectrum, amplitude_estimate,
                                  approximate_qpf, boundary_hits, count_in_interval, decode_energies,
                                  diagonal_hamiltonian, energy_estimate, epr_state, grid_size, grover_bits,
                                  hamiltonian_evolution, median_amplify, normalize, phase_estimate, qpf_solver,
                                  trotter_error_bound)
from services.spectrum_service import exact_partition_function


def _uniform_preparer(n, marked_count):
    """Uniform superposition on n qubits with the first marked_count basis states marked"""
    N = 1 << n
    state = np.full(N, 1 / math.sqrt(N), dtype=complex)
    marked = np.arange(N) < marked_count
    return lambda: (state, marked)


class TestNormalize(unittest.TestCase):
    """Test the shift-and-scale into [0, 1)"""

    def test_spectrum_in_unit_interval(self):
        for seed in range(5):
            H = random_local_hamiltonian(5, 6, 3, seed=seed)
            Hn = normalize(H)
            values = np.linalg.eigvalsh(Hn.H_prime.to_dense())
            self.assertGreaterEqual(values[0], -1e-12)
            self.assertLess(values[-1], 1.0)
            np.testing.assert_allclose(Hn.scale * Hn.H_prime.to_dense() + Hn.shift * np.eye(32), H.to_dense(),
                                       atol=1e-10)

    def test_zero_hamiltonian(self):
        Hn = normalize(LocalHamiltonian(3))
        self.assertEqual((Hn.scale, Hn.shift), (1.0, 0.0))
        self.assertEqual(Hn.log_rescale(2.0), 0.0)

    def test_rescale(self):
        Hn = normalize(random_local_hamiltonian(4, 4, 2, seed=1))
        self.assertAlmostEqual(Hn.beta_prime(2.0), 2.0 * Hn.scale)
        self.assertAlmostEqual(Hn.log_rescale(2.0), -2.0 * Hn.shift)


class TestGrid(unittest.TestCase):
    """Test grid sizes and shifted partitions"""

    def test_grid_size(self):
        self.assertEqual(grid_size(4, 1, 1.0), 16)
        self.assertEqual(grid_size(3, 2, 0.5), 18)
        self.assertEqual(grid_size(2, 1, 0.01), 3)

    def test_unshifted_grid(self):
        grid = GridPartition(16, 0)
        self.assertEqual(len(grid.anchors), 16)
        self.assertAlmostEqual(grid.anchors[0], -1 / 16)
        self.assertEqual(grid.interval(1), (0.0, 1 / 16))

    def test_shifted_grids_tile(self):
        for k in (1, 5, 15):
            grid = GridPartition(16, k)
            bounds = grid.boundaries()
            self.assertEqual(len(bounds), 18)
            np.testing.assert_allclose(np.diff(bounds), 1 / 16, atol=1e-15)
            self.assertLessEqual(bounds[0], -1 / 256)
            self.assertGreaterEqual(bounds[-1], 1.0)

    def test_shift_range(self):
        for k in (-1, 16):
            with self.assertRaises(ValidationError):
                GridPartition(16, k)

    def test_boundary_hits(self):
        """Edge eigenvalues sit on the k=0 boundaries only"""
        L = 16
        spectrum = adversarial_boundary_spectrum(4, L)
        per_grid, per_value = boundary_hits(spectrum, L, 1.0 / L ** 2)
        self.assertEqual(per_grid[0], 8)
        self.assertEqual(int(per_grid[2:].sum()), 0)
        self.assertLessEqual(int(per_value.max()), 2)


class TestEvolution(unittest.TestCase):
    """Test exact and product-formula evolution"""

    def setUp(self):
        self.H = random_local_hamiltonian(4, 5, 2, seed=3, max_coefficient=0.5)

    def test_exact_matches_expm(self):
        U = hamiltonian_evolution(self.H, 0.7, 'exact').matrix
        np.testing.assert_allclose(U, linalg.expm(-0.7j * self.H.to_dense()), atol=1e-10)

    def test_expm_matches_exact(self):
        np.testing.assert_allclose(hamiltonian_evolution(self.H, 0.7, 'expm').matrix,
                                   hamiltonian_evolution(self.H, 0.7, 'exact').matrix, atol=1e-10)

    def test_trotter_within_bound(self):
        exact = linalg.expm(-1.3j * self.H.to_dense())
        v = random_state(4, np.random.default_rng(0))
        for steps in (4, 16, 64):
            trotter = hamiltonian_evolution(self.H, 1.3, 'trotter', steps)
            self.assertLessEqual(np.linalg.norm(trotter.apply(v) - exact @ v), trotter.error_bound + 1e-10)
        self.assertLess(trotter_error_bound(self.H, 1.3, 64), trotter_error_bound(self.H, 1.3, 4))

    def test_commuting_terms_have_no_error(self):
        H = LocalHamiltonian(2, [LocalTerm((0, 1), projector_bits([1, 1]), 1.0),
                                 LocalTerm((1,), projector_bits([1]), 0.5)])
        self.assertEqual(trotter_error_bound(H, 2.0, 1), 0.0)

    def test_trotter_is_matrix_free(self):
        with self.assertRaises(ValidationError):
            hamiltonian_evolution(self.H, 1.0, 'trotter').matrix

    def test_unknown_backend(self):
        with self.assertRaises(ValidationError):
            hamiltonian_evolution(self.H, 1.0, 'qdrift')


class TestPhaseEstimation(unittest.TestCase):
    """Test textbook phase estimation"""

    def test_mass_near_true_phase(self):
        """Outcomes land within 2π/2^b with probability at least 3/4"""
        rng = np.random.default_rng(2)
        b = 5
        samples = 10000
        sigma = math.sqrt(0.75 * 0.25 / samples)
        for theta in rng.uniform(0, 2 * np.pi, size=6):
            phase = np.exp(1j * theta)
            estimate = phase_estimate(lambda p, v: phase ** p * v, np.array([1.0 + 0j]), b + 2, samples, rng)
            self.assertGreaterEqual(estimate.within(theta, b), 0.75)
            diff = np.abs((estimate.phases - theta + np.pi) % (2 * np.pi) - np.pi)
            observed = float(np.mean(diff <= 2 * np.pi / 2 ** b + 1e-12))
            self.assertGreaterEqual(observed, 0.75 - 3 * sigma)

    def test_exact_phase_is_deterministic(self):
        phase = np.exp(2j * np.pi * 3 / 8)
        estimate = phase_estimate(lambda p, v: phase ** p * v, np.array([1.0 + 0j]), 3, 50)
        self.assertTrue(np.all(estimate.outcomes == 3))

    def test_non_eigenstate_rejected(self):
        U = np.diag([1.0, -1.0])
        with self.assertRaises(ValidationError):
            phase_estimate(lambda p, v: np.linalg.matrix_power(U, p) @ v, np.array([1.0, 1.0]) / math.sqrt(2), 3)

    def test_median(self):
        self.assertEqual(median_amplify([3.0, 1.0, 2.0, 10.0]), 2.0)
        with self.assertRaises(ValidationError):
            median_amplify([])


class TestEnergyEstimation(unittest.TestCase):
    """Test energy estimation on normalized Hamiltonians"""

    def setUp(self):
        self.energies = np.array([0.0, 0.25, 0.5, 0.625])
        self.Hn = NormalizedHamiltonian(diagonal_hamiltonian(self.energies), 1.0, 0.0)

    def test_params(self):
        params = EnergyEstimationParams.from_tolerance(0.1, n=3)
        self.assertEqual((params.b, params.r, params.m_rep), (6, 8, 9))
        with self.assertRaises(ValidationError):
            EnergyEstimationParams(0.1, 4, 5, 1)

    def test_decoding_range(self):
        decoded = decode_energies(4)
        self.assertEqual(decoded[0], 0.0)
        self.assertTrue(np.all(decoded > -1.0) and np.all(decoded <= 1.0))

    def test_dyadic_energies_exact(self):
        params = EnergyEstimationParams.from_tolerance(0.1, n=2)
        for j, energy in enumerate(self.energies):
            state = np.zeros(4, dtype=complex)
            state[j] = 1
            self.assertAlmostEqual(energy_estimate(self.Hn, state, params), energy, delta=1e-12)

    def test_oracle_within_tolerance(self):
        params = EnergyEstimationParams.from_tolerance(0.05)
        rng = np.random.default_rng(4)
        for j, energy in enumerate(self.energies):
            state = np.zeros(4, dtype=complex)
            state[j] = 1
            estimate = energy_estimate(self.Hn, state, params, 'oracle', rng)
            self.assertLessEqual(abs(estimate - energy), 0.05)

    def test_guard(self):
        params = EnergyEstimationParams.from_tolerance(0.1)
        with patch('services.qpf_service.settings') as mock_settings:
            mock_settings.statevector_guard = 1
            mock_settings.seed = 0
            with self.assertRaises(GuardError):
                energy_estimate(self.Hn, np.eye(4)[0], params)


class TestEprAndCounting(unittest.TestCase):
    """Test the EPR trace identity and amplitude estimation"""

    def test_epr_trace_identity(self):
        """⟨Φ|(A ⊗ I)|Φ⟩ = tr(A)/2^n"""
        n = 3
        phi = epr_state(n)
        self.assertAlmostEqual(np.linalg.norm(phi), 1.0, delta=1e-12)
        H = random_local_hamiltonian(n, 4, 2, seed=5).to_dense()
        for A in (H, linalg.expm(-0.4 * H)):
            value = np.vdot(phi, np.kron(A, np.eye(1 << n)) @ phi)
            self.assertAlmostEqual(value, np.trace(A) / (1 << n), delta=1e-10)

    def test_epr_counts_interval(self):
        """Projecting the system half onto an energy window gives count/2^n"""
        energies = np.array([0.0, 0.1, 0.3, 0.35, 0.6, 0.7, 0.8, 0.95])
        projector = np.diag(((energies >= 0.25) & (energies < 0.75)).astype(float))
        phi = epr_state(3)
        probability = np.vdot(phi, np.kron(projector, np.eye(8)) @ phi).real
        self.assertAlmostEqual(probability * 8, 4.0, delta=1e-12)

    def test_amplitude_estimation(self):
        t = 8
        for M in (0, 1, 7, 16, 32):
            estimate = amplitude_estimate(_uniform_preparer(5, M), t, rng=np.random.default_rng(M), repetitions=31)
            bound = 2 * math.pi * math.sqrt(M * (32 - M)) / 2 ** t + math.pi ** 2 * 32 / 4 ** t
            self.assertLessEqual(abs(estimate - M), bound + 1e-9, M)

    def test_extremes_exact(self):
        self.assertAlmostEqual(amplitude_estimate(_uniform_preparer(5, 0), 4), 0.0, delta=1e-9)
        self.assertAlmostEqual(amplitude_estimate(_uniform_preparer(5, 32), 4), 32.0, delta=1e-9)
        self.assertAlmostEqual(amplitude_estimate(_uniform_preparer(5, 32), 4, extra_qubit=True), 32.0, delta=1e-9)

    def test_grover_bits(self):
        self.assertEqual(grover_bits(4, 1), 2 + 2 + 3)

    def test_preparer_checked(self):
        with self.assertRaises(ValidationError):
            amplitude_estimate(lambda: (np.array([1.0, 1.0]), np.array([True, False])), 3)

    def test_count_in_interval(self):
        Hn = NormalizedHamiltonian(diagonal_hamiltonian([0.0, 0.25, 0.5, 0.75]), 1.0, 0.0)
        self.assertEqual(count_in_interval(Hn, (0.2, 0.6), 0.1), 2.0)
        with self.assertRaises(ValidationError):
            count_in_interval(Hn, (0.5, 0.5), 0.1)


class TestStatevectorCounting(unittest.TestCase):
    """Test flag counting on the EPR input"""

    def setUp(self):
        # dyadic eigenphases, so every readout lands on its eigenvalue
        self.Hn = NormalizedHamiltonian(diagonal_hamiltonian([0.0, 0.25, 0.5, 0.625]), 1.0, 0.0)
        with patch('services.qpf_service.epr_state', wraps=epr_state) as epr_spy, \
                patch('services.qpf_service.linalg.eigh', side_effect=AssertionError('eigh called')):
            self.counter = StatevectorCounter(self.Hn, 2 ** -6, 0.1, 3, 9, m_rep=3)
        self.epr_spy = epr_spy
        self.t = grover_bits(2, 3)

    def _count_bound(self, count):
        """Amplitude-estimation error bound in count units, with the |+⟩ qubit halving the fraction"""
        f = count / 4 / 2
        return 4 * 2 * (2 * math.pi * math.sqrt(f * (1 - f)) / 2 ** self.t + math.pi ** 2 / 4 ** self.t)

    def test_consumes_epr_state(self):
        self.epr_spy.assert_called_once_with(2)
        self.assertIsNone(self.counter.energies)
        self.assertEqual(self.counter.params.r, 11)

    def test_joint_state_flag_mass(self):
        for (lo, hi), expected in (((-0.1, 0.7), 1.0), ((0.7, 0.9), 0.0), ((0.2, 0.55), 0.5), ((0.3, 0.6), 0.25)):
            state, marked = self.counter.joint_state(lo, hi)
            self.assertEqual(len(state), self.counter.diagnostics()['joint_dimension'])
            self.assertAlmostEqual(np.linalg.norm(state), 1.0, delta=1e-10)
            self.assertAlmostEqual(float(np.sum(np.abs(state[marked]) ** 2)), expected, delta=1e-9, msg=(lo, hi))

    def test_joint_state_reference_half(self):
        """Tracing out everything but the reference half leaves it maximally mixed"""
        state, _ = self.counter.joint_state(0.2, 0.55)
        blocks = state.reshape(-1, 4, 4)
        reference = np.einsum('bsi,bsj->ij', blocks, blocks.conj())
        np.testing.assert_allclose(reference, np.eye(4) / 4, atol=1e-9)

    def test_interval_counts(self):
        rng = np.random.default_rng(0)
        full = self.counter.counts(np.array([-0.1]), 0.8, rng)[0]
        empty = self.counter.counts(np.array([0.7]), 0.2, rng)[0]
        half = self.counter.counts(np.array([0.2]), 0.35, rng)[0]
        self.assertAlmostEqual(full, 4.0, delta=1e-6)
        self.assertAlmostEqual(empty, 0.0, delta=1e-6)
        self.assertAlmostEqual(half, 2.0, delta=self._count_bound(2))

    def test_grid_matches_exact_backend(self):
        grid = GridPartition(4, 0)
        exact = IntervalCounter(self.Hn, 2 ** -6, 0.1).counts(grid.anchors, 0.25, np.random.default_rng(0))
        np.testing.assert_array_equal(exact, [0, 1, 1, 2])
        with patch('services.qpf_service.linalg.eigh', side_effect=AssertionError('eigh called')):
            counts = self.counter.counts(grid.anchors, 0.25, np.random.default_rng(1))
        for got, want in zip(counts, exact):
            self.assertAlmostEqual(got, want, delta=self._count_bound(want) + 1e-6)

    def test_approximate_qpf_without_eigenbasis(self):
        H = random_local_hamiltonian(2, 3, 2, seed=0, max_coefficient=0.25)
        with patch('services.qpf_service.epr_state', wraps=epr_state) as epr_spy, \
                patch('services.qpf_service.linalg.eigh', side_effect=AssertionError('eigh called')):
            estimate = approximate_qpf(H, 1.0, 1, 'statevector', seed=0)
        epr_spy.assert_called_once_with(2)
        self.assertTrue(math.isfinite(estimate.log_z))
        self.assertIn('tally_states', estimate.diagnostics)

    def test_readout_table_guard(self):
        with patch('services.qpf_service.settings') as mock_settings:
            mock_settings.statevector_guard = 6
            mock_settings.statevector_amplitude_guard = 1000
            with self.assertRaises(GuardError):
                StatevectorCounter(self.Hn, 2 ** -6, 0.1, 3, 9, m_rep=3)


class TestApproximateQpf(unittest.TestCase):
    """Test the shifted-grid partition-function estimate"""

    def test_oracle_relative_error(self):
        """At least 49 of 50 random runs land within 1/n of the exact value"""
        for n in (4, 6, 8):
            for beta in (1.0, float(n)):
                good = 0
                for trial in range(50):
                    H = random_local_hamiltonian(n, n, 3, seed=trial, max_coefficient=0.25 / n)
                    exact = exact_partition_function(H, beta)
                    estimate = approximate_qpf(H, beta, 1, 'oracle', seed=trial, confidence=0.999)
                    if abs(estimate.z / exact - 1) <= 1 / n:
                        good += 1
                self.assertGreaterEqual(good, 49, (n, beta))

    def test_exact_backend_brackets(self):
        """Lower-anchored counts never undershoot Z and overshoot by at most e^{β′/L}"""
        H = random_local_hamiltonian(5, 6, 3, seed=2, max_coefficient=0.1)
        beta = 3.0
        estimate = approximate_qpf(H, beta, 1, 'exact')
        exact = exact_partition_function(H, beta)
        self.assertGreaterEqual(estimate.z, exact * (1 - 1e-12))
        self.assertLessEqual(estimate.z, exact * math.exp(estimate.beta_prime / estimate.L) * (1 + 1e-12))

    def test_adversarial_boundaries(self):
        """The unshifted grid double-counts edge eigenvalues; the minimum over shifts recovers Z"""
        n, beta = 4, 1.0
        L = grid_size(n, 1, beta)
        spectrum = adversarial_boundary_spectrum(n, L)
        Hn = NormalizedHamiltonian(diagonal_hamiltonian(spectrum), 1.0, 0.0)
        exact = float(np.sum(np.exp(-beta * spectrum)))
        estimate = approximate_qpf(Hn, beta, 1, 'oracle', seed=0, adversarial=True)
        self.assertEqual(estimate.L, L)
        self.assertGreater(estimate.per_grid[0], (1 + 1 / n) * exact)
        self.assertNotEqual(estimate.best_k, 0)
        self.assertLessEqual(abs(estimate.z / exact - 1), 1 / n)

    def test_zero_hamiltonian(self):
        estimate = approximate_qpf(LocalHamiltonian(4), 1.0, 1, 'oracle', seed=0)
        self.assertLessEqual(abs(estimate.z / 16 - 1), 1 / 4)

    def test_seeded(self):
        H = random_local_hamiltonian(4, 4, 3, seed=1, max_coefficient=0.1)
        first = approximate_qpf(H, 2.0, 1, 'oracle', seed=7)
        second = approximate_qpf(H, 2.0, 1, 'oracle', seed=7)
        self.assertEqual(first.to_dict(), second.to_dict())

    def test_statevector_small(self):
        H = random_local_hamiltonian(2, 2, 2, seed=0, max_coefficient=0.1)
        estimate = approximate_qpf(H, 1.0, 1, 'statevector', seed=0)
        self.assertTrue(math.isfinite(estimate.log_z))
        self.assertGreater(estimate.z, 0.0)
        self.assertIn('grover_bits', estimate.diagnostics)

    def test_statevector_guard(self):
        with self.assertRaises(GuardError):
            approximate_qpf(random_local_hamiltonian(8, 4, 3, seed=0), 1.0, 1, 'statevector')

    def test_argument_validation(self):
        H = LocalHamiltonian(2)
        for kwargs in ({'beta': -1.0}, {'beta': 1.0, 'c': 0}, {'beta': 1.0, 'backend': 'annealer'},
                       {'beta': 1.0, 'confidence': 1.0}):
            with self.assertRaises(ValidationError):
                approximate_qpf(H, **kwargs)

    def test_grid_guard(self):
        with patch('services.qpf_service.settings') as mock_settings:
            mock_settings.qpf_grid_guard = 8
            mock_settings.qpf_confidence = 0.99
            mock_settings.seed = 0
            mock_settings.statevector_guard = 6
            with self.assertRaises(GuardError):
                approximate_qpf(LocalHamiltonian(4), 1.0)

    def test_solver_closure(self):
        H = random_local_hamiltonian(3, 3, 2, seed=4, max_coefficient=0.1)
        solve = qpf_solver('exact')
        self.assertEqual(solve(H, 1.0, 0.5).log_z, approximate_qpf(H, 1.0, 1, 'exact').log_z)


if __name__ == '__main__':
    unittest.main(verbosity=2)
