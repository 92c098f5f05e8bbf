#!/usr/bin/python
# -*- coding:utf-8 -*-
import unittest
from unittest.mock import patch
import sys
import os

import numpy as np

# Add the project directory to sys.path to import services
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from services.cache_service import cache_service
from services.clock_service import (ClockOp, ClockSchedule, build_clock_op, build_h_clock, build_h_stab,
                                    clock_table_csv, diagonal_energies, forward_op, g_inverse, g_map, legal_state,
                                    legal_states, pause_op, revolving_door_path, verify_conditions)
from services.errors import GuardError, ValidationError
from services.operator_utils import basis_bits

TABLE_T11 = [
    "100000", "100100", "100110", "100111",
    "010111", "010110", "010100", "010000",
    "001000", "001100", "001110", "001111",
]


class TestRevolvingDoor(unittest.TestCase):
    """Test Hamiltonian paths through Johnson graphs"""

    def setUp(self):
        cache_service.clear()

    def _check(self, a, d, expected_len):
        path = revolving_door_path(a, d)
        self.assertEqual(len(path.subsets), expected_len)
        self.assertEqual(len(set(path.subsets)), expected_len)
        self.assertTrue(all(len(s) == d for s in path.subsets))
        for s, t in zip(path.subsets, path.subsets[1:]):
            self.assertEqual(len(set(s) & set(t)), d - 1)

    def test_three_one(self):
        self._check(3, 1, 3)
        self.assertEqual(revolving_door_path(3, 1).subsets, ((1,), (2,), (3,)))

    def test_four_two(self):
        self._check(4, 2, 6)

    def test_six_three(self):
        self._check(6, 3, 20)

    def test_invalid(self):
        with self.assertRaises(ValidationError):
            revolving_door_path(3, 3)

    def test_memoized(self):
        first = revolving_door_path(5, 2)
        self.assertIs(revolving_door_path(5, 2), first)
        self.assertEqual(cache_service.get_cache_stats()['namespaces'].get('johnson_path'), 1)


class TestGMap(unittest.TestCase):
    """Test the dual-clock timestep map"""

    def test_table_rows(self):
        self.assertEqual(g_map(4, 3), (2, 3))
        self.assertEqual(g_map(0, 3), (1, 0))
        self.assertEqual(g_map(7, 3), (2, 0))

    def test_inverse(self):
        for a in (2, 3, 5):
            for t in range(4 * (a + 1)):
                self.assertEqual(g_inverse(*g_map(t, a), a), t)

    def test_out_of_range(self):
        with self.assertRaises(ValidationError):
            g_map(12, 3, total=11)


class TestLegalStates(unittest.TestCase):
    """Test clock encodings"""

    def test_table_reproduction(self):
        schedule = ClockSchedule.dual(3, 2)
        self.assertEqual(schedule.T, 11)
        self.assertEqual(legal_states(schedule), TABLE_T11)

    def test_unary(self):
        self.assertEqual(legal_state(ClockSchedule.unary(4), 2), "1100")

    def test_widths_and_distinctness(self):
        for schedule in [ClockSchedule.unary(6), ClockSchedule.johnson(5, 2), ClockSchedule.dual(4, 3)]:
            states = legal_states(schedule)
            self.assertEqual(len(set(states)), schedule.T + 1)
            self.assertTrue(all(len(s) == schedule.width for s in states))

    def test_dual_size(self):
        schedule = ClockSchedule.dual(4, 3)
        self.assertEqual(schedule.T + 1, 6 * 5)
        self.assertEqual(schedule.width, 8)

    def test_timestep_range(self):
        with self.assertRaises(ValidationError):
            legal_state(ClockSchedule.unary(3), 4)

    def test_csv(self):
        lines = clock_table_csv(ClockSchedule.dual(3, 2)).splitlines()
        self.assertEqual(lines[0], "t,t1,t2,state")
        self.assertEqual(lines[5], "4,2,3,010 111")
        self.assertEqual(len(lines), 13)


def _apply(op, bits):
    """Basis image of op on a clock bit string, None when it annihilates it"""
    out = list(bits)
    for q, k, b in zip(op.support, op.ket, op.bra):
        if int(bits[q]) != b:
            return None
        out[q] = str(k)
    return ''.join(out)


class TestClockOperators(unittest.TestCase):
    """Test the stay/add/add2 implementations"""

    def test_unary_stay_zero(self):
        op = build_clock_op(ClockSchedule.unary(4), 'stay', 0)
        self.assertEqual((op.support, op.ket, op.bra), ((0,), (0,), (0,)))
        self.assertEqual(op.locality, 1)

    def test_dual_stay_middle(self):
        """t2 in 1..a-1: P' on the Johnson part times |10⟩⟨10| on the unary part"""
        schedule = ClockSchedule.dual(3, 2)
        op = build_clock_op(schedule, 'stay', 1)  # g = (1, 1)
        self.assertEqual(op.locality, 3)
        self.assertTrue(op.is_diagonal)
        self.assertEqual(dict(zip(op.support, op.ket)), {0: 1, 3: 1, 4: 0})

    def test_dual_add_odd(self):
        schedule = ClockSchedule.dual(3, 2)
        op = build_clock_op(schedule, 'add', 1)  # g = (1, 1)
        self.assertEqual(op.locality, 2)
        self.assertEqual(dict(zip(op.support, zip(op.ket, op.bra))), {0: (1, 1), 4: (1, 0)})

    def test_ideal_action_every_role(self):
        """F_t|γ_t'⟩ = δ|γ_t'+1⟩ and friends, exhaustively on the legal states"""
        schedules = [ClockSchedule.unary(T) for T in range(2, 11)]
        schedules += [ClockSchedule.dual(a, d) for a in range(2, 5) for d in range(2, min(a, 3) + 1)]
        schedules += [ClockSchedule.johnson(a, d) for a in range(3, 6) for d in range(1, a)]
        shifts = {'stay': 0, 'add': 1, 'add2': 2}
        for schedule in schedules:
            states = legal_states(schedule)
            for role, shift in shifts.items():
                for t in range(schedule.T - shift + 1):
                    op = build_clock_op(schedule, role, t)
                    for t_prime, state in enumerate(states):
                        image = _apply(op, state)
                        if t_prime == t:
                            self.assertEqual(image, states[t + shift], (schedule.variant, role, t))
                        else:
                            self.assertTrue(image is None or image not in states, (schedule.variant, role, t))

    def test_dual_locality(self):
        for a, d in [(3, 2), (4, 2), (4, 3)]:
            schedule = ClockSchedule.dual(a, d)
            for role, upper in [('stay', 0), ('add', 1), ('add2', 2)]:
                for t in range(schedule.T - upper + 1):
                    self.assertLessEqual(build_clock_op(schedule, role, t).locality, d + 1)

    def test_unary_locality(self):
        schedule = ClockSchedule.unary(6)
        for role, upper in [('stay', 0), ('add', 1), ('add2', 2)]:
            for t in range(schedule.T - upper + 1):
                self.assertLessEqual(build_clock_op(schedule, role, t).locality, 2)

    def test_johnson_pause_forward(self):
        path = revolving_door_path(4, 2)
        states = legal_states(ClockSchedule.johnson(4, 2))
        for t in range(1, path.T + 1):
            self.assertEqual(_apply(forward_op(path, t), states[t - 1]), states[t])
            self.assertEqual(_apply(pause_op(path, t), states[t]), states[t])

    def test_bad_role_and_range(self):
        schedule = ClockSchedule.unary(3)
        with self.assertRaises(ValidationError):
            build_clock_op(schedule, 'jump', 0)
        with self.assertRaises(ValidationError):
            build_clock_op(schedule, 'add2', 2)

    def test_matrix_is_outer_product(self):
        op = build_clock_op(ClockSchedule.unary(3), 'add', 1)
        expected = np.zeros((2, 2))
        expected[1, 0] = 1
        np.testing.assert_array_equal(op.matrix, expected)
        np.testing.assert_array_equal(op.dagger().matrix, expected.T)


class TestClockPenalties(unittest.TestCase):
    """Test H_stab and H_clock"""

    def test_h_stab_four_two(self):
        energies = diagonal_energies(build_h_stab(4, 2), 4)
        weights = basis_bits(4).sum(axis=1)
        np.testing.assert_allclose(energies[weights == 2], 0.0, atol=0)
        np.testing.assert_allclose(energies[weights < 2], 1.0, atol=0)
        self.assertTrue(np.all(energies[weights > 2] >= 1))
        self.assertEqual(int(np.sum(weights == 2)), 6)

    def test_h_stab_penalizes_every_illegal_state(self):
        """Zero exactly on weight d, one below, at least one above"""
        for a in range(2, 13):
            weights = basis_bits(a).sum(axis=1)
            for d in range(1, min(3, a - 1) + 1):
                energies = diagonal_energies(build_h_stab(a, d), a)
                self.assertTrue(np.all(energies[weights == d] == 0), (a, d))
                self.assertTrue(np.all(energies[weights < d] == 1), (a, d))
                self.assertTrue(np.all(energies[weights > d] >= 1), (a, d))

    def test_h_clock_kernel_is_legal(self):
        for schedule in [ClockSchedule.unary(5), ClockSchedule.johnson(5, 2), ClockSchedule.dual(3, 2),
                         ClockSchedule.dual(4, 3)]:
            energies = diagonal_energies(build_h_clock(schedule), schedule.width)
            legal = {int(s, 2) for s in legal_states(schedule)}
            for index, energy in enumerate(energies):
                if index in legal:
                    self.assertEqual(energy, 0.0)
                else:
                    self.assertGreaterEqual(energy, 1.0)

    def test_unary_penalty_fires(self):
        energies = diagonal_energies(build_h_clock(ClockSchedule.unary(3)), 3)
        self.assertGreaterEqual(energies[int("010", 2)], 1.0)


class TestVerifyConditions(unittest.TestCase):
    """Test the exhaustive C4-C6 check"""

    def test_unary_and_dual_pass(self):
        schedules = [ClockSchedule.unary(T) for T in range(2, 11)]
        schedules += [ClockSchedule.dual(a, d) for a in range(2, 5) for d in range(2, min(a, 3) + 1)]
        for schedule in schedules:
            report = verify_conditions(schedule)
            self.assertTrue(report.passed, (schedule.variant, schedule.T, report.violations[:3]))

    def test_johnson_passes(self):
        self.assertTrue(verify_conditions(ClockSchedule.johnson(5, 2)).passed)

    def test_corrupted_add_detected(self):
        def corrupted(schedule, role, t):
            op = build_clock_op(schedule, role, t)
            if role != 'add':
                return op
            return ClockOp(op.role, op.t, tuple((q + 1) % schedule.width for q in op.support), op.ket, op.bra)

        report = verify_conditions(ClockSchedule.unary(4), corrupted)
        self.assertFalse(report.passed)
        self.assertIn('C5', {v['condition'] for v in report.violations})

    def test_guard(self):
        with patch('services.clock_service.settings') as mock_settings:
            mock_settings.clock_exhaustive_guard = 4
            with self.assertRaises(GuardError):
                verify_conditions(ClockSchedule.dual(3, 2))


if __name__ == '__main__':
    unittest.main(verbosity=2)
