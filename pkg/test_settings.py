#!/usr/bin/python
# -*- coding:utf-8 -*-
import unittest
from unittest.mock import patch
import sys
import os
import tempfile

# Add the project directory to sys.path to import services
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from config.settings import Settings


class TestSettings(unittest.TestCase):
    """Test environment and config-file configuration"""

    def setUp(self):
        self.files = []

    def tearDown(self):
        for path in self.files:
            os.unlink(path)

    def _config_file(self, text):
        handle = tempfile.NamedTemporaryFile('w', suffix='.env', delete=False)
        handle.write(text)
        handle.close()
        self.files.append(handle.name)
        return handle.name

    def test_defaults(self):
        with patch.dict(os.environ, {}, clear=True):
            settings = Settings()
        self.assertEqual(settings.dense_guard, 14)
        self.assertEqual(settings.statevector_guard, 6)
        self.assertEqual(settings.epsilon, 0.125)
        self.assertEqual(settings.seed, 0)

    def test_environment_override(self):
        with patch.dict(os.environ, {'LH_DENSE_GUARD': '10', 'LH_EPSILON': '0.1'}):
            settings = Settings()
        self.assertEqual(settings.dense_guard, 10)
        self.assertEqual(settings.epsilon, 0.1)

    def test_invalid_value_falls_back(self):
        with patch.dict(os.environ, {'LH_SAT_GUARD': 'many'}):
            with self.assertLogs('config.settings', level='WARNING') as logs:
                settings = Settings()
        self.assertEqual(settings.sat_guard, 30)
        self.assertIn('LH_SAT_GUARD', logs.output[0])

    def test_overrides_win(self):
        with patch.dict(os.environ, {'LH_SEED': '3'}):
            settings = Settings({'LH_SEED': '9'})
        self.assertEqual(settings.seed, 9)

    def test_load_file(self):
        path = self._config_file("LH_STATEVECTOR_GUARD=4\nLH_QPF_CONFIDENCE=0.95\n")
        settings = Settings()
        settings.load_file(path)
        self.assertEqual(settings.statevector_guard, 4)
        self.assertEqual(settings.qpf_confidence, 0.95)

    def test_unknown_keys_warned(self):
        path = self._config_file("LH_DENSE_GUARD=12\nLH_UNUSED_KNOB=1\n")
        settings = Settings()
        with self.assertLogs('config.settings', level='WARNING') as logs:
            settings.load_file(path)
        self.assertEqual(settings.dense_guard, 12)
        self.assertTrue(any('LH_UNUSED_KNOB' in line for line in logs.output))

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            Settings().load_file('/nonexistent/lh.env')

    def test_as_dict(self):
        snapshot = Settings().as_dict()
        self.assertIn('lanczos_tol', snapshot)
        self.assertIn('coeff_c1', snapshot)


if __name__ == '__main__':
    unittest.main(verbosity=2)
