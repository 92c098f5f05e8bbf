#!/usr/bin/python
# -*- coding:utf-8 -*-
import unittest
from unittest.mock import Mock, patch
import sys
import os

# Add the project directory to sys.path to import services
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from services.cache_service import CacheService


class TestCacheService(unittest.TestCase):
    """Test the namespaced memo store"""

    def setUp(self):
        """Fresh cache with a known configuration"""
        with patch.dict(os.environ, {'CACHE_ENABLED': '1', 'CACHE_PER_NAMESPACE': 'spectrum:1,johnson_path:0'}):
            self.cache = CacheService()

    def test_namespace_config(self):
        self.assertTrue(self.cache.default_enabled)
        self.assertTrue(self.cache.enabled('spectrum'))
        self.assertFalse(self.cache.enabled('johnson_path'))
        self.assertTrue(self.cache.enabled('other'))

    def test_bad_namespace_entry_ignored(self):
        with patch.dict(os.environ, {'CACHE_PER_NAMESPACE': 'spectrum:abc,johnson_path:7,broken'}):
            cache = CacheService()
        self.assertEqual(cache.namespace_enabled, {'johnson_path': True})

    def test_globally_disabled(self):
        with patch.dict(os.environ, {'CACHE_ENABLED': '0', 'CACHE_PER_NAMESPACE': 'spectrum:1'}):
            cache = CacheService()
        cache.set('other', 1, 'x')
        cache.set('spectrum', 1, 'y')
        self.assertEqual(cache.get_cache_stats()['namespaces'], {'spectrum': 1})

    def test_set_and_get(self):
        self.cache.set('spectrum', 'abc', [1.0, 2.0])
        self.assertEqual(self.cache.get('spectrum', 'abc'), [1.0, 2.0])
        self.assertIsNone(self.cache.get('spectrum', 'missing'))
        stats = self.cache.get_cache_stats()
        self.assertEqual((stats['hits'], stats['misses']), (1, 1))

    def test_disabled_namespace_keeps_nothing(self):
        self.cache.set('johnson_path', (4, 2), 'path')
        self.assertIsNone(self.cache.get('johnson_path', (4, 2)))
        self.assertEqual(self.cache.get_cache_stats()['total_entries'], 0)

    def test_memoize_calls_factory_once(self):
        factory = Mock(return_value='value')
        self.assertEqual(self.cache.memoize('other', 1, factory), 'value')
        self.assertEqual(self.cache.memoize('other', 1, factory), 'value')
        factory.assert_called_once()

    def test_memoize_uncached_namespace(self):
        factory = Mock(return_value='value')
        self.cache.memoize('johnson_path', 1, factory)
        self.cache.memoize('johnson_path', 1, factory)
        self.assertEqual(factory.call_count, 2)

    def test_clear(self):
        self.cache.set('other', 1, 'x')
        self.cache.set('spectrum', 2, 'y')
        self.assertEqual(self.cache.get_cache_stats()['namespaces'], {'other': 1, 'spectrum': 1})
        self.cache.clear()
        stats = self.cache.get_cache_stats()
        self.assertEqual((stats['total_entries'], stats['hits'], stats['misses']), (0, 0, 0))


if __name__ == '__main__':
    unittest.main(verbosity=2)
