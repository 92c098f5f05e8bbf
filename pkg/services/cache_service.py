#!/usr/bin/python
# -*- coding:utf-8 -*-
import logging
import os
from typing import Any, Callable, Dict, Optional


class CacheService:
    """In-memory memo store for deterministic, expensive results (Johnson paths, dense spectra)"""

    def __init__(self):
        """Initialize the cache service"""
        self.logger = logging.getLogger(__name__)
        self._cache = {}  # {(namespace, key): data}
        self._hits = 0
        self._misses = 0

        self.default_enabled = os.getenv('CACHE_ENABLED', '1').strip() != '0'
        self.namespace_enabled = self._parse_namespace_config()

        self.logger.debug(f"Cache initialized, enabled by default: {self.default_enabled}")
        self.logger.debug(f"Per-namespace config: {self.namespace_enabled}")

    def _parse_namespace_config(self) -> Dict[str, bool]:
        """
        Parse per-namespace switches from CACHE_PER_NAMESPACE ("johnson_path:0,spectrum:1")

        Returns:
            Dict[str, bool]: Namespace to enabled mapping
        """
        config = {}
        raw = os.getenv('CACHE_PER_NAMESPACE', '')
        if not raw:
            return config
        for item in raw.split(','):
            if ':' not in item:
                continue
            name, flag = item.split(':', 1)
            try:
                config[name.strip()] = int(flag.strip()) != 0
            except ValueError:
                self.logger.warning(f"Error parsing CACHE_PER_NAMESPACE entry: {item!r}")
        return config

    def enabled(self, namespace: str) -> bool:
        """
        Whether values in a namespace are kept

        Args:
            namespace (str): Namespace such as 'johnson_path' or 'spectrum'

        Returns:
            bool: False when CACHE_PER_NAMESPACE or CACHE_ENABLED turns it off
        """
        return self.namespace_enabled.get(namespace, self.default_enabled)

    def get(self, namespace: str, key: Any) -> Optional[Any]:
        """
        Get a cached value

        Args:
            namespace (str): Namespace
            key (Any): Hashable key inside the namespace

        Returns:
            Any: Cached value or None if not found
        """
        if (namespace, key) not in self._cache:
            self._misses += 1
            return None
        self._hits += 1
        return self._cache[(namespace, key)]

    def set(self, namespace: str, key: Any, data: Any) -> None:
        """Store a value unless its namespace is disabled"""
        if self.enabled(namespace):
            self._cache[(namespace, key)] = data

    def memoize(self, namespace: str, key: Any, factory: Callable[[], Any]) -> Any:
        """
        Return the cached value or compute, store and return it

        Args:
            namespace (str): Namespace
            key (Any): Hashable key
            factory (Callable): Zero-argument producer of the value

        Returns:
            Any: The value
        """
        cached = self.get(namespace, key)
        if cached is not None:
            return cached
        value = factory()
        self.set(namespace, key, value)
        return value

    def clear(self) -> None:
        """Clear all cached data"""
        size = len(self._cache)
        self._cache.clear()
        self._hits = 0
        self._misses = 0
        self.logger.debug(f"Cache cleared ({size} entries removed)")

    def get_cache_stats(self) -> Dict[str, Any]:
        """
        Get cache statistics

        Returns:
            Dict[str, Any]: Entry counts, hit/miss counters and namespace switches
        """
        namespaces = {}
        for namespace, _ in self._cache:
            namespaces[namespace] = namespaces.get(namespace, 0) + 1
        return {
            'total_entries': len(self._cache),
            'hits': self._hits,
            'misses': self._misses,
            'default_enabled': self.default_enabled,
            'namespace_configs': self.namespace_enabled,
            'namespaces': namespaces,
        }


# Global cache instance
cache_service = CacheService()
