"""
Result cache for expensive point evaluations.

Uses redis when FRACLAB_CACHE_URL (or REDIS_URL) is set and reachable, with an
in-memory fallback otherwise. Entries carry a TTL; values are deterministic,
so concurrent writers of the same key are harmless (last writer wins).
"""

import hashlib
import json
import logging
import threading
import time
from typing import Any, Dict, Optional

import numpy as np

from fraclab.config import cache_ttl, cache_url

logger = logging.getLogger(__name__)

try:
    import redis
except ImportError:  # pragma: no cover - redis is in requirements.txt
    redis = None

KEY_PREFIX = 'fraclab:'


def cache_key(*parts: Any) -> str:
    """Stable key from JSON-serializable parts"""
    payload = json.dumps(parts, sort_keys=True, separators=(',', ':'), default=str)
    return KEY_PREFIX + hashlib.sha1(payload.encode('utf-8')).hexdigest()


def values_fingerprint(values: Any) -> str:
    """Digest of numeric values rounded to 12 significant digits"""
    rounded = [float(f"{v:.12g}") for v in np.asarray(values, dtype=float).reshape(-1)]
    payload = json.dumps(rounded, separators=(',', ':'))
    return hashlib.sha1(payload.encode('utf-8')).hexdigest()


class ResultCache:
    """
    Key/value store for JSON values with expiry

    Args:
        url: redis URL; None reads the environment, '' forces memory
        ttl: Entry lifetime in seconds; None reads FRACLAB_CACHE_TTL
        client: Pre-built redis client (tests)
    """

    def __init__(self, url: Optional[str] = None, ttl: Optional[int] = None, client=None):
        self.ttl = int(ttl) if ttl is not None else cache_ttl()
        self._memory: Dict[str, Dict[str, Any]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self._client = client

        if self._client is None:
            url = cache_url() if url is None else url
            if url and redis is not None:
                try:
                    self._client = redis.from_url(url, decode_responses=True)
                    self._client.ping()
                    logger.info("✅ Result cache connected to redis at %s...", url[:30])
                except Exception as e:
                    logger.warning("❌ Failed to connect to redis (%s); using in-memory cache", e)
                    self._client = None
            elif url:
                logger.warning("⚠️ redis package not installed; using in-memory cache")

    @property
    def backend(self) -> str:
        return 'redis' if self._client is not None else 'memory'

    def get(self, key: str) -> Optional[Any]:
        if self._client is not None:
            try:
                raw = self._client.get(key)
                if raw is not None:
                    self.hits += 1
                    return json.loads(raw)
                self.misses += 1
                return None
            except Exception as e:
                logger.warning("⚠️ redis read failed for %s: %s", key, e)

        with self._lock:
            entry = self._memory.get(key)
            if entry is None:
                self.misses += 1
                return None
            if time.time() >= entry['expires_at']:
                del self._memory[key]
                self.misses += 1
                return None
            self.hits += 1
            return entry['value']

    def set(self, key: str, value: Any) -> bool:
        """Store value; returns False if redis failed and memory was used instead"""
        if self._client is not None:
            try:
                self._client.setex(key, self.ttl, json.dumps(value))
                return True
            except Exception as e:
                logger.warning("⚠️ redis write failed for %s: %s", key, e)
                self._store_in_memory(key, value)
                return False

        self._store_in_memory(key, value)
        return True

    def _store_in_memory(self, key: str, value: Any) -> None:
        now = time.time()
        with self._lock:
            expired = [k for k, entry in self._memory.items() if entry['expires_at'] <= now]
            for k in expired:
                del self._memory[k]
            if expired:
                logger.debug("Pruned %d expired cache entries", len(expired))
            self._memory[key] = {'value': value, 'expires_at': now + self.ttl}

    def clear(self) -> None:
        with self._lock:
            self._memory.clear()

    def __len__(self) -> int:
        with self._lock:
            return len(self._memory)


def memory_cache() -> ResultCache:
    return ResultCache(url='')
