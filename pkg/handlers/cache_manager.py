import hashlib
import json
import logging
import os
import pickle
from typing import Any, Callable, Dict, Optional

import numpy as np
import redis

log = logging.getLogger(__name__)

KEY_PREFIX = 'hr'


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot hash object of type {type(value).__name__}")


def cache_key(namespace: str, payload: Dict) -> str:
    """hr:<namespace>:<sha256 of the canonical JSON payload>."""
    canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'), default=_json_default)
    digest = hashlib.sha256(canonical.encode('utf-8')).hexdigest()
    return f"{KEY_PREFIX}:{namespace}:{digest}"


class CacheManager:
    """Result cache for expensive deterministic computations.

    Uses redis when reachable and falls back to an in-process dictionary.
    Values are pickled in both backends so callers always receive a fresh copy.
    """

    def __init__(
        self,
        redis_host: Optional[str] = None,
        redis_port: Optional[int] = None,
        redis_password: Optional[str] = None,
        use_redis: bool = False,
        default_ttl: int = 86400,
    ):
        self.default_ttl = default_ttl
        self.redis_client = None
        self.memory_cache: Dict[str, bytes] = {}
        self.hits = 0
        self.misses = 0

        redis_host = redis_host or os.getenv('REDIS_HOST', 'localhost')
        redis_port = redis_port or int(os.getenv('REDIS_PORT', 6379))
        redis_password = redis_password or os.getenv('REDIS_PASSWORD')

        self.cache_type = 'memory'
        if use_redis:
            try:
                self.redis_client = redis.Redis(
                    host=redis_host,
                    port=redis_port,
                    password=redis_password,
                    decode_responses=False,
                    socket_timeout=5,
                    socket_connect_timeout=5,
                )
                self.redis_client.ping()
                log.info(f"Connected to Redis at {redis_host}:{redis_port}")
                self.cache_type = 'redis'
            except (redis.ConnectionError, redis.TimeoutError) as e:
                log.warning(f"Redis connection failed: {e}")
                log.warning("Falling back to in-memory cache")
                self.redis_client = None
        else:
            log.debug("Using in-memory cache (Redis disabled)")

    @classmethod
    def from_config(cls, cache_config) -> 'CacheManager':
        return cls(
            redis_host=cache_config.redis_host,
            redis_port=cache_config.redis_port,
            use_redis=cache_config.use_redis,
            default_ttl=cache_config.ttl,
        )

    def get(self, key: str) -> Optional[Any]:
        try:
            raw = self.redis_client.get(key) if self.redis_client else self.memory_cache.get(key)
        except redis.RedisError as e:
            log.error(f"Cache get error for key '{key}': {e}")
            return None
        if raw is None:
            self.misses += 1
            log.debug(f"Cache MISS: {key} ({self.cache_type})")
            return None
        self.hits += 1
        log.debug(f"Cache HIT: {key} ({self.cache_type})")
        return pickle.loads(raw)

    def set(self, key: str, value: Any, ttl: Optional[int] = None) -> bool:
        ttl = ttl or self.default_ttl
        serialized = pickle.dumps(value)
        try:
            if self.redis_client:
                self.redis_client.setex(key, ttl, serialized)
            else:
                self.memory_cache[key] = serialized
        except redis.RedisError as e:
            log.error(f"Cache set error for key '{key}': {e}")
            return False
        log.debug(f"Cached: {key} ({self.cache_type}, {len(serialized)} bytes)")
        return True

    def delete(self, key: str) -> bool:
        try:
            if self.redis_client:
                return self.redis_client.delete(key) > 0
            return self.memory_cache.pop(key, None) is not None
        except redis.RedisError as e:
            log.error(f"Cache delete error for key '{key}': {e}")
            return False

    def exists(self, key: str) -> bool:
        try:
            if self.redis_client:
                return self.redis_client.exists(key) > 0
            return key in self.memory_cache
        except redis.RedisError as e:
            log.error(f"Cache exists error for key '{key}': {e}")
            return False

    def clear(self, namespace: Optional[str] = None) -> int:
        """Drop every entry, or only those of one namespace. Returns the count removed."""
        pattern = f"{KEY_PREFIX}:{namespace}:*" if namespace else f"{KEY_PREFIX}:*"
        try:
            if self.redis_client:
                keys = self.redis_client.keys(pattern)
                count = self.redis_client.delete(*keys) if keys else 0
            else:
                prefix = pattern[:-1]
                keys = [k for k in self.memory_cache if k.startswith(prefix)]
                for key in keys:
                    del self.memory_cache[key]
                count = len(keys)
        except redis.RedisError as e:
            log.error(f"Cache clear error: {e}")
            return 0
        log.info(f"Cleared {count} cache entries matching '{pattern}' ({self.cache_type})")
        return count

    def remember(self, namespace: str, payload: Dict, compute: Callable[[], Any]) -> Any:
        return cached_computation(self, namespace, payload, compute)

    def get_stats(self) -> dict:
        lookups = self.hits + self.misses
        try:
            total_keys = self.redis_client.dbsize() if self.redis_client else len(self.memory_cache)
        except redis.RedisError as e:
            log.error(f"Cache stats error: {e}")
            return {'error': str(e)}
        return {
            'cache_type': self.cache_type,
            'total_keys': total_keys,
            'hits': self.hits,
            'misses': self.misses,
            'hit_rate': (self.hits / lookups * 100) if lookups else 0.0,
        }


def cached_computation(cache: Optional[CacheManager], namespace: str, payload: Dict,
                       compute: Callable[[], Any], ttl: Optional[int] = None,
                       force_refresh: bool = False) -> Any:
    """Return the cached result for (namespace, payload) or compute and store it."""
    if cache is None:
        return compute()
    key = cache_key(namespace, payload)
    if not force_refresh:
        result = cache.get(key)
        if result is not None:
            log.debug(f"Using cached result for: {namespace}")
            return result
    log.debug(f"Computing: {namespace}")
    result = compute()
    cache.set(key, result, ttl=ttl)
    return result
