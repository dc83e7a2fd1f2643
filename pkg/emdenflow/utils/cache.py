import functools
from dataclasses import dataclass
from typing import Any, Callable, Dict, Hashable, Optional, TypeVar, cast

import cachetools
import cachetools.keys

from emdenflow.core.settings import NativeCacheSettings, get_settings


@dataclass
class CacheItem:
    cache_key: Optional[Hashable] = None
    cache_value: Optional[Any] = None
    missing: bool = True


class NativeCache:
    NATIVE_CACHE_IMPLEMENTATIONS = {
        "LFU": cachetools.LFUCache,
        "LRU": cachetools.LRUCache,
        "RR": cachetools.RRCache,
    }

    def __init__(self, implementation: str, maxsize: int):
        self.cache: cachetools.Cache = self.NATIVE_CACHE_IMPLEMENTATIONS[
            implementation
        ](maxsize)

    def hash_key(self, solver_key: str, args: tuple, kwargs: Dict[str, Any]):
        return cachetools.keys.hashkey(solver_key, *args, **kwargs)

    def get(self, solver_key: str, args: tuple, kwargs: Dict[str, Any]) -> CacheItem:
        cache_key = self.hash_key(solver_key, args, kwargs)
        r = self.cache.get(cache_key)
        if r is None:
            return CacheItem(cache_key, None, True)
        return CacheItem(cache_key, r, False)

    def set(self, k: Hashable, d: Any):
        self.cache.setdefault(k, d)

    def clear(self):
        self.cache.clear()


_CACHES: Dict[str, NativeCache] = {}

T = TypeVar("T", bound=Callable[..., Any])


def _cache_for(solver_key: str) -> Optional[NativeCache]:
    cache_settings = get_settings().cache
    if not isinstance(cache_settings, NativeCacheSettings):
        return None
    if solver_key not in _CACHES:
        _CACHES[solver_key] = NativeCache(
            cache_settings.implementation, cache_settings.maxsize
        )
    return _CACHES[solver_key]


def cached_solver(solver_key: str) -> Callable[[T], T]:
    """Memoise a pure solver on its (hashable) arguments.

    Results are shared by every caller in the process, so decorated functions
    must return immutable values.
    """

    def decorator(func: T) -> T:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            cache = _cache_for(solver_key)
            if cache is None:
                return func(*args, **kwargs)
            item = cache.get(solver_key, args, kwargs)
            if not item.missing:
                return item.cache_value
            result = func(*args, **kwargs)
            cache.set(item.cache_key, result)
            return result

        return cast(T, wrapper)

    return decorator


def clear_caches() -> None:
    for cache in _CACHES.values():
        cache.clear()
    _CACHES.clear()
