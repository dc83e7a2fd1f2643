import pytest

from emdenflow.core.settings import get_settings
from emdenflow.utils.cache import NativeCache, cached_solver, clear_caches


@pytest.mark.parametrize("implementation", ["LFU", "LRU", "RR"])
def test_native_cache(implementation):
    cache = NativeCache(implementation, 4)
    item = cache.get("solve_w", (0.5,), {})
    assert item.missing
    cache.set(item.cache_key, 0.31)
    item = cache.get("solve_w", (0.5,), {})
    assert not item.missing
    assert item.cache_value == 0.31
    assert cache.get("solve_w", (0.5,), {"tol": 1e-8}).missing
    cache.clear()
    assert cache.get("solve_w", (0.5,), {}).missing


def test_cached_solver():
    calls = []

    @cached_solver("square")
    def square(x):
        calls.append(x)
        return x * x

    assert square(3.0) == 9.0
    assert square(3.0) == 9.0
    assert calls == [3.0]
    assert square(2.0) == 4.0
    assert calls == [3.0, 2.0]

    clear_caches()
    square(3.0)
    assert calls == [3.0, 2.0, 3.0]


def test_cached_solver_disabled(monkeypatch):
    monkeypatch.setenv("EMDENFLOW_CACHE_PROVIDER", "none")
    get_settings.cache_clear()
    calls = []

    @cached_solver("cube")
    def cube(x):
        calls.append(x)
        return x**3

    cube(2.0)
    cube(2.0)
    assert calls == [2.0, 2.0]


def test_cache_size(monkeypatch):
    monkeypatch.setenv("EMDENFLOW_CACHE_MAX_SIZE", "1")
    get_settings.cache_clear()
    calls = []

    @cached_solver("identity")
    def identity(x):
        calls.append(x)
        return x

    identity(1.0)
    identity(2.0)
    identity(1.0)
    assert calls == [1.0, 2.0, 1.0]
