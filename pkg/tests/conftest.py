import os
import tempfile

import pytest
import structlog
from click.testing import CliRunner

from emdenflow.core.settings import get_settings
from emdenflow.utils.cache import clear_caches


@pytest.fixture(scope="function")
def base_dir():
    with tempfile.TemporaryDirectory() as base_dir:
        yield base_dir


def clean_env():
    for env_var in [v for v in os.environ if v.startswith("EMDENFLOW_")]:
        os.environ.pop(env_var, None)


def pytest_sessionstart(session):
    clean_env()


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    clear_caches()
    yield
    get_settings.cache_clear()
    clear_caches()
    # the CLI configures structlog globally
    structlog.reset_defaults()


@pytest.fixture
def runner():
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:
        # stderr is always kept apart from click 8.2 on
        return CliRunner()
