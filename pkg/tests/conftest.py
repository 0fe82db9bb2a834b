import os
from pathlib import Path

import pytest
from hypothesis import settings

from nonsplitsum.coeffs import cached_table, coefficient_table

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

CACHE_DIR = Path(os.environ.get("NONSPLITSUM_CACHE", Path.home() / ".cache" / "nonsplitsum"))

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def table11():
    return coefficient_table(11, 10**6)


@pytest.fixture(scope="session")
def table15():
    return coefficient_table(15, 400_000)


@pytest.fixture(scope="session")
def cache_dir():
    CACHE_DIR.mkdir(parents=True, exist_ok=True)
    return CACHE_DIR


@pytest.fixture(scope="session")
def big_table11(cache_dir):
    return cached_table(11, 23_000_000, cache_dir)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
