import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def profiles():
    """Cache of soliton profiles keyed by ``c`` (default tolerances)."""
    from coneflow.soliton import integrate_profile

    cache = {}

    def get(c, **kw):
        key = (c, tuple(sorted(kw.items())))
        if key not in cache:
            cache[key] = integrate_profile(c, **kw)
        return cache[key]

    return get
