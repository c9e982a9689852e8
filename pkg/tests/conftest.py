import numpy as np
import pytest

from ncpoisson.algebra import BUILTIN_ALGEBRAS


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def algebras():
    return {name: build() for name, build in BUILTIN_ALGEBRAS.items()}


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_log(request):
    """Collects one summary line per acceptance criterion."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def log(line):
        print(line)
        lines.append(line)

    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
