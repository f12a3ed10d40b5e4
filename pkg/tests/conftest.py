import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pmmatch import MeshConfig, NormOperator  # noqa: E402

ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def mesh16():
    return MeshConfig.square(16)


@pytest.fixture(scope="session")
def mesh32():
    return MeshConfig.square(32)


@pytest.fixture(scope="session")
def h2():
    return NormOperator(0.4, 2)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
