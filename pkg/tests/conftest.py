import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from elastoplasmon.harmonics import shared_quadrature, shared_tables  # noqa: E402
from elastoplasmon.lame import LameParams  # noqa: E402


@pytest.fixture(scope="session")
def tables():
    return shared_tables(12)


@pytest.fixture(scope="session")
def quad():
    return shared_quadrature(26)


@pytest.fixture(scope="session")
def materials():
    return (LameParams(1.0, 1.0), LameParams(-0.5, 1.0), LameParams(2.0, 0.5))
