import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS))


@pytest.fixture
def data_dir():
    return TESTS / "data"


@pytest.fixture
def configs_dir():
    return TESTS.parent / "configs"
