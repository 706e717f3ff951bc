import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import ex1, ex2


@pytest.fixture
def ex1_alpha2():
    return ex1(alpha=2)


@pytest.fixture
def ex1_alpha1():
    return ex1(alpha=1)


@pytest.fixture
def ex2_inst():
    return ex2()
