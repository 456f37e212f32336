import pytest

from wslrr.core import validate_joint
from wslrr.verify import random_joint


@pytest.fixture
def toy_joint():
    """The 2x2 running example: priors (0.4, 0.6)."""
    return validate_joint(2, [[0.1, 0.2], [0.3, 0.4]], [[0.3, 0.1], [0.2, 0.4]])


@pytest.fixture
def uniform_joint():
    return validate_joint(2, [[0.0, 0.0], [1.0, 1.0]], [[0.25, 0.25], [0.25, 0.25]])


@pytest.fixture
def binary_joint():
    """Seeded strictly positive binary joint with prior away from 1/2."""
    for stream in range(0, 50, 2):
        j = random_joint(2, 5, 3, seed=101, stream=stream)
        if abs(j.joint.sum(axis=1)[0] - 0.5) > 0.05:
            return j
    raise RuntimeError("no admissible joint")


@pytest.fixture
def multi_joint():
    return random_joint(4, 6, 3, seed=202, stream=0)
