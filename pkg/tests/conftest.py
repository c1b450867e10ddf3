import numpy as np
import pytest

from glskit.rng import SeedContext


@pytest.fixture
def seed():
    return SeedContext(20240611, (99,))


def tv(a, b):
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())
