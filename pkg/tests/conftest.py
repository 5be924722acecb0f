import numpy as np
import pytest

from gyrokit.fields import MagneticMirror, Species
from gyrokit.fullorbit import FullState


@pytest.fixture
def species():
    return Species()


@pytest.fixture
def mirror():
    return MagneticMirror(1.0, 1.0)


@pytest.fixture
def mirror_state():
    # trapped pitch: turns near |z| = 0.67 for B0 = L = 1
    return FullState(np.array([0.1, 0.0, 0.0]), np.array([0.6, 0.0, 0.4]), 0.0)
