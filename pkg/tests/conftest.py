import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from kinlab.geometry import ConservationMode, ManifoldSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240831)


@pytest.fixture
def spec_c1():
    return ManifoldSpec(8, ConservationMode.ENERGY_ONLY, eps=1.0)


@pytest.fixture
def spec_c4():
    return ManifoldSpec(8, ConservationMode.ENERGY_MOMENTUM, eps=1.0)


@pytest.fixture
def spec_c4_drift():
    return ManifoldSpec(8, ConservationMode.ENERGY_MOMENTUM, eps=1.5,
                        u=[1.0, 0.0, 0.0])
