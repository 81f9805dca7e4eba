import numpy as np
import pytest

from doublewell.model import PotentialParams


@pytest.fixture
def unit() -> PotentialParams:
    return PotentialParams()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240717)
