import numpy as np
import pytest

from bayescp import kernels
from bayescp.core import Prior

BACKENDS = kernels.available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]


@pytest.fixture
def two_piece():
    return Prior([(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
