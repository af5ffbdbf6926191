import numpy as np
import pytest

from stsconv.backend import numba_available, use_backend


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def _backends():
    names = ["numpy"]
    if numba_available():
        names.append("numba")
    return names


@pytest.fixture(params=_backends())
def backend(request):
    """Run the test under each available kernel backend."""
    with use_backend(request.param):
        yield request.param
