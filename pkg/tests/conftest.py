import numpy as np
import pytest

from xcnn import autodiff as ad


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def double_precision():
    """Run the enclosed test with float64 as the engine default."""
    with ad.precision(np.float64):
        yield


@pytest.fixture(autouse=True)
def _restore_dtype():
    before = ad.get_default_dtype()
    yield
    ad.set_default_dtype(before)
