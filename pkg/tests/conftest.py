import numpy as np
import pytest

from hplandscape import _accel
from hplandscape.analysis import null_phis
from hplandscape.space import build_space

BACKENDS = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = _accel.backend()
    _accel.set_backend(request.param)
    null_phis.cache_clear()
    yield request.param
    _accel.set_backend(prev)
    null_phis.cache_clear()


@pytest.fixture
def dqn_space():
    return build_space([
        {"name": "learning_rate", "low": 1e-4, "high": 0.1, "scale": "log"},
        {"name": "gamma", "low": 0.8, "high": 0.9999, "scale": "log"},
        {"name": "exploration_final_eps", "low": 0.01, "high": 1.0, "scale": "linear"},
    ])


@pytest.fixture
def square_space():
    return build_space([("x", 0.0, 1.0, "linear"), ("y", 1e-3, 1.0, "log")])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
