"""The numba and numpy kernels must agree."""
import numpy as np
import pytest

from hplandscape import _accel, kernels
from hplandscape.space import direction_numbers

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def both(fn, *args):
    prev = _accel.backend()
    try:
        _accel.set_backend("numba")
        a = fn(*args)
        _accel.set_backend("numpy")
        b = fn(*args)
    finally:
        _accel.set_backend(prev)
    return a, b


def test_sobol_ints_agree():
    V = direction_numbers(7)
    a, b = both(kernels.sobol_ints, V, 1, 1000)
    assert a.dtype == b.dtype == np.uint64
    np.testing.assert_array_equal(a, b)
    a, b = both(kernels.sobol_ints, V, 12345, 17)
    np.testing.assert_array_equal(a, b)


def test_fold_rows_agree(rng):
    X = np.sort(rng.normal(size=(40, 37)), axis=1)
    X = (X - X[:, :1]) / (X[:, -1:] - X[:, :1])
    (fa, pa), (fb, pb) = both(kernels.fold_rows, X)
    np.testing.assert_allclose(fa, fb, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(pa, pb, atol=1e-7)


def test_optima_agree(rng):
    Z = rng.normal(size=(23, 31))
    Z[5:8, 5:8] = 1.0  # plateau
    (ma, na), (mb, nb) = both(kernels.local_optima_masks, Z)
    np.testing.assert_array_equal(ma, mb)
    np.testing.assert_array_equal(na, nb)


def test_sqdist_agree(rng):
    A, B = rng.random((9, 3)), rng.random((14, 3))
    s = np.array([0.3, 2.0, 1.0])
    a, b = both(kernels.scaled_sqdist, A, B, s)
    np.testing.assert_allclose(a, b, rtol=1e-13)
    brute = np.array([[np.sum(((x - y) / s) ** 2) for y in B] for x in A])
    np.testing.assert_allclose(a, brute, rtol=1e-13)
