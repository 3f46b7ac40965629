"""Numba switch.

Set ``LANDSCAPE_NO_NUMBA=1`` to force the pure-numpy kernels. The numba
kernels are also skipped automatically when numba cannot be imported.
"""
import os

_DISABLED = os.environ.get("LANDSCAPE_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("disabled by LANDSCAPE_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


USE_NUMBA = HAVE_NUMBA


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"`` at runtime (tests and benchmarks)."""
    global USE_NUMBA
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend unavailable")
        USE_NUMBA = True
    elif name == "numpy":
        USE_NUMBA = False
    else:
        raise ValueError(f"unknown backend {name!r}")


def backend():
    return "numba" if USE_NUMBA else "numpy"
