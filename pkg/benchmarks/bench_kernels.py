"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each case runs once untimed (JIT compile), then reports the best of
``--repeat`` runs per backend and checks both backends agree.
"""
import argparse
import time

import numpy as np

from hplandscape import _accel
from hplandscape.analysis import null_phis
from hplandscape.kernels import fold_rows, local_optima_masks, scaled_sqdist, sobol_ints
from hplandscape.space import direction_numbers


def _cases():
    rng = np.random.default_rng(0)
    V = direction_numbers(4)
    Z = np.sort(rng.random((200, 100)), axis=1)
    Z = (Z - Z[:, :1]) / (Z[:, -1:] - Z[:, :1])
    G = np.round(rng.normal(size=(201, 201)), 1)
    A, B = rng.random((800, 3)), rng.random((800, 3))
    scale = np.array([0.3, 0.5, 1.0])

    def null():
        null_phis.cache_clear()
        return null_phis(50, 1000, 0)

    return [
        ("sobol 2^16 x 4", lambda: sobol_ints(V, 1, 2 ** 16)),
        ("fold_rows 200 x 100", lambda: fold_rows(Z)),
        ("null phis n=50 B=1000", null),
        ("optima 201 x 201", lambda: local_optima_masks(G)),
        ("sqdist 800 x 800 x 3", lambda: scaled_sqdist(A, B, scale)),
    ]


def _best(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-12, equal_nan=True)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba not available; only the numpy backend can run")
    prev = _accel.backend()
    print(f"{'kernel':<24} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}  agree")
    try:
        for name, fn in _cases():
            _accel.set_backend("numpy")
            t_np, r_np = _best(fn, args.repeat)
            if _accel.HAVE_NUMBA:
                _accel.set_backend("numba")
                t_nb, r_nb = _best(fn, args.repeat)
                print(f"{name:<24} {1e3 * t_np:>11.2f} {1e3 * t_nb:>11.2f} {t_np / t_nb:>7.1f}x  {_same(r_np, r_nb)}")
            else:
                print(f"{name:<24} {1e3 * t_np:>11.2f} {'-':>11} {'-':>8}")
    finally:
        _accel.set_backend(prev)


if __name__ == "__main__":
    main()
