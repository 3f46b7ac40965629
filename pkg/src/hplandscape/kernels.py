"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public functions dispatch on :func:`hplandscape._accel.backend`. Both
paths compute the same quantities with the same formulas; results agree
to rounding (see ``tests/test_kernels.py``).
"""
import numpy as np

from hplandscape import _accel
from hplandscape._accel import njit

SOBOL_BITS = 32
FOLD_GRID = 1024
GOLDEN_ITERS = 64
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------- sobol

@njit(cache=True)
def _sobol_ints_nb(V, start, count):
    n = V.shape[0]
    out = np.empty((count, n), dtype=np.uint64)
    for r in range(count):
        i = np.uint64(start + r)
        g = i ^ (i >> np.uint64(1))
        for d in range(n):
            x = np.uint64(0)
            b = 0
            gg = g
            while gg != np.uint64(0):
                if gg & np.uint64(1):
                    x ^= V[d, b]
                gg >>= np.uint64(1)
                b += 1
            out[r, d] = x
    return out


def _sobol_ints_np(V, start, count):
    idx = np.arange(start, start + count, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    out = np.zeros((count, V.shape[0]), dtype=np.uint64)
    for b in range(V.shape[1]):
        bit = ((gray >> np.uint64(b)) & np.uint64(1)).astype(bool)
        out[bit] ^= V[:, b]
    return out


def sobol_ints(V, start, count):
    """Gray-code Sobol integers for indices ``start .. start+count-1``.

    ``V`` is the ``(n, SOBOL_BITS)`` table of left-aligned direction integers.
    """
    V = np.ascontiguousarray(V, dtype=np.uint64)
    if _accel.USE_NUMBA:
        return _sobol_ints_nb(V, int(start), int(count))
    return _sobol_ints_np(V, int(start), int(count))


# ---------------------------------------------------------------- folding
#
# Samples are pre-sorted and rescaled to [0, 1]; the folded variance at a
# pivot s is  E[(x-s)^2] - (E|x-s|)^2, with E|x-s| taken from prefix sums.

@njit(cache=True)
def _folded_var_at(x, csum, m1, m2, s):
    n = x.shape[0]
    k = np.searchsorted(x, s)
    below = csum[k]
    total = csum[n]
    mad = (k * s - below + (total - below) - (n - k) * s) / n
    return (m2 - 2.0 * s * m1 + s * s) - mad * mad


@njit(cache=True)
def _fold_row_nb(x, grid):
    n = x.shape[0]
    G = grid.shape[0]
    csum = np.empty(n + 1)
    csum[0] = 0.0
    sq = 0.0
    for j in range(n):
        csum[j + 1] = csum[j] + x[j]
        sq += x[j] * x[j]
    m1 = csum[n] / n
    m2 = sq / n
    # grid scan with a monotone pointer
    best = np.inf
    gbest = 0
    k = 0
    for g in range(G):
        s = grid[g]
        while k < n and x[k] < s:
            k += 1
        below = csum[k]
        mad = (k * s - below + (csum[n] - below) - (n - k) * s) / n
        f = (m2 - 2.0 * s * m1 + s * s) - mad * mad
        if f < best:
            best = f
            gbest = g
    lo = grid[max(gbest - 1, 0)]
    hi = grid[min(gbest + 1, G - 1)]
    a = lo
    b = hi
    for _ in range(GOLDEN_ITERS):
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        if _folded_var_at(x, csum, m1, m2, c) < _folded_var_at(x, csum, m1, m2, d):
            b = d
        else:
            a = c
    sg = 0.5 * (a + b)
    pivot = grid[gbest]
    if _folded_var_at(x, csum, m1, m2, sg) < best:
        pivot = sg
    # direct two-pass variance at the chosen pivot
    mean = 0.0
    for j in range(n):
        mean += abs(x[j] - pivot)
    mean /= n
    var = 0.0
    for j in range(n):
        dlt = abs(x[j] - pivot) - mean
        var += dlt * dlt
    return var / n, pivot


@njit(cache=True)
def _fold_rows_nb(X, grid):
    B = X.shape[0]
    fv = np.empty(B)
    piv = np.empty(B)
    for b in range(B):
        r = _fold_row_nb(X[b], grid)
        fv[b] = r[0]
        piv[b] = r[1]
    return fv, piv


def _batched_counts(X, S):
    """Per row b, number of entries of sorted ``X[b]`` strictly below each ``S[b, :]``."""
    B, n = X.shape
    off = 2.0 * np.arange(B)[:, None]
    flat = (X + off).ravel()
    pos = np.searchsorted(flat, (S + off).ravel(), side="left").reshape(S.shape)
    return pos - n * np.arange(B)[:, None]


def _folded_var_np(X, csum, m1, m2, S):
    n = X.shape[1]
    k = _batched_counts(X, S)
    below = np.take_along_axis(csum, k, axis=1)
    total = csum[:, -1:]
    mad = (k * S - below + (total - below) - (n - k) * S) / n
    return (m2 - 2.0 * S * m1 + S * S) - mad * mad


def _fold_rows_np(X, grid):
    B, n = X.shape
    csum = np.concatenate([np.zeros((B, 1)), np.cumsum(X, axis=1)], axis=1)
    m1 = csum[:, -1:] / n
    m2 = np.mean(X * X, axis=1, keepdims=True)
    G = grid.shape[0]
    F = _folded_var_np(X, csum, m1, m2, np.broadcast_to(grid, (B, G)))
    gbest = np.argmin(F, axis=1)
    best = F[np.arange(B), gbest]
    a = grid[np.maximum(gbest - 1, 0)][:, None]
    b = grid[np.minimum(gbest + 1, G - 1)][:, None]
    for _ in range(GOLDEN_ITERS):
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        left = _folded_var_np(X, csum, m1, m2, c) < _folded_var_np(X, csum, m1, m2, d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    sg = 0.5 * (a + b)
    fg = _folded_var_np(X, csum, m1, m2, sg)[:, 0]
    pivot = np.where(fg < best, sg[:, 0], grid[gbest])
    folded = np.abs(X - pivot[:, None])
    return folded.var(axis=1), pivot


def fold_rows(X):
    """Minimum folded variance and pivot for each row of ``X``.

    Rows must be sorted ascending and rescaled to span exactly [0, 1].
    The pivot is searched on a ``FOLD_GRID``-point grid, then refined by
    golden section inside the neighbouring cells of the best node.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    grid = np.linspace(0.0, 1.0, FOLD_GRID)
    if _accel.USE_NUMBA:
        return _fold_rows_nb(X, grid)
    return _fold_rows_np(X, grid)


# ---------------------------------------------------------------- optima

@njit(cache=True)
def _optima_nb(Z):
    R, C = Z.shape
    mx = np.zeros((R, C), dtype=np.bool_)
    mn = np.zeros((R, C), dtype=np.bool_)
    for i in range(R):
        for j in range(C):
            z = Z[i, j]
            is_max = True
            is_min = True
            for di in range(-1, 2):
                for dj in range(-1, 2):
                    if di == 0 and dj == 0:
                        continue
                    a = i + di
                    b = j + dj
                    if a < 0 or a >= R or b < 0 or b >= C:
                        continue
                    w = Z[a, b]
                    if not z > w:
                        is_max = False
                    if not z < w:
                        is_min = False
            mx[i, j] = is_max
            mn[i, j] = is_min
    return mx, mn


def _optima_np(Z):
    R, C = Z.shape
    hi = np.pad(Z, 1, constant_values=-np.inf)
    lo = np.pad(Z, 1, constant_values=np.inf)
    mx = np.ones((R, C), dtype=bool)
    mn = np.ones((R, C), dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            sl = (slice(1 + di, 1 + di + R), slice(1 + dj, 1 + dj + C))
            mx &= Z > hi[sl]
            mn &= Z < lo[sl]
    return mx, mn


def local_optima_masks(Z):
    """Boolean masks of strict Moore-neighbourhood maxima and minima."""
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    if _accel.USE_NUMBA:
        return _optima_nb(Z)
    return _optima_np(Z)


# ---------------------------------------------------------------- distances

@njit(cache=True)
def _sqdist_nb(A, B, scale):
    m, n = A.shape
    k = B.shape[0]
    out = np.empty((m, k))
    for i in range(m):
        for j in range(k):
            acc = 0.0
            for d in range(n):
                t = (A[i, d] - B[j, d]) / scale[d]
                acc += t * t
            out[i, j] = acc
    return out


def _sqdist_np(A, B, scale):
    diff = (A[:, None, :] - B[None, :, :]) / scale
    return np.einsum("ijk,ijk->ij", diff, diff)


def scaled_sqdist(A, B, scale=None):
    """Squared Euclidean distances between rows of ``A`` and ``B`` after
    dividing each coordinate by ``scale``."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    if scale is None:
        scale = np.ones(A.shape[1])
    scale = np.ascontiguousarray(scale, dtype=np.float64)
    if _accel.USE_NUMBA:
        return _sqdist_nb(A, B, scale)
    return _sqdist_np(A, B, scale)
