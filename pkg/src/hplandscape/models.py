"""Landscape surface models: linear-kernel RBF interpolation (ILM) and
independent Gaussian-process mean surfaces (IGPR)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky
from scipy.optimize import minimize

from hplandscape.dataset import Affine, PerConfigStats, minmax_affine, stats_values
from hplandscape.kernels import scaled_sqdist

ILM = "ilm"
IGPR = "igpr"
MODEL_KINDS = (ILM, IGPR)
SURFACES = ("upper", "mean", "lower")

JITTER_START = 1e-10
JITTER_MAX = 1e-6
_CUBE_TOL = 1e-12


class ModelError(RuntimeError):
    pass


def _check_cube(U, n):
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[1] != n:
        raise ModelError(f"query has {U.shape[1]} coordinates, model expects {n}")
    if np.any(U < -_CUBE_TOL) or np.any(U > 1 + _CUBE_TOL):
        raise ModelError("query point outside the unit cube")
    return U


def _jitter_ladder():
    j = JITTER_START
    while j <= JITTER_MAX * (1 + 1e-9):
        yield j
        j *= 10


# ---------------------------------------------------------------- ILM

@dataclass
class IlmSurface:
    centers: np.ndarray
    weights: np.ndarray
    tail: np.ndarray  # [constant, slope_1 .. slope_n]

    kind = ILM

    @property
    def n(self):
        return self.centers.shape[1]

    def predict(self, U):
        single = np.ndim(U) == 1
        U = _check_cube(U, self.n)
        r = np.sqrt(scaled_sqdist(U, self.centers))
        out = -r @ self.weights + self.tail[0] + U @ self.tail[1:]
        return float(out[0]) if single else out

    def to_json(self):
        return {"kind": ILM, "centers": self.centers.tolist(),
                "weights": self.weights.tolist(), "tail": self.tail.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(np.array(obj["centers"], dtype=float), np.array(obj["weights"], dtype=float),
                   np.array(obj["tail"], dtype=float))


def fit_ilm(X, y) -> IlmSurface:
    """Exact interpolant ``s(x) = -sum_i w_i |x - c_i| + a + b.x``.

    The weights satisfy the moment conditions ``sum w = 0`` and
    ``sum w_i c_i = 0``, which make the augmented system solvable for
    distinct centers that are affinely independent.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    m, n = X.shape
    if y.size != m:
        raise ModelError("targets and centers differ in length")
    if m < n + 1:
        raise ModelError(f"need at least {n + 1} centers in {n} dimensions, got {m}")
    D = np.sqrt(scaled_sqdist(X, X))
    off = D[~np.eye(m, dtype=bool)]
    if off.size and off.min() == 0.0:
        raise ModelError("duplicate interpolation centers")
    P = np.hstack([np.ones((m, 1)), X])
    if np.linalg.matrix_rank(P) < n + 1:
        raise ModelError("centers are affinely dependent; the linear tail is not determined")
    A = np.zeros((m + n + 1, m + n + 1))
    A[:m, :m] = -D
    A[:m, m:] = P
    A[m:, :m] = P.T
    rhs = np.concatenate([y, np.zeros(n + 1)])
    sol = None
    try:
        sol = np.linalg.solve(A, rhs)
    except LinAlgError:
        for j in _jitter_ladder():
            Aj = A.copy()
            Aj[np.arange(m), np.arange(m)] += j
            try:
                sol = np.linalg.solve(Aj, rhs)
                break
            except LinAlgError:
                continue
    if sol is None or not np.all(np.isfinite(sol)):
        raise ModelError("interpolation system is singular")
    return IlmSurface(X.copy(), sol[:m], sol[m:])


# ---------------------------------------------------------------- IGPR

DEFAULT_BOUNDS = {"signal": (1e-6, 1e3), "length": (1e-3, 1e3), "noise": (1e-8, 1e1)}


@dataclass(frozen=True)
class GpParams:
    signal: float
    lengths: tuple
    noise: float

    @property
    def theta(self):
        return np.log(np.concatenate([[self.signal], self.lengths, [self.noise]]))

    @classmethod
    def from_theta(cls, theta):
        e = np.exp(np.asarray(theta, dtype=float))
        return cls(float(e[0]), tuple(float(v) for v in e[1:-1]), float(e[-1]))


def _rbf(U, X, signal, lengths):
    return signal * np.exp(-0.5 * scaled_sqdist(U, X, np.asarray(lengths)))


def _chol(K):
    try:
        return cholesky(K, lower=True), 0.0
    except LinAlgError:
        pass
    d = np.mean(np.diag(K))
    for j in _jitter_ladder():
        try:
            return cholesky(K + j * d * np.eye(K.shape[0]), lower=True), j
        except LinAlgError:
            continue
    raise ModelError("kernel matrix is not positive definite")


def lml(theta, X, y, jitter=False):
    """Log marginal likelihood and its gradient w.r.t. ``theta``.

    ``theta = log([signal_variance, length_1, .., length_n, noise_variance])``
    for the kernel ``s * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2)``. With
    ``jitter=False`` a failed Cholesky raises :class:`ModelError`.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    m, n = X.shape
    theta = np.asarray(theta, dtype=float)
    if theta.size != n + 2:
        raise ModelError(f"expected {n + 2} log-parameters, got {theta.size}")
    p = GpParams.from_theta(theta)
    K = _rbf(X, X, p.signal, p.lengths)
    Ky = K + p.noise * np.eye(m)
    if jitter:
        L, _ = _chol(Ky)
    else:
        try:
            L = cholesky(Ky, lower=True)
        except LinAlgError:
            raise ModelError("kernel matrix is not positive definite") from None
    alpha = cho_solve((L, True), y)
    value = -0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * m * np.log(2 * np.pi)
    W = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(m))
    grad = np.empty(n + 2)
    grad[0] = 0.5 * np.sum(W * K)
    for d in range(n):
        diff2 = (X[:, d:d + 1] - X[:, d:d + 1].T) ** 2 / p.lengths[d] ** 2
        grad[1 + d] = 0.5 * np.sum(W * K * diff2)
    grad[-1] = 0.5 * p.noise * np.trace(W)
    return float(value), grad


@dataclass
class IgprSurface:
    X: np.ndarray
    y: np.ndarray
    params: GpParams
    y_mean: float
    alpha: np.ndarray
    log_likelihood: float = float("nan")
    L: np.ndarray = field(default=None, repr=False)

    kind = IGPR

    @property
    def n(self):
        return self.X.shape[1]

    def predict(self, U):
        single = np.ndim(U) == 1
        U = _check_cube(U, self.n)
        out = self.y_mean + _rbf(U, self.X, self.params.signal, self.params.lengths) @ self.alpha
        return float(out[0]) if single else out

    def to_json(self):
        return {"kind": IGPR, "inputs": self.X.tolist(), "targets": self.y.tolist(),
                "signal_variance": self.params.signal, "length_scales": list(self.params.lengths),
                "noise_variance": self.params.noise, "target_mean": self.y_mean,
                "alpha": self.alpha.tolist(), "log_marginal_likelihood": self.log_likelihood}

    @classmethod
    def from_json(cls, obj):
        p = GpParams(float(obj["signal_variance"]), tuple(float(v) for v in obj["length_scales"]),
                     float(obj["noise_variance"]))
        return cls(np.array(obj["inputs"], dtype=float), np.array(obj["targets"], dtype=float), p,
                   float(obj["target_mean"]), np.array(obj["alpha"], dtype=float),
                   float(obj.get("log_marginal_likelihood", float("nan"))))


@dataclass(frozen=True)
class IgprOptions:
    restarts: int = 8
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    opt_seed: int = 0
    maxiter: int = 200
    gtol: float = 1e-6


def _log_bounds(opts, n):
    b = opts.bounds
    rows = [b["signal"]] + [b["length"]] * n + [b["noise"]]
    return np.log(np.array(rows, dtype=float))


def _start_points(opts, n, yvar):
    lb = _log_bounds(opts, n)
    first = np.log(np.concatenate([[max(yvar, 1e-3)], np.full(n, 0.3), [max(1e-2 * yvar, 1e-6)]]))
    first = np.clip(first, lb[:, 0], lb[:, 1])
    if opts.restarts <= 1:
        return [first]
    rng = np.random.default_rng(opts.opt_seed)
    draws = rng.uniform(lb[:, 0], lb[:, 1], size=(opts.restarts - 1, n + 2))
    return [first] + list(draws)


def optimize_gp(X, y, opts: IgprOptions = IgprOptions()):
    """Maximise the log marginal likelihood from multiple starts.

    Returns ``(best_theta, best_lml, per_start_lml)``. The first start is a
    data-scaled default, the rest are log-uniform draws from ``opt_seed``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[1]
    lb = _log_bounds(opts, n)

    def objective(theta):
        try:
            v, g = lml(theta, X, y, jitter=True)
        except ModelError:
            return 1e25, np.zeros_like(theta)
        return -v, -g

    best_theta, best_val, values = None, -np.inf, []
    for x0 in _start_points(opts, n, float(np.var(y))):
        res = minimize(objective, x0, jac=True, method="L-BFGS-B", bounds=lb,
                       options={"maxiter": opts.maxiter, "gtol": opts.gtol})
        val = -float(res.fun)
        values.append(val)
        if val > best_val:
            best_theta, best_val = np.asarray(res.x, dtype=float), val
    if best_theta is None:
        raise ModelError("likelihood optimisation failed for every start")
    return best_theta, best_val, values


def fit_igpr(X, y, opts: IgprOptions = IgprOptions(), params: GpParams = None) -> IgprSurface:
    """GP posterior-mean surface with a constant mean equal to the target average.

    Pass ``params`` to skip hyperparameter optimisation.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 2:
        raise ModelError("need at least two training points")
    if y.size != X.shape[0]:
        raise ModelError("targets and inputs differ in length")
    y_mean = float(np.mean(y))
    yc = y - y_mean
    if params is None:
        theta, _, _ = optimize_gp(X, yc, opts)
        params = GpParams.from_theta(theta)
    K = _rbf(X, X, params.signal, params.lengths) + params.noise * np.eye(X.shape[0])
    L, _ = _chol(K)
    alpha = cho_solve((L, True), yc)
    value = -0.5 * yc @ alpha - np.log(np.diag(L)).sum() - 0.5 * X.shape[0] * np.log(2 * np.pi)
    return IgprSurface(X.copy(), y.copy(), params, y_mean, alpha, float(value), L)


# ---------------------------------------------------------------- triples

def surface_from_json(obj):
    kind = obj["kind"]
    if kind == ILM:
        return IlmSurface.from_json(obj)
    if kind == IGPR:
        return IgprSurface.from_json(obj)
    raise ModelError(f"unknown model kind {kind!r}")


def fit_surface(X, y, model_kind, opts=None):
    if model_kind == ILM:
        return fit_ilm(X, y)
    if model_kind == IGPR:
        return fit_igpr(X, y, opts or IgprOptions())
    raise ModelError(f"unknown model kind {model_kind!r}")


@dataclass
class SurfaceTriple:
    upper: object
    mean: object
    lower: object
    kind: str
    affine: Affine
    phase: int = 0

    def surface(self, name):
        if name not in SURFACES:
            raise ModelError(f"unknown surface {name!r}")
        return getattr(self, name)

    def predict(self, U, which="mean", denormalize=False):
        v = self.surface(which).predict(U)
        return self.affine.invert(v) if denormalize else v

    def to_json(self):
        return {"kind": self.kind, "phase": self.phase, "normalization": self.affine.to_json(),
                "surfaces": {s: self.surface(s).to_json() for s in SURFACES}}

    @classmethod
    def from_json(cls, obj):
        s = {k: surface_from_json(v) for k, v in obj["surfaces"].items()}
        return cls(s["upper"], s["mean"], s["lower"], obj["kind"],
                   Affine.from_json(obj["normalization"]), int(obj.get("phase", 0)))

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def fit_surface_triple(stats: PerConfigStats, model_kind, opts=None, affine=None) -> SurfaceTriple:
    """Fit upper/mean/lower surfaces to the 97.5% quantile, IQM and 2.5%
    quantile targets, independently, on normalized values.

    Without ``affine`` the stats' own min-max range is used; a constant
    dataset falls back to a pure shift so the surfaces stay well defined.
    """
    if len(stats) == 0:
        raise ModelError("no configurations to fit")
    if affine is None:
        affine = minmax_affine(stats_values(stats), allow_degenerate=True)
    fitted = {}
    for name in SURFACES:
        try:
            fitted[name] = fit_surface(stats.unit, affine.apply(stats.targets(name)), model_kind, opts)
        except ModelError as e:
            raise ModelError(f"phase {stats.phase}, {name} surface ({model_kind}): {e}") from e
    return SurfaceTriple(fitted["upper"], fitted["mean"], fitted["lower"], model_kind, affine,
                         stats.phase)


# ---------------------------------------------------------------- grids

@dataclass
class GridValues:
    dims: tuple
    axis: np.ndarray
    fixed: np.ndarray
    values: np.ndarray  # values[a, b]: dims[0] at axis[a], dims[1] at axis[b]

    def node_unit(self, a, b):
        u = self.fixed.copy()
        u[self.dims[0]] = self.axis[a]
        u[self.dims[1]] = self.axis[b]
        return u


def grid_eval(surface, dims=(0, 1), resolution=51, fixed=None) -> GridValues:
    """Evaluate ``surface`` on the tensor grid of two free unit-cube axes."""
    n = surface.n
    i, j = int(dims[0]), int(dims[1])
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ModelError(f"invalid grid dims {dims} for a {n}-dimensional model")
    if resolution < 2:
        raise ModelError("grid resolution must be >= 2")
    fixed = np.full(n, 0.5) if fixed is None else np.asarray(fixed, dtype=float).copy()
    axis = np.linspace(0.0, 1.0, resolution)
    A, B = np.meshgrid(axis, axis, indexing="ij")
    U = np.tile(fixed, (resolution * resolution, 1))
    U[:, i] = A.ravel()
    U[:, j] = B.ravel()
    vals = np.asarray(surface.predict(U)).reshape(resolution, resolution)
    return GridValues((i, j), axis, fixed, vals)


# ---------------------------------------------------------------- cross-validation

@dataclass
class CvReport:
    phase: int
    kind: str
    k: int
    seed: int
    mse: np.ndarray
    mae: np.ndarray

    @property
    def mse_mean(self):
        return float(np.mean(self.mse))

    @property
    def mse_std(self):
        return float(np.std(self.mse))

    @property
    def mae_mean(self):
        return float(np.mean(self.mae))

    @property
    def mae_std(self):
        return float(np.std(self.mae))

    def to_json(self):
        return {"phase": self.phase, "kind": self.kind, "k": self.k, "seed": self.seed,
                "mse": self.mse.tolist(), "mae": self.mae.tolist(),
                "mse_mean": self.mse_mean, "mse_std": self.mse_std,
                "mae_mean": self.mae_mean, "mae_std": self.mae_std}


def fold_assignment(m, k, seed):
    perm = np.random.default_rng(seed).permutation(m)
    return np.array_split(perm, k)


def cross_validate(stats: PerConfigStats, model_kind, k=5, seed=0, affine=None, opts=None) -> CvReport:
    """k-fold CV of the mean surface over configurations (never individual returns)."""
    m = len(stats)
    if m < k:
        raise ModelError(f"{m} configurations cannot be split into {k} folds")
    if affine is None:
        affine = minmax_affine(stats_values(stats), allow_degenerate=True)
    y = affine.apply(stats.iqm)
    mse, mae = [], []
    for test in fold_assignment(m, k, seed):
        train = np.setdiff1d(np.arange(m), test)
        s = fit_surface(stats.unit[train], y[train], model_kind, opts)
        err = np.asarray(s.predict(stats.unit[test])) - y[test]
        mse.append(float(np.mean(err ** 2)))
        mae.append(float(np.mean(np.abs(err))))
    return CvReport(stats.phase, model_kind, k, seed, np.array(mse), np.array(mae))


def format_cv_table(reports) -> str:
    """Per-phase ``mean ± std`` table of MSE and MAE."""
    lines = [f"{'Phase':<6} {'Mean squared error':>22} {'Mean absolute error':>22}"]
    for r in sorted(reports, key=lambda r: r.phase):
        lines.append(f"{r.phase:<6} {r.mse_mean:>12.4f} ± {r.mse_std:<7.4f} "
                     f"{r.mae_mean:>12.4f} ± {r.mae_std:<7.4f}")
    return "\n".join(lines)
