"""Landscape analysis: ICE curves, local optima on map slices and the
folding test of unimodality for per-configuration return distributions."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from hplandscape.dataset import LANDSCAPE, LandscapeDataset
from hplandscape.kernels import fold_rows, local_optima_masks
from hplandscape.models import SURFACES, GridValues, grid_eval

UNIMODAL = "unimodal"
MULTIMODAL = "multimodal"
UNCATEGORIZED = "uncategorized"
CATEGORIES = (UNIMODAL, MULTIMODAL, UNCATEGORIZED)

MIN_SAMPLES = 10


class AnalysisError(ValueError):
    pass


# ---------------------------------------------------------------- ICE

@dataclass
class IceCurveSet:
    dim: int
    grid: np.ndarray
    anchors: np.ndarray
    curves: np.ndarray  # (num_anchors, R)


def ice_curves(surface, dim, anchors, resolution=51) -> IceCurveSet:
    """One curve per anchor: the surface along ``dim`` with the other
    coordinates held at the anchor's values."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    n = surface.n
    if not 0 <= dim < n:
        raise AnalysisError(f"dimension {dim} out of range for a {n}-dimensional surface")
    if resolution < 2:
        raise AnalysisError("ICE resolution must be >= 2")
    if anchors.shape[1] != n:
        raise AnalysisError("anchor dimension does not match the surface")
    if np.any(anchors < 0) or np.any(anchors > 1):
        raise AnalysisError("anchors must lie in the unit cube")
    grid = np.linspace(0.0, 1.0, resolution)
    A = anchors.shape[0]
    U = np.repeat(anchors, resolution, axis=0)
    U[:, dim] = np.tile(grid, A)
    curves = np.asarray(surface.predict(U)).reshape(A, resolution)
    return IceCurveSet(dim, grid, anchors.copy(), curves)


# ---------------------------------------------------------------- optima

@dataclass
class GridOptima:
    maxima: list
    minima: list


def find_local_optima(grid) -> GridOptima:
    """Nodes strictly above (below) every existing Moore neighbour."""
    Z = grid.values if isinstance(grid, GridValues) else np.asarray(grid, dtype=float)
    if Z.ndim != 2 or Z.shape[0] < 3 or Z.shape[1] < 3:
        raise AnalysisError("local optima need a grid of at least 3x3")
    mx, mn = local_optima_masks(Z)
    return GridOptima([tuple(int(v) for v in p) for p in np.argwhere(mx)],
                      [tuple(int(v) for v in p) for p in np.argwhere(mn)])


@dataclass
class LandscapeMap:
    surface: str
    grid: GridValues
    optima: GridOptima


def landscape_maps(triple, resolution=51, fixed=None) -> list[LandscapeMap]:
    """Grid slices for every hyperparameter pair of every surface.

    Dimensions outside the pair stay at ``fixed`` (default: cube midpoint).
    """
    out = []
    n = triple.mean.n
    for name in SURFACES:
        for dims in itertools.combinations(range(n), 2):
            g = grid_eval(triple.surface(name), dims, resolution, fixed)
            out.append(LandscapeMap(name, g, find_local_optima(g)))
    return out


# ---------------------------------------------------------------- folding test

def _unit_rows(X):
    X = np.sort(X, axis=1)
    lo = X[:, :1]
    span = X[:, -1:] - lo
    return (X - lo) / span


def folding_statistic(samples):
    """Folding ratio ``phi = 4 Var(|X - s*|) / Var(X)`` and its pivot ``s*``.

    The factor 4 calibrates the uniform distribution to ``phi = 1``; values
    below 1 point to multimodality.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 3:
        raise AnalysisError("folding statistic needs at least 3 samples")
    lo, hi = float(x.min()), float(x.max())
    if not hi > lo:
        raise AnalysisError("folding statistic is undefined for zero-variance samples")
    z = _unit_rows(x[None, :])
    fv, piv = fold_rows(z)
    phi = 4.0 * float(fv[0]) / float(np.var(z[0]))
    return phi, lo + float(piv[0]) * (hi - lo)


@lru_cache(maxsize=64)
def null_phis(n: int, B: int, seed: int) -> np.ndarray:
    """Folding statistics of ``B`` uniform samples of size ``n``."""
    U = np.random.default_rng(seed).random((B, n))
    Z = _unit_rows(U)
    fv, _ = fold_rows(Z)
    out = 4.0 * fv / Z.var(axis=1)
    out.setflags(write=False)
    return out


@dataclass
class ModalityResult:
    conf_index: int
    phi: float
    pivot: float
    p_value: float
    category: str
    sample_count: int
    phase: int = 0


def folding_test(samples, alpha=0.05, B=1000, seed=0, conf_index=-1,
                 min_samples=MIN_SAMPLES) -> ModalityResult:
    """Folding test with a Monte Carlo p-value under the uniform null.

    ``p = (1 + #{|phi_b - 1| >= |phi - 1|}) / (B + 1)``. Significant results
    are unimodal for ``phi >= 1`` and multimodal otherwise. Samples below
    ``min_samples`` or with zero variance are uncategorized with ``p = 1``.
    """
    if B < 100:
        raise AnalysisError("need at least 100 null replicates")
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    degenerate = n < 3 or not np.ptp(x) > 0
    if degenerate:
        return ModalityResult(conf_index, float("nan"), float("nan"), 1.0, UNCATEGORIZED, n)
    phi, pivot = folding_statistic(x)
    if n < min_samples:
        return ModalityResult(conf_index, phi, pivot, 1.0, UNCATEGORIZED, n)
    null = null_phis(n, int(B), int(seed))
    # small slack so a replicate equal to the observation counts as extreme
    hits = np.count_nonzero(np.abs(null - 1.0) >= abs(phi - 1.0) - 1e-12)
    p = (1.0 + hits) / (B + 1.0)
    if p < alpha:
        cat = UNIMODAL if phi >= 1.0 else MULTIMODAL
    else:
        cat = UNCATEGORIZED
    return ModalityResult(conf_index, phi, pivot, p, cat, n)


@dataclass
class ModalityTable:
    rows: dict  # phase -> {category: percent}

    def to_json(self):
        return {str(p): dict(v) for p, v in sorted(self.rows.items())}

    def format(self) -> str:
        lines = [f"{'Phase':<6} {'Unimodal':>10} {'Multimodal':>11} {'Uncategorized':>14}"]
        for p, v in sorted(self.rows.items()):
            lines.append(f"{p:<6} {v[UNIMODAL]:>9.2f}% {v[MULTIMODAL]:>10.2f}% "
                         f"{v[UNCATEGORIZED]:>13.2f}%")
        return "\n".join(lines)


def tabulate(results) -> dict:
    counts = {c: 0 for c in CATEGORIES}
    for r in results:
        counts[r.category] += 1
    total = max(len(results), 1)
    return {c: 100.0 * counts[c] / total for c in CATEGORIES}


def modality_summary(ds: LandscapeDataset, alpha=0.05, B=1000, seed=0, eval_kind=LANDSCAPE):
    """Folding test on every configuration's pooled returns, per phase.

    Returns ``(ModalityTable, {phase: [ModalityResult, ...]})``. All tests of
    a run share the null replicates drawn from ``seed``.
    """
    sub = ds.select(kind=eval_kind)
    if len(sub) == 0:
        raise AnalysisError(f"no {eval_kind} rows to test")
    per_phase, rows = {}, {}
    for phase in sub.phases:
        ph = sub.select(phase=phase)
        res = []
        for conf in sorted(int(c) for c in np.unique(ph.conf)):
            r = folding_test(ph.ret[ph.conf == conf], alpha, B, seed, conf_index=conf)
            r.phase = phase
            res.append(r)
        per_phase[phase] = res
        rows[phase] = tabulate(res)
    return ModalityTable(rows), per_phase
