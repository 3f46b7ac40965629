"""Return-sample storage, robust statistics and per-configuration aggregation."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from hplandscape.space import SearchSpace

LANDSCAPE = "landscape"
FINAL = "final"
EVAL_KINDS = (LANDSCAPE, FINAL)

POOLED = "pooled_all_phases"
PER_PHASE = "per_phase"

_KEY_COLUMNS = ["phase_index", "checkpoint_step", "conf_index", "seed", "episode", "eval_kind"]


class DatasetError(ValueError):
    pass


# ---------------------------------------------------------------- statistics

def iqm(samples) -> float:
    """Interquartile mean with fractional weights at the quartile boundaries.

    Order statistic ``j`` (1-based) of ``n`` owns rank mass ``((j-1)/n, j/n]``
    and is weighted by its overlap with ``(0.25, 0.75]``.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise DatasetError("iqm of an empty sample")
    j = np.arange(n)
    w = np.clip(np.minimum((j + 1) / n, 0.75) - np.maximum(j / n, 0.25), 0.0, None)
    return float(np.dot(w, x) / w.sum())


def quantile(samples, q: float) -> float:
    """Linear-interpolation quantile at position ``q * (n - 1)`` of the sorted sample."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DatasetError("quantile of an empty sample")
    if not 0.0 <= q <= 1.0:
        raise DatasetError(f"quantile level {q} outside [0, 1]")
    return float(np.quantile(x, q, method="linear"))


# ---------------------------------------------------------------- dataset

@dataclass
class LandscapeDataset:
    """Column store of evaluation returns.

    One row per (phase, checkpoint, configuration, seed, episode). ``unit``
    and ``hp`` are ``(N, n)`` arrays of unit-cube and raw coordinates.
    """

    space: SearchSpace
    phase: np.ndarray
    step: np.ndarray
    conf: np.ndarray
    seed: np.ndarray
    episode: np.ndarray
    kind: np.ndarray
    unit: np.ndarray
    hp: np.ndarray
    ret: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        for name in ("phase", "step", "conf", "seed", "episode"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64).ravel())
        self.kind = np.asarray(self.kind, dtype=object).ravel()
        self.ret = np.asarray(self.ret, dtype=float).ravel()
        n = self.space.n
        self.unit = np.asarray(self.unit, dtype=float).reshape(-1, n)
        self.hp = np.asarray(self.hp, dtype=float).reshape(-1, n)
        N = self.ret.size
        for name in ("phase", "step", "conf", "seed", "episode", "kind", "unit", "hp"):
            if len(getattr(self, name)) != N:
                raise DatasetError(f"column {name} has {len(getattr(self, name))} rows, expected {N}")
        if self.check and N:
            self.validate()

    def validate(self, rtol=1e-9):
        bad = ~np.isin(self.kind, EVAL_KINDS)
        if bad.any():
            raise DatasetError(f"unknown eval_kind {self.kind[bad][0]!r}")
        if np.any(self.unit < 0) or np.any(self.unit > 1):
            raise DatasetError("unit coordinates outside [0, 1]")
        expect = self.space.to_config(self.unit)
        err = np.abs(expect - self.hp) > rtol * np.maximum(np.abs(self.hp), 1e-300)
        if err.any():
            r = int(np.argwhere(err)[0, 0])
            raise DatasetError(f"row {r}: unit coordinates inconsistent with raw hyperparameter values")
        if not np.all(np.isfinite(self.ret)):
            raise DatasetError("non-finite return value")

    def __len__(self):
        return self.ret.size

    @classmethod
    def empty(cls, space):
        n = space.n
        return cls(space, [], [], [], [], [], [], np.zeros((0, n)), np.zeros((0, n)), [])

    def take(self, idx) -> "LandscapeDataset":
        return LandscapeDataset(self.space, self.phase[idx], self.step[idx], self.conf[idx],
                                self.seed[idx], self.episode[idx], self.kind[idx],
                                self.unit[idx], self.hp[idx], self.ret[idx], check=False)

    def select(self, phase=None, kind=None, conf=None) -> "LandscapeDataset":
        m = np.ones(len(self), dtype=bool)
        if phase is not None:
            m &= self.phase == phase
        if kind is not None:
            m &= self.kind == kind
        if conf is not None:
            m &= self.conf == conf
        return self.take(np.flatnonzero(m))

    def sorted(self) -> "LandscapeDataset":
        kind_rank = np.array([EVAL_KINDS.index(k) for k in self.kind], dtype=np.int64)
        order = np.lexsort((self.episode, self.step, self.seed, self.conf, kind_rank, self.phase))
        return self.take(order)

    @property
    def phases(self) -> list[int]:
        return sorted(int(p) for p in np.unique(self.phase))

    def equals(self, other: "LandscapeDataset") -> bool:
        if self.space != other.space or len(self) != len(other):
            return False
        return (all(np.array_equal(getattr(self, k), getattr(other, k))
                    for k in ("phase", "step", "conf", "seed", "episode", "unit", "hp", "ret"))
                and list(self.kind) == list(other.kind))


def concat(parts, space=None) -> LandscapeDataset:
    parts = list(parts)
    if not parts:
        if space is None:
            raise DatasetError("cannot concatenate zero datasets without a space")
        return LandscapeDataset.empty(space)
    space = parts[0].space
    for p in parts:
        if p.space != space:
            raise DatasetError("datasets over different search spaces")
    cat = lambda k: np.concatenate([getattr(p, k) for p in parts])  # noqa: E731
    return LandscapeDataset(space, cat("phase"), cat("step"), cat("conf"), cat("seed"),
                            cat("episode"), cat("kind"), cat("unit"), cat("hp"), cat("ret"),
                            check=False)


# ---------------------------------------------------------------- CSV

def csv_header(space: SearchSpace) -> list[str]:
    return (_KEY_COLUMNS + [f"unit.{d}" for d in space.names]
            + [f"hp.{d}" for d in space.names] + ["return"])


def write_csv(ds: LandscapeDataset, path) -> None:
    """Write rows sorted by (phase, kind, conf, seed, step, episode); floats use repr()."""
    ds = ds.sorted()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(ds.space))
        for r in range(len(ds)):
            w.writerow([int(ds.phase[r]), int(ds.step[r]), int(ds.conf[r]), int(ds.seed[r]),
                        int(ds.episode[r]), ds.kind[r]]
                       + [repr(float(v)) for v in ds.unit[r]]
                       + [repr(float(v)) for v in ds.hp[r]]
                       + [repr(float(ds.ret[r]))])


def read_csv(path, space: SearchSpace) -> LandscapeDataset:
    path = Path(path)
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        try:
            header = next(rd)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        expect = csv_header(space)
        if header != expect:
            missing = [c for c in expect if c not in header]
            extra = [c for c in header if c not in expect]
            raise DatasetError(f"{path}: header does not match schema"
                               f" (missing {missing}, unexpected {extra})")
        rows = list(rd)
    n = space.n
    if not rows:
        return LandscapeDataset.empty(space)
    try:
        ints = np.array([[int(x) for x in r[:5]] for r in rows], dtype=np.int64)
        kind = np.array([r[5] for r in rows], dtype=object)
        floats = np.array([[float(x) for x in r[6:]] for r in rows], dtype=float)
    except (ValueError, IndexError) as e:
        raise DatasetError(f"{path}: malformed row ({e})") from None
    if floats.shape[1] != 2 * n + 1:
        raise DatasetError(f"{path}: wrong number of columns")
    return LandscapeDataset(space, ints[:, 0], ints[:, 1], ints[:, 2], ints[:, 3], ints[:, 4],
                            kind, floats[:, :n], floats[:, n:2 * n], floats[:, -1])


# ---------------------------------------------------------------- aggregation

@dataclass
class PerConfigStats:
    """Per-configuration targets for surface fitting within one phase."""

    phase: int
    conf: np.ndarray
    unit: np.ndarray
    iqm: np.ndarray
    q_lower: np.ndarray
    q_upper: np.ndarray
    count: np.ndarray

    def __len__(self):
        return self.conf.size

    def targets(self, surface: str) -> np.ndarray:
        return {"upper": self.q_upper, "mean": self.iqm, "lower": self.q_lower}[surface]

    def map_targets(self, fn) -> "PerConfigStats":
        return replace(self, iqm=fn(self.iqm), q_lower=fn(self.q_lower), q_upper=fn(self.q_upper))


def aggregate(ds: LandscapeDataset, eval_kind: str, phase: int, num_configs=None,
              lower=0.025, upper=0.975) -> PerConfigStats:
    """Pool returns over seeds and episodes for every configuration of ``phase``.

    Configurations ``0 .. num_configs-1`` must all be present (default: up to
    the largest index seen).
    """
    sub = ds.select(phase=phase, kind=eval_kind)
    if len(sub) == 0:
        raise DatasetError(f"no {eval_kind} rows for phase {phase}")
    if num_configs is None:
        num_configs = int(sub.conf.max()) + 1
    order = np.argsort(sub.conf, kind="stable")
    confs, starts = np.unique(sub.conf[order], return_index=True)
    missing = sorted(set(range(num_configs)) - set(int(c) for c in confs))
    if missing:
        raise DatasetError(f"phase {phase}: no {eval_kind} rows for configurations {missing}")
    bounds = list(starts) + [len(order)]
    unit, m, lo, hi, cnt = [], [], [], [], []
    for k in range(len(confs)):
        idx = order[bounds[k]:bounds[k + 1]]
        r = sub.ret[idx]
        unit.append(sub.unit[idx[0]])
        m.append(iqm(r))
        lo.append(quantile(r, lower))
        hi.append(quantile(r, upper))
        cnt.append(r.size)
    return PerConfigStats(int(phase), confs.astype(np.int64), np.array(unit), np.array(m),
                          np.array(lo), np.array(hi), np.array(cnt, dtype=np.int64))


# ---------------------------------------------------------------- normalization

@dataclass(frozen=True)
class Affine:
    """``normalized = (value - offset) / scale``."""

    offset: float
    scale: float

    def apply(self, v):
        return (np.asarray(v, dtype=float) - self.offset) / self.scale

    def invert(self, v):
        return np.asarray(v, dtype=float) * self.scale + self.offset

    def to_json(self):
        return {"offset": self.offset, "scale": self.scale}

    @classmethod
    def from_json(cls, obj):
        return cls(float(obj["offset"]), float(obj["scale"]))


IDENTITY = Affine(0.0, 1.0)


def minmax_affine(values, allow_degenerate=False) -> Affine:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise DatasetError("cannot normalize an empty set of values")
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        if allow_degenerate:
            return Affine(lo, 1.0)
        raise DatasetError("cannot normalize: all values are equal")
    return Affine(lo, hi - lo)


def normalize_values(values):
    """Min-max map to [0, 1]; returns ``(normalized, affine)``."""
    a = minmax_affine(values)
    return a.apply(values), a


def stats_values(stats: PerConfigStats) -> np.ndarray:
    return np.concatenate([stats.q_lower, stats.iqm, stats.q_upper])


def normalize(stats_by_phase: dict, scope: str = POOLED, allow_degenerate=False):
    """Normalize per-phase stats to [0, 1].

    ``scope=POOLED`` uses one affine over every phase's IQM and band values;
    ``scope=PER_PHASE`` fits one affine per phase. Returns
    ``(normalized stats by phase, affine by phase)``.
    """
    if not stats_by_phase:
        raise DatasetError("nothing to normalize")
    if scope == POOLED:
        pooled = minmax_affine(np.concatenate([stats_values(s) for s in stats_by_phase.values()]),
                               allow_degenerate)
        affines = {p: pooled for p in stats_by_phase}
    elif scope == PER_PHASE:
        affines = {p: minmax_affine(stats_values(s), allow_degenerate)
                   for p, s in stats_by_phase.items()}
    else:
        raise DatasetError(f"unknown normalization scope {scope!r}")
    out = {p: s.map_targets(affines[p].apply) for p, s in stats_by_phase.items()}
    return out, affines
