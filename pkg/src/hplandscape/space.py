"""Search spaces, the unit-cube transform and scrambled Sobol sampling."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hplandscape.kernels import SOBOL_BITS, sobol_ints

LINEAR = "linear"
LOG = "log"

# Joe & Kuo (new-joe-kuo-6.21201), dimensions 2..16: (degree s, coefficient a, initial m_1..m_s).
_JOE_KUO = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
    (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)),
    (6, 13, (1, 1, 1, 15, 21, 21)),
    (6, 16, (1, 3, 1, 13, 27, 49)),
)
MAX_SOBOL_DIM = len(_JOE_KUO) + 1


class SpaceError(ValueError):
    """Invalid search-space definition or out-of-bounds configuration."""


@dataclass(frozen=True)
class HyperparameterDef:
    name: str
    low: float
    high: float
    scale: str = LINEAR

    def __post_init__(self):
        scale = str(self.scale).lower()
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "low", float(self.low))
        object.__setattr__(self, "high", float(self.high))
        if scale not in (LINEAR, LOG):
            raise SpaceError(f"{self.name}: unknown scale {self.scale!r}")
        if not (np.isfinite(self.low) and np.isfinite(self.high)):
            raise SpaceError(f"{self.name}: bounds must be finite")
        if self.low >= self.high:
            raise SpaceError(f"{self.name}: low >= high ({self.low} >= {self.high})")
        if scale == LOG and self.low <= 0:
            raise SpaceError(f"{self.name}: log scale requires low > 0")


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple[HyperparameterDef, ...]

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    def _bounds(self):
        log = np.array([d.scale == LOG for d in self.dims])
        lo = np.array([d.low for d in self.dims])
        hi = np.array([d.high for d in self.dims])
        tlo = np.where(log, np.log10(np.where(log, lo, 1.0)), lo)
        thi = np.where(log, np.log10(np.where(log, hi, 1.0)), hi)
        return log, lo, hi, tlo, thi

    def to_config(self, u):
        """Map unit-cube coordinates (``(n,)`` or ``(m, n)``) to raw values."""
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.n:
            raise SpaceError(f"expected {self.n} coordinates, got {u.shape[-1]}")
        if np.any(u < 0) or np.any(u > 1):
            raise SpaceError("unit coordinates must lie in [0, 1]")
        log, lo, hi, tlo, thi = self._bounds()
        t = tlo + u * (thi - tlo)
        c = np.where(log, 10.0 ** t, t)
        # pin the endpoints exactly
        c = np.where(u == 0, lo, np.where(u == 1, hi, c))
        return c

    def to_unit(self, c, rtol=1e-12):
        """Inverse of :meth:`to_config`."""
        c = np.asarray(c, dtype=float)
        if c.shape[-1] != self.n:
            raise SpaceError(f"expected {self.n} values, got {c.shape[-1]}")
        log, lo, hi, tlo, thi = self._bounds()
        slack = rtol * np.maximum(np.abs(lo), np.abs(hi))
        if np.any(c < lo - slack) or np.any(c > hi + slack):
            raise SpaceError("configuration value outside its bounds")
        t = np.where(log, np.log10(np.where(log, np.maximum(c, lo), 1.0)), c)
        u = (t - tlo) / (thi - tlo)
        return np.clip(u, 0.0, 1.0)

    def to_json(self) -> dict:
        return {"dims": [{"name": d.name, "low": d.low, "high": d.high, "scale": d.scale}
                         for d in self.dims]}


def build_space(defs) -> SearchSpace:
    """Validate hyperparameter definitions into a :class:`SearchSpace`.

    ``defs`` may hold :class:`HyperparameterDef` objects, mappings with
    ``name/low/high/scale`` keys, or ``(name, low, high, scale)`` tuples.
    """
    defs = list(defs)
    if not defs:
        raise SpaceError("a search space needs at least one hyperparameter")
    out = []
    for d in defs:
        if isinstance(d, HyperparameterDef):
            out.append(d)
        elif isinstance(d, dict):
            try:
                out.append(HyperparameterDef(d["name"], d["low"], d["high"], d.get("scale", LINEAR)))
            except KeyError as e:
                raise SpaceError(f"hyperparameter entry missing key {e}") from None
        else:
            out.append(HyperparameterDef(*d))
    names = [d.name for d in out]
    dup = {x for x in names if names.count(x) > 1}
    if dup:
        raise SpaceError(f"duplicate hyperparameter names: {sorted(dup)}")
    return SearchSpace(tuple(out))


def load_space(path) -> SearchSpace:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise SpaceError(f"{path}: invalid JSON ({e})") from None
    return space_from_json(obj)


def space_from_json(obj) -> SearchSpace:
    if not isinstance(obj, dict) or "dims" not in obj:
        raise SpaceError('space definition must be an object with a "dims" list')
    return build_space(obj["dims"])


def save_space(space: SearchSpace, path) -> None:
    Path(path).write_text(json.dumps(space.to_json(), indent=2) + "\n")


def unit_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise SpaceError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def direction_numbers(n: int) -> np.ndarray:
    """Left-aligned Sobol direction integers, shape ``(n, SOBOL_BITS)``."""
    if n < 1:
        raise SpaceError("dimension must be >= 1")
    if n > MAX_SOBOL_DIM:
        raise SpaceError(f"Sobol sampling supports at most {MAX_SOBOL_DIM} dimensions, got {n}")
    V = np.zeros((n, SOBOL_BITS), dtype=np.uint64)
    for i in range(SOBOL_BITS):
        V[0, i] = 1 << (SOBOL_BITS - 1 - i)
    for d in range(1, n):
        s, a, m0 = _JOE_KUO[d - 1]
        m = list(m0)
        for i in range(s, SOBOL_BITS):
            v = m[i - s] ^ (m[i - s] << s)
            for k in range(1, s):
                if (a >> (s - 1 - k)) & 1:
                    v ^= m[i - k] << k
            m.append(v)
        for i in range(SOBOL_BITS):
            V[d, i] = m[i] << (SOBOL_BITS - 1 - i)
    return V


def sobol_points(n: int, count: int, seed=None, skip: int = 1) -> np.ndarray:
    """Sobol points in [0, 1)^n, shape ``(count, n)``.

    ``seed=None`` gives the unscrambled sequence; otherwise every dimension
    gets a random digital (XOR) shift drawn from ``seed``. XOR shifts permute
    dyadic intervals, so net balance is kept. ``skip=1`` drops the all-zeros
    first point of the raw sequence.
    """
    if count < 1:
        raise SpaceError("count must be >= 1")
    V = direction_numbers(n)
    ints = sobol_ints(V, skip, count)
    if seed is not None:
        rng = np.random.default_rng(seed)
        shift = rng.integers(0, 2 ** SOBOL_BITS, size=n, dtype=np.uint64)
        ints = ints ^ shift
    return ints.astype(np.float64) / float(2 ** SOBOL_BITS)


def sobol_sample(space: SearchSpace, count: int, seed=0, scramble: bool = True) -> np.ndarray:
    """``count`` scrambled Sobol points for ``space`` as unit vectors."""
    if scramble and seed is None:
        raise SpaceError("scrambled sampling needs a seed")
    return sobol_points(space.n, count, seed=seed if scramble else None)
