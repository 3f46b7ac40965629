"""Greedy multi-phase data collection against a pluggable trainable."""
from __future__ import annotations

import json
import os
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from hplandscape.dataset import FINAL, LANDSCAPE, LandscapeDataset, concat, iqm
from hplandscape.space import SearchSpace, sobol_sample, space_from_json, load_space

FINAL_FRACTIONS = (0.95, 0.975, 1.0)


class PlanError(ValueError):
    pass


class CollectError(RuntimeError):
    pass


class Trainable(Protocol):
    def initial_state(self) -> bytes: ...

    def train(self, state: bytes, config, seed: int, from_step: int, to_step: int) -> bytes: ...

    def evaluate(self, state: bytes, eval_seed: int, episodes: int) -> list: ...


def threads_from_env(default=1) -> int:
    raw = os.environ.get("LANDSCAPE_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


# ---------------------------------------------------------------- plan

@dataclass
class PhasePlan:
    space: SearchSpace
    num_configs: int
    seeds: tuple
    phase_steps: tuple
    t_final: int
    eval_episodes: int = 10
    sampler_seed: int = 0
    eval_seed: int = 1

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        self.phase_steps = tuple(int(t) for t in self.phase_steps)
        self.t_final = int(self.t_final)
        self.validate()

    @property
    def num_phases(self) -> int:
        return len(self.phase_steps)

    def window(self, i):
        """Step window ``(start, end)`` of phase ``i`` (1-based)."""
        return (0 if i == 1 else self.phase_steps[i - 2]), self.phase_steps[i - 1]

    def final_checkpoints(self):
        return [int(np.floor(f * self.t_final)) for f in FINAL_FRACTIONS]

    def validate(self):
        if self.num_configs < 1:
            raise PlanError("num_configs must be >= 1")
        if self.eval_episodes < 1:
            raise PlanError("eval_episodes must be >= 1")
        if not self.seeds:
            raise PlanError("at least one training seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise PlanError("training seeds must be pairwise distinct")
        if any(s < 0 for s in self.seeds + (self.sampler_seed, self.eval_seed)):
            raise PlanError("seeds must be non-negative integers")
        if self.sampler_seed in self.seeds or self.eval_seed in self.seeds:
            raise PlanError("sampler and evaluation seeds must differ from the training seeds")
        if self.sampler_seed == self.eval_seed:
            raise PlanError("sampler and evaluation seeds must differ")
        t = self.phase_steps
        if not t:
            raise PlanError("at least one phase is required")
        if t[0] <= 0 or any(b <= a for a, b in zip(t, t[1:])):
            raise PlanError("phase_steps must be positive and strictly increasing")
        if t[-1] != self.t_final:
            raise PlanError("the last phase step must equal t_final")
        last_start = self.window(self.num_phases)[0]
        if self.final_checkpoints()[0] < last_start:
            raise PlanError("the 0.95*t_final checkpoint precedes the start of the last phase")

    def to_json(self):
        return {"num_configs": self.num_configs, "seeds": list(self.seeds),
                "phase_steps": list(self.phase_steps), "t_final": self.t_final,
                "eval_episodes": self.eval_episodes, "sampler_seed": self.sampler_seed,
                "eval_seed": self.eval_seed}


# ---------------------------------------------------------------- surrogate

@dataclass(frozen=True)
class Bump:
    center: tuple
    height: float = 1.0
    width: float = 0.15


@dataclass
class SurrogateSpec:
    """Ground truth for the synthetic trainable.

    ``phases[i]`` lists the Gaussian bumps of phase window ``i``; the windows
    end at ``phase_steps``. Inside the box ``bimodal_low .. bimodal_high``
    each seed's returns are offset by ``+delta`` (even seed) or ``-delta``
    (odd seed).
    """

    space: SearchSpace
    phase_steps: tuple
    phases: list
    delta: float = 0.0
    sigma: float = 0.0
    bimodal_low: tuple = None
    bimodal_high: tuple = None
    baseline: float = 0.0

    def __post_init__(self):
        n = self.space.n
        self.phase_steps = tuple(int(t) for t in self.phase_steps)
        if len(self.phases) != len(self.phase_steps):
            raise PlanError(f"surrogate defines {len(self.phases)} phases, plan has {len(self.phase_steps)}")
        for bumps in self.phases:
            for b in bumps:
                if len(b.center) != n:
                    raise PlanError("bump center dimension does not match the space")
                if b.width <= 0:
                    raise PlanError("bump width must be positive")
        if self.sigma < 0 or self.delta < 0:
            raise PlanError("sigma and delta must be non-negative")
        if (self.bimodal_low is None) != (self.bimodal_high is None):
            raise PlanError("bimodal region needs both low and high corners")
        if self.bimodal_low is not None and (len(self.bimodal_low) != n or len(self.bimodal_high) != n):
            raise PlanError("bimodal region dimension does not match the space")

    def mean_fn(self, phase0, u):
        """Ground-truth mean of phase window ``phase0`` (0-based) at unit coords ``u``."""
        u = np.asarray(u, dtype=float)
        v = np.full(u.shape[:-1], self.baseline, dtype=float)
        for b in self.phases[phase0]:
            d2 = np.sum((u - np.asarray(b.center)) ** 2, axis=-1)
            v = v + b.height * np.exp(-0.5 * d2 / b.width ** 2)
        return v

    def in_bimodal(self, u):
        if self.bimodal_low is None:
            return False
        u = np.asarray(u)
        return bool(np.all(u >= np.asarray(self.bimodal_low)) and np.all(u <= np.asarray(self.bimodal_high)))

    def phase_of_step(self, step):
        for j, t in enumerate(self.phase_steps):
            if step <= t:
                return j
        return len(self.phase_steps) - 1

    @classmethod
    def from_json(cls, obj, space, phase_steps):
        try:
            phases = [[Bump(tuple(b["center"]), float(b.get("height", 1.0)), float(b.get("width", 0.15)))
                       for b in ph] for ph in obj["phases"]]
        except (KeyError, TypeError) as e:
            raise PlanError(f"malformed surrogate spec: {e}") from None
        region = obj.get("bimodal_region")
        low = tuple(region["low"]) if region else None
        high = tuple(region["high"]) if region else None
        return cls(space, tuple(phase_steps), phases, float(obj.get("delta", 0.0)),
                   float(obj.get("sigma", 0.0)), low, high, float(obj.get("baseline", 0.0)))

    def to_json(self):
        out = {"phases": [[{"center": list(b.center), "height": b.height, "width": b.width}
                           for b in ph] for ph in self.phases],
               "delta": self.delta, "sigma": self.sigma, "baseline": self.baseline}
        if self.bimodal_low is not None:
            out["bimodal_region"] = {"low": list(self.bimodal_low), "high": list(self.bimodal_high)}
        return out


_HEAD = struct.Struct("<dqqq")


def pack_state(skill, step, seed, u):
    u = np.asarray(u, dtype="<f8").ravel()
    return _HEAD.pack(float(skill), int(step), int(seed), u.size) + u.tobytes()


def unpack_state(blob):
    skill, step, seed, n = _HEAD.unpack_from(blob)
    u = np.frombuffer(blob, dtype="<f8", count=n, offset=_HEAD.size)
    return skill, step, seed, u


class SurrogateTrainable:
    """Deterministic stand-in learner whose state is a scalar skill.

    Training over a step window adds the phase means weighted by the
    fraction of each phase window covered, so splitting a window never
    changes the result. Evaluation returns skill plus the current phase mean,
    the seed offset and Gaussian noise.
    """

    def __init__(self, spec: SurrogateSpec):
        self.spec = spec

    def initial_state(self):
        return pack_state(0.0, 0, -1, [])

    def train(self, state, config, seed, from_step, to_step):
        skill, step, _, _ = unpack_state(state)
        if step != from_step:
            raise CollectError(f"state is at step {step}, training requested from {from_step}")
        if to_step < from_step:
            raise CollectError("cannot train backwards")
        u = self.spec.space.to_unit(np.asarray(config, dtype=float))
        starts = (0,) + self.spec.phase_steps[:-1]
        for j, (a, b) in enumerate(zip(starts, self.spec.phase_steps)):
            overlap = min(b, to_step) - max(a, from_step)
            if overlap > 0:
                skill += float(self.spec.mean_fn(j, u)) * overlap / (b - a)
        return pack_state(skill, to_step, seed, u)

    def evaluate(self, state, eval_seed, episodes):
        skill, step, seed, u = unpack_state(state)
        sp = self.spec
        mean = skill + float(sp.mean_fn(sp.phase_of_step(step), u)) if u.size else skill + sp.baseline
        if u.size and sp.in_bimodal(u):
            mean += sp.delta if seed % 2 == 0 else -sp.delta
        key = [int(eval_seed), int(seed) + 1, int(step), zlib.crc32(u.tobytes())]
        rng = np.random.default_rng(key)
        noise = rng.normal(0.0, sp.sigma, size=episodes) if sp.sigma > 0 else np.zeros(episodes)
        return list(mean + noise)


def surrogate_trainable(spec: SurrogateSpec) -> SurrogateTrainable:
    return SurrogateTrainable(spec)


# ---------------------------------------------------------------- snapshots

class SnapshotStore:
    """Snapshots keyed by ``(phase, conf, seed)``; mirrored to ``directory``
    as ``p<phase>_c<conf>_s<seed>.snap`` when one is given."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory is not None else None
        self._blobs = {}
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def filename(phase, conf, seed):
        return f"p{phase}_c{conf}_s{seed}.snap"

    def put(self, phase, conf, seed, blob):
        key = (int(phase), int(conf), int(seed))
        self._blobs[key] = bytes(blob)
        if self.directory is not None:
            (self.directory / self.filename(*key)).write_bytes(blob)

    def get(self, phase, conf, seed):
        key = (int(phase), int(conf), int(seed))
        if key not in self._blobs and self.directory is not None:
            path = self.directory / self.filename(*key)
            if path.exists():
                self._blobs[key] = path.read_bytes()
        try:
            return self._blobs[key]
        except KeyError:
            raise CollectError(f"no snapshot for phase {phase}, conf {conf}, seed {seed}") from None

    def keys(self):
        return sorted(self._blobs)

    def __len__(self):
        return len(self._blobs)


# ---------------------------------------------------------------- protocol

def _rows(space, phase, conf, seed, unit, hp, kind, step, returns):
    e = len(returns)
    return LandscapeDataset(space, np.full(e, phase), np.full(e, step), np.full(e, conf),
                            np.full(e, seed), np.arange(e), np.full(e, kind, dtype=object),
                            np.tile(unit, (e, 1)), np.tile(hp, (e, 1)), np.asarray(returns, float),
                            check=False)


def _map_pairs(fn, pairs, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, pairs))
    return [fn(p) for p in pairs]


def sample_configs(plan: PhasePlan):
    """Unit and raw coordinates of the configurations shared by every phase."""
    unit = sobol_sample(plan.space, plan.num_configs, seed=plan.sampler_seed)
    return unit, plan.space.to_config(unit)


def run_phase(plan, i, trainable, incoming, unit=None, store=None, threads=1):
    """Train every (configuration, seed) over phase ``i`` from ``incoming``.

    Returns ``(landscape dataset, {(conf, seed): snapshot})``.
    """
    if not 1 <= i <= plan.num_phases:
        raise PlanError(f"phase {i} outside 1..{plan.num_phases}")
    if unit is None:
        unit, _ = sample_configs(plan)
    hp = plan.space.to_config(unit)
    start, end = plan.window(i)
    pairs = [(c, s) for c in range(plan.num_configs) for s in plan.seeds]

    def work(pair):
        c, s = pair
        try:
            state = trainable.train(incoming, hp[c], s, start, end)
            ret = trainable.evaluate(state, plan.eval_seed, plan.eval_episodes)
        except Exception as e:
            raise CollectError(f"phase {i}, conf {c}, seed {s}: {e}") from e
        if len(ret) != plan.eval_episodes or not np.all(np.isfinite(ret)):
            raise CollectError(f"phase {i}, conf {c}, seed {s}: invalid evaluation returns")
        return state, ret

    results = _map_pairs(work, pairs, threads)
    snaps, parts = {}, []
    for (c, s), (state, ret) in zip(pairs, results):
        snaps[(c, s)] = state
        if store is not None:
            store.put(i, c, s, state)
        parts.append(_rows(plan.space, i, c, s, unit[c], hp[c], LANDSCAPE, end, ret))
    return concat(parts), snaps


def evaluate_final(plan, i, trainable, snapshots, incoming, unit=None, threads=1):
    """Final-performance records of phase ``i``'s snapshots.

    Each snapshot is trained on to every checkpoint in ``final_checkpoints``;
    checkpoints that precede the snapshot's own step are reached by
    retraining from ``incoming`` (the phase's starting state).
    """
    if unit is None:
        unit, _ = sample_configs(plan)
    hp = plan.space.to_config(unit)
    start, end = plan.window(i)
    pairs = [(c, s) for c in range(plan.num_configs) for s in plan.seeds]

    def work(pair):
        c, s = pair
        out = []
        try:
            state, cur = snapshots[(c, s)], end
            for cp in plan.final_checkpoints():
                if cp < end:
                    st = trainable.train(incoming, hp[c], s, start, cp)
                else:
                    if cp > cur:
                        state = trainable.train(state, hp[c], s, cur, cp)
                        cur = cp
                    st = state
                out.append((cp, trainable.evaluate(st, plan.eval_seed, plan.eval_episodes)))
        except KeyError:
            raise CollectError(f"phase {i}: missing snapshot for conf {c}, seed {s}") from None
        except Exception as e:
            raise CollectError(f"phase {i}, conf {c}, seed {s} (final evaluation): {e}") from e
        return out

    results = _map_pairs(work, pairs, threads)
    parts = []
    for (c, s), per_cp in zip(pairs, results):
        for cp, ret in per_cp:
            parts.append(_rows(plan.space, i, c, s, unit[c], hp[c], FINAL, cp, ret))
    return concat(parts)


def final_fitness(final: LandscapeDataset) -> dict:
    """Mean over all pooled final-checkpoint episodes, per (conf, seed)."""
    out = {}
    for c, s in sorted(set(zip(final.conf.tolist(), final.seed.tolist()))):
        m = (final.conf == c) & (final.seed == s)
        out[(c, s)] = float(np.mean(final.ret[m]))
    return out


def select_best(final: LandscapeDataset, num_configs=None, seeds=None):
    """Configuration with the highest pooled IQM, then its best seed by IQM.

    Ties go to the lowest configuration index, then the earliest seed in
    ``seeds`` (default: ascending seed values).
    """
    if len(final) == 0:
        raise CollectError("no final records to select from")
    confs = sorted(set(final.conf.tolist()))
    seeds = list(seeds) if seeds is not None else sorted(set(final.seed.tolist()))
    if num_configs is not None:
        missing = sorted(set(range(num_configs)) - set(confs))
        if missing:
            raise CollectError(f"final records missing for configurations {missing}")
        confs = list(range(num_configs))
    for c in confs:
        have = set(final.seed[final.conf == c].tolist())
        lost = [s for s in seeds if s not in have]
        if lost:
            raise CollectError(f"final records missing for configuration {c}, seeds {lost}")
    conf_scores = [iqm(final.ret[final.conf == c]) for c in confs]
    best_c = confs[int(np.argmax(conf_scores))]
    in_c = final.conf == best_c
    seed_scores = [iqm(final.ret[in_c & (final.seed == s)]) for s in seeds]
    return best_c, seeds[int(np.argmax(seed_scores))]


@dataclass
class RunArchive:
    plan: PhasePlan
    unit: np.ndarray
    landscape: LandscapeDataset
    final: LandscapeDataset
    chosen: list = field(default_factory=list)  # per phase (conf, seed)
    incoming: list = field(default_factory=list)  # per phase: snapshot key used, None for phase 1
    snapshots: SnapshotStore = None


def run_pipeline(plan: PhasePlan, trainable, store: SnapshotStore = None, threads=None) -> RunArchive:
    """Run all phases; each phase starts from the best snapshot of the previous one."""
    threads = threads_from_env() if threads is None else threads
    store = store if store is not None else SnapshotStore()
    unit, _ = sample_configs(plan)
    incoming, incoming_key = trainable.initial_state(), None
    lands, finals, chosen, inc = [], [], [], []
    for i in range(1, plan.num_phases + 1):
        land, snaps = run_phase(plan, i, trainable, incoming, unit, store, threads)
        fin = evaluate_final(plan, i, trainable, snaps, incoming, unit, threads)
        best = select_best(fin, plan.num_configs, plan.seeds)
        lands.append(land)
        finals.append(fin)
        chosen.append(best)
        inc.append(incoming_key)
        incoming_key = (i,) + best
        incoming = store.get(*incoming_key)
    return RunArchive(plan, unit, concat(lands), concat(finals), chosen, inc, store)


# ---------------------------------------------------------------- plan files

def plan_from_json(obj, base_dir="."):
    """Build ``(PhasePlan, SurrogateSpec or None)`` from a plan-file object."""
    if not isinstance(obj, dict):
        raise PlanError("plan file must hold a JSON object")
    sp = obj.get("space")
    if sp is None:
        raise PlanError('plan file needs a "space" entry')
    if isinstance(sp, str):
        path = Path(base_dir) / sp
        if not path.exists():
            raise PlanError(f"space file not found: {path}")
        space = load_space(path)
    else:
        space = space_from_json(sp)
    try:
        plan = PhasePlan(space, int(obj["num_configs"]), tuple(obj["seeds"]),
                         tuple(obj["phase_steps"]), int(obj["t_final"]),
                         int(obj.get("eval_episodes", 10)), int(obj["sampler_seed"]),
                         int(obj["eval_seed"]))
    except KeyError as e:
        raise PlanError(f"plan file missing key {e}") from None
    sur = obj.get("surrogate")
    spec = SurrogateSpec.from_json(sur, space, plan.phase_steps) if sur is not None else None
    return plan, spec


def load_plan(path):
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise PlanError(f"{path}: invalid JSON ({e})") from None
    return plan_from_json(obj, path.parent)
