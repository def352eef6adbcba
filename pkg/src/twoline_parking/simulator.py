"""Exact event-driven simulation of the two-line parking process on a ring.

Every unfrozen site receives arrival attempts from an independent rate-1
Poisson clock. Over ``[0, t_max]`` that is the same, in law, as drawing a
Poisson(n_unfrozen * t_max) number of attempts with i.i.d. uniform times and
i.i.d. uniform sites, then processing them in time order. Each attempt looks
up the centre's new state in :func:`core.outcome_table`.

Frozen sites never receive attempts and stay empty. With site 0 frozen the
neighbour at site 1 samples the one-sided densities ``f`` and ``R``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import FIRST, SITE_STATES, ModelVariant, check_state, outcome_table

SAMPLE_SPACING = 0.25
MIN_ONE_SIDED_SIZE = 200

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def derive_replica_seed(master_seed: int, replica_index: int) -> int:
    """SplitMix64 output number ``replica_index + 1`` of the stream seeded by ``master_seed``.

    The finaliser is a bijection of 64-bit words and the golden-ratio
    increment is odd, so distinct indices below 2**64 never collide.
    """
    if replica_index < 0:
        raise ValueError("replica_index must be nonnegative")
    z = (int(master_seed) + (int(replica_index) + 1) * _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def default_sample_times(t_max: float, spacing: float = SAMPLE_SPACING) -> tuple[float, ...]:
    n = int(math.floor(t_max / spacing + 1e-9))
    times = [k * spacing for k in range(n + 1)]
    if t_max - times[-1] > 1e-9:
        times.append(float(t_max))
    return tuple(times)


def parse_pattern(text: str) -> tuple[int, ...]:
    """``"0,1,0"`` -> ``(0, 1, 0)``."""
    parts = [p.strip() for p in str(text).split(",")]
    if not parts or any(p == "" for p in parts):
        raise ValueError(f"malformed pattern {text!r}")
    try:
        return tuple(check_state(int(p)) for p in parts)
    except ValueError as exc:
        raise ValueError(f"malformed pattern {text!r}: {exc}") from None


def pattern_name(pattern) -> str:
    return "D(" + ",".join(str(s) for s in pattern) + ")"


@dataclass
class Lattice:
    states: np.ndarray
    frozen: np.ndarray

    @classmethod
    def empty(cls, size: int, frozen_sites=()) -> "Lattice":
        frozen = np.zeros(size, dtype=bool)
        frozen[list(frozen_sites)] = True
        return cls(np.zeros(size, dtype=np.uint8), frozen)

    @property
    def size(self) -> int:
        return len(self.states)

    def invariant_violations(self) -> list[str]:
        s = self.states.astype(np.int64)
        l1 = s & 1
        l2 = (s >> 1) & 1
        left1, right1 = np.roll(l1, 1), np.roll(l1, -1)
        problems = []
        if np.any(l1 & right1):
            problems.append("adjacent first-line cars")
        if np.any(l2 & np.roll(l2, -1)):
            problems.append("adjacent second-line cars")
        if np.any(l2 & ~(l1 | left1 | right1) & 1):
            problems.append("unsupported second-line car")
        if np.any(s[self.frozen] != 0):
            problems.append("occupied frozen site")
        return problems


def _window_mask(frozen: np.ndarray, length: int) -> np.ndarray:
    # windows starting at i, covering i..i+length-1 (mod N), containing no frozen site
    hit = np.zeros(len(frozen), dtype=bool)
    for j in range(length):
        hit |= np.roll(frozen, -j)
    return ~hit


def estimate_pattern_density(lattice: Lattice, pattern) -> float:
    """Fraction of admissible ring windows that show ``pattern`` exactly."""
    pattern = tuple(check_state(s) for s in pattern)
    if not 1 <= len(pattern) <= lattice.size:
        raise ValueError("pattern length must be between 1 and the ring size")
    ok = _window_mask(lattice.frozen, len(pattern))
    if not ok.any():
        raise ValueError("no window free of frozen sites")
    match = ok.copy()
    for j, s in enumerate(pattern):
        match &= np.roll(lattice.states, -j) == s
    return match.sum() / ok.sum()


@dataclass(frozen=True)
class SimConfig:
    size: int
    t_max: float
    model: ModelVariant = ModelVariant.NO_SCREENING
    master_seed: int = 0
    replicas: int = 1
    sample_times: tuple[float, ...] | None = None
    frozen_sites: tuple[int, ...] = ()
    patterns: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "model", ModelVariant.parse(self.model))
        if int(self.size) != self.size or self.size < 3:
            raise ValueError(f"ring size must be an integer >= 3, got {self.size!r}")
        if not (self.t_max >= 0 and math.isfinite(self.t_max)):
            raise ValueError("t_max must be nonnegative and finite")
        if self.replicas < 1:
            raise ValueError("replicas must be positive")
        frozen = tuple(int(i) for i in self.frozen_sites)
        if len(set(frozen)) != len(frozen) or any(not 0 <= i < self.size for i in frozen):
            raise ValueError(f"frozen sites must be distinct indices in [0, {self.size}), got {frozen}")
        if len(frozen) == self.size:
            raise ValueError("every site is frozen; nothing can happen")
        object.__setattr__(self, "frozen_sites", frozen)
        times = default_sample_times(self.t_max) if self.sample_times is None else tuple(map(float, self.sample_times))
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("sample_times must be nondecreasing")
        if times and (times[0] < 0 or times[-1] > self.t_max):
            raise ValueError("sample_times must lie in [0, t_max]")
        object.__setattr__(self, "sample_times", times)
        patterns = tuple(tuple(check_state(s) for s in p) for p in self.patterns)
        if any(not 1 <= len(p) <= self.size for p in patterns):
            raise ValueError("pattern lengths must be between 1 and the ring size")
        object.__setattr__(self, "patterns", patterns)

    @property
    def one_sided(self) -> bool:
        return 0 in self.frozen_sites

    def observable_names(self) -> list[str]:
        names = [f"D{s}" for s in SITE_STATES]
        names += [pattern_name(p) for p in self.patterns]
        names += ["line1", "line2"]
        if self.one_sided:
            names += ["f0", "f1", "f2", "f3", "R"]
        return names


@dataclass(frozen=True)
class DensitySample:
    time: float
    site_density: tuple[float, float, float, float]
    pattern_density: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OneSidedSample:
    time: float
    f: tuple[float, float, float]
    f3: float
    r: float


@numba.njit(cache=True, nogil=True)
def _apply_attempts(states, sites, outcome, start, stop):
    n = states.shape[0]
    for k in range(start, stop):
        i = sites[k]
        left = np.int64(states[i - 1]) if i > 0 else np.int64(states[n - 1])
        right = np.int64(states[i + 1]) if i + 1 < n else np.int64(states[0])
        states[i] = outcome[16 * left + 4 * np.int64(states[i]) + right]


@numba.njit(cache=True, nogil=True)
def _count_patterns(states, pattern_flat, pattern_start, pattern_len, window_ok, out):
    n = states.shape[0]
    for p in range(pattern_len.shape[0]):
        length = pattern_len[p]
        base = pattern_start[p]
        count = 0
        for i in range(n):
            if not window_ok[p, i]:
                continue
            hit = True
            for j in range(length):
                if states[(i + j) % n] != pattern_flat[base + j]:
                    hit = False
                    break
            if hit:
                count += 1
        out[p] = count


class _Plan:
    """Per-config arrays shared by all replicas (read-only)."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.outcome = outcome_table(config.model)
        frozen = np.zeros(config.size, dtype=bool)
        frozen[list(config.frozen_sites)] = True
        self.frozen = frozen
        self.unfrozen = np.flatnonzero(~frozen).astype(np.int64)
        self.sample_times = np.array(config.sample_times, dtype=float)
        pats = config.patterns
        self.pattern_len = np.array([len(p) for p in pats], dtype=np.int64)
        self.pattern_start = np.concatenate([[0], np.cumsum(self.pattern_len)[:-1]]).astype(np.int64)
        self.pattern_flat = np.array([s for p in pats for s in p], dtype=np.uint8)
        self.window_ok = np.array([_window_mask(frozen, len(p)) for p in pats], dtype=bool).reshape(len(pats), config.size)
        self.window_total = self.window_ok.sum(axis=1)
        if np.any(self.window_total == 0):
            raise ValueError("a requested pattern has no window free of frozen sites")
        self.names = config.observable_names()


def attempt_schedule(config: SimConfig, replica_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted attempt times and sites for one replica.

    Ties in time (possible only through floating-point coincidence) are
    broken by ascending site index.
    """
    if not 0 <= replica_index < config.replicas:
        raise ValueError(f"replica_index {replica_index} outside [0, {config.replicas})")
    rng = np.random.default_rng(derive_replica_seed(config.master_seed, replica_index))
    unfrozen = np.setdiff1d(np.arange(config.size), config.frozen_sites)
    count = rng.poisson(len(unfrozen) * config.t_max)
    times = rng.uniform(0.0, config.t_max, size=count)
    sites = unfrozen[rng.integers(0, len(unfrozen), size=count)].astype(np.int64)
    order = np.lexsort((sites, times))
    return times[order], sites[order]


def _observe(plan: _Plan, states: np.ndarray, counts_buf: np.ndarray) -> np.ndarray:
    live = states[plan.unfrozen]
    site = np.bincount(live, minlength=4)[:4] / len(live)
    values = list(site)
    if len(plan.pattern_len):
        _count_patterns(states, plan.pattern_flat, plan.pattern_start, plan.pattern_len, plan.window_ok, counts_buf)
        values.extend(counts_buf / plan.window_total)
    values.append(site[1] + site[3])
    values.append(site[2] + site[3])
    if plan.config.one_sided:
        m1, m2 = int(states[1]), int(states[2 % len(states)])
        values.extend(float(m1 == s) for s in SITE_STATES)
        values.append(float(m1 == FIRST and m2 == 0))
    return np.array(values)


def _replica_values(plan: _Plan, replica_index: int) -> tuple[np.ndarray, np.ndarray]:
    config = plan.config
    times, sites = attempt_schedule(config, replica_index)
    states = np.zeros(config.size, dtype=np.uint8)
    cuts = np.searchsorted(times, plan.sample_times, side="right")
    counts_buf = np.zeros(len(plan.pattern_len), dtype=np.int64)
    rows = np.empty((len(cuts), len(plan.names)))
    done = 0
    for k, cut in enumerate(cuts):
        _apply_attempts(states, sites, plan.outcome, done, cut)
        done = cut
        rows[k] = _observe(plan, states, counts_buf)
    _apply_attempts(states, sites, plan.outcome, done, len(sites))
    return rows, states


def run_replica(config: SimConfig, replica_index: int) -> tuple[list[DensitySample], Lattice]:
    """Simulate one replica; returns a sample per ``config.sample_times`` and the final lattice."""
    plan = _Plan(config)
    rows, states = _replica_values(plan, replica_index)
    n_pat = len(config.patterns)
    samples = [
        DensitySample(
            time=t,
            site_density=tuple(float(v) for v in row[:4]),
            pattern_density={p: float(v) for p, v in zip(config.patterns, row[4 : 4 + n_pat])},
        )
        for t, row in zip(config.sample_times, rows)
    ]
    return samples, Lattice(states, plan.frozen.copy())


@dataclass(frozen=True)
class SimulationResult:
    config: SimConfig
    names: list[str]
    values: np.ndarray  # (replicas, sample times, observables)

    @property
    def times(self) -> np.ndarray:
        return np.array(self.config.sample_times)

    def replica_values(self, name: str, time_index: int) -> np.ndarray:
        return self.values[:, time_index, self.names.index(name)]

    def time_index(self, t: float, atol: float = 1e-9) -> int:
        hits = np.flatnonzero(np.abs(self.times - t) <= atol)
        if not len(hits):
            raise KeyError(f"time {t} was not sampled")
        return int(hits[0])

    def estimate(self, name: str, t: float):
        from .analysis import aggregate

        return aggregate(self.replica_values(name, self.time_index(t)))

    def summary(self) -> tuple[np.ndarray, np.ndarray]:
        """Per (time, observable) replica mean and standard error.

        With a single replica the standard error is NaN.
        """
        from .analysis import aggregate

        shape = self.values.shape[1:]
        if self.values.shape[0] < 2:
            return self.values.mean(axis=0), np.full(shape, np.nan)
        means, errs = np.empty(shape), np.empty(shape)
        for ti in range(shape[0]):
            for k in range(shape[1]):
                est = aggregate(self.values[:, ti, k])
                means[ti, k], errs[ti, k] = est.mean, est.stderr
        return means, errs


def simulate(config: SimConfig, jobs: int = 1) -> SimulationResult:
    """Run every replica; results are stored by replica index, so ``jobs`` never changes them."""
    plan = _Plan(config)
    values = np.empty((config.replicas, len(config.sample_times), len(plan.names)))

    def work(chunk):
        for idx in chunk:
            values[idx] = _replica_values(plan, idx)[0]

    if jobs <= 1:
        work(range(config.replicas))
    else:
        chunks = [range(k, config.replicas, jobs) for k in range(jobs)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(work, chunks))
    return SimulationResult(config, plan.names, values)


def run_one_sided(config: SimConfig, jobs: int = 1) -> list[OneSidedSample]:
    """Replica-averaged distribution of the site next to the frozen site 0."""
    if not config.one_sided:
        raise ValueError("one-sided runs need site 0 frozen")
    if config.size < MIN_ONE_SIDED_SIZE:
        raise ValueError(f"one-sided runs need a ring of at least {MIN_ONE_SIDED_SIZE} sites")
    result = simulate(config, jobs=jobs)
    mean = result.values.mean(axis=0)
    col = {name: i for i, name in enumerate(result.names)}
    return [
        OneSidedSample(
            time=t,
            f=(float(row[col["f0"]]), float(row[col["f1"]]), float(row[col["f2"]])),
            f3=float(row[col["f3"]]),
            r=float(row[col["R"]]),
        )
        for t, row in zip(config.sample_times, mean)
    ]


__all__ = [
    "DensitySample",
    "Lattice",
    "OneSidedSample",
    "SimConfig",
    "SimulationResult",
    "attempt_schedule",
    "default_sample_times",
    "derive_replica_seed",
    "estimate_pattern_density",
    "parse_pattern",
    "pattern_name",
    "run_one_sided",
    "run_replica",
    "simulate",
]
