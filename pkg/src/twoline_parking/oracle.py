"""Exact law of the jump process on a small ring via the forward equation.

Configurations of an ``N``-ring are indexed by their base-4 code with site
``k`` carrying weight ``4**k``. The generator is assembled from the same
outcome table the simulator uses, then the distribution is pushed forward
with fixed-step RK4 from the point mass on the empty ring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from .core import ModelVariant, check_state, outcome_table

MIN_SIZE = 3
MAX_SIZE = 8
MAX_STEP = 1e-3


@dataclass(frozen=True)
class GeneratorMatrix:
    model: ModelVariant
    size: int
    rates: sp.csr_matrix  # rates[a, b] = jump rate a -> b, diagonal = -exit rate

    @property
    def n_states(self) -> int:
        return self.rates.shape[0]

    def exit_rates(self) -> np.ndarray:
        return -self.rates.diagonal()

    def jammed(self) -> np.ndarray:
        """Boolean mask of configurations with no enabled transition."""
        return self.exit_rates() == 0

    def reachable(self) -> np.ndarray:
        """Sorted indices of configurations reachable from the empty ring."""
        return np.sort(breadth_first_order(self.rates, 0, directed=True, return_predecessors=False))

    def forward(self, states: np.ndarray | None = None) -> sp.csr_matrix:
        """Transpose used in ``dp/dt = Q^T p``, optionally restricted to ``states``."""
        q = self.rates if states is None else self.rates[states][:, states]
        return q.T.tocsr()


@dataclass(frozen=True)
class FullDistribution:
    size: int
    probs: np.ndarray
    time: float = 0.0


def _digits(size: int) -> np.ndarray:
    codes = np.arange(4**size, dtype=np.int64)
    return np.stack([(codes // 4**k) % 4 for k in range(size)], axis=1)


def encode(config) -> int:
    """Base-4 index of a configuration given as site states ``m_0 .. m_{N-1}``."""
    return sum(check_state(s) * 4**k for k, s in enumerate(config))


def decode(index: int, size: int) -> tuple[int, ...]:
    return tuple((index // 4**k) % 4 for k in range(size))


def build_generator(model: ModelVariant | str, size: int) -> GeneratorMatrix:
    model = ModelVariant.parse(model)
    if int(size) != size or not MIN_SIZE <= size <= MAX_SIZE:
        raise ValueError(f"oracle ring size must be in [{MIN_SIZE}, {MAX_SIZE}], got {size!r}")
    table = outcome_table(model)
    digits = _digits(size)
    codes = np.arange(4**size, dtype=np.int64)
    rows, cols = [], []
    for k in range(size):
        left = digits[:, (k - 1) % size]
        center = digits[:, k]
        right = digits[:, (k + 1) % size]
        new = table[16 * left + 4 * center + right].astype(np.int64)
        moved = new != center
        rows.append(codes[moved])
        cols.append(codes[moved] + (new[moved] - center[moved]) * 4**k)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    n = 4**size
    off = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    exit_rate = np.asarray(off.sum(axis=1)).ravel()
    rates = (off - sp.diags(exit_rate)).tocsr()
    rates.sort_indices()
    return GeneratorMatrix(model, int(size), rates)


def initial_distribution(size: int) -> FullDistribution:
    probs = np.zeros(4**size)
    probs[0] = 1.0
    return FullDistribution(size, probs, 0.0)


def _advance(forward: sp.csr_matrix, p: np.ndarray, duration: float) -> np.ndarray:
    if duration <= 0:
        return p
    n = math.ceil(duration / MAX_STEP - 1e-9)
    h = duration / n
    for _ in range(n):
        k1 = forward @ p
        k2 = forward @ (p + 0.5 * h * k1)
        k3 = forward @ (p + 0.5 * h * k2)
        k4 = forward @ (p + h * k3)
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return p


def evolve_many(gen: GeneratorMatrix, times) -> list[FullDistribution]:
    """Distributions at each of the nondecreasing ``times``, integrated piecewise."""
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be nonnegative and nondecreasing")
    # unreachable configurations carry zero mass forever; the empty ring is index 0 of both
    support = gen.reachable()
    forward = gen.forward(support)
    p = np.zeros(len(support))
    p[0] = 1.0
    now = 0.0
    out = []
    for t in times:
        p = _advance(forward, p, t - now)
        now = t
        full = np.zeros(gen.n_states)
        full[support] = p
        out.append(FullDistribution(gen.size, full, t))
    return out


def evolve(gen: GeneratorMatrix, t: float) -> FullDistribution:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return evolve_many(gen, [t])[0]


def marginals(dist: FullDistribution, pattern, offset: int = 0) -> float:
    """Probability that sites ``offset, offset+1, ...`` (mod N) show ``pattern``."""
    pattern = tuple(check_state(s) for s in pattern)
    if not 1 <= len(pattern) <= dist.size:
        raise ValueError("pattern length must be between 1 and the ring size")
    digits = _digits(dist.size)
    hit = np.ones(len(dist.probs), dtype=bool)
    for j, s in enumerate(pattern):
        hit &= digits[:, (offset + j) % dist.size] == s
    return float(dist.probs[hit].sum())


def site_densities(dist: FullDistribution) -> np.ndarray:
    return np.array([marginals(dist, (s,)) for s in range(4)])
