"""Closed nine-dimensional ODE systems for the two-line parking densities.

State vector, in order::

    d0, d1, d2, d3   single-site densities P(m_0 = s)
    f0, f1, f2       one-sided densities P(m_1 = s | no arrival at 0)
    r                P(m_1 = 1, m_2 = 0 | no arrival at 0)
    d010             pattern density P(m_-1, m_0, m_1 = 0, 1, 0)

The screening variant is the same right-hand side with every term that lets
a car pass over a second-line car into a first-line hole switched off.
Integration is classical fixed-step RK4 so trajectories are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import ModelVariant

FIRST_LINE_LIMIT = (1.0 - math.exp(-2.0)) / 2.0
"""Exact t -> infinity first-line density of the single-line model."""

DEFAULT_STEP = 1e-3
DEFAULT_T_MAX = 30.0
MIN_LIMIT_HORIZON = 20.0
MAX_RESIDUAL_DRIFT = 1e-4

STATE_FIELDS = ("d0", "d1", "d2", "d3", "f0", "f1", "f2", "r", "d010")


class OdeState(NamedTuple):
    d0: float
    d1: float
    d2: float
    d3: float
    f0: float
    f1: float
    f2: float
    r: float
    d010: float

    @property
    def line1(self) -> float:
        return self.d1 + self.d3

    @property
    def line2(self) -> float:
        return self.d2 + self.d3

    @property
    def f3(self) -> float:
        return 1.0 - self.f0 - self.f1 - self.f2


INITIAL_STATE = OdeState(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0)


def _jump_weight(model: ModelVariant) -> float:
    # 1 where a car may reach the first line past a second-line car, else 0
    return 1.0 if model is ModelVariant.NO_SCREENING else 0.0


def _derivative(jump: float, t: float, y) -> tuple:
    d0, d1, d2, d3, f0, f1, f2, r, d010 = y
    e = math.exp(-t)
    te2 = t * e * e

    first_gain = (f0 + jump * f2) ** 2 * e
    second_gain = (2.0 * f0 * f1 + f1 * f1) * e
    return (
        -first_gain - second_gain,
        first_gain - d010,
        second_gain,
        d010,
        -f0 * e - f1 * e - jump * f2 * e,
        f0 * e + jump * f2 * e - r,
        f1 * e,
        f0 * (e - te2) - f1 * te2 - r,
        f0 * f0 * e - d010 - 2.0 * r * f0 * e - 2.0 * r * f1 * e,
    )


def rhs(model: ModelVariant | str, t: float, y) -> np.ndarray:
    """Time derivative of the nine-component state at time ``t``."""
    jump = _jump_weight(ModelVariant.parse(model))
    return np.array(_derivative(jump, float(t), [float(v) for v in y]))


@dataclass(frozen=True)
class OdeSpec:
    model: ModelVariant = ModelVariant.NO_SCREENING
    t_max: float = DEFAULT_T_MAX
    step: float = DEFAULT_STEP
    record_stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "model", ModelVariant.parse(self.model))
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"step must be positive and finite, got {self.step!r}")
        if not (self.t_max >= 0 and math.isfinite(self.t_max)):
            raise ValueError(f"t_max must be nonnegative and finite, got {self.t_max!r}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError(f"record_stride must be a positive integer, got {self.record_stride!r}")

    @property
    def n_steps(self) -> int:
        n = round(self.t_max / self.step)
        if abs(n * self.step - self.t_max) > 1e-9 * max(1.0, self.t_max):
            raise ValueError(f"t_max={self.t_max} is not a whole number of steps of {self.step}")
        return int(n)


@dataclass(frozen=True)
class Trajectory:
    model: ModelVariant
    times: np.ndarray
    states: np.ndarray  # shape (len(times), 9)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> OdeState:
        return OdeState(*(float(v) for v in self.states[i]))

    def column(self, name: str) -> np.ndarray:
        return self.states[:, STATE_FIELDS.index(name)]

    def __getattr__(self, name):
        if name in STATE_FIELDS:
            return self.column(name)
        raise AttributeError(name)

    @property
    def line1(self) -> np.ndarray:
        return self.column("d1") + self.column("d3")

    @property
    def line2(self) -> np.ndarray:
        return self.column("d2") + self.column("d3")

    @property
    def f3(self) -> np.ndarray:
        return 1.0 - self.column("f0") - self.column("f1") - self.column("f2")

    def at(self, t: float, atol: float = 1e-9) -> OdeState:
        """State at a recorded time ``t`` (no interpolation)."""
        i = int(np.searchsorted(self.times, t - atol))
        if i >= len(self.times) or abs(self.times[i] - t) > atol:
            raise KeyError(f"time {t} is not a recorded point of the trajectory")
        return self.state(i)


def _rk4_step(jump, t, y, h):
    half = 0.5 * h
    k1 = _derivative(jump, t, y)
    k2 = _derivative(jump, t + half, [a + half * b for a, b in zip(y, k1)])
    k3 = _derivative(jump, t + half, [a + half * b for a, b in zip(y, k2)])
    k4 = _derivative(jump, t + h, [a + h * b for a, b in zip(y, k3)])
    sixth = h / 6.0
    return [
        a + sixth * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
    ]


def integrate(spec: OdeSpec) -> Trajectory:
    """Integrate from the vacuum initial condition with fixed-step RK4.

    Times ``k * step`` are recorded every ``record_stride`` steps; the final
    time is always recorded.
    """
    n = spec.n_steps
    h = spec.step
    stride = int(spec.record_stride)
    jump = _jump_weight(spec.model)
    y = list(INITIAL_STATE)
    times = [0.0]
    states = [y]
    for k in range(n):
        y = _rk4_step(jump, k * h, y, h)
        if (k + 1) % stride == 0 or k + 1 == n:
            if not all(map(math.isfinite, y)):
                raise FloatingPointError(f"non-finite ODE state at t={(k + 1) * h}")
            times.append((k + 1) * h)
            states.append(y)
    return Trajectory(spec.model, np.array(times), np.array(states))


def closed_form_fsum(t: float) -> float:
    """f0 + f2 of the no-screening model: ``exp(e^{-t} - 1)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return math.exp(math.exp(-t) - 1.0)


def isolated_single_car(t: float) -> float:
    """P(m_1 = 1) when both neighbours of site 1 never receive cars: ``t e^{-t}``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return t * math.exp(-t)


@dataclass(frozen=True)
class LimitSummary:
    line1: float
    line2: float
    increase_factor: float
    residual_drift: float
    t_max: float

    def as_dict(self) -> dict:
        return {
            "line1": self.line1,
            "line2": self.line2,
            "increase_factor": self.increase_factor,
            "residual_drift": self.residual_drift,
            "t_max": self.t_max,
        }


def residual_drift(model: ModelVariant | str, t: float, state) -> float:
    return float(np.max(np.abs(rhs(model, t, state))))


def extract_limits(trajectory: Trajectory, min_horizon: float = MIN_LIMIT_HORIZON) -> LimitSummary:
    """Endpoint line densities as stand-ins for the jamming limits.

    Raises ``ValueError`` if the trajectory stops before ``min_horizon`` or
    the endpoint is visibly not stationary (max-norm drift above 1e-4).
    """
    t_end = float(trajectory.times[-1])
    if t_end < min_horizon:
        raise ValueError(f"trajectory ends at t={t_end}; limits need t_max >= {min_horizon}")
    end = trajectory.state(-1)
    drift = residual_drift(trajectory.model, t_end, end)
    if drift > MAX_RESIDUAL_DRIFT:
        raise ValueError(f"residual drift {drift:.3g} at t={t_end} exceeds {MAX_RESIDUAL_DRIFT}")
    return LimitSummary(end.line1, end.line2, end.line2 / end.line1, drift, t_end)


def centered_difference(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Centered first derivative at interior points ``times[1:-1]``."""
    return (values[2:] - values[:-2]) / (times[2:] - times[:-2])
