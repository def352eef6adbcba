"""Site states, model variants and the transition-rate table.

A site carries a joint occupation code ``m`` in ``{0, 1, 2, 3}``: bit 0 is
the first line, bit 1 the second line. Every transition of the jump process
changes the code of a single site, at rate 0 or 1, as a function of the
site's own code and those of its two nearest neighbours.

The table is enumerated once at import time over all
``2 models x 4 targets x 64 triples`` and every query is a lookup. The
simulator and the exact oracle both read from :data:`OUTCOME_TABLE`, so the
two can never disagree on the dynamics.
"""

from __future__ import annotations

import enum
import itertools
from typing import NamedTuple

import numpy as np

EMPTY, FIRST, SECOND, BOTH = 0, 1, 2, 3
SITE_STATES = (EMPTY, FIRST, SECOND, BOTH)


class ModelVariant(enum.Enum):
    NO_SCREENING = "noscreening"
    SCREENING = "screening"

    @classmethod
    def parse(cls, value: "ModelVariant | str") -> "ModelVariant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown model variant {value!r}; expected 'noscreening' or 'screening'")


class TransitionKind(enum.IntEnum):
    NONE = 0
    FIRST_LINE = 1  # 0 -> 1
    SECOND_LINE_FROM_EMPTY = 2  # 0 -> 2
    SECOND_LINE_ON_TOP = 3  # 1 -> 3


class Triple(NamedTuple):
    left: int
    center: int
    right: int


def first_line_bit(code: int) -> int:
    return code & 1


def second_line_bit(code: int) -> int:
    return (code >> 1) & 1


def check_state(code: int) -> int:
    if code not in SITE_STATES:
        raise ValueError(f"site state must be one of 0, 1, 2, 3; got {code!r}")
    return int(code)


def triple_index(left: int, center: int, right: int) -> int:
    """Base-4 code of a neighbourhood, ``16*left + 4*center + right``."""
    return 16 * left + 4 * center + right


# Rate-1 cases keyed by resulting state. Anything absent has rate 0.
_FIRST_LINE_TRIPLES = {
    ModelVariant.NO_SCREENING: {(0, 0, 0), (2, 0, 0), (0, 0, 2), (2, 0, 2)},
    ModelVariant.SCREENING: {(0, 0, 0)},
}
_SECOND_FROM_EMPTY_TRIPLES = {(1, 0, 0), (0, 0, 1), (1, 0, 1)}
_SECOND_ON_TOP_TRIPLES = {(0, 1, 0)}


def _build_rate_table() -> np.ndarray:
    table = np.zeros((len(ModelVariant), 4, 64), dtype=np.uint8)
    for m, model in enumerate(ModelVariant):
        for t in itertools.product(SITE_STATES, repeat=3):
            idx = triple_index(*t)
            table[m, FIRST, idx] = t in _FIRST_LINE_TRIPLES[model]
            table[m, SECOND, idx] = t in _SECOND_FROM_EMPTY_TRIPLES
            table[m, BOTH, idx] = t in _SECOND_ON_TOP_TRIPLES
    table.setflags(write=False)
    return table


RATE_TABLE = _build_rate_table()
_MODEL_INDEX = {model: i for i, model in enumerate(ModelVariant)}


def model_index(model: ModelVariant) -> int:
    return _MODEL_INDEX[ModelVariant.parse(model)]


def transition_rate(model: ModelVariant | str, target: int, triple: tuple[int, int, int]) -> int:
    """Rate (0 or 1) at which the centre of ``triple`` jumps to ``target``."""
    left, center, right = (check_state(s) for s in triple)
    return int(RATE_TABLE[model_index(model), check_state(target), triple_index(left, center, right)])


def attempt_outcome(model: ModelVariant | str, triple: tuple[int, int, int]) -> TransitionKind:
    """What a car arriving at the centre of ``triple`` does.

    It tries the first line, then the second line, and is discarded if both
    are blocked. At most one of the three transitions is ever enabled, so a
    single rate-1 arrival clock per site reproduces the generator exactly.
    """
    left, center, right = (check_state(s) for s in triple)
    if transition_rate(model, FIRST, (left, center, right)):
        return TransitionKind.FIRST_LINE
    if center == EMPTY and transition_rate(model, SECOND, (left, center, right)):
        return TransitionKind.SECOND_LINE_FROM_EMPTY
    if center == FIRST and transition_rate(model, BOTH, (left, center, right)):
        return TransitionKind.SECOND_LINE_ON_TOP
    return TransitionKind.NONE


_RESULT_STATE = {
    TransitionKind.FIRST_LINE: FIRST,
    TransitionKind.SECOND_LINE_FROM_EMPTY: SECOND,
    TransitionKind.SECOND_LINE_ON_TOP: BOTH,
}


def _build_outcome_table() -> np.ndarray:
    # outcome[m, idx] = centre state after one arrival on neighbourhood idx
    out = np.zeros((len(ModelVariant), 64), dtype=np.uint8)
    for m, model in enumerate(ModelVariant):
        for t in itertools.product(SITE_STATES, repeat=3):
            kind = attempt_outcome(model, t)
            out[m, triple_index(*t)] = _RESULT_STATE.get(kind, t[1])
    out.setflags(write=False)
    return out


OUTCOME_TABLE = _build_outcome_table()


def outcome_table(model: ModelVariant | str) -> np.ndarray:
    """Length-64 lookup: new centre state after an arrival, by triple code."""
    return OUTCOME_TABLE[model_index(model)]


def is_jammed(states, model: ModelVariant | str) -> bool:
    """True when no site of the ring ``states`` has an enabled transition."""
    s = np.asarray(states, dtype=np.int64)
    idx = 16 * np.roll(s, 1) + 4 * s + np.roll(s, -1)
    return bool(np.all(outcome_table(model)[idx] == s))
