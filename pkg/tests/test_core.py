import itertools

import pytest

from twoline_parking.core import (
    BOTH,
    EMPTY,
    FIRST,
    SECOND,
    ModelVariant,
    TransitionKind,
    attempt_outcome,
    first_line_bit,
    is_jammed,
    outcome_table,
    second_line_bit,
    transition_rate,
    triple_index,
)

NS, SC = ModelVariant.NO_SCREENING, ModelVariant.SCREENING
TRIPLES = list(itertools.product(range(4), repeat=3))


def prose_rate(model, target, triple):
    """Rates restated from the verbal rules, independent of the lookup table."""
    left, center, right = triple
    l1, r1 = left & 1, right & 1
    l2, r2 = left >> 1, right >> 1
    if target == FIRST:
        blocked_from_above = model is SC and (l2 or r2)
        return int(center == EMPTY and not l1 and not r1 and not blocked_from_above)
    if target == SECOND:
        return int(center == EMPTY and (l1 or r1) and not l2 and not r2)
    if target == BOTH:
        return int(center == FIRST and not l2 and not r2)
    return 0


@pytest.mark.parametrize(
    "model, target, triple, expected",
    [
        (NS, 1, (2, 0, 2), 1),
        (SC, 1, (2, 0, 0), 0),
        (NS, 2, (3, 0, 0), 0),
        (SC, 3, (0, 1, 0), 1),
        (NS, 1, (0, 0, 0), 1),
        (SC, 1, (0, 0, 0), 1),
    ],
)
def test_rate_examples(model, target, triple, expected):
    assert transition_rate(model, target, triple) == expected


@pytest.mark.parametrize(
    "model, triple, kind",
    [
        (NS, (1, 0, 1), TransitionKind.SECOND_LINE_FROM_EMPTY),
        (NS, (1, 0, 2), TransitionKind.NONE),
        (SC, (0, 1, 0), TransitionKind.SECOND_LINE_ON_TOP),
        (NS, (2, 0, 2), TransitionKind.FIRST_LINE),
        (SC, (2, 0, 2), TransitionKind.NONE),
    ],
)
def test_attempt_outcome_examples(model, triple, kind):
    assert attempt_outcome(model, triple) is kind


def _locally_valid(t):
    left, center, right = t
    return not (center & 1 and (left & 1 or right & 1)) and not (center & 2 and (left & 2 or right & 2))


def test_table_matches_verbal_rules(model):
    # the verbal rules assume no adjacent cars on the same line
    for target in range(4):
        for t in filter(_locally_valid, TRIPLES):
            assert transition_rate(model, target, t) == prose_rate(model, target, t), (target, t)


def test_listed_rate_one_cases_only():
    ones = {
        (m, s, t) for m in ModelVariant for s in range(4) for t in TRIPLES if transition_rate(m, s, t)
    }
    expected = {(NS, 1, t) for t in [(0, 0, 0), (2, 0, 0), (0, 0, 2), (2, 0, 2)]}
    expected |= {(SC, 1, (0, 0, 0))}
    expected |= {(m, 2, t) for m in ModelVariant for t in [(1, 0, 0), (0, 0, 1), (1, 0, 1)]}
    expected |= {(m, 3, (0, 1, 0)) for m in ModelVariant}
    assert ones == expected


def test_state_bits():
    assert [first_line_bit(s) for s in range(4)] == [0, 1, 0, 1]
    assert [second_line_bit(s) for s in range(4)] == [0, 0, 1, 1]


def test_exclusivity(model):
    for t in TRIPLES:
        assert sum(transition_rate(model, s, t) for s in (FIRST, SECOND, BOTH)) <= 1


def test_screening_dominance():
    for s in range(4):
        for t in TRIPLES:
            assert transition_rate(SC, s, t) <= transition_rate(NS, s, t)


def test_monotone_occupancy(model):
    bits = lambda x: bin(x).count("1")
    for s in range(4):
        for t in TRIPLES:
            if transition_rate(model, s, t):
                assert bits(s) > bits(t[1])


def test_first_line_safety(model):
    for t in TRIPLES:
        if transition_rate(model, FIRST, t):
            assert not first_line_bit(t[0]) and not first_line_bit(t[2])


def test_outcome_table_consistent_with_attempt_outcome(model):
    table = outcome_table(model)
    result = {TransitionKind.FIRST_LINE: 1, TransitionKind.SECOND_LINE_FROM_EMPTY: 2, TransitionKind.SECOND_LINE_ON_TOP: 3}
    for t in TRIPLES:
        assert table[triple_index(*t)] == result.get(attempt_outcome(model, t), t[1])


def test_rejects_bad_states():
    with pytest.raises(ValueError):
        transition_rate(NS, 4, (0, 0, 0))
    with pytest.raises(ValueError):
        attempt_outcome(NS, (0, 5, 0))
    with pytest.raises(ValueError):
        ModelVariant.parse("sideways")


def test_model_parse_aliases():
    assert ModelVariant.parse("no-screening") is NS
    assert ModelVariant.parse("Screening") is SC


def test_is_jammed():
    assert is_jammed([1, 2, 1, 2], NS)
    assert not is_jammed([0, 0, 0], NS)
    # a lone first-line car with empty neighbours can still receive a second-line car
    assert not is_jammed([1, 0, 0, 1, 0, 0], SC)
