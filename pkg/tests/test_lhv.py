from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ghzlab.game import GameSpec, make_ghz_game
from ghzlab.lhv import (
    LocalStrategy, MixedStrategy, classical_value, classical_value_lp, enumerate_deterministic,
    mixed_win_prob, snap_lp_value, strategy_win_prob,
)
from ghzlab.game import GameError

GHZ = make_ghz_game()
ALL = enumerate_deterministic(GHZ)


def brute_value(s: LocalStrategy, spec: GameSpec) -> Fraction:
    # independent evaluation: spell out the four constraints by hand
    (x1, y1), (x2, y2), (x3, y3) = s.table
    sat = {"XXX": x1 * x2 * x3 == -1, "XYY": x1 * y2 * y3 == 1,
           "YXY": y1 * x2 * y3 == 1, "YYX": y1 * y2 * x3 == 1}
    return sum(Fraction(1, 4) for v in sat.values() if v)


def test_enumeration_is_complete_and_distinct():
    assert len(ALL) == 64
    assert len(set(ALL)) == 64
    assert LocalStrategy.from_xy((1, 1, 1), (1, 1, 1)) in ALL
    assert ALL == sorted(ALL)


def test_strategy_values():
    assert strategy_win_prob(LocalStrategy.from_xy((1, 1, 1), (1, 1, 1)), GHZ) == Fraction(3, 4)
    assert strategy_win_prob(LocalStrategy.from_xy((1, 1, 1), (-1, 1, 1)), GHZ) == Fraction(1, 4)


@pytest.mark.parametrize("s", ALL)
def test_matches_hand_evaluation_and_parity_dichotomy(s):
    v = strategy_win_prob(s, GHZ)
    assert v == brute_value(s, GHZ)
    assert v in (Fraction(1, 4), Fraction(3, 4))


def test_parity_obstruction_product_of_constraints():
    # product of the four left-hand sides is +1 for every table, the targets multiply to -1
    for s in ALL:
        lhs = 1
        for e in GHZ.support:
            for a in s.answers(e.questions):
                lhs *= a
        assert lhs == 1
    targets = 1
    for e in GHZ.support:
        targets *= e.target
    assert targets == -1


def test_classical_value_and_argmax():
    value, best = classical_value(GHZ)
    assert value == Fraction(3, 4)
    assert best == sorted(best)
    assert set(best) == {s for s in ALL if brute_value(s, GHZ) == Fraction(3, 4)}
    assert len(best) == 32


def test_lp_oracle_agrees():
    lp, weights = classical_value_lp(GHZ)
    assert abs(lp - 0.75) < 1e-9
    assert snap_lp_value(lp, classical_value(GHZ)[0]) == Fraction(3, 4)
    assert abs(weights.sum() - 1) < 1e-9


def test_snap_refuses_disagreement():
    with pytest.raises(ArithmeticError):
        snap_lp_value(0.7, Fraction(3, 4))


def test_single_constraint_game_has_value_one():
    g = GameSpec.from_triples([("XXX", 1, -1)])
    value, best = classical_value(g)
    assert value == 1
    assert LocalStrategy.from_xy((-1, 1, 1), (1, 1, 1)) in best
    assert abs(classical_value_lp(g)[0] - 1) < 1e-9


def test_mixed_values():
    allplus = LocalStrategy.from_xy((1, 1, 1), (1, 1, 1))
    assert mixed_win_prob(MixedStrategy.point(allplus), GHZ) == Fraction(3, 4)
    assert mixed_win_prob(MixedStrategy.uniform(ALL), GHZ) == Fraction(1, 2)


def test_mixed_weights_must_sum_to_one():
    with pytest.raises(GameError):
        MixedStrategy(((ALL[0], Fraction(1, 2)),))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 63), st.integers(1, 20)), min_size=1, max_size=8))
def test_mixtures_never_beat_the_classical_value(picks):
    total = sum(w for _, w in picks)
    m = MixedStrategy(tuple((ALL[i], Fraction(w, total)) for i, w in picks))
    assert mixed_win_prob(m, GHZ) <= Fraction(3, 4)


def test_non_uniform_game_value_by_brute_force():
    g = GameSpec.from_triples([("XXX", "1/2", -1), ("XYY", "1/6", 1), ("YXY", "1/6", 1), ("YYX", "1/6", 1)])
    best = max(
        sum((e.weight for e in g.support if _prod(s.answers(e.questions)) == e.target), Fraction(0))
        for s in enumerate_deterministic(g))
    assert classical_value(g)[0] == best == Fraction(5, 6)
    assert abs(classical_value_lp(g)[0] - 5 / 6) < 1e-9


def _prod(xs):
    out = 1
    for x in xs:
        out *= x
    return out
