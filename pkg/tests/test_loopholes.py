import itertools
from fractions import Fraction

import pytest

from ghzlab.game import NO_DETECT, GameSpec, make_ghz_game
from ghzlab.lhv import LocalStrategy, MixedStrategy, best_classical, classical_value
from ghzlab.loopholes import (
    CommunicationModel, ExtendedEnsemble, ExtendedStrategy, LoopholeError, SourceModel,
    communication_win_prob, detection_threshold, enumerate_extended, min_detection, postselected_stats,
    source_win_prob, threshold_feasible, verify_witness,
)
from ghzlab.spacetime import audit, make_preset

GHZ = make_ghz_game()
ND = NO_DETECT
ALL_PLUS = ExtendedStrategy(((1, 1),) * 3)
P1_HIDES_X = ExtendedStrategy(((ND, 1), (1, 1), (1, 1)))


def admissible(s):
    """Never loses a trial in which every player answered (brute force)."""
    for e in GHZ.support:
        ans = s.answers(e.questions)
        if ND not in ans and ans[0] * ans[1] * ans[2] != e.target:
            return False
    return True


def nd_slots(s):
    return [(i, j) for i, row in enumerate(s.table) for j, a in enumerate(row) if a == ND]


def test_extended_enumeration():
    allx = enumerate_extended()
    assert len(allx) == 729 == len(set(allx))


def test_postselected_examples():
    st = postselected_stats(ExtendedEnsemble.point(ALL_PLUS), GHZ)
    assert (st.conditional_win, st.per_player_detection, st.all_detected_rate) == (
        Fraction(3, 4), (1, 1, 1), 1)
    st = postselected_stats(ExtendedEnsemble.point(P1_HIDES_X), GHZ)
    assert st.conditional_win == 1
    assert st.per_player_detection[0] == Fraction(1, 2)
    assert st.all_detected_rate == Fraction(1, 2)


def test_empty_ensemble_rejected():
    with pytest.raises(LoopholeError):
        ExtendedEnsemble(())


def test_no_survivors_is_distinct():
    never = ExtendedStrategy(((ND, ND), (1, 1), (1, 1)))
    st = postselected_stats(ExtendedEnsemble.point(never), GHZ)
    assert st.no_survivors and st.conditional_win is None and st.all_detected_rate == 0


def test_always_detecting_ensembles_obey_classical_bound():
    for s in enumerate_extended():
        if any(ND in row for row in s.table):
            continue
        st = postselected_stats(ExtendedEnsemble.point(s), GHZ)
        assert st.conditional_win <= Fraction(3, 4)


def test_postselection_never_hurts():
    best_ext = max(
        postselected_stats(ExtendedEnsemble.point(s), GHZ).conditional_win or 0
        for s in enumerate_extended())
    assert best_ext == 1 > classical_value(GHZ)[0]


def test_every_admissible_strategy_hides_somewhere():
    # independent oracle for the threshold: without a NoDetect slot a table
    # loses some trial, so each admissible table hides at least 1 of 6 slots
    adm = [s for s in enumerate_extended() if admissible(s)]
    assert adm
    assert all(len(nd_slots(s)) >= 1 for s in adm)
    single = [s for s in adm if len(nd_slots(s)) == 1]
    assert {nd_slots(s)[0] for s in single} == set(itertools.product(range(3), range(2)))


def test_slot_mixtures_exhaustive():
    # every rational mixture with denominator <= 6 over single-slot tables:
    # the smallest detection rate is at most 5/6, with equality only for the
    # uniform mixture over all six slots
    slots = list(itertools.product(range(3), range(2)))
    best = Fraction(0)
    for k in range(1, 7):
        for combo in itertools.combinations_with_replacement(range(6), k):
            det = [1 - Fraction(combo.count(j), k) for j in range(6)]
            best = max(best, min(det))
    assert best == Fraction(5, 6)


def _uniform_single_slot_witness():
    adm = [s for s in enumerate_extended() if admissible(s) and len(nd_slots(s)) == 1]
    picks = {}
    for s in adm:
        picks.setdefault(nd_slots(s)[0], s)
    return ExtendedEnsemble.uniform(picks.values())


def test_hand_witness_reaches_five_sixths():
    w = _uniform_single_slot_witness()
    assert verify_witness(w, GHZ, Fraction(5, 6))
    assert min_detection(w, GHZ) == Fraction(5, 6)


def test_feasibility_endpoints():
    assert threshold_feasible(GHZ, 1.0) is None
    w = threshold_feasible(GHZ, 0.5)
    assert w is not None and verify_witness(w, GHZ, Fraction(1, 2))


def test_feasibility_is_monotone():
    etas = [i / 40 for i in range(41)]
    flags = [threshold_feasible(GHZ, e) is not None for e in etas]
    assert flags == sorted(flags, reverse=True)


def test_detection_threshold():
    tol = 1e-6
    r = detection_threshold(GHZ, tol)
    assert r.bracket[1] - r.bracket[0] <= tol
    assert verify_witness(r.witness, GHZ, Fraction(r.eta_star - tol))
    assert threshold_feasible(GHZ, r.eta_star - tol) is not None
    assert threshold_feasible(GHZ, r.eta_star + tol) is None
    assert r.certificate_bound < Fraction(r.eta_star + tol)
    # agrees with the combinatorial oracle above
    assert abs(r.eta_star - 5 / 6) <= 2 * tol
    assert r.certificate_bound == Fraction(5, 6)


def test_threshold_rejects_bad_inputs():
    with pytest.raises(LoopholeError):
        detection_threshold(GHZ, 0)
    two = GameSpec.from_triples([("XX", "1/2", 1), ("YY", "1/2", -1)], players=2)
    with pytest.raises(LoopholeError, match="unsupported game shape"):
        detection_threshold(two, 1e-3)


def test_threshold_for_classically_winnable_game():
    g = GameSpec.from_triples([("XXX", 1, -1)])
    r = detection_threshold(g, 1e-4)
    assert r.eta_star == 1.0 and r.infeasible_eta is None


@pytest.mark.parametrize("p, expected", [
    (Fraction(0), Fraction(3, 4)),
    (Fraction(1, 2), Fraction(7, 8)),
    (Fraction(1), Fraction(1)),
    (Fraction(1, 3), Fraction(5, 6)),
])
def test_source_model(p, expected):
    m = SourceModel(p, MixedStrategy.point(best_classical(GHZ)))
    assert source_win_prob(m, GHZ) == expected == (3 + p) / 4


def test_source_certainty_only_at_full_emission():
    fb = MixedStrategy.point(best_classical(GHZ))
    for k in range(0, 100):
        assert source_win_prob(SourceModel(Fraction(k, 100), fb), GHZ) < 1
    with pytest.raises(LoopholeError):
        SourceModel(Fraction(3, 2), fb)


@pytest.mark.parametrize("preset, expected", [
    ("rowe", Fraction(1)), ("weihs", Fraction(1)), ("galaxy", Fraction(3, 4)), ("ideal", Fraction(3, 4)),
])
def test_communication_adversary(preset, expected):
    assert communication_win_prob(CommunicationModel(audit(make_preset(preset))), GHZ) == expected


def test_ensemble_json_roundtrip():
    e = ExtendedEnsemble(((P1_HIDES_X, Fraction(1, 3)), (ALL_PLUS, Fraction(2, 3))))
    assert ExtendedEnsemble.from_list(e.to_list()) == e
    assert e.to_list()[0]["table"][0] == ["nd", 1]


def test_local_strategy_converts():
    s = LocalStrategy.from_xy((1, -1, 1), (1, 1, -1))
    assert ExtendedStrategy.from_local(s).table == s.table
