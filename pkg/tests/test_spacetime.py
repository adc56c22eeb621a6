import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ghzlab.spacetime import (
    C, Event, EventKind, ExperimentTimeline, Site, TimelineError, audit, can_signal, make_preset,
)

K = EventKind


def two_sites(d, times_a, times_b, **kw):
    sites = (Site("A", (0, 0, 0)), Site("B", (d, 0, 0)))
    kinds = list(EventKind)
    events = tuple(Event("A", t, k) for t, k in zip(times_a, kinds)) + \
        tuple(Event("B", t, k) for t, k in zip(times_b, kinds))
    return ExperimentTimeline(sites, events, **kw)


def test_can_signal_examples():
    tl = two_sites(Fraction("3e-6"), [0, 0, 0, 0], [0, 0, 0, Fraction("1e-3")])
    a0 = tl.event("A", K.RESULT_AVAILABLE)
    b1 = tl.event("B", K.RESULT_AVAILABLE)
    assert can_signal(a0, b1, tl)
    assert not can_signal(tl.event("A", K.CHOICE_MADE), tl.event("B", K.CHOICE_MADE), tl)


def test_lightlike_boundary_counts():
    dt = Fraction(1, 1000)
    tl = two_sites(C * dt, [0, 0, 0, 0], [0, 0, 0, dt])
    assert can_signal(tl.event("A", K.RESULT_AVAILABLE), tl.event("B", K.RESULT_AVAILABLE), tl)
    tl = two_sites(C * dt + Fraction(1, 10 ** 9), [0, 0, 0, 0], [0, 0, 0, dt])
    assert not can_signal(tl.event("A", K.RESULT_AVAILABLE), tl.event("B", K.RESULT_AVAILABLE), tl)


@given(st.fractions(min_value=0, max_value=10), st.fractions(min_value=0, max_value=10),
       st.fractions(min_value=0, max_value=10))
def test_can_signal_monotone_in_time(d, t1, t2):
    lo, hi = sorted((t1, t2))
    tl_lo = two_sites(d, [0, 0, 0, 0], [lo] * 4, signal_speed=1)
    tl_hi = two_sites(d, [0, 0, 0, 0], [hi] * 4, signal_speed=1)
    a = tl_lo.event("A", K.CHOICE_MADE)
    if can_signal(a, tl_lo.event("B", K.RESULT_AVAILABLE), tl_lo):
        assert can_signal(tl_hi.event("A", K.CHOICE_MADE), tl_hi.event("B", K.RESULT_AVAILABLE), tl_hi)
    # same site, forward in time: always reachable
    assert can_signal(a, tl_lo.event("A", K.RESULT_AVAILABLE), tl_lo)


def test_preset_verdicts():
    rowe = audit(make_preset("rowe"))
    assert rowe.result_channel_open and not rowe.heralding_gap
    assert rowe.pair("A", "B").result_channel_open and not rowe.pair("B", "A").result_channel_open
    weihs = audit(make_preset("weihs"))
    assert not weihs.choice_channel_open and weihs.determination_channel_open
    galaxy = audit(make_preset("galaxy"))
    assert galaxy.all_closed
    ideal_tl = make_preset("ideal")
    ideal = audit(ideal_tl)
    assert ideal.all_closed and ideal_tl.heralded and not ideal.heralding_gap
    assert any("free" in c for c in ideal.caveats)
    assert any("conspiracy" in c for c in galaxy.caveats)


def test_galaxy_is_closed_only_by_the_lab_baseline():
    # moving site B onto the same side as A's galaxy would let its light arrive in time
    g = make_preset("galaxy")
    det = g.event("A", K.CHOICE_DETERMINED)
    made = g.event("A", K.CHOICE_MADE)
    assert can_signal(det, made, g)  # the galactic photon does reach its own site
    assert not can_signal(det, g.event("B", K.RESULT_AVAILABLE), g)


@pytest.mark.parametrize("name", ["rowe", "weihs", "galaxy", "ideal"])
def test_determination_implies_choice(name):
    for p in audit(make_preset(name)).pairs:
        assert p.determination_channel_open or not p.choice_channel_open


@pytest.mark.parametrize("name", ["rowe", "weihs", "galaxy", "ideal"])
def test_json_roundtrip_exact(name):
    tl = make_preset(name)
    text = json.dumps(tl.to_dict())
    assert ExperimentTimeline.from_json(text) == tl


def test_spec_style_json_accepted():
    doc = {"signal_speed": 2.99792458e8, "heralded": False,
           "sites": [{"id": "A", "position": [0, 0, 0]}, {"id": "B", "position": [1000, 0, 0]}],
           "events": [{"site": s, "kind": k.value, "time": t}
                      for s in "AB" for k, t in zip(EventKind, [1.0e-6, 1.0e-6, 2.0e-6, 3.0e-6])]}
    rep = audit(ExperimentTimeline.from_json(json.dumps(doc)))
    assert rep.all_closed and rep.heralding_gap
    assert list(rep.to_dict()["pairs"][0]) == [
        "from", "to", "choice_channel_open", "result_channel_open", "determination_channel_open"]


def test_validation_lists_every_problem():
    with pytest.raises(TimelineError) as exc:
        two_sites(1, [0, 2, 1, 3], [5, 4, 3, 2])
    assert len(exc.value.problems) == 4


def test_missing_and_unknown_events():
    sites = (Site("A", (0, 0, 0)),)
    with pytest.raises(TimelineError, match="missing"):
        ExperimentTimeline(sites, (Event("A", 0, K.CHOICE_MADE),))
    with pytest.raises(TimelineError, match="unknown site"):
        ExperimentTimeline(sites, tuple(Event("Z", 0, k) for k in EventKind))
    with pytest.raises(TimelineError):
        ExperimentTimeline.from_json("{not json")
    with pytest.raises(TimelineError):
        make_preset("bell")
