"""Experiment timelines and light-cone audits of their causal channels.

Everything lives in one lab frame.  Each site carries four events
(choice determined, choice made, measurement start, result available) and
the audit asks, for every ordered pair of sites, whether a signal at
``signal_speed`` could carry the choice, the choice's hidden cause, or the
local result to the remote site before its result is available.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

C = Fraction(299_792_458)
JULIAN_YEAR = Fraction(31_557_600)
LIGHT_YEAR = C * JULIAN_YEAR

CONSPIRACY_CAVEAT = (
    "a conspiracy of hidden variables correlated across the determination events "
    "themselves is not excluded by any finite timeline")
FREE_CHOICE_CAVEAT = (
    "choices are assumed free at the moment they are made; hidden variables behind "
    "the choosers cannot be ruled out by this audit")


class TimelineError(ValueError):
    """Malformed timeline; ``problems`` lists every offending event."""

    def __init__(self, message: str, problems: list[str] | None = None):
        self.problems = problems or []
        if self.problems:
            message = message + ": " + "; ".join(self.problems)
        super().__init__(message)


class EventKind(enum.Enum):
    CHOICE_DETERMINED = "ChoiceDetermined"
    CHOICE_MADE = "ChoiceMade"
    MEASUREMENT_START = "MeasurementStart"
    RESULT_AVAILABLE = "ResultAvailable"


EVENT_ORDER = tuple(EventKind)


def exact(x) -> Fraction:
    """Exact rational from an int, float, Decimal, Fraction or decimal string.

    Timelines mix femtosecond light-crossing times with gigayear travel
    times, which doubles cannot hold together.
    """
    if isinstance(x, bool):
        raise TimelineError(f"expected a number, got {x!r}")
    if isinstance(x, Fraction):
        return x
    try:
        if isinstance(x, str):
            x = Decimal(x.strip())
        f = Fraction(x)
    except (TypeError, ValueError, ArithmeticError) as exc:
        raise TimelineError(f"expected a finite number, got {x!r}") from exc
    return f


def number_json(x: Fraction):
    """A JSON number whose text is exactly ``x``, else an exact decimal string.

    Readers must parse floats as decimals (``parse_float=Decimal``) to get
    the exact value back.
    """
    if x.denominator == 1:
        return int(x)
    f = float(x)
    if Fraction(Decimal(repr(f))) == x:
        return f
    d = x.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d == 1:
        return _decimal_text(x)
    return f


def _decimal_text(x: Fraction) -> str:
    sign = "-" if x < 0 else ""
    x = abs(x)
    whole, rem = divmod(x.numerator, x.denominator)
    digits = []
    while rem:
        rem *= 10
        q, rem = divmod(rem, x.denominator)
        digits.append(str(q))
    return sign + str(whole) + ("." + "".join(digits) if digits else "")


def _vec(v) -> tuple[Fraction, Fraction, Fraction]:
    try:
        t = tuple(exact(x) for x in v)
    except TypeError as exc:
        raise TimelineError(f"position must be a list of 3 numbers, got {v!r}") from exc
    if len(t) != 3:
        raise TimelineError(f"position must have 3 components, got {v!r}")
    return t


@dataclass(frozen=True)
class Site:
    id: str
    position: tuple[Fraction, Fraction, Fraction]

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position))


@dataclass(frozen=True)
class Event:
    """An event attached to a site.

    ``position`` overrides the site's position for events that happen
    elsewhere on the site's behalf, e.g. a choice fixed by light leaving a
    distant galaxy.
    """

    site: str
    time: Fraction
    kind: EventKind
    note: str = ""
    position: tuple[Fraction, Fraction, Fraction] | None = None

    def __post_init__(self):
        object.__setattr__(self, "time", exact(self.time))
        if self.position is not None:
            object.__setattr__(self, "position", _vec(self.position))


@dataclass(frozen=True)
class ExperimentTimeline:
    sites: tuple[Site, ...]
    events: tuple[Event, ...]
    signal_speed: Fraction = C
    heralded: bool = False
    assume_free_choice: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "signal_speed", exact(self.signal_speed))
        problems = []
        ids = [s.id for s in self.sites]
        if len(set(ids)) != len(ids):
            problems.append(f"duplicate site ids {sorted(i for i in set(ids) if ids.count(i) > 1)}")
        if not self.signal_speed > 0:
            problems.append(f"signal_speed must be positive, got {self.signal_speed!r}")
        known = set(ids)
        per_site: dict[str, dict[EventKind, Event]] = {i: {} for i in ids}
        for ev in self.events:
            if ev.site not in known:
                problems.append(f"event {ev.kind.value} refers to unknown site {ev.site!r}")
                continue
            if ev.kind in per_site[ev.site]:
                problems.append(f"{ev.site}.{ev.kind.value} given more than once")
            per_site[ev.site][ev.kind] = ev
        for sid, evs in per_site.items():
            missing = [k.value for k in EVENT_ORDER if k not in evs]
            if missing:
                problems.append(f"site {sid} missing {', '.join(missing)}")
                continue
            for a, b in zip(EVENT_ORDER, EVENT_ORDER[1:]):
                if evs[a].time > evs[b].time:
                    problems.append(
                        f"site {sid}: {a.value} at {float(evs[a].time):g} s "
                        f"after {b.value} at {float(evs[b].time):g} s")
        if problems:
            raise TimelineError("invalid timeline", problems)

    def site(self, sid: str) -> Site:
        for s in self.sites:
            if s.id == sid:
                return s
        raise TimelineError(f"unknown site id {sid!r}")

    def event(self, sid: str, kind: EventKind) -> Event:
        for ev in self.events:
            if ev.site == sid and ev.kind is kind:
                return ev
        raise TimelineError(f"no {kind.value} event at site {sid!r}")

    def position_of(self, ev: Event) -> tuple[Fraction, Fraction, Fraction]:
        return ev.position if ev.position is not None else self.site(ev.site).position

    def to_dict(self) -> dict:
        d = {
            "signal_speed": number_json(self.signal_speed),
            "heralded": self.heralded,
            "assume_free_choice": self.assume_free_choice,
            "sites": [{"id": s.id, "position": [number_json(x) for x in s.position]} for s in self.sites],
            "events": [],
        }
        if self.name:
            d["name"] = self.name
        for ev in self.events:
            e = {"site": ev.site, "kind": ev.kind.value, "time": number_json(ev.time)}
            if ev.position is not None:
                e["position"] = [number_json(x) for x in ev.position]
            if ev.note:
                e["note"] = ev.note
            d["events"].append(e)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentTimeline:
        try:
            sites = tuple(Site(str(s["id"]), _vec(s["position"])) for s in d["sites"])
            events = tuple(
                Event(
                    site=str(e["site"]),
                    time=exact(e["time"]),
                    kind=EventKind(e["kind"]),
                    note=str(e.get("note", "")),
                    position=_vec(e["position"]) if e.get("position") is not None else None,
                )
                for e in d["events"]
            )
            return cls(
                sites=sites,
                events=events,
                signal_speed=exact(d.get("signal_speed", C)),
                heralded=bool(d.get("heralded", False)),
                assume_free_choice=bool(d.get("assume_free_choice", False)),
                name=str(d.get("name", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, TimelineError):
                raise
            raise TimelineError(f"malformed timeline: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> ExperimentTimeline:
        try:
            return cls.from_dict(json.loads(text, parse_float=Decimal))
        except json.JSONDecodeError as exc:
            raise TimelineError(f"timeline is not valid JSON: {exc}") from exc


def can_signal(e1: Event, e2: Event, timeline: ExperimentTimeline) -> bool:
    """Could a signal leaving ``e1`` arrive by ``e2``?  Lightlike counts as yes."""
    dist2 = sum((a - b) ** 2 for a, b in zip(timeline.position_of(e1), timeline.position_of(e2)))
    dt = e2.time - e1.time
    if dt < 0:
        return False
    # squared comparison keeps the test exact; no square roots of rationals
    return (dt * timeline.signal_speed) ** 2 >= dist2


@dataclass(frozen=True)
class PairChannels:
    source: str
    target: str
    choice_channel_open: bool
    result_channel_open: bool
    determination_channel_open: bool

    @property
    def any_open(self) -> bool:
        return self.choice_channel_open or self.result_channel_open or self.determination_channel_open

    def to_dict(self) -> dict:
        return {
            "from": self.source,
            "to": self.target,
            "choice_channel_open": self.choice_channel_open,
            "result_channel_open": self.result_channel_open,
            "determination_channel_open": self.determination_channel_open,
        }


@dataclass(frozen=True)
class LoopholeReport:
    pairs: tuple[PairChannels, ...]
    heralding_gap: bool
    caveats: tuple[str, ...] = field(default=())
    timeline_name: str = ""

    @property
    def all_closed(self) -> bool:
        return not any(p.any_open for p in self.pairs)

    @property
    def choice_channel_open(self) -> bool:
        return any(p.choice_channel_open for p in self.pairs)

    @property
    def result_channel_open(self) -> bool:
        return any(p.result_channel_open for p in self.pairs)

    @property
    def determination_channel_open(self) -> bool:
        return any(p.determination_channel_open for p in self.pairs)

    def pair(self, source: str, target: str) -> PairChannels:
        for p in self.pairs:
            if p.source == source and p.target == target:
                return p
        raise KeyError((source, target))

    def to_dict(self) -> dict:
        return {
            "timeline": self.timeline_name,
            "pairs": [p.to_dict() for p in self.pairs],
            "heralding_gap": self.heralding_gap,
            "all_channels_closed": self.all_closed,
            "caveats": list(self.caveats),
        }


def audit(timeline: ExperimentTimeline) -> LoopholeReport:
    K = EventKind
    pairs = []
    for a in timeline.sites:
        for b in timeline.sites:
            if a.id == b.id:
                continue
            remote_result = timeline.event(b.id, K.RESULT_AVAILABLE)
            local_result = timeline.event(a.id, K.RESULT_AVAILABLE)
            pairs.append(PairChannels(
                source=a.id,
                target=b.id,
                choice_channel_open=can_signal(timeline.event(a.id, K.CHOICE_MADE), remote_result, timeline),
                result_channel_open=(local_result.time < remote_result.time
                                     and can_signal(local_result, remote_result, timeline)),
                determination_channel_open=can_signal(
                    timeline.event(a.id, K.CHOICE_DETERMINED), remote_result, timeline),
            ))
    caveats = [CONSPIRACY_CAVEAT]
    if timeline.assume_free_choice:
        caveats.append(FREE_CHOICE_CAVEAT)
    if not timeline.heralded:
        caveats.append("source is not heralded: a detection at one site does not guarantee "
                       "corresponding results at the others")
    return LoopholeReport(tuple(pairs), heralding_gap=not timeline.heralded,
                          caveats=tuple(caveats), timeline_name=timeline.name)


def _site_events(sid, determined, made, start, result, notes=None, determined_at=None):
    notes = notes or {}
    K = EventKind
    return [
        Event(sid, determined, K.CHOICE_DETERMINED, notes.get(K.CHOICE_DETERMINED, ""), determined_at),
        Event(sid, made, K.CHOICE_MADE, notes.get(K.CHOICE_MADE, "")),
        Event(sid, start, K.MEASUREMENT_START, notes.get(K.MEASUREMENT_START, "")),
        Event(sid, result, K.RESULT_AVAILABLE, notes.get(K.RESULT_AVAILABLE, "")),
    ]


def _rowe() -> ExperimentTimeline:
    # two trapped ions 3 um apart (light crossing 10 fs); fluorescence readout 1 ms
    K = EventKind
    half = Fraction("1.5e-6")
    readout = Fraction("1e-3")
    setting = Fraction("-1e-5")
    sites = (Site("A", (-half, 0, 0)), Site("B", (half, 0, 0)))
    notes = {
        K.CHOICE_DETERMINED: "analysis phase fixed with the laser pulse, 10 us before readout",
        K.CHOICE_MADE: "analysis pulse applied",
        K.MEASUREMENT_START: "fluorescence detection begins",
        K.RESULT_AVAILABLE: "result read from many scattered photons, 1 ms after start",
    }
    events = (
        _site_events("A", setting, setting, 0, readout, notes)
        # B's readout completes 10 us after A's; the two windows overlap for ~1 ms
        + _site_events("B", setting, setting, 0, readout + Fraction("1e-5"), notes)
    )
    return ExperimentTimeline(sites, tuple(events), heralded=True, name="rowe")


def _weihs() -> ExperimentTimeline:
    # sites 400 m apart (light crossing 1.33 us); a fast local RNG picks the
    # setting 100 ns before detection, but the hidden variables behind the RNG
    # outcome are taken as fixed 10 us earlier, long enough to reach the far site
    K = EventKind
    half = Fraction(200)
    sites = (Site("A", (-half, 0, 0)), Site("B", (half, 0, 0)))
    notes = {
        K.CHOICE_DETERMINED: "hidden variables governing the local quantum RNG are fixed",
        K.CHOICE_MADE: "quantum RNG output switches the modulator",
        K.MEASUREMENT_START: "photon reaches the analyzer",
        K.RESULT_AVAILABLE: "detector click time-tagged",
    }
    det, made, result = Fraction("-1e-5"), Fraction("-1e-7"), Fraction("1e-9")
    events = (
        _site_events("A", det, made, 0, result, notes)
        + _site_events("B", det, made, 0, result, notes)
    )
    return ExperimentTimeline(sites, tuple(events), heralded=False, name="weihs")


def _galaxy() -> ExperimentTimeline:
    # settings fixed by photons from galaxies 1e9 light-years away on opposite
    # sides; each determination event sits at its galaxy, 1e9 years back
    K = EventKind
    half = Fraction(200)
    travel = Fraction(10 ** 9) * JULIAN_YEAR
    far = C * travel
    made, result = Fraction("-1e-7"), Fraction("1e-9")
    sites = (Site("A", (-half, 0, 0)), Site("B", (half, 0, 0)))
    notes = {
        K.CHOICE_DETERMINED: "photon leaves a distant galaxy on this site's side",
        K.CHOICE_MADE: "galactic photon detected, setting chosen",
        K.MEASUREMENT_START: "entangled particle reaches the analyzer",
        K.RESULT_AVAILABLE: "detector click time-tagged",
    }
    events = (
        _site_events("A", made - travel, made, 0, result, notes, determined_at=(-half - far, 0, 0))
        + _site_events("B", made - travel, made, 0, result, notes, determined_at=(half + far, 0, 0))
    )
    return ExperimentTimeline(sites, tuple(events), heralded=False, name="galaxy")


def _ideal() -> ExperimentTimeline:
    # three players on a 10 km triangle; questions drawn 1 us before a 1 ns measurement
    K = EventKind
    sites = (
        Site("A", (0, 0, 0)),
        Site("B", (10_000, 0, 0)),
        Site("C", (5_000, "8660.254", 0)),
    )
    notes = {K.CHOICE_MADE: "question drawn by the referee at this site"}
    made, result = Fraction("-1e-6"), Fraction("1e-9")
    events = []
    for s in sites:
        events += _site_events(s.id, made, made, 0, result, notes)
    return ExperimentTimeline(sites, tuple(events), heralded=True, assume_free_choice=True, name="ideal")


PRESETS = {"rowe": _rowe, "weihs": _weihs, "galaxy": _galaxy, "ideal": _ideal}


def make_preset(name: str) -> ExperimentTimeline:
    try:
        return PRESETS[name.lower()]()
    except KeyError:
        raise TimelineError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
