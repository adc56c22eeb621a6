"""Rules of the three-player GHZ (Mermin) game and small generalizations.

A game is a weighted list of allowed question triples, each carrying the
parity the product of the players' answers must hit.  Weights are exact
``Fraction`` values so the classical bound comes out exact.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


class GameError(ValueError):
    """Invalid game description or a question outside the game's support."""


class Question(enum.Enum):
    X = "X"
    Y = "Y"

    def __str__(self) -> str:
        return self.value


class Answer(enum.IntEnum):
    MINUS = -1
    NO_DETECT = 0
    PLUS = 1


NO_DETECT = Answer.NO_DETECT
QUESTIONS = (Question.X, Question.Y)

QuestionTriple = tuple  # tuple[Question, ...], one entry per player


def parse_questions(text: str | Sequence[Question]) -> tuple[Question, ...]:
    """Turn ``"XYY"`` (or an iterable of Questions) into a question tuple."""
    if isinstance(text, str):
        try:
            return tuple(Question(ch) for ch in text.upper())
        except ValueError as exc:
            raise GameError(f"bad question string {text!r}") from exc
    return tuple(Question(q) if not isinstance(q, Question) else q for q in text)


def questions_str(q: Iterable[Question]) -> str:
    return "".join(x.value for x in q)


def parse_answer(value) -> Answer:
    """Accept 1, -1, "+1", "-1", "nd"/"NoDetect"/0/None."""
    if isinstance(value, Answer):
        return value
    if value is None:
        return NO_DETECT
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("nd", "nodetect", "no_detect", "none", "0"):
            return NO_DETECT
        value = int(v)
    try:
        return Answer(int(value))
    except ValueError as exc:
        raise GameError(f"bad answer {value!r}") from exc


@dataclass(frozen=True)
class SupportEntry:
    questions: tuple[Question, ...]
    weight: Fraction
    target: int


@dataclass(frozen=True)
class GameSpec:
    """Allowed question triples with exact weights and target parities."""

    support: tuple[SupportEntry, ...]
    players: int = 3

    def __post_init__(self):
        if self.players < 1:
            raise GameError("need at least one player")
        if not self.support:
            raise GameError("empty support")
        seen = set()
        total = Fraction(0)
        for e in self.support:
            if len(e.questions) != self.players:
                raise GameError(
                    f"question triple {questions_str(e.questions)} has wrong length for {self.players} players")
            if e.questions in seen:
                raise GameError(f"duplicate question triple {questions_str(e.questions)}")
            seen.add(e.questions)
            if not isinstance(e.weight, Fraction):
                raise GameError("weights must be exact fractions")
            if e.weight < 0:
                raise GameError(f"negative weight for {questions_str(e.questions)}")
            if e.target not in (1, -1):
                raise GameError(f"target parity must be +1 or -1, got {e.target!r}")
            total += e.weight
        if total != 1:
            raise GameError(f"weights sum to {total}, not 1")

    @classmethod
    def from_triples(cls, entries, players: int = 3) -> GameSpec:
        """Build from ``(questions, weight, target)`` tuples; weights may be strings like "1/4"."""
        support = tuple(
            SupportEntry(parse_questions(q), _as_fraction(w), int(t)) for q, w, t in entries)
        return cls(support, players)

    def entry(self, q) -> SupportEntry:
        q = parse_questions(q)
        for e in self.support:
            if e.questions == q:
                return e
        raise GameError(f"question triple {questions_str(q)} is not in the game's support")

    def index_of(self, q) -> int:
        return self.support.index(self.entry(q))

    @property
    def triples(self) -> list[tuple[Question, ...]]:
        return [e.questions for e in self.support]

    def to_dict(self) -> dict:
        return {
            "players": self.players,
            "support": [
                {"questions": questions_str(e.questions), "weight": str(e.weight), "target": e.target}
                for e in self.support
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> GameSpec:
        try:
            entries = [(s["questions"], s["weight"], s["target"]) for s in d["support"]]
            players = int(d.get("players", 3))
        except (KeyError, TypeError) as exc:
            raise GameError(f"malformed game object: {exc}") from exc
        return cls.from_triples(entries, players)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> GameSpec:
        return cls.from_dict(json.loads(text))


def _as_fraction(w) -> Fraction:
    if isinstance(w, float):
        # floats are accepted only through their decimal text, so 0.25 -> 1/4
        return Fraction(repr(w))
    try:
        return Fraction(w)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise GameError(f"bad weight {w!r}") from exc


def make_ghz_game() -> GameSpec:
    """The canonical GHZ game: XXX must multiply to -1, XYY/YXY/YYX to +1."""
    quarter = Fraction(1, 4)
    return GameSpec.from_triples([
        ("XXX", quarter, -1),
        ("XYY", quarter, 1),
        ("YXY", quarter, 1),
        ("YYX", quarter, 1),
    ])


def is_ghz_shaped(spec: GameSpec) -> bool:
    """Three players, two questions each; the shape the threshold search supports."""
    return spec.players == 3 and all(len(e.questions) == 3 for e in spec.support)


def wins(spec: GameSpec, q, answers: Sequence) -> bool:
    """True iff every answer is +-1 and their product equals the triple's target.

    A NoDetect answer is always a loss here; post-selected scoring lives in
    :mod:`ghzlab.loopholes` and the harness.
    """
    entry = spec.entry(q)
    if len(answers) != spec.players:
        raise GameError(f"expected {spec.players} answers, got {len(answers)}")
    product = 1
    for a in answers:
        a = parse_answer(a)
        if a == NO_DETECT:
            return False
        product *= int(a)
    return product == entry.target


def sample_question(spec: GameSpec, rng: np.random.Generator) -> tuple[Question, ...]:
    """Referee's draw: one support triple with probability equal to its weight."""
    cum = np.cumsum([float(e.weight) for e in spec.support])
    u = rng.random()
    i = int(np.searchsorted(cum, u, side="right"))
    # guard against u landing past a cumsum that rounds below 1
    last = max(j for j, e in enumerate(spec.support) if e.weight > 0)
    return spec.support[min(i, last)].questions
