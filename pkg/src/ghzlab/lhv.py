"""Local hidden variable strategies and the exact classical value.

Every LHV model is a mixture of deterministic answer tables, so the classical
value is a maximum over the 64 tables of the three-player game.  The LP over
mixture weights is kept as an independent check of that maximum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from ghzlab.game import GameError, GameSpec, Question, parse_answer

LP_TOL = 1e-9


@dataclass(frozen=True, order=True)
class LocalStrategy:
    """Per-player answer table: ``table[i] == (answer_for_X, answer_for_Y)``."""

    table: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for row in self.table:
            if len(row) != 2 or any(a not in (1, -1) for a in row):
                raise GameError(f"local strategies answer +1 or -1 only, got {row!r}")

    @classmethod
    def from_xy(cls, x: Sequence[int], y: Sequence[int]) -> LocalStrategy:
        return cls(tuple((int(a), int(b)) for a, b in zip(x, y)))

    @property
    def players(self) -> int:
        return len(self.table)

    def answer(self, player: int, q: Question) -> int:
        return self.table[player][0 if q is Question.X else 1]

    def answers(self, questions) -> tuple[int, ...]:
        return tuple(self.answer(i, q) for i, q in enumerate(questions))

    def to_list(self) -> list[list[int]]:
        return [list(r) for r in self.table]

    @classmethod
    def from_list(cls, rows) -> LocalStrategy:
        return cls(tuple((int(parse_answer(a)), int(parse_answer(b))) for a, b in rows))


@dataclass(frozen=True)
class MixedStrategy:
    """Shared randomness over deterministic tables."""

    components: tuple[tuple[LocalStrategy, Fraction], ...]

    def __post_init__(self):
        if not self.components:
            raise GameError("empty mixture")
        if any(w < 0 for _, w in self.components):
            raise GameError("mixture weights must be nonnegative")
        total = sum((w for _, w in self.components), Fraction(0))
        if total != 1:
            raise GameError(f"mixture weights sum to {total}, not 1")

    @classmethod
    def point(cls, s: LocalStrategy) -> MixedStrategy:
        return cls(((s, Fraction(1)),))

    @classmethod
    def uniform(cls, strategies: Sequence[LocalStrategy]) -> MixedStrategy:
        w = Fraction(1, len(strategies))
        return cls(tuple((s, w) for s in strategies))


def enumerate_deterministic(spec: GameSpec) -> list[LocalStrategy]:
    """All 4**players answer tables (64 for the GHZ game), in lexicographic order."""
    rows = list(itertools.product((-1, 1), repeat=2))
    return [LocalStrategy(t) for t in itertools.product(rows, repeat=spec.players)]


def _satisfies(s: LocalStrategy, questions, target: int) -> bool:
    return int(np.prod(s.answers(questions))) == target


def strategy_win_prob(s: LocalStrategy, spec: GameSpec) -> Fraction:
    if s.players != spec.players:
        raise GameError("strategy and game disagree on the number of players")
    return sum((e.weight for e in spec.support if _satisfies(s, e.questions, e.target)), Fraction(0))


def classical_value(spec: GameSpec) -> tuple[Fraction, list[LocalStrategy]]:
    """Exact classical value and every deterministic table attaining it."""
    scored = [(strategy_win_prob(s, spec), s) for s in enumerate_deterministic(spec)]
    best = max(v for v, _ in scored)
    return best, sorted(s for v, s in scored if v == best)


def mixed_win_prob(m: MixedStrategy, spec: GameSpec) -> Fraction:
    return sum((w * strategy_win_prob(s, spec) for s, w in m.components), Fraction(0))


def best_classical(spec: GameSpec) -> LocalStrategy:
    """First maximizer in lexicographic order; the harness's default classical player."""
    return classical_value(spec)[1][0]


def classical_value_lp(spec: GameSpec) -> tuple[float, np.ndarray]:
    """Maximize expected win over mixture weights on the probability simplex.

    Returns the float optimum and the weight vector (ordered as
    :func:`enumerate_deterministic`).  Redundant by convexity; kept as an
    oracle for :func:`classical_value`.
    """
    strategies = enumerate_deterministic(spec)
    values = np.array([float(strategy_win_prob(s, spec)) for s in strategies])
    n = len(strategies)
    res = linprog(
        -values,
        A_eq=np.ones((1, n)),
        b_eq=[1.0],
        bounds=[(0, None)] * n,
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"classical LP failed: {res.message}")
    return -res.fun, res.x


def snap_lp_value(lp_value: float, exact: Fraction, tol: float = LP_TOL) -> Fraction:
    """Return ``exact`` if the LP optimum agrees with it to ``tol``; raise otherwise."""
    if abs(lp_value - float(exact)) > tol:
        raise ArithmeticError(f"LP optimum {lp_value!r} disagrees with enumeration {exact}")
    return exact


def mixture_from_dict(d) -> MixedStrategy:
    comps = tuple(
        (LocalStrategy.from_list(c["table"]), Fraction(str(c.get("weight", "1"))))
        for c in d)
    return MixedStrategy(comps)

