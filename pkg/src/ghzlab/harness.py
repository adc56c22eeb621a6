"""Seeded Monte Carlo runner and the statistics reported with each run.

Any strategy is first reduced to a response table: for each question triple
of the game, a distribution over joint answers (each player +1, -1 or
NoDetect).  The kernel then plays trials whose randomness comes from a
counter-based stream keyed by ``(master_seed, trial index)``, so results do
not depend on how trials are split across workers.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist
from typing import Any

import numpy as np
from scipy.special import gammaln, logsumexp

from ghzlab import kernels
from ghzlab.game import NO_DETECT, GameSpec, parse_questions
from ghzlab.lhv import LocalStrategy, MixedStrategy, best_classical
from ghzlab.loopholes import (
    CommunicationModel, ExtendedEnsemble, ExtendedStrategy, SourceModel,
)
from ghzlab.quantum import (
    MeasurementAssignment, Pauli, StateVector, basis_state, ghz_state, outcome_probabilities,
    outcome_triples,
)
from ghzlab.spacetime import ExperimentTimeline, audit, make_preset

DEFAULT_CONFIDENCE = 0.95
DEFAULT_P0 = Fraction(3, 4)
SCORINGS = ("strict", "postselect")
_MASK64 = (1 << 64) - 1


class HarnessError(ValueError):
    pass


@dataclass(frozen=True)
class QuantumStrategy:
    """Players share ``state`` and measure the Paulis given by ``assignment``."""

    state: StateVector
    assignment: MeasurementAssignment
    label: str = ""

    @classmethod
    def ideal(cls, players: int = 3) -> QuantumStrategy:
        return cls(ghz_state(players, "-"), MeasurementAssignment.uniform(players), "ghz-")


# --- answer codes -------------------------------------------------------------

_DIGIT = {1: 0, -1: 1, 0: 2}
_ANSWER = (1, -1, 0)


def answer_code(answers) -> int:
    code = 0
    for a in answers:
        code = code * 3 + _DIGIT[int(a)]
    return code


def decode_answers(code: int, players: int) -> tuple[int, ...]:
    out = []
    for _ in range(players):
        code, d = divmod(code, 3)
        out.append(_ANSWER[d])
    return tuple(reversed(out))


def _answer_space(players: int) -> list[tuple[int, ...]]:
    return list(itertools.product(_ANSWER, repeat=players))


# --- response tables ----------------------------------------------------------

def _deterministic_rows(components, spec: GameSpec) -> np.ndarray:
    m = 3 ** spec.players
    table = np.zeros((len(spec.support), m))
    for s, w in components:
        for k, e in enumerate(spec.support):
            table[k, answer_code(s.answers(e.questions))] += float(w)
    return table


def _quantum_rows(q: QuantumStrategy, spec: GameSpec) -> np.ndarray:
    if q.state.n_qubits != spec.players:
        raise HarnessError("state qubits must match the number of players")
    m = 3 ** spec.players
    codes = [answer_code(t) for t in outcome_triples(spec.players)]
    table = np.zeros((len(spec.support), m))
    for k, e in enumerate(spec.support):
        table[k, codes] = outcome_probabilities(q.state, q.assignment.observables(e.questions))
    return table


def response_table(strategy, spec: GameSpec) -> np.ndarray:
    """P(joint answer code | support entry), shape ``(len(support), 3**players)``."""
    if isinstance(strategy, (LocalStrategy, ExtendedStrategy)):
        return _deterministic_rows([(strategy, 1)], spec)
    if isinstance(strategy, (MixedStrategy, ExtendedEnsemble)):
        return _deterministic_rows(strategy.components, spec)
    if isinstance(strategy, QuantumStrategy):
        return _quantum_rows(strategy, spec)
    if isinstance(strategy, SourceModel):
        p = float(strategy.emission_probability)
        return (p * _quantum_rows(QuantumStrategy.ideal(spec.players), spec)
                + (1 - p) * _deterministic_rows(strategy.fallback.components, spec))
    if isinstance(strategy, CommunicationModel):
        # an open channel lets the adversary reproduce the quantum statistics outright
        if strategy.any_open:
            return _quantum_rows(QuantumStrategy.ideal(spec.players), spec)
        return _deterministic_rows([(best_classical(spec), 1)], spec)
    raise HarnessError(f"unknown strategy type {type(strategy).__name__}")


def _cumulative(p: np.ndarray) -> np.ndarray:
    """Row-wise cumulative sums whose last positive entry is pushed past 1."""
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    if (p < 0).any():
        raise HarnessError("negative probability in response table")
    cum = np.cumsum(p, axis=1)
    for row, prow in zip(cum, p):
        pos = np.flatnonzero(prow > 0)
        if pos.size == 0:
            raise HarnessError("response table row has no mass")
        if abs(row[-1] - 1.0) > 1e-9:
            raise HarnessError(f"response table row sums to {row[-1]!r}")
        row[pos[-1]:] = 2.0
    return np.ascontiguousarray(cum)


def _win_tables(spec: GameSpec) -> tuple[np.ndarray, np.ndarray]:
    space = _answer_space(spec.players)
    detected = np.array([NO_DETECT not in a for a in space], dtype=np.uint8)
    win = np.zeros((len(spec.support), len(space)), dtype=np.uint8)
    for k, e in enumerate(spec.support):
        for c, a in enumerate(space):
            win[k, c] = detected[c] and int(np.prod(a)) == e.target
    return win, detected


# --- randomness -----------------------------------------------------------------

def mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def master_key(master_seed: int) -> int:
    return mix64(int(master_seed) & _MASK64)


# --- statistics ---------------------------------------------------------------

def wilson_interval(wins: int, n: int, confidence: float = DEFAULT_CONFIDENCE) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1 or not 0 <= wins <= n:
        raise HarnessError(f"need 0 <= wins <= n and n >= 1, got wins={wins}, n={n}")
    if not 0 < confidence < 1:
        raise HarnessError(f"confidence must lie in (0, 1), got {confidence!r}")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p = wins / n
    z2n = z * z / n
    centre = (p + z2n / 2) / (1 + z2n)
    half = z / (1 + z2n) * math.sqrt(p * (1 - p) / n + z2n / (4 * n))
    lo = 0.0 if wins == 0 else max(0.0, min(p, centre - half))
    hi = 1.0 if wins == n else min(1.0, max(p, centre + half))
    return lo, hi


def binomial_log_sf(wins: int, n: int, p0=DEFAULT_P0) -> float:
    """Natural log of P(W >= wins) for W ~ Binomial(n, p0)."""
    if n < 0 or not 0 <= wins <= n:
        raise HarnessError(f"need 0 <= wins <= n, got wins={wins}, n={n}")
    p0 = float(Fraction(p0))
    if not 0 <= p0 <= 1:
        raise HarnessError(f"p0 must lie in [0, 1], got {p0!r}")
    if wins == 0:
        return 0.0
    if p0 == 0.0:
        return -math.inf
    if p0 == 1.0:
        return 0.0
    k = np.arange(wins, n + 1, dtype=np.float64)
    logpmf = (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
              + k * math.log(p0) + (n - k) * math.log1p(-p0))
    return min(0.0, float(logsumexp(logpmf)))


def binomial_test_geq(wins: int, n: int, p0=DEFAULT_P0) -> float:
    """Exact one-sided p-value P(W >= wins | n, p0), summed in log space."""
    return math.exp(binomial_log_sf(wins, n, p0))


# --- runner -------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    index: int
    question: tuple
    answers: tuple[int, ...]
    won: bool


@dataclass
class RunReport:
    trials: int
    wins: int
    discarded: int
    win_rate: float | None
    interval: tuple[float, float] | None
    p_value_vs_bound: float | None
    master_seed: int
    strategy: dict
    scoring: str = "strict"
    scored_trials: int = 0
    nodetect_trials: int = 0
    log10_p_value_vs_bound: float | None = None
    confidence: float = DEFAULT_CONFIDENCE
    p0: str = str(DEFAULT_P0)
    records: list[TrialRecord] | None = field(default=None, repr=False)

    def counts(self) -> dict:
        return {"trials": self.trials, "wins": self.wins, "discarded": self.discarded,
                "nodetect_trials": self.nodetect_trials}

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "wins": self.wins,
            "discarded": self.discarded,
            "win_rate": self.win_rate,
            "interval": None if self.interval is None else list(self.interval),
            "p_value_vs_bound": self.p_value_vs_bound,
            "master_seed": self.master_seed,
            "strategy": self.strategy,
            "scoring": self.scoring,
            "scored_trials": self.scored_trials,
            "nodetect_trials": self.nodetect_trials,
            "log10_p_value_vs_bound": self.log10_p_value_vs_bound,
            "confidence": self.confidence,
            "p0": self.p0,
        }


def run_trials(spec: GameSpec, strategy, n: int, master_seed: int, scoring: str = "strict", *,
               workers: int = 1, confidence: float = DEFAULT_CONFIDENCE, p0=DEFAULT_P0,
               record: bool = False, backend: str | None = None) -> RunReport:
    """Play ``n`` seeded trials of ``strategy`` and summarize them.

    ``strict`` scoring counts a NoDetect answer as a loss; ``postselect``
    discards such trials before computing the win rate.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise HarnessError(f"number of trials must be a positive integer, got {n!r}")
    if scoring not in SCORINGS:
        raise HarnessError(f"scoring must be one of {SCORINGS}, got {scoring!r}")
    if workers < 1:
        raise HarnessError("workers must be >= 1")
    kernel = kernels.get_backend(backend)
    descriptor = describe_strategy(strategy)
    q_cum = _cumulative([[float(e.weight) for e in spec.support]])[0]
    a_cum = _cumulative(response_table(strategy, spec))
    win, detected = _win_tables(spec)
    key = master_key(master_seed)

    n = int(n)
    bounds = np.linspace(0, n, min(workers, n) + 1).astype(np.int64)
    out_q = np.empty(n, dtype=np.int16) if record else None
    out_a = np.empty(n, dtype=np.int16) if record else None

    def block(j):
        lo, hi = int(bounds[j]), int(bounds[j + 1])
        oq = out_q[lo:hi] if record else None
        oa = out_a[lo:hi] if record else None
        return kernel.run_block(key, lo, hi, q_cum, a_cum, win, detected, oq, oa)

    if len(bounds) == 2:
        parts = [block(0)]
    else:
        with ThreadPoolExecutor(max_workers=len(bounds) - 1) as pool:
            parts = list(pool.map(block, range(len(bounds) - 1)))
    wins = sum(p[0] for p in parts)
    nodetect = sum(p[1] for p in parts)

    discarded = nodetect if scoring == "postselect" else 0
    scored = n - discarded
    if scored > 0:
        win_rate = wins / scored
        interval = wilson_interval(wins, scored, confidence)
        log_p = binomial_log_sf(wins, scored, p0)
        p_value = math.exp(log_p)
        log10_p = log_p / math.log(10)
    else:
        win_rate = interval = p_value = log10_p = None

    records = None
    if record:
        records = []
        for i in range(n):
            e = spec.support[out_q[i]]
            ans = decode_answers(int(out_a[i]), spec.players)
            records.append(TrialRecord(i, e.questions, ans, bool(win[out_q[i], out_a[i]])))

    return RunReport(
        trials=n, wins=wins, discarded=discarded, win_rate=win_rate, interval=interval,
        p_value_vs_bound=p_value, master_seed=int(master_seed), strategy=descriptor,
        scoring=scoring, scored_trials=scored, nodetect_trials=nodetect,
        log10_p_value_vs_bound=log10_p, confidence=confidence, p0=str(Fraction(p0)),
        records=records,
    )


def write_trials_csv(path, records: list[TrialRecord], players: int = 3) -> None:
    header = (["index"] + [f"q{i + 1}" for i in range(players)]
              + [f"a{i + 1}" for i in range(players)] + ["won"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            w.writerow([r.index] + [q.value for q in r.question]
                       + ["nd" if a == 0 else a for a in r.answers] + [int(r.won)])


# --- strategy descriptors -------------------------------------------------------

def describe_strategy(strategy) -> dict[str, Any]:
    if isinstance(strategy, LocalStrategy):
        return {"kind": "lhv", "components": [{"table": strategy.to_list(), "weight": "1"}]}
    if isinstance(strategy, MixedStrategy):
        return {"kind": "lhv", "components": [{"table": s.to_list(), "weight": str(w)}
                                               for s, w in strategy.components]}
    if isinstance(strategy, ExtendedStrategy):
        return {"kind": "extended", "components": [{"table": strategy.to_list(), "weight": "1"}]}
    if isinstance(strategy, ExtendedEnsemble):
        return {"kind": "extended", "components": strategy.to_list()}
    if isinstance(strategy, QuantumStrategy):
        return {
            "kind": "quantum",
            "state": strategy.label or "custom",
            "assignment": [{q.value: p.value for q, p in m.items()} for m in strategy.assignment.settings],
        }
    if isinstance(strategy, SourceModel):
        return {"kind": "source", "p": str(strategy.emission_probability),
                "fallback": [{"table": s.to_list(), "weight": str(w)} for s, w in strategy.fallback.components]}
    if isinstance(strategy, CommunicationModel):
        return {"kind": "communication", "timeline": strategy.channels.timeline_name,
                "channel_open": strategy.any_open}
    raise HarnessError(f"unknown strategy type {type(strategy).__name__}")


def _components(items, cls):
    return tuple((cls.from_list(c["table"]), Fraction(str(c.get("weight", "1")))) for c in items)


def state_from_name(name: str, players: int = 3) -> StateVector:
    key = str(name).lower()
    if key in ("ghz-", "ghz_minus", "ghz"):
        return ghz_state(players, "-")
    if key in ("ghz+", "ghz_plus"):
        return ghz_state(players, "+")
    if key in ("product", "zero"):
        return basis_state("0" * players)
    if set(key) <= {"0", "1"} and len(key) == players:
        return basis_state(key)
    raise HarnessError(f"unknown state {name!r}")


def assignment_from_config(a, players: int = 3) -> MeasurementAssignment:
    if a is None:
        return MeasurementAssignment.uniform(players)
    if isinstance(a, dict):
        return MeasurementAssignment.uniform(players, a.get("X", "X"), a.get("Y", "Y"))
    settings = []
    for m in a:
        settings.append({q: Pauli.parse(m[q.value]) for q in parse_questions("XY")})
    return MeasurementAssignment(tuple(settings))


def strategy_from_dict(d: dict, spec: GameSpec):
    """Build a strategy from its JSON descriptor (the inverse of :func:`describe_strategy`)."""
    try:
        kind = d["kind"]
        if kind in ("lhv", "classical"):
            if d.get("strategy", "best") == "best" and "components" not in d and "table" not in d:
                return best_classical(spec)
            if "table" in d:
                return LocalStrategy.from_list(d["table"])
            return MixedStrategy(_components(d["components"], LocalStrategy))
        if kind == "quantum":
            label = str(d.get("state", "ghz-"))
            return QuantumStrategy(state_from_name(label, spec.players),
                                   assignment_from_config(d.get("assignment"), spec.players), label)
        if kind in ("extended", "loophole", "detection"):
            if "table" in d:
                return ExtendedStrategy.from_list(d["table"])
            return ExtendedEnsemble(_components(d["components"], ExtendedStrategy))
        if kind == "source":
            fb = d.get("fallback", "best")
            fallback = (MixedStrategy.point(best_classical(spec)) if fb == "best"
                        else MixedStrategy(_components(fb, LocalStrategy)))
            return SourceModel(Fraction(str(d["p"])), fallback)
        if kind == "communication":
            timeline = d.get("timeline", d.get("preset", "rowe"))
            if isinstance(timeline, str):
                timeline = make_preset(timeline)
            elif isinstance(timeline, dict):
                timeline = ExperimentTimeline.from_dict(timeline)
            return CommunicationModel(audit(timeline))
    except (KeyError, TypeError) as exc:
        raise HarnessError(f"malformed strategy descriptor: {exc}") from exc
    except (ValueError, ZeroDivisionError) as exc:
        raise HarnessError(str(exc)) from exc
    raise HarnessError(f"unknown strategy kind {d.get('kind')!r}")

