"""LHV adversaries that exploit the loopholes of imperfect experiments.

* Extended strategies may answer NoDetect; statistics are then post-selected
  on trials where every player produced a +-1 answer.
* A source that only sometimes emits a GHZ triplet falls back to a classical
  strategy otherwise.
* If a timeline audit finds any causal channel open, a communicating
  adversary reproduces the quantum statistics.

The detection threshold is the largest uniform detection probability at
which some post-selecting ensemble still wins every surviving trial.  It is
found by bisection over LP feasibility problems whose answers are then
re-checked in exact arithmetic: the feasible side with a rational witness
ensemble, the infeasible side with a rational dual certificate.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from ghzlab.game import NO_DETECT, GameSpec, Question, is_ghz_shaped, parse_answer
from ghzlab.lhv import LocalStrategy, MixedStrategy, classical_value, mixed_win_prob
from ghzlab.spacetime import LoopholeReport

log = logging.getLogger(__name__)

LP_FEAS_TOL = 1e-9
_HIGHS_OPTIONS = {"primal_feasibility_tolerance": LP_FEAS_TOL, "dual_feasibility_tolerance": LP_FEAS_TOL}


class LoopholeError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ExtendedStrategy:
    """Answer table whose entries may be +1, -1 or 0 (NoDetect)."""

    table: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for row in self.table:
            if len(row) != 2 or any(a not in (1, -1, 0) for a in row):
                raise LoopholeError(f"bad extended answer row {row!r}")

    @classmethod
    def from_local(cls, s: LocalStrategy) -> ExtendedStrategy:
        return cls(s.table)

    @classmethod
    def from_list(cls, rows) -> ExtendedStrategy:
        return cls(tuple((int(parse_answer(a)), int(parse_answer(b))) for a, b in rows))

    def answer(self, player: int, q: Question) -> int:
        return self.table[player][0 if q is Question.X else 1]

    def answers(self, questions) -> tuple[int, ...]:
        return tuple(self.answer(i, q) for i, q in enumerate(questions))

    def to_list(self) -> list[list]:
        return [["nd" if a == NO_DETECT else a for a in row] for row in self.table]


@dataclass(frozen=True)
class ExtendedEnsemble:
    components: tuple[tuple[ExtendedStrategy, Fraction], ...]

    def __post_init__(self):
        if not self.components:
            raise LoopholeError("empty ensemble")
        if any(w < 0 for _, w in self.components):
            raise LoopholeError("ensemble weights must be nonnegative")
        total = sum((w for _, w in self.components), Fraction(0))
        if total != 1:
            raise LoopholeError(f"ensemble weights sum to {total}, not 1")

    @classmethod
    def point(cls, s: ExtendedStrategy) -> ExtendedEnsemble:
        return cls(((s, Fraction(1)),))

    @classmethod
    def uniform(cls, strategies) -> ExtendedEnsemble:
        strategies = list(strategies)
        w = Fraction(1, len(strategies))
        return cls(tuple((s, w) for s in strategies))

    def to_list(self) -> list[dict]:
        return [{"table": s.to_list(), "weight": str(w)} for s, w in self.components]

    @classmethod
    def from_list(cls, items) -> ExtendedEnsemble:
        return cls(tuple(
            (ExtendedStrategy.from_list(c["table"]), Fraction(str(c.get("weight", "1"))))
            for c in items))


def enumerate_extended(players: int = 3) -> list[ExtendedStrategy]:
    """All 9**players extended tables (729 for three players), lexicographic."""
    rows = list(itertools.product((-1, 0, 1), repeat=2))
    return [ExtendedStrategy(t) for t in itertools.product(rows, repeat=players)]


@dataclass(frozen=True)
class PostselectedStats:
    conditional_win: Fraction | None
    per_player_detection: tuple[Fraction, ...]
    all_detected_rate: Fraction

    @property
    def no_survivors(self) -> bool:
        return self.conditional_win is None


def postselected_stats(e: ExtendedEnsemble, spec: GameSpec) -> PostselectedStats:
    """Win rate conditioned on full detection, plus detection rates.

    ``conditional_win`` is None when no trial survives post-selection.
    """
    if not isinstance(e, ExtendedEnsemble) or not e.components:
        raise LoopholeError("empty ensemble")
    detect = [Fraction(0)] * spec.players
    survive = Fraction(0)
    won = Fraction(0)
    for s, ws in e.components:
        for entry in spec.support:
            w = ws * entry.weight
            ans = s.answers(entry.questions)
            for i, a in enumerate(ans):
                if a != NO_DETECT:
                    detect[i] += w
            if NO_DETECT not in ans:
                survive += w
                if int(np.prod(ans)) == entry.target:
                    won += w
    cond = won / survive if survive else None
    return PostselectedStats(cond, tuple(detect), survive)


def detection_by_question(e: ExtendedEnsemble, spec: GameSpec) -> dict[tuple[int, tuple], Fraction]:
    """P(player i detects | question triple q) for every player and support triple."""
    out = {}
    for entry in spec.support:
        for i in range(spec.players):
            out[(i, entry.questions)] = sum(
                (w for s, w in e.components if s.answer(i, entry.questions[i]) != NO_DETECT), Fraction(0))
    return out


def min_detection(e: ExtendedEnsemble, spec: GameSpec) -> Fraction:
    return min(detection_by_question(e, spec).values())


# --- threshold search -------------------------------------------------------

class _ThresholdLP:
    """Constraint data over all extended strategies for one game."""

    def __init__(self, spec: GameSpec):
        self.spec = spec
        self.strategies = enumerate_extended(spec.players)
        self.rows = [(i, e.questions) for e in spec.support for i in range(spec.players)]
        n = len(self.strategies)
        self.detect = np.zeros((len(self.rows), n))
        self.survival = np.zeros(n)
        self.admissible = np.zeros(n, dtype=bool)
        self.survival_exact: list[Fraction] = []
        for j, s in enumerate(self.strategies):
            for r, (i, q) in enumerate(self.rows):
                self.detect[r, j] = s.answer(i, q[i]) != NO_DETECT
            surv = Fraction(0)
            ok = True
            for entry in spec.support:
                ans = s.answers(entry.questions)
                if NO_DETECT in ans or entry.weight == 0:
                    continue
                surv += entry.weight
                if int(np.prod(ans)) != entry.target:
                    ok = False
            self.admissible[j] = ok
            self.survival[j] = float(surv)
            self.survival_exact.append(surv)
        self.bounds = [(0, None) if ok else (0, 0) for ok in self.admissible]

    def feasible(self, eta: float) -> np.ndarray | None:
        """Max-survival ensemble with every detection >= eta, or None."""
        n = len(self.strategies)
        res = linprog(
            -self.survival,
            A_ub=-self.detect,
            b_ub=np.full(len(self.rows), -eta),
            A_eq=np.ones((1, n)),
            b_eq=[1.0],
            bounds=self.bounds,
            method="highs",
            options=_HIGHS_OPTIONS,
        )
        if res.status == 2:
            return None
        if res.status != 0:
            raise RuntimeError(f"threshold LP failed at eta={eta}: {res.message}")
        if -res.fun <= LP_FEAS_TOL:
            # only ensembles with no surviving trials meet the bound
            return None
        return res.x

    def max_min_detection(self) -> tuple[float, np.ndarray]:
        """Maximize the smallest detection probability; returns (value, dual row weights)."""
        n = len(self.strategies)
        m = len(self.rows)
        c = np.zeros(n + 1)
        c[-1] = -1.0
        a_ub = np.hstack([-self.detect, np.ones((m, 1))])
        a_eq = np.zeros((1, n + 1))
        a_eq[0, :n] = 1.0
        res = linprog(
            c,
            A_ub=a_ub,
            b_ub=np.zeros(m),
            A_eq=a_eq,
            b_eq=[1.0],
            bounds=self.bounds + [(None, None)],
            method="highs",
            options=_HIGHS_OPTIONS,
        )
        if res.status != 0:
            raise RuntimeError(f"max-min detection LP failed: {res.message}")
        return -res.fun, -res.ineqlin.marginals

    def exact_witness(self, x: np.ndarray, eta: Fraction) -> ExtendedEnsemble | None:
        """Round LP weights to rationals and re-verify every condition exactly."""
        for limit in (10 ** 4, 10 ** 6, 10 ** 9, None):
            comps = []
            for j, v in enumerate(x):
                if v <= 1e-12 or not self.admissible[j]:
                    continue
                f = Fraction(float(v))
                if limit is not None:
                    f = f.limit_denominator(limit)
                if f > 0:
                    comps.append((self.strategies[j], f))
            if not comps:
                continue
            total = sum(w for _, w in comps)
            ens = ExtendedEnsemble(tuple((s, w / total) for s, w in comps))
            if verify_witness(ens, self.spec, eta):
                return ens
        return None

    def exact_certificate(self, y: np.ndarray) -> tuple[tuple[Fraction, ...], Fraction]:
        """Rational dual weights and the exact bound they prove.

        For nonnegative row weights summing to one, every admissible mixture
        has its smallest detection probability at most the largest weighted
        row-sum over admissible strategies.
        """
        y = np.clip(np.asarray(y, dtype=float), 0.0, None)
        if y.sum() <= 0:
            y = np.ones(len(self.rows))
        fy = [Fraction(float(v)).limit_denominator(10 ** 6) for v in y / y.sum()]
        total = sum(fy)
        fy = tuple(v / total for v in fy)
        bound = Fraction(0)
        for j, s in enumerate(self.strategies):
            if not self.admissible[j]:
                continue
            val = sum((fy[r] for r, (i, q) in enumerate(self.rows) if s.answer(i, q[i]) != NO_DETECT),
                      Fraction(0))
            bound = max(bound, val)
        return fy, bound


    def witness(self, eta: float) -> ExtendedEnsemble | None:
        """Exactly verified witness at ``eta``, or None if the LP is infeasible.

        The LP is re-solved with a little slack above ``eta`` first so that
        rounding the weights cannot push a binding detection rate below it.
        """
        target = Fraction(repr(float(eta)))
        x = self.feasible(eta)
        if x is None:
            return None
        for slack in (1e-7, 1e-9):
            if eta + slack <= 1.0:
                xs = self.feasible(eta + slack)
                if xs is not None:
                    found = self.exact_witness(xs, target)
                    if found is not None:
                        return found
        found = self.exact_witness(x, target)
        if found is None:
            raise RuntimeError(f"LP witness at eta={eta} failed exact re-verification")
        return found


def verify_witness(e: ExtendedEnsemble, spec: GameSpec, eta: Fraction) -> bool:
    """Exact check: every surviving trial wins, some trial survives, detection >= eta."""
    stats = postselected_stats(e, spec)
    return (stats.conditional_win == 1
            and stats.all_detected_rate > 0
            and min_detection(e, spec) >= eta)


@dataclass(frozen=True)
class ThresholdResult:
    eta_star: float
    witness: ExtendedEnsemble
    tolerance: float
    witness_eta: float
    witness_min_detection: Fraction
    infeasible_eta: float | None
    certificate_bound: Fraction | None
    certificate_weights: tuple[Fraction, ...] | None
    bracket: tuple[float, float]
    evaluations: tuple[tuple[float, bool], ...] = field(repr=False, default=())

    def to_dict(self) -> dict:
        return {
            "eta_star": self.eta_star,
            "witness": self.witness.to_list(),
            "tolerance": self.tolerance,
            "feasible_at": self.witness_eta,
            "witness_min_detection": str(self.witness_min_detection),
            "infeasible_at": self.infeasible_eta,
            "certificate_bound": None if self.certificate_bound is None else str(self.certificate_bound),
            "certificate_weights": (None if self.certificate_weights is None
                                    else [str(v) for v in self.certificate_weights]),
            "bracket": list(self.bracket),
            "lp_evaluations": len(self.evaluations),
        }


def detection_threshold(spec: GameSpec, tol: float = 1e-6) -> ThresholdResult:
    """Largest uniform detection efficiency an adversary can fake certainty at."""
    if not tol > 0:
        raise LoopholeError(f"tolerance must be positive, got {tol!r}")
    if not is_ghz_shaped(spec):
        raise LoopholeError("unsupported game shape: need 3 players with 2 questions each")
    lp = _ThresholdLP(spec)
    evaluations: list[tuple[float, bool]] = []

    def feasible(eta: float) -> bool:
        ok = lp.feasible(eta) is not None
        evaluations.append((eta, ok))
        # monotone: nothing above an infeasible eta may be feasible
        for e2, ok2 in evaluations:
            if (ok and not ok2 and e2 < eta) or (ok2 and not ok and e2 > eta):
                raise RuntimeError(f"feasibility not monotone between eta={e2} and eta={eta}")
        return ok

    if not feasible(0.0):
        raise LoopholeError("no post-selecting ensemble wins every surviving trial")
    lo, hi = 0.0, 1.0
    if feasible(1.0):
        lo = hi = 1.0
    else:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
    eta_star = lo
    witness_eta = max(0.0, eta_star - tol)
    witness = lp.witness(witness_eta)
    if witness is None:
        raise RuntimeError(f"LP infeasible at eta*-tol = {witness_eta}")

    infeasible_eta = cert_bound = cert_weights = None
    if eta_star < 1.0:
        infeasible_eta = min(1.0, eta_star + tol)
        _, y = lp.max_min_detection()
        cert_weights, cert_bound = lp.exact_certificate(y)
        if not cert_bound < Fraction(infeasible_eta):
            raise RuntimeError(
                f"dual certificate bound {cert_bound} does not exclude eta={infeasible_eta}")
        if lp.feasible(infeasible_eta) is not None:
            raise RuntimeError(f"LP reports feasibility at eta*+tol = {infeasible_eta}")
    log.info("detection threshold %.9f after %d LP solves", eta_star, len(evaluations))
    return ThresholdResult(
        eta_star=eta_star,
        witness=witness,
        tolerance=tol,
        witness_eta=witness_eta,
        witness_min_detection=min_detection(witness, spec),
        infeasible_eta=infeasible_eta,
        certificate_bound=cert_bound,
        certificate_weights=cert_weights,
        bracket=(lo, hi),
        evaluations=tuple(evaluations),
    )


def threshold_feasible(spec: GameSpec, eta: float) -> ExtendedEnsemble | None:
    """Exactly verified witness ensemble at ``eta``, or None if the LP is infeasible."""
    return _ThresholdLP(spec).witness(eta)


# --- source and communication adversaries ----------------------------------

@dataclass(frozen=True)
class SourceModel:
    """Emits a GHZ triplet with probability p; otherwise players use ``fallback``."""

    emission_probability: Fraction
    fallback: MixedStrategy

    def __post_init__(self):
        p = Fraction(self.emission_probability)
        if not 0 <= p <= 1:
            raise LoopholeError(f"emission probability must lie in [0, 1], got {p}")
        object.__setattr__(self, "emission_probability", p)


def source_win_prob(m: SourceModel, spec: GameSpec) -> Fraction:
    """Ideal quantum play (certain win) on emitted triplets, the fallback otherwise."""
    p = m.emission_probability
    return p + (1 - p) * mixed_win_prob(m.fallback, spec)


@dataclass(frozen=True)
class CommunicationModel:
    channels: LoopholeReport

    @property
    def any_open(self) -> bool:
        return not self.channels.all_closed


def communication_win_prob(c: CommunicationModel, spec: GameSpec) -> Fraction:
    """1 when any channel is open (the adversary can fake the quantum team), else the classical value."""
    if c.any_open:
        return Fraction(1)
    return classical_value(spec)[0]

