"""Dense statevector backend: GHZ preparation and Pauli-basis measurement.

Qubit 0 is the most significant bit of the basis index, so ``|q0 q1 q2>``
sits at index ``q0*4 + q1*2 + q2``.  Outcome ``+1`` of a Pauli is its
+1-eigenvector; for Z that is ``|0>``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ghzlab.game import GameError, GameSpec, Question

MAX_QUBITS = 16
NORM_TOL = 1e-12
CLAMP = 1e-14


class Pauli(enum.Enum):
    X = "X"
    Y = "Y"
    Z = "Z"

    @classmethod
    def parse(cls, name) -> Pauli:
        if isinstance(name, Pauli):
            return name
        key = str(name).strip().upper()
        if key.startswith("PAULI"):
            key = key[5:]
        try:
            return cls(key)
        except ValueError as exc:
            raise GameError(f"unknown observable {name!r}") from exc


_S = 1 / np.sqrt(2)

# rows are the conjugated eigenvectors for eigenvalue +1 then -1, so applying
# the matrix to a qubit axis gives the amplitudes in that Pauli's eigenbasis
_EIGEN_ROWS = {
    Pauli.X: np.array([[_S, _S], [_S, -_S]], dtype=complex),
    Pauli.Y: np.array([[_S, -1j * _S], [_S, 1j * _S]], dtype=complex),
    Pauli.Z: np.eye(2, dtype=complex),
}

PAULI_MATRICES = {
    Pauli.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Pauli.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    Pauli.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}


class QuantumError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise QuantumError(f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1).copy()
        if amps.shape[0] != 2 ** self.n_qubits:
            raise QuantumError(f"expected {2 ** self.n_qubits} amplitudes, got {amps.shape[0]}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise QuantumError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits


def ghz_state(n: int = 3, sign: str | int = "-") -> StateVector:
    """(|0...0> + sign |1...1>)/sqrt(2)."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise QuantumError(f"n must be in 1..{MAX_QUBITS}, got {n!r}")
    s = _parse_sign(sign)
    amps = np.zeros(2 ** n, dtype=complex)
    amps[0] = _S
    amps[-1] = s * _S
    return StateVector(n, amps)


def basis_state(bits: str) -> StateVector:
    """Computational basis state from a bit string, e.g. ``"000"``."""
    if not bits or any(b not in "01" for b in bits):
        raise QuantumError(f"bad bit string {bits!r}")
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(len(bits), amps)


def _parse_sign(sign) -> int:
    if sign in ("-", -1, "minus"):
        return -1
    if sign in ("+", 1, "plus"):
        return 1
    raise QuantumError(f"sign must be '+' or '-', got {sign!r}")


@dataclass(frozen=True)
class MeasurementAssignment:
    """Which Pauli each player measures for each question."""

    settings: tuple[Mapping[Question, Pauli], ...]

    def __post_init__(self):
        for m in self.settings:
            if set(m) != {Question.X, Question.Y}:
                raise QuantumError("each player needs an observable for both X and Y")

    @classmethod
    def uniform(cls, players: int = 3, x=Pauli.X, y=Pauli.Y) -> MeasurementAssignment:
        m = {Question.X: Pauli.parse(x), Question.Y: Pauli.parse(y)}
        return cls(tuple(dict(m) for _ in range(players)))

    def observables(self, questions: Sequence[Question]) -> tuple[Pauli, ...]:
        return tuple(self.settings[i][q] for i, q in enumerate(questions))


def outcome_triples(n: int) -> list[tuple[int, ...]]:
    """All +-1 outcome tuples, ordered with +1 before -1 per position."""
    return list(itertools.product((1, -1), repeat=n))


def outcome_probabilities(state: StateVector, obs: Sequence) -> np.ndarray:
    """Born probabilities as an array ordered like :func:`outcome_triples`."""
    obs = [Pauli.parse(o) for o in obs]
    if len(obs) != state.n_qubits:
        raise QuantumError(f"{len(obs)} observables for {state.n_qubits} qubits")
    psi = state.amplitudes.reshape((2,) * state.n_qubits)
    for k, p in enumerate(obs):
        psi = np.moveaxis(np.tensordot(_EIGEN_ROWS[p], psi, axes=([1], [k])), 0, k)
    probs = np.abs(psi.reshape(-1)) ** 2
    probs[probs < CLAMP] = 0.0
    return probs


def joint_outcome_distribution(state: StateVector, obs: Sequence) -> dict[tuple[int, ...], float]:
    probs = outcome_probabilities(state, obs)
    return dict(zip(outcome_triples(state.n_qubits), probs.tolist()))


def sample_outcomes(state: StateVector, obs: Sequence, rng: np.random.Generator, size: int | None = None):
    """One outcome tuple, or an ``(size, n)`` array of +-1 outcomes."""
    probs = outcome_probabilities(state, obs)
    triples = outcome_triples(state.n_qubits)
    if size is None:
        return triples[rng.choice(len(probs), p=probs / probs.sum())]
    idx = rng.choice(len(probs), size=size, p=probs / probs.sum())
    return np.array(triples, dtype=np.int8)[idx]


def expectation(state: StateVector, obs: Sequence) -> float:
    """<psi| P1 x P2 x ... |psi> from the outcome distribution."""
    probs = outcome_probabilities(state, obs)
    signs = np.array([np.prod(t) for t in outcome_triples(state.n_qubits)])
    return float(signs @ probs)


def quantum_win_prob(spec: GameSpec, state: StateVector, assign: MeasurementAssignment) -> float:
    if not spec.players == state.n_qubits == len(assign.settings):
        raise QuantumError("game players, qubits and assignment must agree")
    signs = np.array([np.prod(t) for t in outcome_triples(state.n_qubits)])
    total = 0.0
    for e in spec.support:
        probs = outcome_probabilities(state, assign.observables(e.questions))
        total += float(e.weight) * float(probs[signs == e.target].sum())
    return total


def win_outcome_table(spec: GameSpec, state: StateVector, assign: MeasurementAssignment) -> np.ndarray:
    """Outcome probabilities per support entry, shape ``(len(support), 2**n)``."""
    return np.array([outcome_probabilities(state, assign.observables(e.questions)) for e in spec.support])
