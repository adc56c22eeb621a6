import itertools
from functools import reduce

import numpy as np
import pytest

from ghzlab.game import GameError
from ghzlab.quantum import (
    PAULI_MATRICES, MeasurementAssignment, Pauli, QuantumError, StateVector, basis_state, expectation,
    ghz_state, joint_outcome_distribution, outcome_triples, quantum_win_prob, sample_outcomes,
)

I2 = np.eye(2)


def kron(*ms):
    return reduce(np.kron, ms)


def projector_oracle(amps, paulis):
    """Born probabilities from full 2^n x 2^n projectors (I + s P)/2."""
    out = {}
    for signs in itertools.product((1, -1), repeat=len(paulis)):
        proj = kron(*[(I2 + s * PAULI_MATRICES[p]) / 2 for s, p in zip(signs, paulis)])
        out[signs] = float(np.real(np.vdot(amps, proj @ amps)))
    return out


def test_ghz_amplitudes():
    s = ghz_state(3, "-")
    expected = np.zeros(8)
    expected[0], expected[7] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    np.testing.assert_allclose(s.amplitudes, expected, atol=1e-15)
    assert abs(np.vdot(s.amplitudes, s.amplitudes) - 1) < 1e-12


def test_xxx_expectation_matches_direct_matrix():
    s = ghz_state(3, "-")
    X = PAULI_MATRICES[Pauli.X]
    direct = np.real(np.vdot(s.amplitudes, kron(X, X, X) @ s.amplitudes))
    assert abs(direct + 1) < 1e-12
    assert abs(expectation(s, "XXX") + 1) < 1e-12


@pytest.mark.parametrize("n", [0, 17, -1])
def test_ghz_range(n):
    with pytest.raises(QuantumError):
        ghz_state(n)


def test_state_must_be_normalized():
    with pytest.raises(QuantumError):
        StateVector(1, np.array([1.0, 1.0]))
    with pytest.raises(QuantumError):
        StateVector(2, np.array([1.0, 0.0]))


@pytest.mark.parametrize("state, obs", [
    ("ghz-", "XXX"), ("ghz-", "XYY"), ("ghz-", "YXY"), ("ghz+", "YYX"), ("000", "XXX"),
    ("000", "ZXY"), ("101", "ZZZ"), ("ghz-", "YYY"),
])
def test_distribution_matches_projector_oracle(state, obs):
    s = {"ghz-": ghz_state(3, "-"), "ghz+": ghz_state(3, "+")}.get(state) or basis_state(state)
    dist = joint_outcome_distribution(s, obs)
    oracle = projector_oracle(s.amplitudes, [Pauli(o) for o in obs])
    for k in oracle:
        assert abs(dist[k] - oracle[k]) < 1e-12
    assert abs(sum(dist.values()) - 1) < 1e-12
    assert min(dist.values()) >= 0


def test_ghz_minus_supports_only_target_parity():
    s = ghz_state(3, "-")
    xxx = joint_outcome_distribution(s, "XXX")
    xyy = joint_outcome_distribution(s, "XYY")
    for t in outcome_triples(3):
        prod = t[0] * t[1] * t[2]
        assert xxx[t] == pytest.approx(0.25 if prod == -1 else 0.0, abs=1e-12)
        assert xyy[t] == pytest.approx(0.25 if prod == 1 else 0.0, abs=1e-12)
        if prod == 1:
            assert xxx[t] == 0.0  # dust is clamped to exact zero


def test_product_state_uniform_in_x_basis():
    dist = joint_outcome_distribution(basis_state("000"), "XXX")
    assert all(abs(p - 1 / 8) < 1e-12 for p in dist.values())


def test_dimension_mismatch():
    with pytest.raises(QuantumError):
        joint_outcome_distribution(ghz_state(3), "XX")


def test_win_probabilities(ghz):
    a = MeasurementAssignment.uniform()
    assert abs(quantum_win_prob(ghz, ghz_state(3, "-"), a) - 1) < 1e-12
    assert abs(quantum_win_prob(ghz, ghz_state(3, "+"), a)) < 1e-12
    assert abs(quantum_win_prob(ghz, basis_state("000"), a) - 0.5) < 1e-12


def test_assignment_must_be_total():
    from ghzlab.game import Question
    with pytest.raises(QuantumError):
        MeasurementAssignment(({Question.X: Pauli.X},) * 3)


def test_pauli_names():
    assert Pauli.parse("PauliX") is Pauli.X
    assert Pauli.parse("y") is Pauli.Y
    with pytest.raises(GameError):
        Pauli.parse("W")


@pytest.mark.parametrize("obs", ["XXX", "XYY", "YXY", "YYX"])
def test_single_player_marginals_are_unbiased(obs):
    dist = joint_outcome_distribution(ghz_state(3, "-"), obs)
    for player in range(3):
        plus = sum(p for t, p in dist.items() if t[player] == 1)
        assert abs(plus - 0.5) < 1e-12


def test_sampling_reproducible_and_supported():
    s = ghz_state(3, "-")
    a = [sample_outcomes(s, "XXX", np.random.default_rng(5)) for _ in range(3)]
    assert a[0] == a[1] == a[2]
    rng = np.random.default_rng(6)
    for _ in range(2000):
        t = sample_outcomes(s, "XXX", rng)
        assert t[0] * t[1] * t[2] == -1


@pytest.mark.parametrize("state, obs", [("ghz-", "XYY"), ("000", "XXX"), ("ghz-", "YYY")])
def test_sampling_chi_square(state, obs):
    s = ghz_state(3, "-") if state == "ghz-" else basis_state(state)
    exact = joint_outcome_distribution(s, obs)
    rng = np.random.default_rng(99)
    n = 100_000
    counts = dict.fromkeys(exact, 0)
    for _ in range(n):
        counts[sample_outcomes(s, obs, rng)] += 1
    support = [t for t, p in exact.items() if p > 0]
    assert all(counts[t] == 0 for t, p in exact.items() if p == 0)
    chi2 = sum((counts[t] - n * exact[t]) ** 2 / (n * exact[t]) for t in support)
    dof = len(support) - 1
    assert chi2 < dof + 4 * np.sqrt(2 * dof)
