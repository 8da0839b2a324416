import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import norm

from mqsprep import qmc
from mqsprep.simcore import (
    CircuitBuilder, RegisterLayout, StateVector, apply_to_array, circuit_unitary,
)


@given(st.integers(0, 10_000))
def test_grid_loader_amplitudes(seed):
    rng = np.random.default_rng(seed)
    p = rng.random(16) * (rng.random(16) > 0.3)
    if p.sum() == 0:
        p[0] = 1
    L = qmc.grid_loader(p, (2, 2))
    amps = apply_to_array(L.circuit, StateVector.zero(L.layout).amplitudes)
    assert np.abs(amps - np.sqrt(p / p.sum())).max() < 1e-12


def test_grid_loader_rejects_bad_input():
    with pytest.raises(ValueError):
        qmc.grid_loader(np.array([1, -1, 0, 0.0]), (2,))
    with pytest.raises(ValueError):
        qmc.grid_loader(np.ones(3), (2,))


def test_constant_w_theta_writes_sqrt_theta():
    w = qmc.w_theta_for_sum(qmc.constant_series(0.3), (1, 1))
    U = circuit_unitary(w)
    nv = 4
    # good block: both W_theta ancillas in |0>
    assert np.allclose(np.diag(U[:nv, :nv]), np.sqrt(0.3))


def test_step_w_theta_exact_expectation():
    L = qmc.uniform_loader((2, 2))
    eps_theta = 0.002
    w = qmc.w_theta_for_sum(qmc.sqrt_rect_series(0.4375, 0.1, eps_theta), (2, 2))
    prob = qmc.make_problem(L, w, 0.02, 0.1)
    # pair enumeration: S = (i + j) / 8 <= 0.4375  <=>  i + j <= 3
    brute = sum(1 for i in range(4) for j in range(4) if (i + j) / 8 <= 0.4375) / 16
    assert brute == 0.625
    assert abs(prob.exact_value() - brute) <= eps_theta


def test_grover_iterate_spectrum():
    L = qmc.uniform_loader((1, 1))
    prob = qmc.make_problem(L, qmc.w_theta_for_sum(qmc.constant_series(0.25), (1, 1)), 0.05, 0.1)
    Q = circuit_unitary(qmc.grover_iterate(prob))
    assert np.abs(Q.conj().T @ Q - np.eye(len(Q))).max() < 1e-12
    a = prob.exact_value()
    theta_a = np.arcsin(np.sqrt(a))
    # the A|0> state lies in the span of the +-2 theta_a eigenvectors
    psi = apply_to_array(prob.prep, StateVector.zero(prob.layout).amplitudes)
    w, V = np.linalg.eig(Q)
    weights = np.abs(np.linalg.solve(V, psi)) ** 2
    ang = np.abs(np.angle(w[weights > 1e-10]))
    assert np.allclose(ang, 2 * theta_a, atol=1e-9)


def test_good_probabilities_follow_sin_squared_law():
    lay = RegisterLayout(1, (1,))
    t = 0.2
    A = CircuitBuilder(lay).ry(0, np.pi / 2 - t).h(1).build()
    prob = qmc.problem_from_circuit(A, [0], 0.05, 0.1)
    probs = qmc.good_probabilities(prob, [0, 1, 2, 4])
    for m, v in probs.items():
        assert abs(v - np.sin((2 * m + 1) * t) ** 2) < 1e-12


def test_schedule_meets_fisher_width():
    eps, delta, N = 0.02, 0.1, 100
    sched = qmc.plan_schedule(eps, delta, N)
    assert sched[:3] == [0, 1, 2]
    z = norm.ppf(1 - delta / 2)
    width = lambda s: z / (2 * np.sqrt(N * sum((2 * m + 1) ** 2 for m in s)))  # noqa: E731
    assert width(sched) <= eps / 2 < width(sched[:-1])


def test_mle_recovers_noise_free_amplitude():
    sched = [0, 1, 2, 4, 8]
    t = 0.31
    N = 10_000
    hits = [round(N * np.sin((2 * m + 1) * t) ** 2) for m in sched]
    est = qmc.mle_amplitude(sched, hits, N)
    assert abs(est - np.sin(t) ** 2) < 1e-4


def test_amplitude_estimate_coverage_on_synthetic_instance():
    lay = RegisterLayout(1, (1,))
    A = CircuitBuilder(lay).ry(0, np.pi / 2 - np.pi / 8).build()
    prob = qmc.problem_from_circuit(A, [0], 0.02, 0.1)
    truth = np.sin(np.pi / 8) ** 2
    sched = qmc.plan_schedule(0.02, 0.1)
    probs = qmc.good_probabilities(prob, sched)
    errs = [abs(qmc.amplitude_estimate(prob, seed=s, probabilities=probs).estimate - truth) for s in range(60)]
    assert np.mean(np.array(errs) <= 0.02) >= 0.9


def test_query_budget_enforced_and_recorded():
    lay = RegisterLayout(1, (1,))
    prob = qmc.problem_from_circuit(CircuitBuilder(lay).ry(0, 1.0).build(), [0], 0.02, 0.1)
    res = qmc.amplitude_estimate(prob, seed=3)
    q = res.queries
    assert q["A_p"] == res.shots * sum(2 * m + 1 for m in res.schedule) <= q["bound"]
    assert q["iterate"] == res.shots * sum(res.schedule)
    with pytest.raises(qmc.EstimationError):
        qmc.amplitude_estimate(prob, seed=3, C=1.0)


def test_estimate_is_seed_deterministic():
    L = qmc.uniform_loader((1, 1))
    a = qmc.estimate_expectation(L, qmc.constant_series(0.4), 0.05, 0.1, seed=7)
    b = qmc.estimate_expectation(L, qmc.constant_series(0.4), 0.05, 0.1, seed=7)
    assert a.estimate == b.estimate and a.hits == b.hits
    assert abs(a.estimate - 0.4) <= 0.05


def test_classical_expectation_brute_force():
    p = np.arange(1, 17, dtype=float)
    got = qmc.classical_expectation(p, lambda s: s**2, (2, 2))
    expect = sum(p[4 * i + j] * ((i + j) / 8) ** 2 for i in range(4) for j in range(4)) / p.sum()
    assert abs(got - expect) < 1e-15


def test_problem_validation():
    L = qmc.uniform_loader((1,))
    w = qmc.w_theta_for_sum(qmc.constant_series(0.5), (2,))
    with pytest.raises(ValueError):
        qmc.make_problem(L, w, 0.1, 0.1)
    with pytest.raises(ValueError):
        qmc.constant_series(1.5)
