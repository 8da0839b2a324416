import numpy as np
import pytest
from hypothesis import given, strategies as st

from mqsprep import qsp
from mqsprep.approx import FourierSeries2D
from mqsprep.mqsp import (
    InterleavedPhaseSequence, PrescreenError, check_necessary_conditions, evaluate_mqsp,
    extract_pq_2d, fit_phases_2d, mqsp_matrices, prescreen, single_variable_series,
)


def dense_product(phases, s, x1, x2, one_is_x1=True):
    Z = lambda p: np.diag([np.exp(1j * p), np.exp(-1j * p)])  # noqa: E731
    W = lambda t: np.array([[np.cos(t), 1j * np.sin(t)], [1j * np.sin(t), np.cos(t)]])  # noqa: E731
    U = Z(phases[0])
    for b, p in zip(s, phases[1:]):
        use_x1 = (b == 1) == one_is_x1
        U = U @ W(x1 if use_x1 else x2) @ Z(p)
    return U


def random_seq(rng, dmax=8):
    d = int(rng.integers(0, dmax + 1))
    return InterleavedPhaseSequence(rng.uniform(-np.pi, np.pi, d + 1), tuple(rng.integers(0, 2, d)))


def test_sequence_validation():
    with pytest.raises(ValueError):
        InterleavedPhaseSequence([0, 0], (1, 0))
    with pytest.raises(ValueError):
        InterleavedPhaseSequence([0, 0], (2,))
    seq = InterleavedPhaseSequence([0.1, 0.2, 0.3], (1, 0))
    assert (seq.d1, seq.d2) == (1, 1)
    assert list(seq.word("one-is-x1")) == [0, 1] and list(seq.word("one-is-x2")) == [1, 0]
    assert InterleavedPhaseSequence.from_dict(seq.to_dict()).s == seq.s


@given(st.integers(0, 10_000), st.sampled_from(["one-is-x1", "one-is-x2"]))
def test_evaluation_matches_dense_product(seed, conv):
    rng = np.random.default_rng(seed)
    seq = random_seq(rng)
    x1, x2 = rng.uniform(-np.pi, np.pi, 2)
    ref = dense_product(seq.phases, seq.s, x1, x2, conv == "one-is-x1")
    assert np.abs(evaluate_mqsp(seq, x1, x2, conv) - ref).max() < 1e-13


def test_cos_sum_closed_form():
    seq = InterleavedPhaseSequence([0, 0, 0], (1, 0))
    x = np.array([[0.3, 0.4], [1.0, -2.0]])
    U = mqsp_matrices(seq, x)
    assert np.allclose(U[:, 0, 0], np.cos(x.sum(1)))
    P, Q, _ = extract_pq_2d(seq)
    assert abs(P.coeff(1, 1) - 0.5) < 1e-15 and abs(P.coeff(-1, -1) - 0.5) < 1e-15


@given(st.integers(0, 10_000))
def test_extracted_coefficients_reproduce_entries(seed):
    rng = np.random.default_rng(seed)
    seq = random_seq(rng)
    P, Q, rep = extract_pq_2d(seq)
    assert P.degrees == (seq.d1, seq.d2)
    pts = rng.uniform(-np.pi, np.pi, (6, 2))
    U = mqsp_matrices(seq, pts)
    assert np.abs(P(pts[:, 0], pts[:, 1]) - U[:, 0, 0]).max() < 1e-12
    assert np.abs(Q(pts[:, 0], pts[:, 1]) - U[:, 0, 1]).max() < 1e-12


def test_single_variable_embedding_matches_qsp():
    ph = np.random.default_rng(4).uniform(-1, 1, 6)
    seq = single_variable_series(qsp.PhaseSequence(ph))
    P, Q, _ = extract_pq_2d(seq)
    a, b, _ = qsp.extract_pq_coefficients(ph)
    # x1 cosine coefficients from the Laurent column at k = 0
    d = 5
    col = P.coefficients[:, 0]
    cos = np.array([col[d]] + [col[d + j] + col[d - j] for j in range(1, d + 1)])
    assert np.abs(cos - a).max() < 1e-12


@given(st.integers(0, 10_000))
def test_necessary_conditions_hold_for_achieved_pairs(seed):
    rng = np.random.default_rng(seed)
    seq = random_seq(rng)
    P, Q, _ = extract_pq_2d(seq)
    rep = check_necessary_conditions(P, Q, seq.d1, seq.d2)
    assert rep.passed, rep.to_dict()
    assert [c.name for c in rep.conditions] == ["i", "ii", "iii", "iv", "v"]


def test_conditions_detect_violations():
    seq = InterleavedPhaseSequence([0.3, -0.2, 0.9, 0.1], (1, 0, 1))
    P, Q, _ = extract_pq_2d(seq)
    # (i): claimed degrees too small
    assert check_necessary_conditions(P, Q, 1, 1).first_failure() == "i"
    # (iv): scaled pair is no longer unitary
    rep = check_necessary_conditions(FourierSeries2D(0.9 * P.coefficients), Q, 2, 1)
    assert not rep["iv"].passed
    # (ii): break the conjugation symmetry of P
    c = P.coefficients.copy()
    c[0, 0] += 0.05
    assert not check_necessary_conditions(FourierSeries2D(c), Q, 2, 1)["ii"].passed
    # (iii): a wrong-parity coefficient
    c = P.coefficients.copy()
    c[1, 1] += 0.05
    c[3, 1] += 0.05
    assert not check_necessary_conditions(FourierSeries2D(c), Q, 2, 1)["iii"].passed


def test_condition_v_violation_example():
    p = np.zeros((3, 3), complex)
    q = np.zeros((3, 3), complex)
    p[2, 2] = p[0, 0] = 0.5
    q[2, 2], q[0, 0], q[2, 0], q[0, 2] = 0.5, -0.5, 0.5, -0.5
    rep = check_necessary_conditions(FourierSeries2D(p), FourierSeries2D(q), 1, 1)
    assert rep["i"].passed and rep["ii"].passed and rep["iii"].passed
    assert not rep["v"].passed
    with pytest.raises(PrescreenError) as e:
        fit_phases_2d(FourierSeries2D(p), 2, Q=FourierSeries2D(q))
    assert e.value.condition == "v"


def test_prescreen_degree_and_splits():
    c = np.zeros((3, 3), complex)
    c[2, 2] = c[0, 0] = 0.5
    P = FourierSeries2D(c)
    with pytest.raises(PrescreenError) as e:
        prescreen(P, 1)
    assert e.value.condition == "i"
    feasible, info = prescreen(P, 2)
    assert feasible == [1]
    feasible4, _ = prescreen(P, 4)
    assert feasible4 == [1, 3]  # d1 must share parity with the x1 support


def test_fit_cos_sum_and_verify():
    c = np.zeros((3, 3), complex)
    c[2, 2] = c[0, 0] = 0.5
    res = fit_phases_2d(FourierSeries2D(c), 2)
    assert res.success and res.residual < 1e-10
    pts = np.random.default_rng(0).uniform(-np.pi, np.pi, (50, 2))
    U = mqsp_matrices(res.sequence, pts)
    assert np.abs(U[:, 0, 0] - np.cos(pts.sum(1))).max() < 1e-9


def test_fit_recovers_random_sequence_target():
    rng = np.random.default_rng(11)
    seq = InterleavedPhaseSequence(rng.uniform(-np.pi, np.pi, 4), (1, 0, 1))
    P, Q, _ = extract_pq_2d(seq)
    res = fit_phases_2d(P, 3, Q=Q, attempts=6)
    assert res.success, res.to_dict()


def test_fit_failure_is_reported_without_certificate():
    res = fit_phases_2d(FourierSeries2D(np.array([[0.5]])), 0, attempts=2)
    assert not res.success
    assert "not an infeasibility certificate" in res.to_dict()["note"]
