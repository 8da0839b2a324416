import numpy as np
import pytest
from hypothesis import given, strategies as st

from mqsprep import approx, qsp, stateprep
from mqsprep.mqsp import InterleavedPhaseSequence, evaluate_mqsp
from mqsprep.simcore import (
    CircuitBuilder, RegisterLayout, StateVector, apply_circuit, circuit_unitary, fidelity,
    top_left_block, verify_block_encoding,
)


@pytest.mark.parametrize("qubits", [(1,), (3,), (2, 2), (3, 1)])
def test_variable_block_encodings_are_exact(qubits):
    lay = RegisterLayout(1, qubits)
    for v in range(1, len(qubits) + 1):
        be = stateprep.build_variable_block_encoding(lay, v)
        assert verify_block_encoding(be)["max_deviation"] < 1e-12
        assert be.circuit.gate_count == qubits[v - 1]
        # brute-force the diagonal: cos(i / N) for the v-th coordinate
        blk = np.diag(top_left_block(be.circuit, 1))
        idx = np.array(np.unravel_index(np.arange(blk.size), [1 << n for n in qubits]))[v - 1]
        assert np.abs(blk - np.cos(idx / (1 << qubits[v - 1]))).max() < 1e-13


def test_sum_block_encoding():
    lay = RegisterLayout(1, (2, 3))
    be = stateprep.build_sum_block_encoding(lay, [0.5, 0.5])
    assert verify_block_encoding(be)["max_deviation"] < 1e-12
    assert be.circuit.gate_count == 5
    with pytest.raises(ValueError):
        stateprep.build_sum_block_encoding(lay, [3.0, 3.0], require_monotone=True)
    with pytest.raises(ValueError):
        stateprep.build_variable_block_encoding(lay, 3)


@given(st.integers(0, 10_000), st.sampled_from(["one-is-x1", "one-is-x2"]))
def test_assembled_u_phi_matches_mqsp_evaluation(seed, conv):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 6))
    seq = InterleavedPhaseSequence(rng.uniform(-np.pi, np.pi, d + 1), tuple(rng.integers(0, 2, d)))
    lay = RegisterLayout(1, (2, 1))
    encs = [stateprep.build_variable_block_encoding(lay, 1), stateprep.build_variable_block_encoding(lay, 2)]
    c = stateprep.assemble_u_phi(seq, encs, conv)
    U = circuit_unitary(c)
    for i in range(4):
        for j in range(2):
            r0, r1 = lay.basis_index(0, [i, j]), lay.basis_index(1, [i, j])
            M = evaluate_mqsp(seq, i / 4, j / 2, conv)
            assert abs(U[r0, r0] - M[0, 0]) < 1e-13 and abs(U[r0, r1] - M[0, 1]) < 1e-13
    counts = c.query_counts
    assert counts.get("U_1", 0) + counts.get("U_2", 0) == d


def test_assemble_requires_convention_for_mixed_words():
    lay = RegisterLayout(1, (1, 1))
    encs = [stateprep.build_variable_block_encoding(lay, 1), stateprep.build_variable_block_encoding(lay, 2)]
    with pytest.raises(ValueError):
        stateprep.assemble_u_phi(InterleavedPhaseSequence([0, 0, 0], (1, 0)), encs)


def test_parity_split_block_is_scaled_real_approximant():
    f = lambda x: np.exp(-x**2 / 0.125)  # noqa: E731
    n, deg = 4, 10
    ap = stateprep.split_approximation(f, n, deg)
    lay = RegisterLayout(3, (n,))
    enc = stateprep.build_variable_block_encoding(lay, 1)
    c = stateprep.assemble_u_phi_parity_split(ap.phi_even, ap.phi_odd, enc)
    blk = np.diag(top_left_block(c, 3))
    xs = approx.grid_points(n)
    assert np.abs(blk - ap.series(xs) / (2 * ap.scale)).max() < 1e-10
    # without the alternating adjoint the block is the same polynomial
    c2 = stateprep.assemble_u_phi_parity_split(ap.phi_even, ap.phi_odd, enc, alternate=False)
    assert np.abs(np.diag(top_left_block(c2, 3)) - blk).max() < 1e-10


@pytest.mark.parametrize("a", np.linspace(0.05, 1.0, 20))
def test_exact_amplitude_amplification(a):
    lay = RegisterLayout(1, (1,))
    b = CircuitBuilder(lay).ry(0, np.arccos(a)).h(1)
    res = stateprep.exact_amplitude_amplify(b.build(), [0], a=a)
    assert abs(res.target_norm - 1) < 1e-9
    assert res.params.k == int(np.ceil(np.pi / (4 * np.arcsin(a)) - 0.5 - 1e-9))
    # U' is applied 2k + 1 times
    assert res.circuit.query_counts["U"] == 2 * res.params.k + 1


def test_eaa_parameters_edge_cases():
    p = stateprep.compute_eaa_parameters(0.5)
    assert p.k == 1 and np.allclose(p.R, np.eye(2))
    assert stateprep.compute_eaa_parameters(1.0).k == 0
    with pytest.raises(ValueError):
        stateprep.compute_eaa_parameters(0.0)
    lay = RegisterLayout(1, (1,))
    with pytest.raises(stateprep.PreparationError):
        stateprep.exact_amplitude_amplify(CircuitBuilder(lay).ry(0, 1.0).build(), [0], a=0.9)


def test_bivariate_cos_sum_preparation():
    seq = InterleavedPhaseSequence([0, 0, 0], (1, 0))
    f = lambda x1, x2: np.cos(x1 + x2)  # noqa: E731
    state, plan = stateprep.prepare_bivariate(f, seq, (2, 2))
    g = approx.grid_eval(f, (2, 2))
    assert 1 - stateprep.prepared_fidelity(state, g) < 1e-9
    amps = stateprep.variable_amplitudes(state)
    assert np.abs(np.abs(amps) - np.abs(g.flat) / np.linalg.norm(g.flat)).max() < 1e-9
    k = plan.eaa.k
    assert plan.query_counts["U_Phi"] == 2 * k + 1
    assert plan.query_counts["U_1"] == plan.query_counts["U_2"] == 2 * k + 1
    assert abs(plan.pre_amplitude - plan.filling_ratio) < 1e-12


def test_word_preparation_three_variables():
    word = [0, 1, 2]
    f = lambda a, b, c: np.cos(a + b + c)  # noqa: E731
    state, plan = stateprep.prepare_word(f, np.zeros(4), word, (1, 1, 2))
    assert 1 - stateprep.prepared_fidelity(state, approx.grid_eval(f, (1, 1, 2))) < 1e-9


def test_single_variable_preparation_small():
    f = lambda x: np.exp(-x**2 / 0.125)  # noqa: E731
    state, plan = stateprep.prepare_single_variable(f, 4, 10)
    r = plan.report
    assert abs(plan.pre_amplitude - plan.filling_ratio / 2) < 1e-10
    assert abs(plan.target_norm - 1) < 1e-9
    assert r["exact_target_fidelity"] >= 1 - r["epsilon_bound"]
    g = approx.grid_eval(stateprep.split_approximation(f, 4, 10).series, (4,))
    assert 1 - stateprep.prepared_fidelity(state, g) < 1e-9


def test_filling_floor_and_plan_consistency():
    seq = InterleavedPhaseSequence([0, 0, 0], (1, 0))
    with pytest.raises(stateprep.PreparationError):
        stateprep.prepare_bivariate(lambda x1, x2: np.cos(x1 + x2), seq, (1, 1), f_floor=0.99)
    _, plan = stateprep.prepare_bivariate(lambda x1, x2: np.cos(x1 + x2), seq, (1, 1))
    d = plan.to_dict()
    assert d["query_counts"]["U_Phi"] == 2 * plan.eaa.k + 1
    with pytest.raises(ValueError):
        stateprep.PrepPlan(plan.layout, seq, 0.5, plan.norm, plan.max_abs, plan.circuit, plan.u_circuit,
                           plan.eaa, plan.pre_amplitude, plan.target_norm, {})


def test_resource_counts_scale_linearly():
    rows = [stateprep.resource_counts(D, 3, 4) for D in (1, 2, 3, 4)]
    gates = [r["gates"] for r in rows]
    diffs = np.diff(gates)
    assert np.all(diffs == diffs[0])
    # per variable: 3 Hadamards, d = 4 calls of 3 rotations, 4 phase gates
    assert diffs[0] == 3 + 4 * 3 + 4
    assert rows[1]["queries"]["U_1"] == 4 and rows[1]["queries"]["U_2"] == 4


def test_fidelity_of_uniform_state():
    lay = RegisterLayout(1, (2,))
    b = CircuitBuilder(lay).h(1).h(2)
    s = apply_circuit(b.build(), StateVector.zero(lay))
    t = stateprep.target_state(approx.grid_eval(lambda x: 1 + 0 * x, (2,)), lay)
    assert abs(fidelity(s, t) - 1) < 1e-15
