"""Quantum Monte Carlo: W_theta from QSP over the sum block-encoding, the Grover
iterate, and maximum-likelihood amplitude estimation with simulated shots."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import norm as _normal

from . import approx, qsp
from .approx import ChebSeries1D
from .qsp import PhaseSequence
from .simcore import (
    BlockEncodingSpec,
    CircuitBuilder,
    CircuitDescriptor,
    RegisterLayout,
    StateVector,
    ancilla_zero_mask,
    apply_to_array,
)
from .stateprep import PrepPlan, _emit_real_qsp, build_sum_block_encoding

DEFAULT_C = 50.0
DEFAULT_SHOTS = 100
MAX_SCHEDULE = 12


class EstimationError(RuntimeError):
    pass


# ------------------------------------------------------------ A_p loaders

@dataclass
class Loader:
    """State-preparation circuit for sqrt(p); ancillas (if any) return to |0>."""

    circuit: CircuitDescriptor
    report: dict = field(default_factory=dict)

    @property
    def layout(self) -> RegisterLayout:
        return self.circuit.layout


def uniform_loader(variable_qubits: Sequence[int]) -> Loader:
    lay = RegisterLayout(0, tuple(variable_qubits))
    b = CircuitBuilder(lay)
    for q in range(lay.num_qubits):
        b.h(q)
    return Loader(b.build(), {"kind": "uniform"})


def grid_loader(p: np.ndarray, variable_qubits: Sequence[int]) -> Loader:
    """Load sqrt(p) for a nonnegative grid function by a binary tree of controlled real rotations."""
    lay = RegisterLayout(0, tuple(variable_qubits))
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != lay.dim:
        raise ValueError("probability grid does not match the register sizes")
    if np.any(p < 0) or not np.isfinite(p).all() or p.sum() <= 0:
        raise ValueError("probabilities must be finite, nonnegative and not all zero")
    p = p / p.sum()
    m = lay.num_qubits
    b = CircuitBuilder(lay)
    for level in range(m):
        width = 1 << (m - level)
        for prefix in range(1 << level):
            block = p[prefix * width:(prefix + 1) * width]
            tot = block.sum()
            if tot <= 0:
                continue
            left = block[: width // 2].sum()
            ang = float(np.arccos(np.sqrt(min(1.0, left / tot))))
            if ang == 0.0:
                continue
            bits = [(prefix >> (level - 1 - j)) & 1 for j in range(level)]
            b.ry(level, ang, controls=list(range(level)), control_values=bits)
    return Loader(b.build(), {"kind": "grid"})


def plan_loader(plan: PrepPlan) -> Loader:
    """A_p from a state-preparation plan whose target function is sqrt(p)."""
    return Loader(plan.circuit, {"kind": "prepared", "filling_ratio": plan.filling_ratio,
                                 "target_norm": plan.target_norm})


# ------------------------------------------------------------ W_theta

def sqrt_rect_series(l: float, gap: float, eps_theta: float) -> ChebSeries1D:
    """Amplitude r with r^2 within eps_theta of 1[s <= l] outside the gap band."""
    eps_r = 1.0 - np.sqrt(1.0 - eps_theta)
    r = approx.rect_approx(l, gap, eps_r)
    r.fit_report = dict(r.fit_report, theta_eps=eps_theta, amplitude_eps=eps_r)
    return r


def constant_series(theta: float) -> ChebSeries1D:
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    return ChebSeries1D(np.array([np.sqrt(theta)]), "even")


def build_w_theta(sqrt_theta, encoding: BlockEncodingSpec) -> CircuitDescriptor:
    """W_theta on two new ancillas: qubit 0 takes the conjugate pair, qubit 1 the signal.

    ``sqrt_theta`` is a definite-parity ChebSeries1D (phases are fitted) or a
    PhaseSequence whose real top-left part is the amplitude.
    """
    if isinstance(sqrt_theta, ChebSeries1D):
        if sqrt_theta.parity not in ("even", "odd"):
            raise ValueError("W_theta needs a definite-parity amplitude series")
        sup = sqrt_theta.sup_on_circle()
        if sup > 1.0:
            raise ValueError(f"|sqrt(theta)| reaches {sup:.6f} > 1")
        phases, rep = qsp.fit_real_part(sqrt_theta)
    else:
        phases, rep = sqrt_theta, {}
    src = encoding.circuit.layout
    if src.ancilla_count != 1:
        raise ValueError("encoding must use a single signal ancilla")
    lay = RegisterLayout(2, src.variable_qubits)
    enc = encoding.circuit.relabel(lay, [q + 1 for q in range(src.num_qubits)])
    b = CircuitBuilder(lay)
    tag = encoding.circuit.metadata.get("tag", "U_S")
    _emit_real_qsp(b, [(0, phases.phases)], enc, tag, lcu=0, sig=1, selector=None, alternate=True)
    b.metadata = {"degree": phases.degree, "fit": rep, "good_ancillas": [0, 1]}
    return b.build()


def w_theta_for_sum(sqrt_theta, variable_qubits: Sequence[int]) -> CircuitDescriptor:
    """W_theta acting on the normalized sum S = (x_1 + ... + x_D) / D."""
    D = len(variable_qubits)
    enc = build_sum_block_encoding(RegisterLayout(1, tuple(variable_qubits)), [1.0 / D] * D)
    return build_w_theta(sqrt_theta, enc)


# ------------------------------------------------------------ problem and iterate

@dataclass
class McProblem:
    layout: RegisterLayout
    a_p: CircuitDescriptor
    w_theta: CircuitDescriptor
    good_ancillas: tuple
    epsilon: float = 0.01
    delta: float = 0.05
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("epsilon", "delta"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")

    @property
    def prep(self) -> CircuitDescriptor:
        b = CircuitBuilder(self.layout)
        b.call("A_p", self.a_p)
        b.call("W_theta", self.w_theta)
        return b.build()

    def exact_value(self) -> float:
        state = apply_to_array(self.prep, StateVector.zero(self.layout).amplitudes)
        mask = ancilla_zero_mask(self.layout, self.good_ancillas)
        return float(np.sum(np.abs(state[mask]) ** 2))


def make_problem(loader: Loader, w_theta: CircuitDescriptor, epsilon: float, delta: float,
                 report: dict | None = None) -> McProblem:
    """Place A_p and W_theta on one register: A_p ancillas, then the two W_theta ancillas."""
    lp, lw = loader.layout, w_theta.layout
    if lp.variable_qubits != lw.variable_qubits:
        raise ValueError("A_p and W_theta act on different variable registers")
    ap_anc, w_anc = lp.ancilla_count, lw.ancilla_count
    lay = RegisterLayout(ap_anc + w_anc, lp.variable_qubits)
    nv = sum(lp.variable_qubits)
    ap_map = list(range(ap_anc)) + [ap_anc + w_anc + i for i in range(nv)]
    w_map = [ap_anc + i for i in range(w_anc)] + [ap_anc + w_anc + i for i in range(nv)]
    good = tuple(ap_anc + g for g in w_theta.metadata.get("good_ancillas", range(w_anc)))
    return McProblem(lay, loader.circuit.relabel(lay, ap_map), w_theta.relabel(lay, w_map), good,
                     epsilon, delta, dict(report or {}, loader=loader.report))


def problem_from_circuit(prep: CircuitDescriptor, good_ancillas: Sequence[int], epsilon: float,
                         delta: float) -> McProblem:
    """Problem from a single preparation circuit A (A_p slot) with an identity W_theta."""
    lay = prep.layout
    return McProblem(lay, prep, CircuitBuilder(lay).build(), tuple(good_ancillas), epsilon, delta,
                     {"synthetic": True})


def _reflect_zero(layout: RegisterLayout, qubits: Sequence[int]) -> CircuitDescriptor:
    b = CircuitBuilder(layout)
    q = list(qubits)
    b.gate(np.diag([-1.0, 1.0]), q[0], controls=q[1:], control_values=[0] * (len(q) - 1), label="reflect")
    return b.build()


def grover_iterate(problem: McProblem) -> CircuitDescriptor:
    """Q = -A S_0 A^dagger S_chi, A = W_theta A_p, good subspace = W_theta ancillas in |0>."""
    lay = problem.layout
    b = CircuitBuilder(lay)
    b.extend(_reflect_zero(lay, problem.good_ancillas))
    b.call("W_theta", problem.w_theta, adjoint=True)
    b.call("A_p", problem.a_p, adjoint=True)
    b.extend(_reflect_zero(lay, range(lay.num_qubits)))
    b.call("A_p", problem.a_p)
    b.call("W_theta", problem.w_theta)
    b.global_phase(np.pi)
    return b.build()


# ------------------------------------------------------------ maximum-likelihood estimation

@dataclass
class EstimationResult:
    estimate: float
    epsilon: float
    delta: float
    queries: dict
    schedule: list
    shots: int
    hits: list
    seed: int | None
    exact_value: float | None = None
    error_components: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "epsilon": self.epsilon, "delta": self.delta,
                "queries": self.queries, "schedule": self.schedule, "shots": self.shots,
                "hits": self.hits, "seed": self.seed, "exact_value": self.exact_value,
                "error_components": self.error_components}


def plan_schedule(epsilon: float, delta: float, shots: int = DEFAULT_SHOTS, safety: float = 2.0) -> list[int]:
    """Shortest m_t = floor(2^(t-1)) schedule whose Fisher-information width meets epsilon/safety."""
    z = float(_normal.ppf(1 - delta / 2))
    sched, info = [], 0.0
    for t in range(MAX_SCHEDULE + 1):
        m = int(2 ** (t - 1))
        sched.append(m)
        info += (2 * m + 1) ** 2
        # a = sin^2 theta, |da/dtheta| <= 1, Var(theta) >= 1 / (4 N sum (2m+1)^2)
        if z / (2.0 * np.sqrt(shots * info)) <= epsilon / safety:
            return sched
    raise EstimationError(f"epsilon {epsilon} needs more than {MAX_SCHEDULE} Grover powers")


def good_probabilities(problem: McProblem, schedule: Sequence[int]) -> dict[int, float]:
    """Exact Pr(good) after Q^m A|0> for every m in the schedule."""
    lay = problem.layout
    A = problem.prep
    Q = grover_iterate(problem)
    mask = ancilla_zero_mask(lay, problem.good_ancillas)
    state = apply_to_array(A, StateVector.zero(lay).amplitudes)
    out, cur = {}, 0
    for m in sorted(set(schedule)):
        for _ in range(m - cur):
            state = apply_to_array(Q, state)
        cur = m
        out[m] = float(min(1.0, np.sum(np.abs(state[mask]) ** 2)))
    return out


def _log_likelihood(theta, schedule, hits, shots):
    ll = np.zeros_like(theta)
    for m, h in zip(schedule, hits):
        ang = (2 * m + 1) * theta
        if h:
            ll += h * np.log(np.maximum(np.sin(ang) ** 2, 1e-300))
        if shots - h:
            ll += (shots - h) * np.log(np.maximum(np.cos(ang) ** 2, 1e-300))
    return ll


def mle_amplitude(schedule: Sequence[int], hits: Sequence[int], shots: int) -> float:
    top = 2 * max(schedule) + 1
    grid = np.linspace(0.0, np.pi / 2, max(20001, 200 * top + 1))
    ll = _log_likelihood(grid, schedule, hits, shots)
    i = int(np.argmax(ll))
    best_t, best_ll = grid[i], ll[i]
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if hi > lo:
        res = minimize_scalar(lambda t: -_log_likelihood(np.array([t]), schedule, hits, shots)[0],
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if -res.fun > best_ll:
            best_t = float(res.x)
    return float(np.sin(best_t) ** 2)


def amplitude_estimate(problem: McProblem, seed: int | None = 0, shots: int = DEFAULT_SHOTS,
                       schedule: Sequence[int] | None = None, C: float = DEFAULT_C,
                       probabilities: dict | None = None) -> EstimationResult:
    """Maximum-likelihood amplitude estimation of Pr(good) = E[theta].

    ``probabilities`` may carry the cached exact outcome probabilities of an
    earlier call on the same problem; only the shot draws depend on ``seed``.
    """
    eps, delta = problem.epsilon, problem.delta
    sched = list(schedule) if schedule is not None else plan_schedule(eps, delta, shots)
    probs = probabilities if probabilities is not None else good_probabilities(problem, sched)
    rng = np.random.default_rng(seed)
    hits = [int(rng.binomial(shots, probs[m])) for m in sched]
    est = mle_amplitude(sched, hits, shots)
    a_p = shots * sum(2 * m + 1 for m in sched)
    iterate = shots * sum(sched)
    bound = C * (1.0 / eps) * np.log(1.0 / delta)
    if a_p > bound:
        raise EstimationError(f"{a_p} oracle queries exceed the budget C(1/eps)log(1/delta) = {bound:.1f}")
    queries = {"A_p": a_p, "W_theta": a_p, "iterate": iterate, "bound": float(bound), "C": C}
    return EstimationResult(est, eps, delta, queries, sched, shots, hits, seed,
                            exact_value=probs.get(0), error_components={"estimation": eps})


def estimate_expectation(loader: Loader, sqrt_theta, epsilon: float, delta: float, seed: int | None = 0,
                         shots: int = DEFAULT_SHOTS, theta_eps: float = 0.0, pdf_eps: float = 0.0,
                         C: float = DEFAULT_C) -> EstimationResult:
    """End-to-end estimate of E[theta(S)] for S the normalized sum of the loaded variables."""
    w = w_theta_for_sum(sqrt_theta, loader.layout.variable_qubits)
    prob = make_problem(loader, w, epsilon, delta, {"theta_degree": w.metadata["degree"]})
    res = amplitude_estimate(prob, seed=seed, shots=shots, C=C)
    res.error_components = {"estimation": epsilon, "theta_approx": theta_eps, "pdf_approx": pdf_eps}
    res.queries["theta_degree"] = w.metadata["degree"]
    return res


def classical_expectation(p: np.ndarray, theta: Callable, variable_qubits: Sequence[int]) -> float:
    """Brute-force sum_i p(i) theta(s_i) over the grid (p normalized here)."""
    g = approx.grid_eval(lambda *xs: sum(xs) / len(xs), tuple(variable_qubits))
    w = np.asarray(p, dtype=float).reshape(-1)
    return float(np.sum(w * theta(g.flat)) / w.sum())
