"""State preparation from QSP / M-QSP sequences followed by exact amplitude amplification.

Register conventions (see ``simcore``): ancillas first, the signal ancilla is
the last ancilla. The single-variable parity-split path uses three ancillas:
the even/odd selector, the conjugate-pair selector that turns the complex
top-left entry P into Re P, and the signal qubit. Exact amplitude
amplification prepends one flag qubit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import approx, qsp
from .approx import ChebSeries1D, GridFunction, filling_ratio, grid_eval, norm_and_max
from .mqsp import InterleavedPhaseSequence
from .qsp import PhaseSequence
from .simcore import (
    BlockEncodingSpec,
    CircuitBuilder,
    CircuitDescriptor,
    Gate,
    OracleCall,
    RegisterLayout,
    StateVector,
    ancilla_zero_mask,
    apply_circuit,
    fidelity,
)

SIGNAL_NOTE = "signal gates realize e^{ixX} = [[cos x, i sin x], [i sin x, cos x]]"
F_FLOOR = 1e-4


class PreparationError(ValueError):
    pass


# ------------------------------------------------------------ block encodings

def _grid_angles(layout: RegisterLayout, weights: Sequence[float]) -> np.ndarray:
    axes = np.meshgrid(*[np.arange(1 << n) / (1 << n) for n in layout.variable_qubits], indexing="ij")
    return sum(w * a for w, a in zip(weights, axes)).reshape(-1)


def _cos_operator(layout: RegisterLayout, weights: Sequence[float]) -> Callable[[], np.ndarray]:
    def op():
        return np.diag(np.cos(_grid_angles(layout, weights))).astype(complex)
    return op


def _rotation_encoding(layout: RegisterLayout, weights: Sequence[float], tag: str,
                       ancilla: int | None) -> BlockEncodingSpec:
    if layout.ancilla_count < 1:
        raise ValueError("layout needs at least one ancilla for the signal qubit")
    sig = layout.ancilla_count - 1 if ancilla is None else ancilla
    if not 0 <= sig < layout.ancilla_count:
        raise ValueError("signal qubit must be an ancilla")
    b = CircuitBuilder(layout)
    for v, w in enumerate(weights):
        if w == 0:
            continue
        n = layout.variable_qubits[v]
        for bit in range(1, n + 1):
            b.signal(sig, w * 2.0 ** (bit - 1) / 2.0**n, controls=[layout.qubit_for_bit(v, bit)])
    b.metadata = {"tag": tag, "signal_qubit": sig, "convention": SIGNAL_NOTE}
    return BlockEncodingSpec(1.0, layout.ancilla_count, 0.0, b.build(), _cos_operator(layout, weights))


def build_variable_block_encoding(layout: RegisterLayout, v: int, ancilla: int | None = None) -> BlockEncodingSpec:
    """Block-encoding of sum_i cos(x_v^(i)) |i><i| with n_v controlled rotations (v is 1-based)."""
    if not 1 <= v <= layout.num_variables:
        raise ValueError(f"variable index {v} outside 1..{layout.num_variables}")
    w = [0.0] * layout.num_variables
    w[v - 1] = 1.0
    return _rotation_encoding(layout, w, f"U_{v}", ancilla)


def build_sum_block_encoding(layout: RegisterLayout, weights: Sequence[float], ancilla: int | None = None,
                             require_monotone: bool = False) -> BlockEncodingSpec:
    """Block-encoding of cos(sum_k w_k x_k) on one shared ancilla."""
    weights = [float(w) for w in weights]
    if len(weights) != layout.num_variables:
        raise ValueError("one weight per variable is required")
    if any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")
    top = sum(w * (1 - 2.0 ** -n) for w, n in zip(weights, layout.variable_qubits))
    if require_monotone and top > np.pi / 2:
        raise ValueError(f"weighted grid maximum {top:.4f} exceeds pi/2")
    return _rotation_encoding(layout, weights, "U_S", ancilla)


# ------------------------------------------------------------ U_Phi assembly

def _controlled(circuit: CircuitDescriptor, control: int, value: int) -> CircuitDescriptor:
    gates = []
    for g in circuit.gates:
        if isinstance(g, Gate):
            gates.append(Gate(g.matrix, g.target, g.controls + (control,), g.control_values + (value,), g.label))
        else:
            gates.append(OracleCall(g.tag, _controlled(g.circuit, control, value), g.adjoint))
    return CircuitDescriptor(circuit.layout, tuple(gates), dict(circuit.metadata))


def assemble_u_phi_word(phases, word: Sequence[int], encodings: Sequence[BlockEncodingSpec],
                        signal: int | None = None) -> CircuitDescriptor:
    """e^{i phi_0 Z} prod_k U_{word_k} e^{i phi_k Z}; ``word`` holds 0-based variable indices."""
    phases = np.asarray(phases, dtype=float)
    word = [int(w) for w in word]
    if len(word) != len(phases) - 1:
        raise ValueError("word length must equal len(phases) - 1")
    if not encodings:
        raise ValueError("at least one encoding is required")
    layout = encodings[0].circuit.layout
    if any(e.circuit.layout != layout for e in encodings):
        raise ValueError("encodings must share one layout")
    if any(not 0 <= w < len(encodings) for w in word):
        raise ValueError("word refers to a missing encoding")
    sig = layout.ancilla_count - 1 if signal is None else signal
    b = CircuitBuilder(layout)
    # rightmost factor acts first
    for k in range(len(word), 0, -1):
        b.phase(sig, phases[k])
        e = encodings[word[k - 1]]
        b.call(e.circuit.metadata.get("tag", f"U_{word[k - 1] + 1}"), e.circuit)
    b.phase(sig, phases[0])
    b.metadata = {"word": word, "phases": [float(p) for p in phases], "convention": SIGNAL_NOTE}
    return b.build()


def assemble_u_phi(seq: InterleavedPhaseSequence, encodings: Sequence[BlockEncodingSpec],
                   convention: str | None = None) -> CircuitDescriptor:
    """Bivariate U_Phi. ``one-is-x2``: U_1^{1-s_k} U_2^{s_k}; ``one-is-x1``: s_k = 1 selects U_1."""
    if convention is None:
        if len(set(seq.s)) > 1:
            raise ValueError("convention must be given for a nonuniform interleaving")
        convention = "one-is-x2"
    circ = assemble_u_phi_word(seq.phases, seq.word(convention), encodings)
    circ.metadata["convention_flag"] = convention
    circ.metadata["s"] = list(seq.s)
    return circ


def _adjoint_adjust(phases: np.ndarray, layers: Sequence[bool]) -> np.ndarray:
    """Phases for which U^dagger at flagged layers reproduces the original product.

    Uses W(x) = -e^{i pi/2 Z} W(-x) e^{i pi/2 Z}; the accumulated sign goes into phi_0.
    """
    out = np.array(phases, dtype=float)
    flips = 0
    for k, adj in enumerate(layers, start=1):
        if adj:
            out[k - 1] += np.pi / 2
            out[k] += np.pi / 2
            flips += 1
    if flips % 2:
        out[0] += np.pi
    return out


def _emit_real_qsp(b: CircuitBuilder, branches: list, encoding: CircuitDescriptor, tag: str,
                   lcu: int, sig: int, selector: int | None, alternate: bool) -> None:
    """Emit QSP layers for each (selector value, phases) branch with the +-Phi conjugate pair on ``lcu``.

    The top-left block (lcu and selector projected on |+>) of branch b is Re P_b.
    """
    dmax = max(len(ph) - 1 for _, ph in branches)
    adjoint = [alternate and k % 2 == 0 for k in range(1, dmax + 1)]
    slots = []
    for sel, ph in branches:
        d = len(ph) - 1
        adj = _adjoint_adjust(ph, adjoint[:d])
        full = np.zeros(dmax + 1)
        full[: d + 1] = adj
        slots.append((sel, d, full))
    controlled = {}
    b.h(lcu)
    for k in range(dmax, -1, -1):
        for sel, d, full in slots:
            if k > d:
                continue
            for sign, lv in ((1.0, 0), (-1.0, 1)):
                ctrl, vals = [lcu], [lv]
                if selector is not None:
                    ctrl.append(selector)
                    vals.append(sel)
                if full[k] != 0.0:
                    b.phase(sig, sign * full[k], controls=ctrl, control_values=vals)
        if k == 0:
            break
        active = [sel for sel, d, _ in slots if d >= k]
        if len(active) == len(slots):
            b.call(tag, encoding, adjoint=adjoint[k - 1])
        else:
            if selector is None or len(active) != 1:
                raise ValueError("branch degrees must differ by at most one layer")
            key = active[0]
            if key not in controlled:
                controlled[key] = _controlled(encoding, selector, key)
            b.call(tag, controlled[key], adjoint=adjoint[k - 1])
    b.h(lcu)


def assemble_u_phi_parity_split(phi_even: PhaseSequence | None, phi_odd: PhaseSequence | None,
                                encoding: BlockEncodingSpec, alternate: bool = True) -> CircuitDescriptor:
    """Selector |+>/|-> branches carry Re P_even and Re P_odd; |000> block is (f_e + f_o) / (2c).

    Ancilla 0 selects even/odd, ancilla 1 the conjugate pair, ancilla 2 is the signal.
    The branch with the larger degree drives a selector-controlled top layer.
    """
    layout = encoding.circuit.layout
    if layout.ancilla_count != 3:
        raise ValueError("parity-split assembly expects a three-ancilla layout")
    pe = np.zeros(1) if phi_even is None else phi_even.phases
    po = np.full(1, np.pi / 2) if phi_odd is None else phi_odd.phases
    de, do = len(pe) - 1, len(po) - 1
    if abs(de - do) > 1:
        raise ValueError(f"even/odd degrees {de} and {do} differ by more than one")
    b = CircuitBuilder(layout)
    b.h(0)
    tag = encoding.circuit.metadata.get("tag", "U_1")
    _emit_real_qsp(b, [(0, pe), (1, po)], encoding.circuit, tag, lcu=1, sig=2, selector=0, alternate=alternate)
    b.h(0)
    b.metadata = {"even_degree": de, "odd_degree": do, "convention": SIGNAL_NOTE, "alternating_adjoint": alternate}
    return b.build()


# ------------------------------------------------------------ exact amplitude amplification

@dataclass
class EaaParameters:
    a: float
    k: int
    theta: float
    R: np.ndarray

    def to_dict(self) -> dict:
        return {"a": self.a, "k": self.k, "theta": self.theta, "R": np.real(self.R).tolist()}


def compute_eaa_parameters(a: float) -> EaaParameters:
    if not 0 < a <= 1:
        raise ValueError("amplitude must lie in (0, 1]")
    # the tiny offset keeps exact cases such as a = 1/2 from rounding up a round
    k = max(0, int(np.ceil(np.pi / (4 * np.arcsin(a)) - 0.5 - 1e-9)))
    theta = np.pi / (4 * k + 2)
    r = min(1.0, np.sin(theta) / a)
    # arccos is ill-conditioned at 1; snap rounding-level gaps so exact cases give R = I
    ang = 0.0 if 1.0 - r < 1e-12 else float(np.arccos(r))
    R = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    return EaaParameters(float(a), k, float(theta), R)


@dataclass
class AmplifiedState:
    state: StateVector
    params: EaaParameters
    circuit: CircuitDescriptor
    target_norm: float
    simulated_a: float


def _reflection(layout: RegisterLayout, zero_qubits: Sequence[int], global_minus: bool) -> CircuitDescriptor:
    """I - 2|0..0><0..0| on ``zero_qubits`` (times -1 if ``global_minus``)."""
    b = CircuitBuilder(layout)
    q = list(zero_qubits)
    b.gate(np.diag([-1.0, 1.0]), q[0], controls=q[1:], control_values=[0] * (len(q) - 1), label="reflect")
    if global_minus:
        b.global_phase(np.pi)
    return b.build()


def exact_amplitude_amplify(U: CircuitDescriptor, good_ancillas: Sequence[int], a: float | None = None,
                            tol: float = 1e-8, tag: str = "U") -> AmplifiedState:
    """Amplify Pi U|0> to unit norm with a prepended flag qubit (qubit 0 of the result).

    ``good_ancillas`` are the ancillas of ``U`` that must read 0; ``a`` defaults to
    the simulated amplitude and otherwise must agree with it to ``tol``.
    """
    lay = U.layout
    psi = apply_circuit(U, StateVector.zero(lay))
    mask = ancilla_zero_mask(lay, good_ancillas)
    a_sim = float(np.linalg.norm(psi.amplitudes[mask]))
    if a is None:
        a = a_sim
    elif abs(a - a_sim) > tol:
        raise PreparationError(f"supplied amplitude {a} disagrees with simulated {a_sim}")
    params = compute_eaa_parameters(min(1.0, a))
    big = RegisterLayout(lay.ancilla_count + 1, lay.variable_qubits)
    shift = list(range(1, lay.num_qubits + 1))
    b = CircuitBuilder(big)
    b.gate(params.R, 0, label="R")
    b.call(tag, U.relabel(big, shift))
    u_prime = b.build()
    s_pi = _reflection(big, [0] + [g + 1 for g in good_ancillas], global_minus=False)
    s_0 = _reflection(big, list(range(big.num_qubits)), global_minus=True)
    full = CircuitBuilder(big)
    full.extend(u_prime)
    for _ in range(params.k):
        full.extend(s_pi)
        full.extend(u_prime.dagger())
        full.extend(s_0)
        full.extend(u_prime)
    full.metadata = {"eaa": params.to_dict(), "flag_qubit": 0}
    circ = full.build()
    out = apply_circuit(circ, StateVector.zero(big))
    gmask = ancilla_zero_mask(big, [0] + [g + 1 for g in good_ancillas])
    norm = float(np.linalg.norm(out.amplitudes[gmask]))
    return AmplifiedState(out, params, circ, norm, a_sim)


# ------------------------------------------------------------ preparation

@dataclass
class PrepPlan:
    layout: RegisterLayout
    sequence: object
    filling_ratio: float
    norm: float
    max_abs: float
    circuit: CircuitDescriptor
    u_circuit: CircuitDescriptor
    eaa: EaaParameters
    pre_amplitude: float
    target_norm: float
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        n_total = 1 << sum(self.layout.variable_qubits)
        scale = self.report.get("scale", self.max_abs)
        f_check = self.norm / (np.sqrt(n_total) * scale)
        if abs(f_check - self.filling_ratio) > 1e-12:
            raise ValueError("filling ratio does not match its defining fields")
        if not 0 < self.filling_ratio <= 1 + 1e-12:
            raise ValueError("filling ratio outside (0, 1]")

    @property
    def query_counts(self) -> dict:
        return dict(self.circuit.query_counts)

    def to_dict(self) -> dict:
        seq = self.sequence
        if isinstance(seq, tuple):
            seq_d = {"even": None if seq[0] is None else seq[0].to_dict(),
                     "odd": None if seq[1] is None else seq[1].to_dict()}
        else:
            seq_d = seq.to_dict()
        return {
            "layout": self.layout.to_dict(),
            "sequence": seq_d,
            "filling_ratio": self.filling_ratio,
            "norm": self.norm,
            "max_abs": self.max_abs,
            "pre_amplitude": self.pre_amplitude,
            "target_norm": self.target_norm,
            "eaa": self.eaa.to_dict(),
            "query_counts": self.query_counts,
            "gate_count": self.circuit.gate_count,
            "u_gate_count": self.u_circuit.gate_count,
            "report": self.report,
        }


def _variable_state(amps: np.ndarray, layout: RegisterLayout) -> StateVector:
    full = np.zeros(layout.dim, dtype=complex)
    full[: amps.size] = amps / np.linalg.norm(amps)
    return StateVector(layout, full)


def target_state(g: GridFunction, layout: RegisterLayout) -> StateVector:
    """Classically normalized grid vector with all ancillas in |0>."""
    return _variable_state(g.flat.astype(complex), layout)


def _finish(u: CircuitDescriptor, good: list, g: GridFunction, scale: float, seq, report: dict,
            expected_pre: float, f_floor: float, tag: str) -> tuple[StateVector, PrepPlan]:
    n_f, fmax = norm_and_max(g)
    F = filling_ratio(g, scale)
    if F < f_floor:
        raise PreparationError(f"filling ratio {F:.3e} below floor {f_floor}")
    amp = exact_amplitude_amplify(u, good, tag=tag)
    report = dict(report, scale=scale, expected_pre_amplitude=expected_pre,
                  pre_amplitude_deviation=abs(amp.simulated_a - expected_pre))
    plan = PrepPlan(u.layout, seq, F, n_f, fmax, amp.circuit, u, amp.params,
                    amp.simulated_a, amp.target_norm, report)
    return amp.state, plan


def prepare_bivariate(f: Callable | GridFunction, seq: InterleavedPhaseSequence, variable_qubits: Sequence[int],
                      convention: str = "one-is-x1", f_floor: float = F_FLOOR) -> tuple[StateVector, PrepPlan]:
    """Prepare the state proportional to f on the grid, given a sequence whose P equals f/|f|_max."""
    layout = RegisterLayout(1, tuple(variable_qubits))
    if layout.num_variables != 2:
        raise ValueError("bivariate preparation needs two variables")
    g = f if isinstance(f, GridFunction) else grid_eval(f, layout)
    encs = [build_variable_block_encoding(layout, 1), build_variable_block_encoding(layout, 2)]
    u_phi = assemble_u_phi(seq, encs, convention)
    b = CircuitBuilder(layout)
    for q in range(layout.ancilla_count, layout.num_qubits):
        b.h(q)
    b.call("U_Phi", u_phi)
    u = b.build()
    _, fmax = norm_and_max(g)
    F = filling_ratio(g)
    return _finish(u, [0], g, fmax, seq, {"path": "bivariate", "convention": convention}, F, f_floor, "U_Phi_prep")


@dataclass
class WordSequence:
    phases: np.ndarray
    word: tuple

    def to_dict(self) -> dict:
        return {"phases": [float(p) for p in self.phases], "word": list(self.word)}


def prepare_word(f: Callable | GridFunction, phases, word: Sequence[int], variable_qubits: Sequence[int],
                 f_floor: float = F_FLOOR) -> tuple[StateVector, PrepPlan]:
    """D-variable generalization: interleaving word over variable indices 0..D-1."""
    layout = RegisterLayout(1, tuple(variable_qubits))
    g = f if isinstance(f, GridFunction) else grid_eval(f, layout)
    encs = [build_variable_block_encoding(layout, v + 1) for v in range(layout.num_variables)]
    u_phi = assemble_u_phi_word(phases, word, encs)
    b = CircuitBuilder(layout)
    for q in range(1, layout.num_qubits):
        b.h(q)
    b.call("U_Phi", u_phi)
    u = b.build()
    _, fmax = norm_and_max(g)
    seq = WordSequence(np.asarray(phases, dtype=float), tuple(int(w) for w in word))
    return _finish(u, [0], g, fmax, seq, {"path": "word"}, filling_ratio(g), f_floor, "U_Phi_prep")


@dataclass
class SplitApproximation:
    series: ChebSeries1D
    even: ChebSeries1D
    odd: ChebSeries1D
    scale: float
    phi_even: PhaseSequence
    phi_odd: PhaseSequence
    report: dict


def split_approximation(f: Callable, n: int, degree: int) -> SplitApproximation:
    """Cosine-series approximant, its even/odd parts and real-part QSP phases for each."""
    series = approx.cheb_fit(f, degree, "mixed")
    even, odd = approx.parity_split(series)
    xs = approx.grid_points(n)
    grid_max = float(np.max(np.abs(series(xs))))
    scale = max(grid_max, even.sup_on_circle(), odd.sup_on_circle())
    reports = {}
    phis = []
    for name, part in (("even", even), ("odd", odd)):
        target = ChebSeries1D(part.coefficients / scale, part.parity)
        ph, rep = qsp.fit_real_part(target)
        phis.append(ph)
        reports[name] = rep
    dense = np.linspace(0, 1, 10001)
    delta = float(np.max(np.abs(series(dense) - f(dense))))
    grid_delta = float(np.max(np.abs(series(xs) - f(xs))))
    report = {"degree": degree, "sup_error": delta, "grid_sup_error": grid_delta, "scale": scale,
              "grid_max": grid_max, "fits": reports}
    return SplitApproximation(series, even, odd, scale, phis[0], phis[1], report)


def prepare_single_variable(f: Callable, n: int, degree: int, approximation: SplitApproximation | None = None,
                            f_floor: float = F_FLOOR) -> tuple[StateVector, PrepPlan]:
    """Parity-split preparation of the state proportional to the approximant of f on n qubits.

    The plan report carries the approximation error delta and the implied trace-distance
    bound eps = delta / min(F_f, F_approx).
    """
    ap = approximation or split_approximation(f, n, degree)
    layout = RegisterLayout(3, (n,))
    enc = build_variable_block_encoding(layout, 1)
    u_phi = assemble_u_phi_parity_split(ap.phi_even, ap.phi_odd, enc)
    b = CircuitBuilder(layout)
    for q in range(3, layout.num_qubits):
        b.h(q)
    b.call("U_Phi", u_phi)
    u = b.build()
    g_tilde = grid_eval(ap.series, layout)
    g_f = grid_eval(f, layout)
    F_t = filling_ratio(g_tilde, ap.scale)
    F_tilde = filling_ratio(g_tilde)
    F_f = filling_ratio(g_f)
    delta = ap.report["sup_error"]
    eps = delta / min(F_f, F_tilde)
    report = {"path": "parity-split", "approximation": ap.report, "F_f": F_f, "F_tilde": F_tilde,
              "delta": delta, "epsilon_bound": eps}
    state, plan = _finish(u, [0, 1, 2], g_tilde, ap.scale, (ap.phi_even, ap.phi_odd), report,
                          F_t / 2, f_floor, "U_Phi_prep")
    plan.report["exact_target_fidelity"] = fidelity(_variable_state(g_f.flat.astype(complex), state.layout),
                                                    _project_good(state, 4))
    return state, plan


def _project_good(state: StateVector, ancillas: int) -> StateVector:
    mask = ancilla_zero_mask(state.layout, range(ancillas))
    a = np.where(mask, state.amplitudes, 0)
    return StateVector(state.layout, a / np.linalg.norm(a))


def prepared_fidelity(state: StateVector, g: GridFunction) -> float:
    """|<psi_g|psi>| between the good-ancilla part of ``state`` and the normalized grid vector."""
    anc = state.layout.ancilla_count
    return fidelity(_variable_state(g.flat.astype(complex), state.layout), _project_good(state, anc))


def variable_amplitudes(state: StateVector) -> np.ndarray:
    """Amplitudes of the all-ancillas-zero block, in variable-register order."""
    n = sum(state.layout.variable_qubits)
    return state.amplitudes[: 1 << n].copy()


def resource_counts(D: int, n: int, d: int, phases=None) -> dict:
    """Elementary gate totals of the D-variable preparation circuit with degree d per variable."""
    layout = RegisterLayout(1, (n,) * D)
    encs = [build_variable_block_encoding(layout, v + 1) for v in range(D)]
    word = [v for _ in range(d) for v in range(D)]
    ph = np.zeros(len(word) + 1) if phases is None else phases
    u_phi = assemble_u_phi_word(ph, word, encs)
    b = CircuitBuilder(layout)
    for q in range(1, layout.num_qubits):
        b.h(q)
    b.call("U_Phi", u_phi)
    c = b.build()
    return {"D": D, "n": n, "d": d, "gates": c.gate_count, "queries": c.query_counts}
