"""Dense statevector simulation with structural oracle-query accounting.

Qubit 0 is the most significant position of the basis index. Ancillas come
first, then each variable register in declaration order; within a register
the bit ``i_1`` is least significant, so the register's integer value ``i``
reads out directly and the grid point is ``i / 2**n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels

MAX_QUBITS = 30
UNITARY_TOL = 1e-12
NORM_TOL = 1e-12

_I2 = np.eye(2, dtype=complex)


class LayoutError(ValueError):
    pass


class NonUnitaryGateError(ValueError):
    pass


@dataclass(frozen=True)
class RegisterLayout:
    ancilla_count: int
    variable_qubits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "variable_qubits", tuple(int(n) for n in self.variable_qubits))
        if self.ancilla_count < 0:
            raise LayoutError("ancilla_count must be nonnegative")
        if any(n < 1 for n in self.variable_qubits):
            raise LayoutError("every variable needs at least one qubit")
        if self.num_qubits > MAX_QUBITS:
            raise LayoutError(f"{self.num_qubits} qubits exceeds the simulator cap of {MAX_QUBITS}")
        if self.num_qubits == 0:
            raise LayoutError("layout has no qubits")

    @property
    def num_variables(self) -> int:
        return len(self.variable_qubits)

    @property
    def num_qubits(self) -> int:
        return self.ancilla_count + sum(self.variable_qubits)

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    @property
    def variable_offsets(self) -> tuple[int, ...]:
        out, off = [], self.ancilla_count
        for n in self.variable_qubits:
            out.append(off)
            off += n
        return tuple(out)

    def variable_register(self, v: int) -> tuple[int, ...]:
        """Qubits of variable ``v`` (0-based), most significant first."""
        off = self.variable_offsets[v]
        return tuple(range(off, off + self.variable_qubits[v]))

    def qubit_for_bit(self, v: int, b: int) -> int:
        """Qubit holding bit ``i_b`` (1-based, ``i_1`` least significant) of variable ``v``."""
        n = self.variable_qubits[v]
        if not 1 <= b <= n:
            raise LayoutError(f"bit {b} out of range for a {n}-qubit register")
        return self.variable_offsets[v] + n - b

    def bitpos(self, q: int) -> int:
        return self.num_qubits - 1 - q

    def basis_index(self, ancilla_value: int, variable_values: Sequence[int]) -> int:
        if len(variable_values) != self.num_variables:
            raise LayoutError("wrong number of variable values")
        idx = ancilla_value
        for n, i in zip(self.variable_qubits, variable_values):
            if not 0 <= i < (1 << n):
                raise LayoutError(f"value {i} does not fit in {n} qubits")
            idx = (idx << n) | i
        return idx

    def grid_shape(self) -> tuple[int, ...]:
        return tuple(1 << n for n in self.variable_qubits)

    def to_dict(self) -> dict:
        return {"ancilla_count": self.ancilla_count, "variable_qubits": list(self.variable_qubits)}


@dataclass(frozen=True, eq=False)
class Gate:
    """A (multi-)controlled single-qubit unitary."""

    matrix: np.ndarray
    target: int
    controls: tuple[int, ...] = ()
    control_values: tuple[int, ...] = ()
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise NonUnitaryGateError("gate matrix must be 2x2")
        if np.max(np.abs(m.conj().T @ m - _I2)) > UNITARY_TOL:
            raise NonUnitaryGateError(f"gate {self.label or '?'} on qubit {self.target} is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        controls = tuple(int(c) for c in self.controls)
        cvals = tuple(int(v) for v in self.control_values) or (1,) * len(controls)
        if len(cvals) != len(controls):
            raise ValueError("control_values length must match controls")
        if self.target in controls or len(set(controls)) != len(controls):
            raise ValueError("target and controls must be distinct qubits")
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "control_values", cvals)

    def dagger(self) -> "Gate":
        return Gate(self.matrix.conj().T, self.target, self.controls, self.control_values, self.label)

    def remap(self, qmap: Sequence[int]) -> "Gate":
        return Gate(self.matrix, qmap[self.target], tuple(qmap[c] for c in self.controls),
                    self.control_values, self.label)


@dataclass(frozen=True, eq=False)
class OracleCall:
    """Inclusion of a tagged subcircuit (on the same layout), optionally inverted."""

    tag: str
    circuit: "CircuitDescriptor"
    adjoint: bool = False


@dataclass(frozen=True, eq=False)
class CircuitDescriptor:
    layout: RegisterLayout
    gates: tuple = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        m = self.layout.num_qubits
        for g in self.gates:
            if isinstance(g, Gate):
                for q in (g.target, *g.controls):
                    if not 0 <= q < m:
                        raise LayoutError(f"qubit index {q} outside layout of {m} qubits")
            elif isinstance(g, OracleCall):
                if g.circuit.layout != self.layout:
                    raise LayoutError(f"oracle {g.tag!r} built on a different layout")
            else:
                raise TypeError(f"unsupported gate record {type(g).__name__}")

    @cached_property
    def query_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for g in self.gates:
            if isinstance(g, OracleCall):
                counts[g.tag] = counts.get(g.tag, 0) + 1
                for t, c in g.circuit.query_counts.items():
                    counts[t] = counts.get(t, 0) + c
        return counts

    def flat_gates(self, adjoint: bool = False) -> list[Gate]:
        out: list[Gate] = []
        seq = reversed(self.gates) if adjoint else self.gates
        for g in seq:
            if isinstance(g, Gate):
                out.append(g.dagger() if adjoint else g)
            else:
                out.extend(g.circuit.flat_gates(adjoint ^ g.adjoint))
        return out

    @cached_property
    def _flat(self):
        gates = self.flat_gates()
        k = len(gates)
        bitpos = np.empty(k, dtype=np.int64)
        cmask = np.zeros(k, dtype=np.uint64)
        cval = np.zeros(k, dtype=np.uint64)
        mats = np.empty((k, 2, 2), dtype=np.complex128)
        bp = self.layout.bitpos
        for i, g in enumerate(gates):
            bitpos[i] = bp(g.target)
            mask = val = 0
            for c, v in zip(g.controls, g.control_values):
                mask |= 1 << bp(c)
                if v:
                    val |= 1 << bp(c)
            cmask[i], cval[i] = mask, val
            mats[i] = g.matrix
        if k:
            dev = np.abs(np.einsum("kji,kjl->kil", mats.conj(), mats) - _I2).max()
            if dev > UNITARY_TOL:
                raise NonUnitaryGateError(f"non-unitary gate record (deviation {dev:.2e})")
        return bitpos, cmask, cval, mats

    @property
    def gate_count(self) -> int:
        """Number of elementary (controlled) single-qubit gates after inlining oracles."""
        return len(self._flat[0])

    def dagger(self) -> "CircuitDescriptor":
        gates = []
        for g in reversed(self.gates):
            if isinstance(g, Gate):
                gates.append(g.dagger())
            else:
                gates.append(OracleCall(g.tag, g.circuit, not g.adjoint))
        return CircuitDescriptor(self.layout, tuple(gates), dict(self.metadata))

    def relabel(self, layout: RegisterLayout, qubit_map: Sequence[int]) -> "CircuitDescriptor":
        """Embed into ``layout``; qubit ``q`` of this circuit becomes ``qubit_map[q]``."""
        qmap = list(qubit_map)
        if len(qmap) != self.layout.num_qubits:
            raise LayoutError("qubit_map must cover every qubit of the source layout")
        gates = []
        for g in self.gates:
            if isinstance(g, Gate):
                gates.append(g.remap(qmap))
            else:
                gates.append(OracleCall(g.tag, g.circuit.relabel(layout, qmap), g.adjoint))
        return CircuitDescriptor(layout, tuple(gates), dict(self.metadata))


class CircuitBuilder:
    """Accumulates gate records; ``build()`` freezes them into a descriptor."""

    def __init__(self, layout: RegisterLayout):
        self.layout = layout
        self._gates: list = []
        self.metadata: dict = {}

    def gate(self, matrix, target: int, controls: Iterable[int] = (),
             control_values: Iterable[int] = (), label: str = "") -> "CircuitBuilder":
        self._gates.append(Gate(np.asarray(matrix, dtype=complex), target, tuple(controls),
                                tuple(control_values), label))
        return self

    def h(self, q: int) -> "CircuitBuilder":
        return self.gate(np.array([[1, 1], [1, -1]]) / np.sqrt(2), q, label="H")

    def x(self, q: int, controls=(), control_values=()) -> "CircuitBuilder":
        return self.gate(np.array([[0, 1], [1, 0]]), q, controls, control_values, label="X")

    def phase(self, q: int, phi: float, controls=(), control_values=()) -> "CircuitBuilder":
        """e^{i phi Z} on qubit q."""
        return self.gate(np.diag([np.exp(1j * phi), np.exp(-1j * phi)]), q, controls,
                         control_values, label="Zphase")

    def signal(self, q: int, x: float, controls=(), control_values=()) -> "CircuitBuilder":
        """e^{i x X} = [[cos x, i sin x], [i sin x, cos x]] on qubit q."""
        c, s = np.cos(x), np.sin(x)
        return self.gate(np.array([[c, 1j * s], [1j * s, c]]), q, controls, control_values,
                         label="Xsignal")

    def ry(self, q: int, angle: float, controls=(), control_values=()) -> "CircuitBuilder":
        """Real rotation [[cos a, -sin a], [sin a, cos a]]."""
        c, s = np.cos(angle), np.sin(angle)
        return self.gate(np.array([[c, -s], [s, c]]), q, controls, control_values, label="Ry")

    def global_phase(self, phase: float) -> "CircuitBuilder":
        return self.gate(np.exp(1j * phase) * _I2, 0, label="gphase")

    def call(self, tag: str, circuit: CircuitDescriptor, adjoint: bool = False) -> "CircuitBuilder":
        self._gates.append(OracleCall(tag, circuit, adjoint))
        return self

    def extend(self, circuit: CircuitDescriptor) -> "CircuitBuilder":
        """Inline the records of another circuit (its oracle calls stay tagged)."""
        if circuit.layout != self.layout:
            raise LayoutError("cannot inline a circuit on a different layout")
        self._gates.extend(circuit.gates)
        return self

    def build(self) -> CircuitDescriptor:
        return CircuitDescriptor(self.layout, tuple(self._gates), dict(self.metadata))


@dataclass(frozen=True, eq=False)
class StateVector:
    layout: RegisterLayout
    amplitudes: np.ndarray
    projected: bool = False

    def __post_init__(self):
        a = np.ascontiguousarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if a.shape[0] != self.layout.dim:
            raise LayoutError(f"expected {self.layout.dim} amplitudes, got {a.shape[0]}")
        if not self.projected and abs(np.linalg.norm(a) - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {np.linalg.norm(a)!r} is not 1")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def zero(cls, layout: RegisterLayout) -> "StateVector":
        return cls.basis(layout, 0)

    @classmethod
    def basis(cls, layout: RegisterLayout, index: int) -> "StateVector":
        a = np.zeros(layout.dim, dtype=complex)
        a[index] = 1.0
        return cls(layout, a)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def _check_layout(a: RegisterLayout, b: RegisterLayout) -> None:
    if a != b:
        raise LayoutError(f"layout mismatch: {a} vs {b}")


def apply_to_array(circuit: CircuitDescriptor, block: np.ndarray) -> np.ndarray:
    """Apply ``circuit`` to the columns of a (dim, batch) array; returns a new array."""
    out = np.array(block, dtype=np.complex128, order="C", copy=True)
    squeeze = out.ndim == 1
    if squeeze:
        out = out.reshape(-1, 1)
    if out.shape[0] != circuit.layout.dim:
        raise LayoutError("array height does not match the circuit dimension")
    bitpos, cmask, cval, mats = circuit._flat
    if len(bitpos):
        kernels.apply_ops(out, bitpos, cmask, cval, mats)
    return out[:, 0] if squeeze else out


def apply_circuit(circuit: CircuitDescriptor, state: StateVector) -> StateVector:
    _check_layout(circuit.layout, state.layout)
    return StateVector(state.layout, apply_to_array(circuit, state.amplitudes), state.projected)


def circuit_unitary(circuit: CircuitDescriptor, max_dim: int = 1 << 12) -> np.ndarray:
    dim = circuit.layout.dim
    if dim > max_dim:
        raise ValueError(f"dense unitary of dimension {dim} exceeds limit {max_dim}")
    return apply_to_array(circuit, np.eye(dim, dtype=complex))


def ancilla_zero_mask(layout: RegisterLayout, which: Iterable[int]) -> np.ndarray:
    which = list(which)
    for q in which:
        if not 0 <= q < layout.ancilla_count:
            raise LayoutError(f"qubit {q} is not an ancilla")
    idx = np.arange(layout.dim, dtype=np.int64)
    keep = np.ones(layout.dim, dtype=bool)
    for q in which:
        keep &= ((idx >> layout.bitpos(q)) & 1) == 0
    return keep


def project_ancilla_zero(state: StateVector, which_ancillas: Iterable[int]) -> tuple[StateVector, float]:
    keep = ancilla_zero_mask(state.layout, which_ancillas)
    amps = np.where(keep, state.amplitudes, 0.0)
    return StateVector(state.layout, amps, projected=True), float(np.linalg.norm(amps))


def fidelity(a: StateVector, b: StateVector) -> float:
    _check_layout(a.layout, b.layout)
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes))))


@dataclass(frozen=True, eq=False)
class BlockEncodingSpec:
    """U is an (alpha, a, epsilon) block-encoding of A: ||A - alpha <0|U|0>|| <= epsilon.

    The ``a`` block ancillas are the first ``a`` qubits of the circuit layout.
    """

    alpha: float
    ancillas: int
    epsilon: float
    circuit: CircuitDescriptor
    operator: Callable[[], np.ndarray]

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.ancillas < 0 or self.ancillas > self.circuit.layout.num_qubits:
            raise ValueError("bad ancilla count")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


def top_left_block(circuit: CircuitDescriptor, ancillas: int) -> np.ndarray:
    s = circuit.layout.num_qubits - ancillas
    sdim = 1 << s
    cols = np.zeros((circuit.layout.dim, sdim), dtype=complex)
    cols[np.arange(sdim), np.arange(sdim)] = 1.0
    return apply_to_array(circuit, cols)[:sdim]


def verify_block_encoding(spec: BlockEncodingSpec, max_dim: int = 1 << 20) -> dict:
    dim = spec.circuit.layout.dim
    if dim > max_dim:
        raise ValueError(f"dimension {dim} too large for dense reconstruction")
    block = top_left_block(spec.circuit, spec.ancillas)
    target = np.asarray(spec.operator(), dtype=complex)
    if target.shape != block.shape:
        raise ValueError(f"operator shape {target.shape} does not match block {block.shape}")
    dev = float(np.linalg.norm(target - spec.alpha * block, 2))
    return {"max_deviation": dev, "pass": dev <= spec.epsilon + 1e-10}
