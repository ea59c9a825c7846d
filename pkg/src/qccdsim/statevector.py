"""
Dense state-vector simulator used as a correctness oracle (at most 12 qubits).

Qubit 0 is the most significant tensor factor, so a basis index reads
``q0 q1 ... q_{k-1}`` from left to right. States may carry a trailing batch
axis so several random inputs are pushed through a circuit at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import CircuitDag, Gate, GateKind

MAX_QUBITS = 12
EQUIV_TOL = 1e-9

_SQ2 = 1 / math.sqrt(2)
_FIXED = {
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    GateKind.Z: np.diag([1, -1]).astype(complex),
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    GateKind.S: np.diag([1, 1j]),
    GateKind.SDG: np.diag([1, -1j]),
    GateKind.T: np.diag([1, np.exp(1j * math.pi / 4)]),
    GateKind.TDG: np.diag([1, np.exp(-1j * math.pi / 4)]),
}


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def gpi_matrix(phi: float) -> np.ndarray:
    return np.array([[0, np.exp(-1j * phi)], [np.exp(1j * phi), 0]])


def gpi2_matrix(phi: float) -> np.ndarray:
    return _SQ2 * np.array([[1, -1j * np.exp(-1j * phi)], [-1j * np.exp(1j * phi), 1]])


def ms_matrix(phi0: float, phi1: float) -> np.ndarray:
    s, d = phi0 + phi1, phi0 - phi1
    return _SQ2 * np.array([
        [1, 0, 0, -1j * np.exp(-1j * s)],
        [0, 1, -1j * np.exp(-1j * d), 0],
        [0, -1j * np.exp(1j * d), 1, 0],
        [-1j * np.exp(1j * s), 0, 0, 1],
    ])


def ntrz_angle(level: int, sign: int) -> float:
    return sign * 2 * math.pi / 2 ** level


def gate_matrix(g: Gate) -> np.ndarray:
    """Unitary of a gate on its listed qubits (first qubit most significant)."""
    k = g.kind
    if k in _FIXED:
        return _FIXED[k]
    if k is GateKind.RZ:
        return rz_matrix(g.angle)
    if k is GateKind.NTRZ:
        return rz_matrix(ntrz_angle(*g.params))
    if k is GateKind.GPI:
        return gpi_matrix(g.angle)
    if k is GateKind.GPI2:
        return gpi2_matrix(g.angle)
    if k is GateKind.MS:
        return ms_matrix(*g.params)
    if k is GateKind.CNOT:
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    if k is GateKind.SWAP:
        return np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
    if k is GateKind.MCX:
        dim = 2 ** len(g.qubits)
        m = np.eye(dim, dtype=complex)
        m[[dim - 2, dim - 1]] = m[[dim - 1, dim - 2]]
        return m
    raise ValueError(f"{k.value} has no unitary")


@dataclass
class StateVector:
    amplitudes: np.ndarray
    num_qubits: int

    def __post_init__(self) -> None:
        if self.num_qubits > MAX_QUBITS:
            raise ValueError(f"state-vector oracle is limited to {MAX_QUBITS} qubits")
        if self.amplitudes.shape[0] != 2 ** self.num_qubits:
            raise ValueError("amplitude count does not match qubit count")

    @classmethod
    def zero(cls, num_qubits: int) -> "StateVector":
        a = np.zeros(2 ** num_qubits, dtype=complex)
        a[0] = 1
        return cls(a, num_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _apply_array(amps: np.ndarray, k: int, g: Gate) -> np.ndarray:
    if g.kind in (GateKind.MEASURE, GateKind.BARRIER):
        raise ValueError(f"{g.kind.value} is not unitary; the oracle rejects it")
    batch = amps.shape[1:]
    psi = amps.reshape((2,) * k + batch)
    qs = g.qubits
    if g.kind is GateKind.MCX:
        # Flip the target on the all-ones control subspace only.
        idx = [slice(None)] * psi.ndim
        for c in qs[:-1]:
            idx[c] = 1
        sub = list(idx)
        psi = psi.copy()
        sub0, sub1 = list(sub), list(sub)
        sub0[qs[-1]], sub1[qs[-1]] = 0, 1
        a0 = psi[tuple(sub0)].copy()
        psi[tuple(sub0)] = psi[tuple(sub1)]
        psi[tuple(sub1)] = a0
        return psi.reshape(amps.shape)
    m = gate_matrix(g).reshape((2,) * (2 * len(qs)))
    out = np.tensordot(m, psi, axes=(list(range(len(qs), 2 * len(qs))), list(qs)))
    out = np.moveaxis(out, list(range(len(qs))), list(qs))
    return out.reshape(amps.shape)


def apply(state: StateVector, gate: Gate) -> StateVector:
    """Return a new state with ``gate`` applied."""
    if any(q >= state.num_qubits for q in gate.qubits):
        raise ValueError("gate acts outside the state")
    return StateVector(_apply_array(state.amplitudes, state.num_qubits, gate), state.num_qubits)


def run_circuit(dag: CircuitDag, amps: np.ndarray, skip_measure: bool = True) -> np.ndarray:
    """Push amplitudes (shape ``(2**k,)`` or ``(2**k, batch)``) through a circuit.

    Terminal measurements and barriers are skipped by default, and a virtual
    Z-rotation layer stored in ``metadata['virtual_rz']`` is applied at the
    end.
    """
    k = dag.num_qubits
    if k > MAX_QUBITS:
        raise ValueError(f"state-vector oracle is limited to {MAX_QUBITS} qubits")
    out = amps
    for g in dag.gates:
        if skip_measure and g.kind in (GateKind.MEASURE, GateKind.BARRIER):
            continue
        out = _apply_array(out, k, g)
    for q, theta in enumerate(dag.metadata.get("virtual_rz", ())):
        if theta:
            out = _apply_array(out, k, Gate(GateKind.RZ, (q,), (theta,)))
    return out


def circuit_unitary(dag: CircuitDag) -> np.ndarray:
    dim = 2 ** dag.num_qubits
    return run_circuit(dag, np.eye(dim, dtype=complex))


def random_states(num_qubits: int, trials: int, rng: np.random.Generator, clean_ancillas: int = 0) -> np.ndarray:
    """Haar-like random inputs as columns; the last ``clean_ancillas`` qubits start in |0>."""
    data = num_qubits - clean_ancillas
    v = rng.normal(size=(2 ** data, trials)) + 1j * rng.normal(size=(2 ** data, trials))
    v /= np.linalg.norm(v, axis=0)
    if not clean_ancillas:
        return v
    full = np.zeros((2 ** num_qubits, trials), dtype=complex)
    full[:: 2 ** clean_ancillas] = v
    return full


def max_phase_aligned_deviation(a: np.ndarray, b: np.ndarray) -> float:
    """Max amplitude deviation after removing a global phase per column."""
    a = a.reshape(a.shape[0], -1)
    b = b.reshape(b.shape[0], -1)
    worst = 0.0
    for j in range(a.shape[1]):
        i = int(np.argmax(np.abs(a[:, j])))
        if abs(b[i, j]) == 0:
            return float("inf")
        ratio = b[i, j] / a[i, j]
        phase = ratio / abs(ratio)
        worst = max(worst, float(np.max(np.abs(a[:, j] * phase - b[:, j]))))
    return worst


def pad(dag: CircuitDag, width: int) -> CircuitDag:
    return CircuitDag(width, dag.gates, dag.name, dag.metadata)


def equivalent_up_to_phase(
    a: CircuitDag,
    b: CircuitDag,
    trials: int = 10,
    seed: int = 0,
    clean_ancillas: int = 0,
) -> tuple[bool, float]:
    """Compare two circuits on random inputs up to a global phase.

    ``clean_ancillas`` declares that ``b`` uses that many extra trailing
    qubits initialised to |0>; ``a`` is padded to the same width.
    """
    if a.num_qubits + clean_ancillas != b.num_qubits:
        raise ValueError(f"width mismatch: {a.num_qubits} (+{clean_ancillas} ancillas) vs {b.num_qubits}")
    rng = np.random.default_rng(seed)
    psi = random_states(b.num_qubits, trials, rng, clean_ancillas)
    out_a = run_circuit(pad(a, b.num_qubits), psi)
    out_b = run_circuit(b, psi)
    dev = max_phase_aligned_deviation(out_a, out_b)
    return dev <= EQUIV_TOL, dev
