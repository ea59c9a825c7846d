"""
Circuit intermediate representation.

A circuit is an immutable list of gates over ``num_qubits`` wires. Dependency
arcs are implied by per-qubit gate order, so the gate list is always a valid
topological order of the DAG.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-9


class GateKind(str, Enum):
    X = "x"
    Y = "y"
    Z = "z"
    H = "h"
    S = "s"
    SDG = "sdg"
    T = "t"
    TDG = "tdg"
    RZ = "rz"
    CNOT = "cx"
    SWAP = "swap"
    MCX = "mcx"
    MEASURE = "measure"
    GPI = "gpi"
    GPI2 = "gpi2"
    MS = "ms"
    NTRZ = "ntrz"
    BARRIER = "barrier"


STANDARD_KINDS = frozenset({
    GateKind.X, GateKind.Y, GateKind.Z, GateKind.H, GateKind.S, GateKind.SDG,
    GateKind.T, GateKind.TDG, GateKind.RZ, GateKind.CNOT, GateKind.SWAP,
    GateKind.MCX, GateKind.MEASURE, GateKind.BARRIER,
})
NATIVE_KINDS = frozenset({GateKind.GPI, GateKind.GPI2, GateKind.MS, GateKind.MEASURE})
PHASED_KINDS = frozenset({GateKind.RZ, GateKind.GPI, GateKind.GPI2, GateKind.MS})
SELF_INVERSE_KINDS = frozenset({
    GateKind.X, GateKind.Y, GateKind.Z, GateKind.H, GateKind.CNOT, GateKind.SWAP, GateKind.MCX,
})
# Diagonal single-qubit gates, expressed as Z rotations.
Z_ROTATION_ANGLE = {
    GateKind.Z: math.pi,
    GateKind.S: math.pi / 2,
    GateKind.SDG: 3 * math.pi / 2,
    GateKind.T: math.pi / 4,
    GateKind.TDG: 7 * math.pi / 4,
}
_ARITY = {
    GateKind.CNOT: 2, GateKind.SWAP: 2, GateKind.MS: 2,
}


def wrap_angle(theta: float) -> float:
    """Reduce an angle to [0, 2π), snapping values within tolerance of 2π to 0."""
    w = math.fmod(theta, TWO_PI)
    if w < 0:
        w += TWO_PI
    if w >= TWO_PI - ANGLE_TOL:
        w = 0.0
    return w


def angles_close(a: float, b: float, tol: float = ANGLE_TOL) -> bool:
    d = wrap_angle(a - b)
    return d <= tol or d >= TWO_PI - tol


@dataclass(frozen=True)
class Gate:
    """One circuit node.

    ``params`` holds angles for RZ/GPI/GPI2/MS and ``(level, sign)`` for NTRZ.
    For MCX the last qubit is the target. BARRIER has no qubits and spans all
    wires.
    """

    kind: GateKind
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if kind in PHASED_KINDS:
            want = 2 if kind is GateKind.MS else 1
            if len(self.params) != want:
                raise ValueError(f"{kind.value} needs {want} angle parameter(s)")
            object.__setattr__(self, "params", tuple(wrap_angle(float(p)) for p in self.params))
        elif kind is GateKind.NTRZ:
            if len(self.params) != 2:
                raise ValueError("ntrz needs (level, sign)")
            level, sign = int(self.params[0]), int(self.params[1])
            if level < 3 or sign not in (1, -1):
                raise ValueError(f"invalid ntrz level/sign {self.params}")
            object.__setattr__(self, "params", (level, sign))
        elif self.params:
            raise ValueError(f"{kind.value} takes no parameters")

        n = len(self.qubits)
        if kind is GateKind.BARRIER:
            if n:
                raise ValueError("barrier spans all qubits and takes no operands")
        elif kind is GateKind.MCX:
            if n < 2:
                raise ValueError("mcx needs at least one control and one target")
        elif n != _ARITY.get(kind, 1):
            raise ValueError(f"{kind.value} expects {_ARITY.get(kind, 1)} qubit(s), got {n}")
        if len(set(self.qubits)) != n:
            raise ValueError(f"repeated qubit operand in {kind.value} {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValueError("negative qubit index")

    @property
    def angle(self) -> float:
        return self.params[0]

    @property
    def n_controls(self) -> int:
        return len(self.qubits) - 1 if self.kind is GateKind.MCX else 0

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) == 2

    def remap(self, mapping: Mapping[int, int]) -> "Gate":
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.params)

    def __str__(self) -> str:
        args = ",".join(f"{p:.6g}" if isinstance(p, float) else str(p) for p in self.params)
        head = self.kind.value + (f"({args})" if args else "")
        return f"{head} {' '.join(map(str, self.qubits))}".rstrip()


# Small constructors keep generator and pass code compact.
def x(q: int) -> Gate: return Gate(GateKind.X, (q,))
def y(q: int) -> Gate: return Gate(GateKind.Y, (q,))
def z(q: int) -> Gate: return Gate(GateKind.Z, (q,))
def h(q: int) -> Gate: return Gate(GateKind.H, (q,))
def s(q: int) -> Gate: return Gate(GateKind.S, (q,))
def sdg(q: int) -> Gate: return Gate(GateKind.SDG, (q,))
def t(q: int) -> Gate: return Gate(GateKind.T, (q,))
def tdg(q: int) -> Gate: return Gate(GateKind.TDG, (q,))
def rz(theta: float, q: int) -> Gate: return Gate(GateKind.RZ, (q,), (theta,))
def cx(c: int, tgt: int) -> Gate: return Gate(GateKind.CNOT, (c, tgt))
def swap(a: int, b: int) -> Gate: return Gate(GateKind.SWAP, (a, b))
def mcx(controls: Sequence[int], tgt: int) -> Gate: return Gate(GateKind.MCX, (*controls, tgt))
def measure(q: int) -> Gate: return Gate(GateKind.MEASURE, (q,))
def gpi(phi: float, q: int) -> Gate: return Gate(GateKind.GPI, (q,), (phi,))
def gpi2(phi: float, q: int) -> Gate: return Gate(GateKind.GPI2, (q,), (phi,))
def ms(phi0: float, phi1: float, a: int, b: int) -> Gate: return Gate(GateKind.MS, (a, b), (phi0, phi1))
def ntrz(level: int, sign: int, q: int) -> Gate: return Gate(GateKind.NTRZ, (q,), (level, sign))


@dataclass(frozen=True, eq=False)
class CircuitDag:
    """Immutable gate list over ``num_qubits`` qubits with implied dependencies.

    Equality compares width and gates only; ``name`` and ``metadata`` are
    provenance.
    """

    num_qubits: int
    gates: tuple[Gate, ...] = ()
    name: str = ""
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.num_qubits < 0:
            raise ValueError("num_qubits must be non-negative")
        gates = tuple(self.gates)
        for g in gates:
            if not isinstance(g, Gate):
                raise TypeError(f"expected Gate, got {type(g).__name__}")
            for q in g.qubits:
                if q >= self.num_qubits:
                    raise ValueError(f"qubit index {q} out of range for width {self.num_qubits}")
        object.__setattr__(self, "gates", gates)
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CircuitDag):
            return NotImplemented
        return self.num_qubits == other.num_qubits and self.gates == other.gates

    def __hash__(self) -> int:
        return hash((self.num_qubits, self.gates))

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def operands(self, i: int) -> tuple[int, ...]:
        """Wires touched by node ``i``; a barrier touches all of them."""
        g = self.gates[i]
        return tuple(range(self.num_qubits)) if g.kind is GateKind.BARRIER else g.qubits

    @cached_property
    def predecessors(self) -> tuple[tuple[int, ...], ...]:
        """For each node, the distinct nodes it directly depends on."""
        last = [-1] * self.num_qubits
        preds = []
        for i in range(len(self.gates)):
            ops = self.operands(i)
            preds.append(tuple(sorted({last[q] for q in ops if last[q] >= 0})))
            for q in ops:
                last[q] = i
        return tuple(preds)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple((p, i) for i, ps in enumerate(self.predecessors) for p in ps)

    @cached_property
    def qubit_order(self) -> tuple[tuple[int, ...], ...]:
        """Node indices touching each qubit, in execution order."""
        per = [[] for _ in range(self.num_qubits)]
        for i in range(len(self.gates)):
            for q in self.operands(i):
                per[q].append(i)
        return tuple(tuple(p) for p in per)

    def with_gates(self, gates: Iterable[Gate], num_qubits: int | None = None, **meta: Any) -> "CircuitDag":
        md = dict(self.metadata)
        md.update(meta)
        return CircuitDag(self.num_qubits if num_qubits is None else num_qubits, tuple(gates), self.name, md)

    def depth(self) -> int:
        """Layer count ignoring barriers."""
        level = [0] * self.num_qubits
        for g in self.gates:
            if g.kind is GateKind.BARRIER or not g.qubits:
                continue
            d = max(level[q] for q in g.qubits) + 1
            for q in g.qubits:
                level[q] = d
        return max(level, default=0)

    def histogram(self) -> Counter:
        return Counter(g.kind for g in self.gates)


def gate_counts(dag: CircuitDag) -> tuple[int, int]:
    """Return ``(n_1Q, n_2Q)`` for a native circuit.

    GPI, GPI2 and RZ count as single-qubit operations, MS as two-qubit;
    measurements and barriers are not counted.
    """
    n1 = n2 = 0
    for g in dag.gates:
        if g.kind in (GateKind.GPI, GateKind.GPI2, GateKind.RZ):
            n1 += 1
        elif g.kind is GateKind.MS:
            n2 += 1
        elif g.kind not in (GateKind.MEASURE, GateKind.BARRIER):
            raise ValueError(f"non-native gate {g.kind.value} in gate_counts")
    return n1, n2


def with_terminal_measurements(dag: CircuitDag) -> CircuitDag:
    """Append a Measure to every qubit whose last operation is not already one."""
    last: dict[int, GateKind] = {}
    for g in dag.gates:
        for q in g.qubits:
            last[q] = g.kind
    extra = [measure(q) for q in range(dag.num_qubits) if last.get(q) is not GateKind.MEASURE]
    if not extra:
        return dag
    return dag.with_gates((*dag.gates, *extra))
