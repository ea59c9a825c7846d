"""
Standard-to-native transpilation passes.

The pipeline produces two circuits from one input: a QEC variant in which
non-Clifford Z rotations are expanded into binary-angle levels
(:class:`~qccdsim.circuit.GateKind.NTRZ` macros), and a no-QEC variant in
which every Z rotation is tracked in a per-qubit frame and emitted as a
trailing virtual layer (``metadata['virtual_rz']``).

Native gate identities used here (time order, left to right)::

    X    = GPI(0)          Y = GPI(π/2)
    H    ~ GPI2(3π/2), Rz(π)
    CNOT ~ GPI2_c(π/2), MS(0,0), GPI2_t(π), GPI2_c(π), GPI2_c(-π/2)
    GPI(θ1), GPI(θ2) = Rz(2(θ2-θ1))

and a Z rotation is pushed later through a phased gate by shifting its
phase: G(φ)·Rz(θ) = Rz(θ)·G(φ-θ).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from . import circuit as C
from .circuit import (
    TWO_PI,
    Z_ROTATION_ANGLE,
    CircuitDag,
    Gate,
    GateKind,
    angles_close,
    wrap_angle,
    with_terminal_measurements,
)

DEFAULT_PRECISION = 16
_HALF_PI = math.pi / 2
_Z_FAMILY = frozenset(Z_ROTATION_ANGLE) | {GateKind.RZ}


# --------------------------------------------------------------------------
# Standard-gate peephole optimisation
# --------------------------------------------------------------------------

def _z_angle(g: Gate) -> float:
    return g.angle if g.kind is GateKind.RZ else Z_ROTATION_ANGLE[g.kind]


def canonical_z_rotation(theta: float, q: int) -> Gate | None:
    """Cheapest named gate for a Z rotation, or None for the identity."""
    theta = wrap_angle(theta)
    if angles_close(theta, 0.0):
        return None
    for kind, ang in Z_ROTATION_ANGLE.items():
        if angles_close(theta, ang):
            return Gate(kind, (q,))
    return C.rz(theta, q)


def _same_self_inverse(a: Gate, b: Gate) -> bool:
    if a.kind is not b.kind:
        return False
    if a.kind is GateKind.SWAP:
        return set(a.qubits) == set(b.qubits)
    if a.kind is GateKind.MCX:
        return a.qubits[-1] == b.qubits[-1] and set(a.qubits[:-1]) == set(b.qubits[:-1])
    return a.qubits == b.qubits


def _standard_pass(gates: list[Gate], n: int, h_reduction: bool) -> list[Gate]:
    out: list[Gate | None] = []
    stacks: list[list[int]] = [[] for _ in range(n)]

    # Next gate on each wire, for the H-conjugated CNOT rule.
    nxt: list[dict[int, int]] = [dict() for _ in gates]
    last: dict[int, int] = {}
    for i in range(len(gates) - 1, -1, -1):
        ops = gates[i].qubits if gates[i].kind is not GateKind.BARRIER else range(n)
        for q in ops:
            if q in last:
                nxt[i][q] = last[q]
            last[q] = i
    skip: set[int] = set()

    def top(q: int) -> int | None:
        return stacks[q][-1] if stacks[q] else None

    def emit(g: Gate) -> None:
        out.append(g)
        for q in (g.qubits if g.kind is not GateKind.BARRIER else range(n)):
            stacks[q].append(len(out) - 1)

    def drop(j: int) -> None:
        g = out[j]
        for q in g.qubits:
            assert stacks[q][-1] == j
            stacks[q].pop()
        out[j] = None

    for i, g in enumerate(gates):
        if i in skip:
            continue
        k = g.kind
        if k in _Z_FAMILY:
            q = g.qubits[0]
            j = top(q)
            if j is not None and out[j].kind in _Z_FAMILY:
                merged = canonical_z_rotation(_z_angle(out[j]) + _z_angle(g), q)
                if merged is None:
                    drop(j)
                else:
                    out[j] = merged
                continue
            single = canonical_z_rotation(_z_angle(g), q)
            if single is not None:
                emit(single)
            continue
        if k in C.SELF_INVERSE_KINDS:
            tops = {top(q) for q in g.qubits}
            if len(tops) == 1:
                j = tops.pop()
                if j is not None and _same_self_inverse(out[j], g):
                    drop(j)
                    continue
        if h_reduction and k is GateKind.H:
            q = g.qubits[0]
            st = stacks[q]
            if len(st) >= 2:
                mid, first = out[st[-1]], out[st[-2]]
                if first.kind is GateKind.H and mid.kind in (GateKind.S, GateKind.SDG):
                    # H S H = Sdg H Sdg and H Sdg H = S H S, up to global phase.
                    flip = GateKind.SDG if mid.kind is GateKind.S else GateKind.S
                    out[st[-2]] = Gate(flip, (q,))
                    out[st[-1]] = C.h(q)
                    emit(Gate(flip, (q,)))
                    continue
        if h_reduction and k is GateKind.CNOT:
            c, tg = g.qubits
            jc, jt = top(c), top(tg)
            nc, nt = nxt[i].get(c), nxt[i].get(tg)
            if (
                jc is not None and jt is not None and jc != jt
                and out[jc].kind is GateKind.H and out[jt].kind is GateKind.H
                and nc is not None and nt is not None
                and gates[nc].kind is GateKind.H and gates[nt].kind is GateKind.H
                and nc not in skip and nt not in skip
            ):
                drop(jc)
                drop(jt)
                skip.update((nc, nt))
                emit(C.cx(tg, c))
                continue
        emit(g)
    return [g for g in out if g is not None]


def _h_count(gates: list[Gate]) -> int:
    return sum(1 for g in gates if g.kind is GateKind.H)


def optimize_standard(dag: CircuitDag, h_reduction: bool = True) -> CircuitDag:
    """Peephole optimisation over the standard gate set, run to a fixpoint.

    Merges adjacent Z-axis rotations, cancels adjacent self-inverse pairs and
    (optionally) rewrites H·S·H patterns and H-conjugated CNOTs to use fewer
    Hadamards. Never increases the gate count.
    """
    gates = list(dag.gates)
    while True:
        new = _standard_pass(gates, dag.num_qubits, h_reduction)
        if new == gates:
            break
        if (len(new), _h_count(new)) >= (len(gates), _h_count(gates)):
            break
        gates = new
    return dag.with_gates(gates)


# --------------------------------------------------------------------------
# Multi-controlled X
# --------------------------------------------------------------------------

def toffoli_gates(a: int, b: int, tgt: int) -> list[Gate]:
    """Exact Toffoli with 6 CNOTs, 7 T/T† and 2 H."""
    return [
        C.h(tgt), C.cx(b, tgt), C.tdg(tgt), C.cx(a, tgt), C.t(tgt), C.cx(b, tgt),
        C.tdg(tgt), C.cx(a, tgt), C.t(b), C.t(tgt), C.h(tgt), C.cx(a, b), C.t(a),
        C.tdg(b), C.cx(a, b),
    ]


def mcx_gates(controls: list[int], tgt: int, aux: list[int]) -> list[Gate]:
    """V-chain multi-controlled X using ``len(controls) - 2`` clean auxiliaries."""
    k = len(controls)
    if k == 1:
        return [C.cx(controls[0], tgt)]
    if k == 2:
        return toffoli_gates(controls[0], controls[1], tgt)
    if len(aux) < k - 2:
        raise ValueError("not enough auxiliary qubits")
    compute = [(controls[0], controls[1], aux[0])]
    for i in range(2, k - 1):
        compute.append((controls[i], aux[i - 2], aux[i - 1]))
    gates: list[Gate] = []
    for triple in compute:
        gates += toffoli_gates(*triple)
    gates += toffoli_gates(controls[-1], aux[k - 3], tgt)
    for triple in reversed(compute):
        gates += toffoli_gates(*triple)
    return gates


def decompose_mcx(dag: CircuitDag) -> CircuitDag:
    """Replace every MCX; auxiliaries are appended after the existing qubits."""
    n = dag.num_qubits
    n_aux = max((g.n_controls - 2 for g in dag.gates if g.kind is GateKind.MCX), default=0)
    n_aux = max(n_aux, 0)
    aux = list(range(n, n + n_aux))
    out: list[Gate] = []
    for g in dag.gates:
        if g.kind is GateKind.MCX:
            out += mcx_gates(list(g.qubits[:-1]), g.qubits[-1], aux)
        else:
            out.append(g)
    return dag.with_gates(out, num_qubits=n + n_aux, auxiliary_qubits=n_aux)


# --------------------------------------------------------------------------
# Basis conversion and binary-angle approximation
# --------------------------------------------------------------------------

_TO_RZ = {GateKind.S: _HALF_PI, GateKind.SDG: -_HALF_PI, GateKind.T: math.pi / 4, GateKind.TDG: -math.pi / 4}


def to_basic(dag: CircuitDag) -> CircuitDag:
    """Rewrite to {X, Y, Z, H, CNOT, Rz, Measure}; barriers are dropped."""
    out: list[Gate] = []
    for g in dag.gates:
        k = g.kind
        if k in _TO_RZ:
            out.append(C.rz(_TO_RZ[k], g.qubits[0]))
        elif k is GateKind.SWAP:
            a, b = g.qubits
            out += [C.cx(a, b), C.cx(b, a), C.cx(a, b)]
        elif k is GateKind.BARRIER:
            continue
        elif k is GateKind.MCX:
            raise ValueError("decompose MCX before basis conversion")
        else:
            out.append(g)
    return dag.with_gates(out)


@dataclass(frozen=True)
class RzApprox:
    """Binary-angle expansion of a Z rotation.

    ``bits[i-1]`` is b_i of angle ≈ Σ b_i·2π/2^i (i = 1..t). The emitted form
    uses ``sign``: +1 expands the angle itself, -1 expands its negative so
    that angles just below 2π need few high levels. ``clifford_angle`` is the
    part carried by levels 1 and 2 and ``levels`` the non-transversal levels
    (all ≥ 3) emitted with that sign.
    """

    angle: float
    bits: tuple[int, ...]
    t_precision: int
    sign: int
    clifford_angle: float
    levels: tuple[int, ...]
    residual: float

    @property
    def reconstructed(self) -> float:
        return sum(b * TWO_PI / 2 ** (i + 1) for i, b in enumerate(self.bits))


def _bits_of(k: int, t: int) -> tuple[int, ...]:
    return tuple((k >> (t - i)) & 1 for i in range(1, t + 1))


def approximate_rz(angle: float, t: int = DEFAULT_PRECISION) -> RzApprox:
    """Round ``angle`` to the nearest multiple of 2π/2^t and expand it in binary."""
    if t < 3:
        raise ValueError("precision must be at least 3")
    unit = TWO_PI / 2 ** t
    a = wrap_angle(angle)
    k = int(math.floor(a / unit + 0.5)) % 2 ** t
    bits = _bits_of(k, t)
    neg_bits = _bits_of((2 ** t - k) % 2 ** t, t)
    sign, chosen = 1, bits
    if sum(neg_bits[2:]) < sum(bits[2:]):
        sign, chosen = -1, neg_bits
    cliff = sign * (chosen[0] * math.pi + chosen[1] * _HALF_PI)
    levels = tuple(i + 1 for i in range(2, t) if chosen[i])
    residual = math.remainder(a - k * unit, TWO_PI)
    return RzApprox(a, bits, t, sign, wrap_angle(cliff), levels, residual)


def expand_rz_for_qec(dag: CircuitDag, t: int = DEFAULT_PRECISION) -> CircuitDag:
    """Replace each Rz by a Clifford Rz (multiple of π/2) plus NTRZ macros."""
    out: list[Gate] = []
    for g in dag.gates:
        if g.kind is GateKind.RZ:
            q = g.qubits[0]
            ap = approximate_rz(g.angle, t)
            if ap.clifford_angle:
                out.append(C.rz(ap.clifford_angle, q))
            out += [C.ntrz(p, ap.sign, q) for p in ap.levels]
        else:
            out.append(g)
    return dag.with_gates(out, precision=t)


# --------------------------------------------------------------------------
# Native conversion with Z-frame tracking
# --------------------------------------------------------------------------

class _Frame:
    """Per-qubit accumulated Z rotation awaiting virtualisation."""

    def __init__(self, n: int, qec_mode: bool, initial: tuple[float, ...] = ()):
        self.f = list(initial) + [0.0] * (n - len(initial))
        self.qec_mode = qec_mode

    def rotate(self, q: int, theta: float) -> None:
        if self.qec_mode and not any(angles_close(theta, m * _HALF_PI) for m in range(4)):
            raise ValueError(f"QEC mode can only defer Clifford Z rotations, got {theta}")
        self.f[q] = wrap_angle(self.f[q] + theta)

    def shift(self, q: int, phi: float) -> float:
        return wrap_angle(phi - self.f[q])

    def layer(self) -> tuple[float, ...]:
        return tuple(wrap_angle(x) for x in self.f)


def to_native(dag: CircuitDag, qec_mode: bool) -> CircuitDag:
    """Rewrite to GPI/GPI2/MS (+ NTRZ and Measure) with Z rotations virtualised."""
    fr = _Frame(dag.num_qubits, qec_mode, tuple(dag.metadata.get("virtual_rz", ())))
    out: list[Gate] = []

    def cnot(c: int, tg: int) -> None:
        out.append(C.gpi2(fr.shift(c, _HALF_PI), c))
        out.append(C.ms(fr.shift(c, 0.0), fr.shift(tg, 0.0), c, tg))
        out.append(C.gpi2(fr.shift(tg, math.pi), tg))
        out.append(C.gpi2(fr.shift(c, math.pi), c))
        out.append(C.gpi2(fr.shift(c, -_HALF_PI), c))

    for g in dag.gates:
        k = g.kind
        q = g.qubits[0] if g.qubits else None
        if k is GateKind.X:
            out.append(C.gpi(fr.shift(q, 0.0), q))
        elif k is GateKind.Y:
            out.append(C.gpi(fr.shift(q, _HALF_PI), q))
        elif k is GateKind.H:
            out.append(C.gpi2(fr.shift(q, 3 * _HALF_PI), q))
            fr.rotate(q, math.pi)
        elif k in Z_ROTATION_ANGLE:
            if qec_mode and k in (GateKind.T, GateKind.TDG):
                raise ValueError("T gates must be expanded before QEC native conversion")
            fr.rotate(q, Z_ROTATION_ANGLE[k])
        elif k is GateKind.RZ:
            fr.rotate(q, g.angle)
        elif k is GateKind.CNOT:
            cnot(*g.qubits)
        elif k is GateKind.SWAP:
            a, b = g.qubits
            cnot(a, b)
            cnot(b, a)
            cnot(a, b)
        elif k is GateKind.NTRZ:
            if not qec_mode:
                raise ValueError("ntrz only appears in the QEC branch")
            out.append(g)
        elif k is GateKind.MEASURE:
            out.append(g)
        elif k is GateKind.BARRIER:
            continue
        elif k in (GateKind.GPI, GateKind.GPI2):
            out.append(Gate(k, g.qubits, (fr.shift(q, g.angle),)))
        elif k is GateKind.MS:
            a, b = g.qubits
            out.append(C.ms(fr.shift(a, g.params[0]), fr.shift(b, g.params[1]), a, b))
        else:
            raise ValueError(f"unsupported gate {k.value} for native conversion")
    return dag.with_gates(out, virtual_rz=fr.layer())


def optimize_native(dag: CircuitDag) -> CircuitDag:
    """Merge adjacent native single-qubit pairs, virtualising the resulting Rz.

    Rules (per qubit, adjacent in that qubit's order):
    GPI(a), GPI(b) -> Rz(2(b-a)); GPI2(a), GPI2(a+π) -> identity;
    GPI2(a), GPI2(a) -> GPI(a); MS(a,b), MS(a+π,b) -> identity.
    """
    qec_mode = any(g.kind is GateKind.NTRZ for g in dag.gates) or dag.metadata.get("qec", False)
    gates = list(dag.gates)
    layer = tuple(dag.metadata.get("virtual_rz", ()))
    while True:
        new, layer_new = _native_pass(gates, dag.num_qubits, layer, qec_mode)
        if len(new) >= len(gates):
            break
        gates, layer = new, layer_new
    return dag.with_gates(gates, virtual_rz=tuple(layer) + (0.0,) * (dag.num_qubits - len(layer)))


def _native_pass(
    gates: list[Gate], n: int, layer: tuple[float, ...], qec_mode: bool
) -> tuple[list[Gate], tuple[float, ...]]:
    out: list[Gate | None] = []
    stacks: list[list[int]] = [[] for _ in range(n)]
    # Frame correction accumulated in this pass, composed with the incoming layer at the end.
    fr = _Frame(n, False)

    def top(q: int) -> int | None:
        return stacks[q][-1] if stacks[q] else None

    def drop(j: int) -> None:
        for q in out[j].qubits:
            stacks[q].pop()
        out[j] = None

    def push(g: Gate) -> None:
        out.append(g)
        for q in g.qubits:
            stacks[q].append(len(out) - 1)

    def put_gpi(phi: float, q: int) -> None:
        j = top(q)
        if j is not None and out[j].kind is GateKind.GPI:
            prev = out[j].angle
            drop(j)
            fr.rotate(q, 2 * (phi - prev))
            return
        push(C.gpi(phi, q))

    def put_gpi2(phi: float, q: int) -> None:
        j = top(q)
        if j is not None and out[j].kind is GateKind.GPI2:
            prev = out[j].angle
            if angles_close(phi, prev + math.pi):
                drop(j)
                return
            if angles_close(phi, prev):
                drop(j)
                put_gpi(prev, q)
                return
        push(C.gpi2(phi, q))

    for g in gates:
        k = g.kind
        if k is GateKind.GPI:
            q = g.qubits[0]
            put_gpi(fr.shift(q, g.angle), q)
        elif k is GateKind.GPI2:
            q = g.qubits[0]
            put_gpi2(fr.shift(q, g.angle), q)
        elif k is GateKind.MS:
            a, b = g.qubits
            p0, p1 = fr.shift(a, g.params[0]), fr.shift(b, g.params[1])
            ja, jb = top(a), top(b)
            if ja is not None and ja == jb and out[ja].kind is GateKind.MS:
                prev = out[ja]
                q0, q1 = prev.params if prev.qubits == (a, b) else prev.params[::-1]
                if (angles_close(p0, q0 + math.pi) and angles_close(p1, q1)) or (
                    angles_close(p0, q0) and angles_close(p1, q1 + math.pi)
                ):
                    drop(ja)
                    continue
            push(C.ms(p0, p1, a, b))
        elif k is GateKind.RZ:
            fr.rotate(g.qubits[0], g.angle)
        else:
            push(g)
    merged = [g for g in out if g is not None]
    full = tuple(wrap_angle((layer[q] if q < len(layer) else 0.0) + fr.f[q]) for q in range(n))
    if qec_mode:
        for theta in fr.f:
            if not any(angles_close(theta, m * _HALF_PI) for m in range(4)):
                raise ValueError("native merge produced a non-Clifford rotation in QEC mode")
    return merged, full


# --------------------------------------------------------------------------
# Pipeline
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PassRecord:
    name: str
    before: int
    after: int


@dataclass(frozen=True)
class TranspileOutput:
    qec_circuit: CircuitDag
    noqec_circuit: CircuitDag
    pass_log: tuple[PassRecord, ...] = field(default_factory=tuple)


def transpile(
    dag: CircuitDag,
    precision: int = DEFAULT_PRECISION,
    h_reduction: bool = True,
) -> TranspileOutput:
    """Run the full pass pipeline and return both native variants."""
    log: list[PassRecord] = []

    def step(name: str, fn: Callable[[CircuitDag], CircuitDag], c: CircuitDag) -> CircuitDag:
        res = fn(c)
        log.append(PassRecord(name, len(c), len(res)))
        return res

    c = step("terminal_measure", with_terminal_measurements, dag)
    c = step("optimize_standard", lambda d: optimize_standard(d, h_reduction), c)
    c = step("decompose_mcx", decompose_mcx, c)
    c = step("optimize_standard_post_mcx", lambda d: optimize_standard(d, h_reduction), c)
    basic = step("to_basic", to_basic, c)

    qec = step("approximate_rz", lambda d: expand_rz_for_qec(d, precision), basic)
    qec = step("to_native_qec", lambda d: to_native(d, True), qec)
    qec = step("optimize_native_qec", optimize_native, qec.with_gates(qec.gates, qec=True))

    noqec = step("to_native_noqec", lambda d: to_native(d, False), basic)
    noqec = step("optimize_native_noqec", optimize_native, noqec)
    return TranspileOutput(qec, noqec, tuple(log))
