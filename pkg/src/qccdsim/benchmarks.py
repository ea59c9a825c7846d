"""
Parametric benchmark circuit generators.

QFT, Bernstein-Vazirani, Grover search, phase estimation and an Ising
Hamiltonian simulation are generated natively. AE, MC and VQE circuits are
only available through file ingestion.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

from . import circuit as C
from .circuit import CircuitDag, Gate


class Algorithm(str, Enum):
    QFT = "QFT"
    BV = "BV"
    GS = "GS"
    PE = "PE"
    HS = "HS"
    AE = "AE"
    MC = "MC"
    VQE = "VQE"


FILE_ONLY = frozenset({Algorithm.AE, Algorithm.MC, Algorithm.VQE})


@dataclass(frozen=True)
class BenchmarkSpec:
    """Benchmark request. Unused knobs are ignored by other algorithms.

    ``secret``: BV bit string over the N-1 data qubits (default all ones).
    ``marked``/``iterations``: GS marked basis state and Grover iterations.
    ``phase``: PE eigenphase in [0, 1).
    ``steps``/``coupling``/``field``/``dt``: HS Trotterization parameters.
    """

    algorithm: Algorithm
    width: int
    secret: str | None = None
    marked: int | None = None
    iterations: int | None = None
    phase: float = 0.3125
    steps: int = 3
    coupling: float = 1.0
    field: float = 1.0
    dt: float = 0.1

    def __post_init__(self) -> None:
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.width < 2:
            raise ValueError("benchmark width must be at least 2")
        if self.secret is not None:
            if len(self.secret) != self.width - 1 or set(self.secret) - {"0", "1"}:
                raise ValueError("BV secret must be a bit string of length width-1")
        if self.marked is not None and not 0 <= self.marked < 2 ** self.width:
            raise ValueError("GS marked item out of range")
        if self.iterations is not None and self.iterations < 0:
            raise ValueError("GS iteration count must be non-negative")
        if not 0.0 <= self.phase < 1.0:
            raise ValueError("PE phase must lie in [0, 1)")
        if self.steps < 1:
            raise ValueError("HS needs at least one Trotter step")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["algorithm"] = self.algorithm.value
        return d


def controlled_phase(theta: float, c: int, tgt: int) -> list[Gate]:
    """diag(1, 1, 1, e^{iθ}) up to global phase, via two CNOTs."""
    return [C.rz(theta / 2, c), C.cx(c, tgt), C.rz(-theta / 2, tgt), C.cx(c, tgt), C.rz(theta / 2, tgt)]


def qft_gates(qubits: list[int], inverse: bool = False) -> list[Gate]:
    """Textbook QFT with qubits[0] as the most significant bit."""
    n = len(qubits)
    gates: list[Gate] = []
    for j in range(n):
        gates.append(C.h(qubits[j]))
        for k in range(j + 1, n):
            gates.extend(controlled_phase(math.pi / 2 ** (k - j), qubits[k], qubits[j]))
    for j in range(n // 2):
        gates.append(C.swap(qubits[j], qubits[n - 1 - j]))
    if not inverse:
        return gates
    inv = []
    for g in reversed(gates):
        inv.append(C.rz(-g.angle, g.qubits[0]) if g.kind is C.GateKind.RZ else g)
    return inv


def _qft(spec: BenchmarkSpec) -> list[Gate]:
    return qft_gates(list(range(spec.width)))


def _bv(spec: BenchmarkSpec) -> list[Gate]:
    n = spec.width - 1
    secret = spec.secret or "1" * n
    anc = n
    gates = [C.h(anc), C.z(anc)]
    gates += [C.h(i) for i in range(n)]
    gates += [C.cx(i, anc) for i, b in enumerate(secret) if b == "1"]
    gates += [C.h(i) for i in range(n)]
    return gates


def grover_iterations(width: int) -> int:
    return int(math.floor(math.pi / 4 * math.sqrt(2 ** width)))


def _gs(spec: BenchmarkSpec) -> list[Gate]:
    n = spec.width
    marked = 2 ** n - 1 if spec.marked is None else spec.marked
    iters = grover_iterations(n) if spec.iterations is None else spec.iterations
    last = n - 1
    # Qubit 0 is the most significant bit of the marked index.
    zeros = [q for q in range(n) if not (marked >> (n - 1 - q)) & 1]
    phase_flip = [C.h(last), C.mcx(range(last), last), C.h(last)]
    gates = [C.h(q) for q in range(n)]
    for _ in range(iters):
        gates += [C.x(q) for q in zeros] + phase_flip + [C.x(q) for q in zeros]
        gates += [C.h(q) for q in range(n)] + [C.x(q) for q in range(n)]
        gates += phase_flip
        gates += [C.x(q) for q in range(n)] + [C.h(q) for q in range(n)]
    return gates


def _pe(spec: BenchmarkSpec) -> list[Gate]:
    m = spec.width - 1
    eig = m
    gates = [C.x(eig)] + [C.h(j) for j in range(m)]
    for j in range(m):
        theta = 2 * math.pi * spec.phase * 2 ** (m - 1 - j)
        gates += controlled_phase(theta, j, eig)
    return gates + qft_gates(list(range(m)), inverse=True)


def _hs(spec: BenchmarkSpec) -> list[Gate]:
    n = spec.width
    zz = 2 * spec.coupling * spec.dt
    xf = 2 * spec.field * spec.dt
    gates: list[Gate] = []
    for _ in range(spec.steps):
        for i in range(n - 1):
            gates += [C.cx(i, i + 1), C.rz(zz, i + 1), C.cx(i, i + 1)]
        for i in range(n):
            gates += [C.h(i), C.rz(xf, i), C.h(i)]
    return gates


_GENERATORS = {
    Algorithm.QFT: _qft,
    Algorithm.BV: _bv,
    Algorithm.GS: _gs,
    Algorithm.PE: _pe,
    Algorithm.HS: _hs,
}


def generate_benchmark(spec: BenchmarkSpec) -> CircuitDag:
    """Build the benchmark circuit described by ``spec`` (deterministic)."""
    gen = _GENERATORS.get(spec.algorithm)
    if gen is None:
        raise ValueError(f"{spec.algorithm.value} circuits must be supplied as QASM files")
    name = f"{spec.algorithm.value.lower()}_{spec.width}"
    return CircuitDag(spec.width, tuple(gen(spec)), name, {"benchmark": spec.to_dict()})


_RANDOM_1Q = ("x", "y", "z", "h", "s", "sdg", "t", "tdg")


def random_circuit(width: int, n_gates: int, rng, mcx_max_controls: int = 3, seed: int | None = None) -> CircuitDag:
    """Random circuit over the standard gate set, driven by a numpy Generator.

    Roughly 40% single-qubit Cliffords/T, 25% Rz, 25% CNOT and the rest SWAP
    or MCX. Used by tests and the ``verify`` command.
    """
    gates: list[Gate] = []
    for _ in range(n_gates):
        r = rng.random()
        if r < 0.4 or width < 2:
            name = _RANDOM_1Q[rng.integers(len(_RANDOM_1Q))]
            gates.append(getattr(C, name)(int(rng.integers(width))))
        elif r < 0.65:
            gates.append(C.rz(float(rng.uniform(0, 2 * math.pi)), int(rng.integers(width))))
        elif r < 0.9:
            a, b = rng.choice(width, 2, replace=False)
            gates.append(C.cx(int(a), int(b)))
        elif r < 0.95:
            a, b = rng.choice(width, 2, replace=False)
            gates.append(C.swap(int(a), int(b)))
        else:
            k = int(rng.integers(1, min(mcx_max_controls, width - 1) + 1))
            qs = [int(q) for q in rng.choice(width, k + 1, replace=False)]
            gates.append(C.mcx(qs[:-1], qs[-1]))
    meta = {"random": {"width": width, "n_gates": n_gates, "seed": seed}}
    return CircuitDag(width, tuple(gates), f"random_{width}", meta)
