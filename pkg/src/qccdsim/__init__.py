"""Transpile, schedule and analyse circuits on a shuttling trapped-ion chip."""

from .circuit import CircuitDag, Gate, GateKind, gate_counts
from .qasm import parse_circuit, write_circuit
from .benchmarks import Algorithm, BenchmarkSpec, generate_benchmark

__all__ = [
    "Algorithm",
    "BenchmarkSpec",
    "CircuitDag",
    "Gate",
    "GateKind",
    "gate_counts",
    "generate_benchmark",
    "parse_circuit",
    "write_circuit",
]
__version__ = "0.1.0"
