"""
Pipeline orchestration: transpile, schedule and analyze one parameter point,
plus the sweeps built from it.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Sequence

from .analysis import CSV_COLUMNS, ErrorRates, QecModel, RunReport, analyze
from .benchmarks import Algorithm, BenchmarkSpec, generate_benchmark
from .chip import ChipParams
from .circuit import CircuitDag, gate_counts
from .qasm import parse_circuit
from .scheduler import Schedule, TimingTable, schedule_noqec, schedule_ub, schedule_vtb
from .transpiler import DEFAULT_PRECISION, TranspileOutput, transpile

LONG_CHAIN = 100
DEFAULT_C_RANGE = tuple(range(2, 31))


@dataclass(frozen=True)
class RunConfig:
    """One parameter point. Every field is also a config-file key and CLI flag."""

    algorithm: str = "QFT"
    width: int = 8
    input_file: str | None = None
    d: int = 3
    C: int = 5
    policy: str = "VTB"
    p_2q: float = 1e-4
    L: int | None = None
    L_e: int = 2
    precision: int = DEFAULT_PRECISION
    h_reduction: bool = True
    t_1q: float = 1.0
    t_2q: float = 5.0
    t_meas: float = 20.0
    t_shuttle: float = 10.0
    ratio_1q: float = 0.1
    ratio_meas: float = 1.0
    ratio_shuttle: float = 0.02
    magic_infidelity: float = 0.0
    shuttle_all: bool = True
    k_scale: float = 1.0
    enum_mode: str = "auto"
    offline: bool = False
    secret: str | None = None
    marked: int | None = None
    iterations: int | None = None
    steps: int = 3
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.d not in (0, 3, 5, 7):
            raise ValueError("d must be 0 (no QEC), 3, 5 or 7")
        if self.policy not in ("UB", "VTB"):
            raise ValueError("policy must be UB or VTB")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.enum_mode not in ("auto", "exact", "bounded"):
            raise ValueError("enum_mode must be auto, exact or bounded")

    def replace(self, **changes: Any) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @property
    def timing(self) -> TimingTable:
        return TimingTable(self.t_1q, self.t_2q, self.t_meas, self.t_shuttle)

    @property
    def rates(self) -> ErrorRates:
        return ErrorRates(self.p_2q, self.ratio_1q, self.ratio_meas, self.ratio_shuttle,
                          self.magic_infidelity, self.shuttle_all)

    def benchmark(self) -> BenchmarkSpec:
        return BenchmarkSpec(Algorithm(self.algorithm), self.width, secret=self.secret, marked=self.marked,
                             iterations=self.iterations, steps=self.steps)

    @property
    def label(self) -> str:
        return Path(self.input_file).stem if self.input_file else self.algorithm


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def coerce(name: str, text: str) -> Any:
    """Convert a config-file string to the type of field ``name``."""
    if name not in _FIELD_TYPES:
        raise KeyError(f"unknown config key {name!r}")
    kind = _FIELD_TYPES[name]
    if text.lower() in ("none", "") and "None" in kind:
        return None
    if kind.startswith("bool"):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {text!r}")
    if kind.startswith("int"):
        return int(text)
    if kind.startswith("float"):
        return float(text)
    return text


def load_config(path: str | Path, section: str = "qccdsim") -> dict[str, Any]:
    """Read ``key = value`` pairs from an INI file section."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys such as C and L_e are case-sensitive
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section(section):
        raise ValueError(f"{path}: missing [{section}] section")
    return {k: coerce(k, v) for k, v in parser.items(section)}


# --------------------------------------------------------------------------
# Cached stages
# --------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _circuit(spec: BenchmarkSpec | None, input_file: str | None) -> CircuitDag:
    if input_file:
        return parse_circuit(Path(input_file).read_text(encoding="utf-8"))
    return generate_benchmark(spec)


def load_circuit(config: RunConfig) -> CircuitDag:
    return _circuit(None if config.input_file else config.benchmark(), config.input_file)


@lru_cache(maxsize=16)
def _transpiled(spec: BenchmarkSpec | None, input_file: str | None, precision: int,
                h_reduction: bool) -> TranspileOutput:
    return transpile(_circuit(spec, input_file), precision, h_reduction)


def transpile_config(config: RunConfig) -> TranspileOutput:
    spec = None if config.input_file else config.benchmark()
    return _transpiled(spec, config.input_file, config.precision, config.h_reduction)


@lru_cache(maxsize=8)
def _qec_model(d: int, mode: str, offline: bool, k_scale: float) -> QecModel:
    return QecModel.load(d, mode, offline, k_scale)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


def _stage(name: str, fn: Callable[[], Any]) -> Any:
    try:
        return fn()
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def build_schedule(config: RunConfig, out: TranspileOutput | None = None) -> Schedule:
    out = out or _stage("transpile", lambda: transpile_config(config))
    if config.d == 0:
        return _stage("schedule", lambda: schedule_noqec(out.noqec_circuit, config.C, config.timing))
    circ = out.qec_circuit
    params = _stage("chip", lambda: ChipParams.derive(config.C, circ.num_qubits, config.d, config.L_e, config.L))
    fn = schedule_ub if config.policy == "UB" else schedule_vtb
    return _stage("schedule", lambda: fn(circ, params, config.timing))


def run_single(config: RunConfig) -> RunReport:
    out = _stage("transpile", lambda: transpile_config(config))
    sched = build_schedule(config, out)
    counts = _stage("count", lambda: gate_counts(out.noqec_circuit))
    model = None
    if config.d:
        model = _stage("enumerator", lambda: _qec_model(config.d, config.enum_mode, config.offline,
                                                          config.k_scale))
    meta = {"algorithm": config.label, "N": load_circuit(config).num_qubits, "chip_N": out.qec_circuit.num_qubits,
            "seed": config.seed, "depth": out.noqec_circuit.depth()}
    report = _stage("analyze", lambda: analyze(sched, config.rates, counts, model, config.timing, meta))
    if config.d == 0:
        report = dataclasses.replace(report, policy="NOQEC")
    return report


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

@dataclass
class SweepRow:
    config: RunConfig
    report: RunReport | None
    error: str = ""
    extra: dict[str, Any] = field(default_factory=dict)


def _job(config: RunConfig) -> tuple[RunReport | None, str]:
    try:
        return run_single(config), ""
    except Exception as exc:  # one bad point must not sink the sweep
        return None, str(exc)


def run_many(configs: Sequence[RunConfig], workers: int = 1) -> list[SweepRow]:
    """Evaluate configs in order; results keep input order regardless of workers."""
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job, configs))
    else:
        results = [_job(c) for c in configs]
    return [SweepRow(c, r, e) for c, (r, e) in zip(configs, results)]


def sweep_chain_length(config: RunConfig, c_values: Sequence[int] = DEFAULT_C_RANGE) -> list[SweepRow]:
    """QEC and short-chain no-QEC rows per C, plus the long-chain baseline."""
    c_values = sorted(set(c_values))
    if not c_values:
        raise ValueError("empty C range")
    qec_cfgs = [config.replace(C=c) for c in c_values] if config.d else []
    short = [config.replace(C=c, d=0) for c in c_values]
    long_cfg = [config.replace(C=LONG_CHAIN, d=0)]
    rows = run_many(qec_cfgs + short + long_cfg, config.workers)
    for row, variant in zip(rows, ["qec"] * len(qec_cfgs) + ["noqec"] * len(short) + ["long"]):
        row.extra["variant"] = variant
        row.extra["optimal"] = 0
    for variant in ("qec", "noqec"):
        best = best_row(r for r in rows if r.extra["variant"] == variant)
        if best is not None:
            best.extra["optimal"] = 1
    return rows


def best_row(rows) -> SweepRow | None:
    """Highest P_succ, smallest C on ties."""
    ok = [r for r in rows if r.report is not None]
    if not ok:
        return None
    return min(ok, key=lambda r: (-r.report.P_succ, r.config.C))


def optimal_c(config: RunConfig, c_values: Sequence[int] = DEFAULT_C_RANGE) -> tuple[int, RunReport]:
    rows = sweep_chain_length(config, c_values)
    best = best_row(r for r in rows if r.extra["variant"] == ("qec" if config.d else "noqec"))
    if best is None:
        raise RuntimeError("every point of the C sweep failed")
    return best.config.C, best.report


def sweep_error(config: RunConfig, p_grid: Sequence[float], distances: Sequence[int] = (0, 3, 5, 7)) -> list[SweepRow]:
    if not p_grid:
        raise ValueError("empty p grid")
    cfgs = [config.replace(d=d, p_2q=p) for d in distances for p in p_grid]
    return run_many(cfgs, config.workers)


def volumetric(config: RunConfig, widths: Sequence[int], algorithms: Sequence[str] | None = None) -> list[SweepRow]:
    algorithms = list(algorithms or [config.algorithm])
    if not widths:
        raise ValueError("empty width list")
    cfgs = [config.replace(algorithm=a, width=w) for a in algorithms for w in widths]
    rows = run_many(cfgs, config.workers)
    for row in rows:
        row.extra["depth"] = row.report.config.get("depth", "") if row.report else ""
    return rows


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    """Fixed columns, then sweep-specific extras, then an error column."""
    extras = list(rows[0].extra) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(CSV_COLUMNS) + extras + ["error"])
    for row in rows:
        if row.report is not None:
            base = row.report.csv_row()
        else:
            c = row.config
            base = [c.label, str(c.width), str(c.C), str(c.d), c.policy if c.d else "NOQEC", repr(c.p_2q)]
            base += [""] * (len(CSV_COLUMNS) - len(base))
        vals = [repr(v) if isinstance(v, float) else str(v) for v in (row.extra.get(k, "") for k in extras)]
        w.writerow(base + vals + [row.error])
    return buf.getvalue()
