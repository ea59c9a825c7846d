"""
Analytic error analysis over a schedule.

Every logical qubit carries one X and one Z flip probability shared by all of
its physical ions. Gate, SWAP, shuttle and macro events raise those
probabilities; a syndrome extraction multiplies the success probability by the
code-capacity success polynomial and resets the qubit to the residual failure
level of the extraction circuit. Without QEC, success is simply the chance
that no event errs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

from .colorcode import (
    PauliKind,
    WeightEnumerator,
    build_code,
    correctable_enumerator,
    load_enumerator,
    log_success_polynomial,
)
from .scheduler import EventKind, Schedule, ScheduleEvent, TimingTable

SENTINEL_P2Q = 1.0
CSV_COLUMNS = (
    "algorithm", "N", "C", "d", "policy", "p_2Q", "P_succ", "T", "p2Q_star", "t_over_p",
    "enum_x", "enum_z", "shuttle_all",
)


@dataclass(frozen=True)
class ErrorRates:
    """Physical error probabilities, with ratios relative to ``p_2q``."""

    p_2q: float
    ratio_1q: float = 0.1
    ratio_meas: float = 1.0
    ratio_shuttle: float = 0.02
    magic_infidelity: float = 0.0
    shuttle_all: bool = True

    def __post_init__(self) -> None:
        for name in ("p_2q", "p_1q", "p_meas", "p_shuttle", "magic_infidelity"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")

    @property
    def p_1q(self) -> float:
        return self.ratio_1q * self.p_2q

    @property
    def p_meas(self) -> float:
        return self.ratio_meas * self.p_2q

    @property
    def p_shuttle(self) -> float:
        return self.ratio_shuttle * self.p_2q


def compose(q: float, delta: float) -> float:
    """Flip probability after an independent flip with probability ``delta``."""
    return min(0.5, q + delta - 2 * q * delta)


def flip_1q(p: float) -> float:
    """Marginal X (or Z) flip of single-qubit depolarizing noise."""
    return 2 * p / 3


def flip_2q(p: float) -> float:
    """Marginal X (or Z) flip on one operand of two-qubit depolarizing noise."""
    return 8 * p / 15


@dataclass
class ErrorLedger:
    q_x: list[float]
    q_z: list[float]
    log_p_succ: float = 0.0

    @classmethod
    def fresh(cls, n: int, initial: float = 0.0) -> "ErrorLedger":
        return cls([initial] * n, [initial] * n)

    def bump(self, q: int, delta: float) -> None:
        self.q_x[q] = compose(self.q_x[q], delta)
        self.q_z[q] = compose(self.q_z[q], delta)


@dataclass(frozen=True)
class QecModel:
    """Enumerators plus the extraction-failure model for one distance.

    The residual flip level left by an extraction is
    ``p_L = min(0.5, K * p_bar**ceil(d/2))`` where ``p_bar`` is the
    duration-weighted mean error of the primitive steps of one extraction
    round and ``K = C(N_f, ceil(d/2))`` with ``N_f`` the fault-location count
    of ``d`` rounds over both stabilizer types.
    """

    d: int
    enum_x: WeightEnumerator
    enum_z: WeightEnumerator
    n_faults: int
    k_scale: float = 1.0

    @classmethod
    def load(cls, d: int, mode: str = "auto", offline: bool = False, k_scale: float = 1.0) -> "QecModel":
        """``mode``: ``auto`` (inline exact, else cache, else bounded), ``exact`` or ``bounded``."""
        code = build_code(d)
        if mode == "auto":
            ex = load_enumerator(d, PauliKind.X)
            ez = load_enumerator(d, PauliKind.Z)
        else:
            ex = correctable_enumerator(code, PauliKind.X, mode, offline)
            ez = correctable_enumerator(code, PauliKind.Z, mode, offline)
        n_faults = d * 2 * sum(w + 2 for w in code.plaquette_weights)
        return cls(d, ex, ez, n_faults, k_scale)

    @property
    def order(self) -> int:
        return (self.d + 1) // 2

    @property
    def k_coeff(self) -> float:
        return self.k_scale * math.comb(self.n_faults, self.order)

    def mean_step_error(self, rates: ErrorRates, timing: TimingTable) -> float:
        weights = build_code(self.d).plaquette_weights
        num = den = 0.0
        for w in weights:
            num += w * timing.t_2q * rates.p_2q + timing.t_1q * rates.p_1q + timing.t_meas * rates.p_meas
            den += w * timing.t_2q + timing.t_1q + timing.t_meas
        return num / den

    def residual(self, rates: ErrorRates, timing: TimingTable) -> float:
        return min(0.5, self.k_coeff * self.mean_step_error(rates, timing) ** self.order)


def accumulate(ledger: ErrorLedger, event: ScheduleEvent, rates: ErrorRates,
               all_qubits: range | None = None) -> ErrorLedger:
    """Fold one non-extraction event into the ledger (QEC accounting)."""
    kind = event.kind
    if kind is EventKind.EXTRACTION:
        raise ValueError("use apply_extraction for extraction events")
    if kind is EventKind.GATE:
        delta = flip_2q(rates.p_2q) if len(event.qubits) == 2 else flip_1q(rates.p_1q)
        for q in event.qubits:
            ledger.bump(q, delta)
    elif kind is EventKind.SWAP:
        # Three CNOTs: three MS plus twelve single-qubit pulses, split evenly.
        for q in event.qubits:
            for _ in range(3):
                ledger.bump(q, flip_2q(rates.p_2q))
            for _ in range(6):
                ledger.bump(q, flip_1q(rates.p_1q))
    elif kind is EventKind.NONTRANSVERSAL:
        q = event.qubits[0]
        ledger.bump(q, flip_2q(rates.p_2q))
        ledger.bump(q, flip_1q(rates.p_1q))
        ledger.bump(q, rates.magic_infidelity)
    elif kind is EventKind.SHUTTLE:
        targets = all_qubits if (rates.shuttle_all and all_qubits is not None) else event.qubits
        delta = flip_1q(rates.p_shuttle)
        for q in targets:
            ledger.bump(q, delta)
    elif kind is EventKind.MEASURE:
        # Transversal readout is decoded classically, so a readout flip behaves
        # like one more bit flip on the block rather than an uncorrected fault.
        q = event.qubits[0]
        ledger.q_x[q] = compose(ledger.q_x[q], rates.p_meas)
    return ledger


def apply_extraction(ledger: ErrorLedger, qubit: int, model: QecModel, residual: float) -> ErrorLedger:
    """Charge the code-capacity success factor and reset to ``residual``."""
    ledger.log_p_succ += log_success_polynomial(model.enum_x, ledger.q_x[qubit])
    ledger.log_p_succ += log_success_polynomial(model.enum_z, ledger.q_z[qubit])
    ledger.q_x[qubit] = residual
    ledger.q_z[qubit] = residual
    return ledger


def noqec_event_log_success(event: ScheduleEvent, rates: ErrorRates, num_qubits: int) -> float:
    """log of the probability that ``event`` introduces no error."""
    kind = event.kind
    l1, l2 = _safe_log1p_neg(rates.p_1q), _safe_log1p_neg(rates.p_2q)
    if kind is EventKind.GATE:
        return l2 if len(event.qubits) == 2 else l1
    if kind is EventKind.MEASURE:
        return _safe_log1p_neg(rates.p_meas)
    if kind is EventKind.SWAP:
        return 3 * l2 + 12 * l1
    if kind is EventKind.SHUTTLE:
        n = num_qubits if rates.shuttle_all else len(event.qubits)
        return n * _safe_log1p_neg(rates.p_shuttle) if n else 0.0
    raise ValueError(f"{kind.value} events do not occur without QEC")


def _safe_log1p_neg(p: float) -> float:
    return -math.inf if p >= 1.0 else math.log1p(-p)


def solve_effective(p_succ: float, n_1q: int, n_2q: int, ratio_1q: float = 0.1,
                    log_p_succ: float | None = None, rtol: float = 1e-12) -> tuple[float, float]:
    """Invert ``(1 - r p)^n1 (1 - p)^n2 = P_succ`` for ``p``.

    Returns ``(p1q_star, p2q_star)``. ``P_succ = 0`` (or a value no ``p`` in
    [0, 1) can reach) maps to the sentinel ``p2q_star = 1``.
    """
    if n_1q < 0 or n_2q < 0 or n_1q + n_2q == 0:
        raise ValueError("need a positive gate count")
    target = math.log(p_succ) if log_p_succ is None and p_succ > 0 else log_p_succ
    if target is None or target == -math.inf:
        return ratio_1q * SENTINEL_P2Q, SENTINEL_P2Q
    if target > 0:
        raise ValueError("success probability above 1")
    if target == 0:
        return 0.0, 0.0

    def f(p: float) -> float:
        # Skip empty terms so 0 * log(0) never turns into nan at p = 1.
        return ((n_1q * _safe_log1p_neg(ratio_1q * p) if n_1q else 0.0)
                + (n_2q * _safe_log1p_neg(p) if n_2q else 0.0))

    if f(1.0) >= target:
        return ratio_1q * SENTINEL_P2Q, SENTINEL_P2Q
    # Small-p start point, then bracket by doubling.
    lo, hi = 0.0, min(1.0, -target / (n_2q + ratio_1q * n_1q))
    while hi < 1.0 and f(hi) > target:
        lo, hi = hi, min(1.0, 2 * hi)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if f(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    p = 0.5 * (lo + hi)
    return ratio_1q * p, p


@dataclass(frozen=True)
class RunReport:
    algorithm: str
    N: int
    C: int
    d: int
    policy: str
    p_2q: float
    P_succ: float
    log_P_succ: float
    T: float
    p2q_star: float
    p1q_star: float
    n_1q: int
    n_2q: int
    counters: dict = field(default_factory=dict)
    enum_x: str = ""
    enum_z: str = ""
    shuttle_all: bool = True
    residual: float = 0.0
    k_coeff: float = 0.0
    config: dict = field(default_factory=dict)

    @property
    def t_over_p(self) -> float:
        return self.T / self.P_succ if self.P_succ > 0 else math.inf

    def to_dict(self) -> dict:
        d = asdict(self)
        d["t_over_p"] = _finite_or_tag(self.t_over_p)
        d["log_P_succ"] = _finite_or_tag(self.log_P_succ)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_row(self) -> list[str]:
        vals = {
            "algorithm": self.algorithm, "N": self.N, "C": self.C, "d": self.d, "policy": self.policy,
            "p_2Q": self.p_2q, "P_succ": self.P_succ, "T": self.T, "p2Q_star": self.p2q_star,
            "t_over_p": _finite_or_tag(self.t_over_p), "enum_x": self.enum_x, "enum_z": self.enum_z,
            "shuttle_all": int(self.shuttle_all),
        }
        return [_fmt(vals[c]) for c in CSV_COLUMNS]


def _finite_or_tag(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def csv_table(reports: list[RunReport], extra: dict[str, list] | None = None) -> str:
    """CSV text with the fixed column order (plus optional trailing columns)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    extra = extra or {}
    w.writerow(list(CSV_COLUMNS) + list(extra))
    for i, r in enumerate(reports):
        w.writerow(r.csv_row() + [_fmt(col[i]) for col in extra.values()])
    return buf.getvalue()


def analyze(schedule: Schedule, rates: ErrorRates, counts: tuple[int, int], model: QecModel | None = None, timing: TimingTable = TimingTable(),
            meta: dict | None = None) -> RunReport:
    """Scan ``schedule`` and fill a :class:`RunReport`.

    ``counts`` are the (n_1Q, n_2Q) of the no-QEC circuit used for the
    effective-error inversion; ``model`` is required for QEC schedules.
    """
    meta = dict(meta or {})
    n = schedule.num_qubits
    qec = schedule.policy != "NOQEC"
    residual = 0.0
    if qec:
        if model is None:
            raise ValueError("QEC schedules need a QecModel")
        residual = model.residual(rates, timing)
        ledger = ErrorLedger.fresh(n)
        everyone = range(n)
        for e in schedule.events:
            if e.kind is EventKind.EXTRACTION:
                apply_extraction(ledger, e.qubits[0], model, residual)
            else:
                accumulate(ledger, e, rates, all_qubits=everyone)
        # Final extraction-equivalent check before readout decoding.
        for q in range(n):
            ledger.log_p_succ += log_success_polynomial(model.enum_x, ledger.q_x[q])
            ledger.log_p_succ += log_success_polynomial(model.enum_z, ledger.q_z[q])
        log_p = ledger.log_p_succ
    else:
        log_p = 0.0
        for e in schedule.events:
            log_p += noqec_event_log_success(e, rates, n)
    p_succ = math.exp(log_p)
    n1, n2 = counts
    if n1 + n2 == 0:
        p1s = p2s = 0.0 if log_p == 0 else SENTINEL_P2Q
    else:
        p1s, p2s = solve_effective(p_succ, n1, n2, rates.ratio_1q, log_p_succ=log_p)
    return RunReport(
        algorithm=str(meta.pop("algorithm", "")),
        N=int(meta.pop("N", n)),
        C=int(schedule.meta.get("C", 0)),
        d=model.d if (qec and model) else 0,
        policy=schedule.policy,
        p_2q=rates.p_2q,
        P_succ=p_succ,
        log_P_succ=log_p,
        T=schedule.makespan,
        p2q_star=p2s,
        p1q_star=p1s,
        n_1q=n1,
        n_2q=n2,
        counters=schedule.counters,
        enum_x=(model.enum_x.source if qec and model else "none"),
        enum_z=(model.enum_z.source if qec and model else "none"),
        shuttle_all=rates.shuttle_all,
        residual=residual,
        k_coeff=model.k_coeff if (qec and model) else 0.0,
        config=meta,
    )
