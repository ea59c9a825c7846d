"""
Window-based schedulers for the shuttling chip.

Time is measured in units of the single-qubit gate time. Each window runs
sector-local work, then (optionally) one SWAP per H sector that brings the
qubit chosen for transport to the sector edge, then a synchronized shuttle.

* UB runs every executable gate before shuttling.
* VTB fixes the window to the longest pending V-sector work and admits H
  sector gates only while they fit in it.
* The no-QEC scheduler runs UB-style windows on linear chains, with no V
  sectors, no syndrome extraction and no non-transversal macros.
"""

from __future__ import annotations

import heapq
import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .chip import (
    ChipParams,
    ChipState,
    NoQecChipState,
    Phase,
    Region,
    initial_configuration,
    initial_noqec_configuration,
    shuttle,
    shuttle_noqec,
    swap_within_chain,
    swap_within_sector,
)
from .circuit import CircuitDag, GateKind
from .colorcode import build_code


@dataclass(frozen=True)
class TimingTable:
    """Primitive durations in units of t_1Q."""

    t_1q: float = 1.0
    t_2q: float = 5.0
    t_meas: float = 20.0
    t_shuttle: float = 10.0

    def __post_init__(self) -> None:
        if min(self.t_1q, self.t_2q, self.t_meas, self.t_shuttle) <= 0:
            raise ValueError("all durations must be positive")

    @property
    def t_cnot(self) -> float:
        return self.t_2q + 4 * self.t_1q

    @property
    def t_swap(self) -> float:
        return 3 * self.t_cnot


def macro_times(timing: TimingTable, d: int) -> tuple[float, float]:
    """(t_synd, t_nt) for distance ``d``.

    Extraction measures every plaquette of both types once per round, one
    plaquette at a time, for ``d`` rounds. The non-transversal macro is a
    transversal CNOT with a resource block, its readout and a Clifford fix-up.
    """
    code = build_code(d)
    per_type = sum(w * timing.t_2q + timing.t_1q + timing.t_meas for w in code.plaquette_weights)
    t_synd = d * 2 * per_type
    t_nt = timing.t_2q + timing.t_meas + timing.t_1q
    return t_synd, t_nt


class EventKind(str, Enum):
    GATE = "gate"
    MEASURE = "measure"
    SWAP = "swap"
    SHUTTLE = "shuttle"
    EXTRACTION = "extraction"
    NONTRANSVERSAL = "nontransversal"


@dataclass(frozen=True)
class ScheduleEvent:
    start: float
    duration: float
    kind: EventKind
    qubits: tuple[int, ...]
    location: str
    node: int | None = None
    level: int | None = None
    direction: str | None = None
    window: int = 0

    @property
    def end(self) -> float:
        return self.start + self.duration

    def to_dict(self) -> dict:
        d = {"start": self.start, "duration": self.duration, "kind": self.kind.value,
             "qubits": list(self.qubits), "location": self.location, "window": self.window}
        for key in ("node", "level", "direction"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d


@dataclass(frozen=True)
class Schedule:
    events: tuple[ScheduleEvent, ...]
    policy: str
    num_qubits: int
    t_synd: float = 0.0
    t_nt: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def makespan(self) -> float:
        return max((e.end for e in self.events), default=0.0)

    @property
    def counters(self) -> dict[str, int]:
        c = {k.value: 0 for k in EventKind}
        for e in self.events:
            c[e.kind.value] += 1
        c["windows"] = 1 + max((e.window for e in self.events), default=-1)
        return c

    def to_jsonl(self) -> str:
        lines = [json.dumps(e.to_dict(), sort_keys=True) for e in self.events]
        summary = {"summary": {"T": self.makespan, "policy": self.policy, **self.counters}}
        lines.append(json.dumps(summary, sort_keys=True))
        return "\n".join(lines) + "\n"


class SchedulingError(RuntimeError):
    def __init__(self, message: str, diagnostic: dict):
        super().__init__(message)
        self.diagnostic = diagnostic


class Policy(str, Enum):
    UB = "UB"
    VTB = "VTB"


_ALLOWED = frozenset({GateKind.GPI, GateKind.GPI2, GateKind.MS, GateKind.MEASURE, GateKind.NTRZ, GateKind.RZ})


class _Engine:
    """Shared bookkeeping: per-qubit op pointers, event log and timing."""

    def __init__(self, dag: CircuitDag, timing: TimingTable, t_nt: float, t_synd: float):
        for g in dag.gates:
            if g.kind not in _ALLOWED:
                raise ValueError(f"scheduler expects native gates, found {g.kind.value}")
        self.dag = dag
        self.gates = dag.gates
        self.timing = timing
        self.t_nt = t_nt
        self.t_synd = t_synd
        self.ops = dag.qubit_order
        self.ptr = [0] * dag.num_qubits
        self.remaining = len(self.gates)
        self.qfree = [0.0] * dag.num_qubits
        self.events: list[ScheduleEvent] = []
        self.window = 0
        self.progress = False

    def next_op(self, q: int) -> int | None:
        ops = self.ops[q]
        p = self.ptr[q]
        return ops[p] if p < len(ops) else None

    def ready(self, i: int) -> bool:
        return all(self.next_op(q) == i for q in self.gates[i].qubits)

    def duration(self, i: int) -> float:
        k = self.gates[i].kind
        t = self.timing
        if k is GateKind.MS:
            return t.t_2q
        if k is GateKind.MEASURE:
            return t.t_meas
        if k is GateKind.NTRZ:
            return self.t_nt
        if k is GateKind.RZ:
            return 0.0
        return t.t_1q

    def complete(self, i: int, start: float, location: str) -> float:
        g = self.gates[i]
        dur = self.duration(i)
        if g.kind is GateKind.MEASURE:
            kind = EventKind.MEASURE
        elif g.kind is GateKind.NTRZ:
            kind = EventKind.NONTRANSVERSAL
        else:
            kind = EventKind.GATE
        level = int(g.params[0]) if g.kind is GateKind.NTRZ else None
        self.events.append(ScheduleEvent(start, dur, kind, g.qubits, location, i, level, window=self.window))
        for q in g.qubits:
            self.ptr[q] += 1
            self.qfree[q] = start + dur
        self.remaining -= 1
        self.progress = True
        return start + dur

    def record(self, start: float, dur: float, kind: EventKind, qubits: tuple[int, ...], location: str,
               direction: str | None = None) -> float:
        self.events.append(ScheduleEvent(start, dur, kind, qubits, location, direction=direction,
                                         window=self.window))
        for q in qubits:
            self.qfree[q] = max(self.qfree[q], start + dur)
        return start + dur


def _choose_transport(qs: tuple[int, ...], movable: set[int], immovable: set[int], phase: Phase) -> int | None:
    """Qubit to bring to the sector edge facing the shuttle direction."""
    seq = qs if phase is Phase.LEFT else tuple(reversed(qs))
    for q in seq:
        if q in movable:
            return q
    for q in seq:
        if q not in immovable:
            return q
    return None


def _marks(engine: _Engine, blocked: Iterable[int], placement: dict, phase: Phase) -> tuple[set[int], set[int]]:
    movable: set[int] = set()
    immovable: set[int] = set()
    for i in blocked:
        g = engine.gates[i]
        if g.kind is GateKind.NTRZ:
            movable.add(g.qubits[0])
        elif len(g.qubits) == 2:
            a, b = g.qubits
            pa, pb = placement[a], placement[b]
            if (pa.region, pa.index) == (pb.region, pb.index):
                continue
            left, right = (a, b) if pa.position < pb.position else (b, a)
            if phase is Phase.RIGHT:
                movable.add(left)
                immovable.add(right)
            else:
                movable.add(right)
                immovable.add(left)
    return movable, immovable


def _executable_in(engine: _Engine, i: int, placement: dict) -> int | None:
    """H-sector index where gate ``i`` can run now, or None."""
    g = engine.gates[i]
    if g.kind is GateKind.NTRZ:
        return None
    locs = {(placement[q].region, placement[q].index) for q in g.qubits}
    if len(locs) != 1:
        return None
    region, k = locs.pop()
    return k if region is Region.H else None


def _time_ordered(events: list[ScheduleEvent]) -> tuple[ScheduleEvent, ...]:
    # Stable: within a window the shuttle is generated last and keeps its place.
    return tuple(sorted(events, key=lambda e: e.start))


def _crossed(before: dict, after: dict) -> tuple[int, ...]:
    """Qubits whose sector changed during a shuttle."""
    return tuple(sorted(q for q, pl in before.items()
                        if (pl.region, pl.index) != (after[q].region, after[q].index)))


def _deadlock_limit(params: ChipParams) -> int:
    return 4 * (params.L + 1) * (params.C + 1) + 16


def _run_qec(dag: CircuitDag, params: ChipParams, timing: TimingTable, policy: Policy) -> Schedule:
    if dag.num_qubits != params.N:
        raise ValueError(f"circuit width {dag.num_qubits} does not match chip N={params.N}")
    if not params.qec:
        raise ValueError("QEC scheduler needs d > 0")
    t_synd, t_nt = macro_times(timing, params.d)
    eng = _Engine(dag, timing, t_nt, t_synd)
    state: ChipState = initial_configuration(params)
    now = 0.0
    idle = 0
    limit = _deadlock_limit(params)
    while eng.remaining > 0:
        eng.progress = False
        placement = state.placement()
        # V-sector work: optional non-transversal macro, then extraction.
        v_end = now
        for k, q in state.v_occupants():
            t = now
            i = eng.next_op(q)
            if i is not None and eng.gates[i].kind is GateKind.NTRZ:
                t = eng.complete(i, t, f"V{k}")
            t = eng.record(t, t_synd, EventKind.EXTRACTION, (q,), f"V{k}")
            v_end = max(v_end, t)
        tau = max(t_synd, v_end - now)
        sector_used = [0.0] * params.L
        if policy is Policy.UB:
            blocked = _greedy_h(eng, state, placement, now, sector_used)
        else:
            blocked = _budgeted_h(eng, state, placement, now, sector_used, tau)
        movable, immovable = _marks(eng, blocked, placement, state.phase)
        for k in range(params.L):
            qs = state.sector_qubits(k)
            if not qs:
                continue
            sq = _choose_transport(qs, movable, immovable, state.phase)
            edge = qs[-1] if state.phase is Phase.RIGHT else qs[0]
            if sq is None or sq == edge:
                continue
            if policy is Policy.VTB and tau - sector_used[k] < timing.t_swap:
                continue
            start = max(now + sector_used[k], eng.qfree[sq], eng.qfree[edge])
            eng.record(start, timing.t_swap, EventKind.SWAP, (sq, edge), f"H{k}")
            sector_used[k] = start + timing.t_swap - now
            state = swap_within_sector(state, k, sq, edge)
        if policy is Policy.UB:
            end = max([v_end] + [now + u for u in sector_used])
        else:
            end = now + tau
        if eng.remaining == 0:
            break
        idle = 0 if eng.progress else idle + 1
        if idle > limit:
            raise SchedulingError(
                "no progress over a full shuttle cycle",
                {"state": state.to_dict(), "pending": [eng.next_op(q) for q in range(params.N)]},
            )
        direction = state.phase.value
        before = state.placement()
        state = shuttle(state)
        eng.record(end, timing.t_shuttle, EventKind.SHUTTLE, _crossed(before, state.placement()), "chip",
                   direction=direction)
        now = end + timing.t_shuttle
        eng.window += 1
    return Schedule(_time_ordered(eng.events), policy.value, params.N, t_synd, t_nt,
                    {"C": params.C, "L": params.L, "L_e": params.L_e, "d": params.d})


def _greedy_h(eng: _Engine, state, placement: dict, now: float, sector_used: list[float]) -> list[int]:
    """Run every executable gate, lowest qubit index first; return blocked gates."""
    heap: list[tuple[int, int]] = []
    seen: set[int] = set()

    def offer(q: int) -> None:
        i = eng.next_op(q)
        if i is not None and i not in seen and eng.ready(i):
            seen.add(i)
            heapq.heappush(heap, (min(eng.gates[i].qubits), i))

    for q, pl in placement.items():
        if pl.region is Region.H:
            offer(q)
    blocked = []
    while heap:
        _, i = heapq.heappop(heap)
        k = _executable_in(eng, i, placement)
        if k is None:
            blocked.append(i)
            continue
        qs = eng.gates[i].qubits
        start = max(now + sector_used[k], max(eng.qfree[q] for q in qs))
        end = eng.complete(i, start, f"H{k}")
        sector_used[k] = end - now
        for q in qs:
            offer(q)
    return blocked


def _budgeted_h(eng: _Engine, state: ChipState, placement: dict, now: float,
                sector_used: list[float], tau: float) -> list[int]:
    """Admit gates in shuttle-direction qubit order while they fit in ``tau``."""
    blocked = []
    for k in range(len(state.h_sectors)):
        qs = state.sector_qubits(k)
        order = qs if state.phase is Phase.LEFT else tuple(reversed(qs))
        full = False
        changed = True
        while changed and not full:
            changed = False
            for q in order:
                while True:
                    i = eng.next_op(q)
                    if i is None or not eng.ready(i) or _executable_in(eng, i, placement) != k:
                        break
                    dur = eng.duration(i)
                    if sector_used[k] + dur > tau:
                        full = True
                        break
                    start = max(now + sector_used[k], max(eng.qfree[x] for x in eng.gates[i].qubits))
                    sector_used[k] = eng.complete(i, start, f"H{k}") - now
                    changed = True
                if full:
                    break
        for q in qs:
            i = eng.next_op(q)
            if i is not None and eng.ready(i) and _executable_in(eng, i, placement) is None:
                blocked.append(i)
    return sorted(set(blocked))


def schedule_ub(dag: CircuitDag, params: ChipParams, timing: TimingTable = TimingTable()) -> Schedule:
    return _run_qec(dag, params, timing, Policy.UB)


def schedule_vtb(dag: CircuitDag, params: ChipParams, timing: TimingTable = TimingTable()) -> Schedule:
    return _run_qec(dag, params, timing, Policy.VTB)


def schedule_noqec(dag: CircuitDag, C: int, timing: TimingTable = TimingTable(), M: int | None = None) -> Schedule:
    """UB-style execution on linear chains of ``C`` ions."""
    for g in dag.gates:
        if g.kind is GateKind.NTRZ:
            raise ValueError("no-QEC circuits cannot contain non-transversal macros")
    n = dag.num_qubits
    eng = _Engine(dag, timing, 0.0, 0.0)
    state: NoQecChipState = initial_noqec_configuration(C, n, M)
    now = 0.0
    idle = 0
    limit = 4 * (state.M + 1) * (C + 1) + 16
    while eng.remaining > 0:
        eng.progress = False
        placement = state.placement()
        used = [0.0] * state.M
        blocked = _greedy_h(eng, state, placement, now, used)
        movable, immovable = _marks(eng, blocked, placement, state.phase)
        for k in range(state.M):
            qs = state.sector_qubits(k)
            if not qs:
                continue
            sq = _choose_transport(qs, movable, immovable, state.phase)
            edge = qs[-1] if state.phase is Phase.RIGHT else qs[0]
            if sq is None or sq == edge:
                continue
            start = max(now + used[k], eng.qfree[sq], eng.qfree[edge])
            eng.record(start, timing.t_swap, EventKind.SWAP, (sq, edge), f"H{k}")
            used[k] = start + timing.t_swap - now
            state = swap_within_chain(state, k, sq, edge)
        end = max([now] + [now + u for u in used])
        if eng.remaining == 0:
            break
        idle = 0 if eng.progress else idle + 1
        if idle > limit:
            raise SchedulingError("no progress on the no-QEC chip", {"state": state.to_dict()})
        direction = state.phase.value
        before = state.placement()
        state = shuttle_noqec(state)
        eng.record(end, timing.t_shuttle, EventKind.SHUTTLE, _crossed(before, state.placement()), "chip",
                   direction=direction)
        now = end + timing.t_shuttle
        eng.window += 1
    return Schedule(_time_ordered(eng.events), "NOQEC", n, 0.0, 0.0, {"C": C, "M": state.M})


# --------------------------------------------------------------------------
# Replay audit
# --------------------------------------------------------------------------

def audit_schedule(schedule: Schedule, dag: CircuitDag, params: ChipParams | None = None,
                   timing: TimingTable = TimingTable(), C: int | None = None,
                   eps: float = 1e-9) -> list[str]:
    """Independently replay a schedule and list every rule it breaks.

    Checks completeness, dependency order, per-qubit and per-sector overlap,
    placement legality against the chip state machine and, for VTB, the
    per-window sector budget.
    """
    problems: list[str] = []
    seen: dict[int, ScheduleEvent] = {}
    for e in schedule.events:
        if e.node is not None:
            if e.node in seen:
                problems.append(f"node {e.node} scheduled twice")
            seen[e.node] = e
    missing = set(range(len(dag.gates))) - set(seen)
    if missing:
        problems.append(f"{len(missing)} nodes never scheduled")
    for u, v in dag.edges:
        if u in seen and v in seen and seen[u].end > seen[v].start + eps:
            problems.append(f"dependency {u}->{v} violated")

    def overlaps(groups: dict) -> None:
        for key, evs in groups.items():
            evs = sorted(evs, key=lambda e: (e.start, e.end))
            for a, b in zip(evs, evs[1:]):
                if a.end > b.start + eps:
                    problems.append(f"overlap on {key} at t={b.start}")

    per_qubit, per_sector = defaultdict(list), defaultdict(list)
    for e in schedule.events:
        if e.kind is EventKind.SHUTTLE:
            continue
        for q in e.qubits:
            per_qubit[q].append(e)
        if e.location.startswith("H"):
            per_sector[e.location].append(e)
    overlaps(per_qubit)
    overlaps(per_sector)

    # Shuttles must not overlap any other activity.
    shuttles = [e for e in schedule.events if e.kind is EventKind.SHUTTLE]
    for s in shuttles:
        for e in schedule.events:
            if e.kind is not EventKind.SHUTTLE and e.start < s.end - eps and e.end > s.start + eps:
                problems.append(f"activity during shuttle at t={s.start}")
                break

    noqec = schedule.policy == "NOQEC"
    if noqec:
        state = initial_noqec_configuration(C if C is not None else schedule.meta["C"], schedule.num_qubits,
                                            schedule.meta.get("M"))
    else:
        state = initial_configuration(params)
    window_events: list[ScheduleEvent] = []

    def check_budget(evs: list[ScheduleEvent]) -> None:
        if schedule.policy != "VTB":
            return
        v_work = defaultdict(float)
        for e in evs:
            if e.location.startswith("V"):
                v_work[e.qubits[0]] += e.duration
        tau = max([schedule.t_synd] + list(v_work.values()))
        used = defaultdict(float)
        for e in evs:
            if e.location.startswith("H"):
                used[e.location] += e.duration
        for sec, u in used.items():
            if u > tau + eps:
                problems.append(f"budget exceeded in {sec} window {evs[0].window}: {u} > {tau}")

    for e in schedule.events:
        placement = state.placement()
        if e.kind is EventKind.SHUTTLE:
            check_budget(window_events)
            window_events = []
            state = shuttle_noqec(state) if noqec else shuttle(state)
            continue
        window_events.append(e)
        locs = {(placement[q].region, placement[q].index) for q in e.qubits}
        if len(locs) != 1:
            problems.append(f"{e.kind.value} on {e.qubits} spans regions {sorted(locs)}")
            continue
        region, k = locs.pop()
        where = f"{region.value}{k}"
        if e.location != where:
            problems.append(f"{e.kind.value} on {e.qubits} logged at {e.location} but qubits are in {where}")
        if e.kind in (EventKind.EXTRACTION, EventKind.NONTRANSVERSAL) and region is not Region.V:
            problems.append(f"{e.kind.value} outside a V sector")
        if e.kind in (EventKind.GATE, EventKind.MEASURE, EventKind.SWAP) and region is not Region.H:
            problems.append(f"{e.kind.value} outside an H sector")
        if e.kind is EventKind.SWAP:
            a, b = e.qubits
            state = swap_within_chain(state, k, a, b) if noqec else swap_within_sector(state, k, a, b)
    check_budget(window_events)
    return problems
