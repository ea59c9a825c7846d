"""
Placement state machines for the shuttling chip.

The QEC chip is a row of ``L`` H sectors separated by ``L-1`` V sectors, with
dummy reservoirs at both ends. Only one row of logical qubits is tracked:
every slot holds a logical qubit id or :data:`DUMMY`. A shuttle in the right
phase merges each V-sector occupant into the left end of the H sector to its
right and then splits the rightmost occupant of every H sector into the next V
sector, which shifts the whole row one slot to the right. The left phase
mirrors this.

The no-QEC chip is a row of linear chains of ``C`` slots exchanging boundary
occupants under the same alternating-phase discipline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

DUMMY = -1


class Phase(str, Enum):
    RIGHT = "right"
    LEFT = "left"


class Region(str, Enum):
    H = "H"
    V = "V"


@dataclass(frozen=True)
class ChipParams:
    """Static chip description.

    ``d = 0`` selects the no-QEC chip (one ion per logical qubit).
    """

    C: int
    N: int
    L: int
    L_e: int = 2
    d: int = 3

    def __post_init__(self) -> None:
        if self.C < 2:
            raise ValueError("chain length C must be at least 2")
        if self.N < 0:
            raise ValueError("qubit count must be non-negative")
        if self.qec:
            if not 1 <= self.L_e < self.L:
                raise ValueError("need 1 <= L_e < L")
            if self.N > (self.C + 1) * (self.L - self.L_e):
                raise ValueError(
                    f"capacity exceeded: N={self.N} > (C+1)(L-L_e)={(self.C + 1) * (self.L - self.L_e)}"
                )

    @property
    def qec(self) -> bool:
        return self.d > 0

    @property
    def n(self) -> int:
        return (self.d + 1) ** 2 // 2 - 1 if self.qec else 1

    @property
    def r(self) -> int:
        return self.N % (self.C + 1)

    @property
    def right_end_dummies(self) -> int:
        """Right reservoir count that marks the right-end configuration."""
        return self.L * (self.C + 1) - self.N - 1

    @classmethod
    def derive(cls, C: int, N: int, d: int, L_e: int = 2, L: int | None = None) -> "ChipParams":
        """Fill in the default sector count ``L = ceil(N/(C+1)) + L_e + 1``."""
        if L is None:
            L = math.ceil(N / (C + 1)) + L_e + 1
        return cls(C=C, N=N, L=L, L_e=L_e, d=d)


@dataclass(frozen=True)
class Placement:
    region: Region
    index: int
    slot: int
    position: int


@dataclass(frozen=True)
class ChipState:
    params: ChipParams
    h_sectors: tuple[tuple[int, ...], ...]
    v_sectors: tuple[int | None, ...]
    left_dummy: int
    right_dummy: int
    phase: Phase
    shuttle_count: int = 0

    @property
    def merged(self) -> bool:
        """True before the first split, when every H sector holds C+1 slots."""
        return all(len(h) == self.params.C + 1 for h in self.h_sectors)

    def row(self) -> Iterator[tuple[Region, int, int, int]]:
        """Occupied slots left to right as (region, index, slot, occupant)."""
        for k, h in enumerate(self.h_sectors):
            for s, occ in enumerate(h):
                yield Region.H, k, s, occ
            if k < len(self.v_sectors) and self.v_sectors[k] is not None:
                yield Region.V, k, 0, self.v_sectors[k]

    def qubit_order(self) -> tuple[int, ...]:
        return tuple(occ for _, _, _, occ in self.row() if occ != DUMMY)

    def placement(self) -> dict[int, Placement]:
        c1 = self.params.C + 1
        out = {}
        for region, k, s, occ in self.row():
            if occ == DUMMY:
                continue
            pos = k * c1 + (s if region is Region.H else self.params.C)
            out[occ] = Placement(region, k, s, pos)
        return out

    def sector_qubits(self, k: int) -> tuple[int, ...]:
        return tuple(q for q in self.h_sectors[k] if q != DUMMY)

    def v_occupants(self) -> list[tuple[int, int]]:
        return [(k, q) for k, q in enumerate(self.v_sectors) if q is not None and q != DUMMY]

    def to_dict(self) -> dict:
        return {
            "h_sectors": [list(h) for h in self.h_sectors],
            "v_sectors": list(self.v_sectors),
            "left_dummy": self.left_dummy,
            "right_dummy": self.right_dummy,
            "phase": self.phase.value,
            "shuttle_count": self.shuttle_count,
        }


def initial_configuration(params: ChipParams) -> ChipState:
    """Qubits fill H sectors left to right, C+1 per sector; V sectors start empty."""
    if not params.qec:
        raise ValueError("use initial_noqec_configuration for the no-QEC chip")
    c1 = params.C + 1
    h = tuple(
        tuple(i if i < params.N else DUMMY for i in range(k * c1, (k + 1) * c1))
        for k in range(params.L)
    )
    # Enough dummies for a full right phase, and more than (L_e+1)(C+1) - r.
    left = max((params.L_e + 1) * c1 - params.r + 1, params.L * c1)
    return ChipState(params, h, (None,) * (params.L - 1), left, 0, Phase.RIGHT, 0)


def shuttle(state: ChipState) -> ChipState:
    """One synchronized shuttle step in the current phase direction."""
    p = state.params
    h = [list(s) for s in state.h_sectors]
    v = list(state.v_sectors)
    left, right = state.left_dummy, state.right_dummy
    if state.phase is Phase.RIGHT:
        if not state.merged:
            for k in range(p.L - 1, 0, -1):
                h[k].insert(0, v[k - 1])
            h[0].insert(0, DUMMY)
            left -= 1
        for k in range(p.L):
            last = h[k].pop()
            if k < p.L - 1:
                v[k] = last
            elif last != DUMMY:
                raise RuntimeError("a logical qubit would leave the chip on the right")
            else:
                right += 1
        phase = Phase.LEFT if right == p.right_end_dummies else Phase.RIGHT
    else:
        if state.merged:
            raise RuntimeError("left phase cannot start from the merged configuration")
        for k in range(p.L - 1):
            h[k].append(v[k])
        h[p.L - 1].append(DUMMY)
        right -= 1
        for k in range(p.L):
            first = h[k].pop(0)
            if k > 0:
                v[k - 1] = first
            elif first != DUMMY:
                raise RuntimeError("a logical qubit would leave the chip on the left")
            else:
                left += 1
        phase = Phase.RIGHT if right == 1 else Phase.LEFT
    if left < 0:
        raise RuntimeError("left dummy reservoir exhausted")
    return ChipState(
        p, tuple(tuple(s) for s in h), tuple(v), left, right, phase, state.shuttle_count + 1
    )


def swap_within_sector(state: ChipState, sector: int, a: int, b: int) -> ChipState:
    """Exchange two logical qubits that share an H sector."""
    slots = list(state.h_sectors[sector])
    if a not in slots or b not in slots or a == DUMMY or b == DUMMY:
        raise ValueError(f"qubits {a} and {b} are not both in H sector {sector}")
    if a == b:
        return state
    ia, ib = slots.index(a), slots.index(b)
    slots[ia], slots[ib] = b, a
    h = list(state.h_sectors)
    h[sector] = tuple(slots)
    return ChipState(state.params, tuple(h), state.v_sectors, state.left_dummy,
                     state.right_dummy, state.phase, state.shuttle_count)


def locate(state: ChipState, q: int) -> Placement:
    if not 0 <= q < state.params.N:
        raise ValueError(f"qubit {q} out of range")
    return state.placement()[q]


# --------------------------------------------------------------------------
# No-QEC chip
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NoQecChipState:
    """Linear chains of ``C`` slots; qubit ids or DUMMY."""

    C: int
    N: int
    chains: tuple[tuple[int, ...], ...]
    phase: Phase = Phase.RIGHT
    offset: int = 0
    shuttle_count: int = 0

    @property
    def M(self) -> int:
        return len(self.chains)

    def placement(self) -> dict[int, Placement]:
        out = {}
        for k, chain in enumerate(self.chains):
            for s, occ in enumerate(chain):
                if occ != DUMMY:
                    out[occ] = Placement(Region.H, k, s, k * self.C + s)
        return out

    def sector_qubits(self, k: int) -> tuple[int, ...]:
        return tuple(q for q in self.chains[k] if q != DUMMY)

    def qubit_order(self) -> tuple[int, ...]:
        return tuple(q for chain in self.chains for q in chain if q != DUMMY)

    def to_dict(self) -> dict:
        return {"chains": [list(c) for c in self.chains], "phase": self.phase.value,
                "offset": self.offset, "shuttle_count": self.shuttle_count}


def initial_noqec_configuration(C: int, N: int, M: int | None = None) -> NoQecChipState:
    if C < 2:
        raise ValueError("chain length C must be at least 2")
    if M is None:
        M = math.ceil(N / C) + 1
    if N >= M * C and N > 0:
        raise ValueError("no-QEC chip needs at least one spare slot")
    chains = tuple(
        tuple(i if i < N else DUMMY for i in range(k * C, (k + 1) * C)) for k in range(M)
    )
    return NoQecChipState(C, N, chains)


def shuttle_noqec(state: NoQecChipState) -> NoQecChipState:
    """Shift every occupant one slot along the current phase direction."""
    flat = [q for chain in state.chains for q in chain]
    if state.phase is Phase.RIGHT:
        if flat[-1] != DUMMY:
            raise RuntimeError("a qubit would leave the chip on the right")
        flat = [DUMMY] + flat[:-1]
        offset = state.offset + 1
    else:
        if flat[0] != DUMMY:
            raise RuntimeError("a qubit would leave the chip on the left")
        flat = flat[1:] + [DUMMY]
        offset = state.offset - 1
    C = state.C
    chains = tuple(tuple(flat[k * C:(k + 1) * C]) for k in range(state.M))
    phase = state.phase
    if phase is Phase.RIGHT and offset + state.N >= len(flat):
        phase = Phase.LEFT
    elif phase is Phase.LEFT and offset == 0:
        phase = Phase.RIGHT
    return NoQecChipState(C, state.N, chains, phase, offset, state.shuttle_count + 1)


def swap_within_chain(state: NoQecChipState, chain: int, a: int, b: int) -> NoQecChipState:
    slots = list(state.chains[chain])
    if a not in slots or b not in slots or DUMMY in (a, b):
        raise ValueError(f"qubits {a} and {b} are not both in chain {chain}")
    ia, ib = slots.index(a), slots.index(b)
    slots[ia], slots[ib] = b, a
    chains = list(state.chains)
    chains[chain] = tuple(slots)
    return NoQecChipState(state.C, state.N, tuple(chains), state.phase, state.offset, state.shuttle_count)
