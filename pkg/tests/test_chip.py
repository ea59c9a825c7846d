import json
import math

import pytest
from hypothesis import given, strategies as st

from qccdsim.chip import (
    DUMMY,
    ChipParams,
    Phase,
    Region,
    initial_configuration,
    initial_noqec_configuration,
    locate,
    shuttle,
    shuttle_noqec,
    swap_within_chain,
    swap_within_sector,
)

D = DUMMY
FIG = ChipParams(C=5, N=8, L=3, L_e=1)


def run(state, k):
    for _ in range(k):
        state = shuttle(state)
    return state


def assert_conserved(state):
    ids = [occ for _, _, _, occ in state.row() if occ != DUMMY]
    assert sorted(ids) == list(range(state.params.N))
    assert all(len(h) <= state.params.C + 1 for h in state.h_sectors)
    assert all(sum(1 for q in h if q != DUMMY) <= state.params.C + (1 if state.merged else 0)
               for h in state.h_sectors)


# ---- params and initial layout --------------------------------------------

def test_fig2_layout():
    s = initial_configuration(FIG)
    assert s.h_sectors == ((0, 1, 2, 3, 4, 5), (6, 7, D, D, D, D), (D,) * 6)
    assert s.v_sectors == (None, None)
    assert s.phase is Phase.RIGHT
    assert s.left_dummy > (FIG.L_e + 1) * (FIG.C + 1) - FIG.r
    assert FIG.n == 7


def test_full_sectors_have_no_padding():
    p = ChipParams(C=2, N=6, L=3, L_e=1)
    s = initial_configuration(p)
    assert p.r == 0
    assert s.h_sectors[:2] == ((0, 1, 2), (3, 4, 5))


def test_single_qubit_layout():
    s = initial_configuration(ChipParams(C=2, N=1, L=2, L_e=1))
    assert s.h_sectors[0] == (0, D, D)


def test_capacity_and_param_errors():
    with pytest.raises(ValueError):
        ChipParams(C=5, N=13, L=3, L_e=1)
    with pytest.raises(ValueError):
        ChipParams(C=1, N=1, L=3, L_e=1)
    with pytest.raises(ValueError):
        ChipParams(C=3, N=1, L=2, L_e=2)


def test_physical_qubits_per_logical():
    assert [ChipParams(C=2, N=1, L=3, L_e=1, d=d).n for d in (0, 3, 5, 7)] == [1, 7, 17, 31]


def test_derived_sector_count():
    p = ChipParams.derive(C=5, N=8, d=3)
    assert p.L == math.ceil(8 / 6) + 2 + 1 and p.L_e == 2


def test_right_end_count_matches_closed_form():
    # For r != 0 and the minimal L the reservoir target equals (L_e+1)(C+1) - r - 1.
    for C in range(2, 7):
        for L_e in (1, 2, 3):
            for N in range(1, 4 * (C + 1)):
                p = ChipParams(C=C, N=N, L=math.ceil(N / (C + 1)) + L_e, L_e=L_e)
                if p.r:
                    assert p.right_end_dummies == (L_e + 1) * (C + 1) - p.r - 1


# ---- shuttling on the worked example -------------------------------------

def test_fig3_time_steps():
    s0 = initial_configuration(FIG)
    s1 = shuttle(s0)
    assert s1.v_sectors[0] == 5 and s1.h_sectors[0] == (0, 1, 2, 3, 4)
    t = shuttle(s1)
    # Time step t: q4 sits in the first V sector.
    assert t.v_sectors[0] == 4
    assert t.h_sectors[0] == (D, 0, 1, 2, 3) and t.h_sectors[1][0] == 5
    t1 = shuttle(t)
    # Time step t+1: q4 merged into the next H sector and q3 entered the V sector.
    assert t1.v_sectors[0] == 3
    assert t1.h_sectors[1][0] == 4 and t1.h_sectors[1][1] == 5


def test_locate():
    s = initial_configuration(FIG)
    assert locate(s, 0) == locate(s, 0)
    p = locate(s, 0)
    assert (p.region, p.index, p.slot, p.position) == (Region.H, 0, 0, 0)
    t = run(s, 2)
    q3 = locate(shuttle(t), 3)
    assert (q3.region, q3.index) == (Region.V, 0)
    with pytest.raises(ValueError):
        locate(s, 8)


def test_phase_flip_at_right_end():
    s = initial_configuration(FIG)
    assert FIG.right_end_dummies == 9
    phases = []
    for _ in range(9):
        s = shuttle(s)
        phases.append(s.phase)
    assert phases[:-1] == [Phase.RIGHT] * 8 and phases[-1] is Phase.LEFT
    assert s.right_dummy == 9
    # The left phase runs until the leftmost H sector is full of data again.
    k = 0
    while s.phase is Phase.LEFT:
        s = shuttle(s)
        k += 1
    assert k == 8 and s.h_sectors[0] == (0, 1, 2, 3, 4)


def test_left_phase_cannot_start_merged():
    s = initial_configuration(FIG)
    bad = type(s)(s.params, s.h_sectors, s.v_sectors, s.left_dummy, s.right_dummy, Phase.LEFT)
    with pytest.raises(RuntimeError):
        shuttle(bad)


def test_empty_chip_cycles():
    p = ChipParams(C=3, N=0, L=3, L_e=1)
    s = shuttle(initial_configuration(p))
    first = s
    seen = [s]
    flips = 0
    while True:
        prev = s.phase
        s = shuttle(s)
        flips += s.phase is not prev
        if s.to_dict() | {"shuttle_count": 0} == first.to_dict() | {"shuttle_count": 0}:
            break
        seen.append(s)
        assert len(seen) < 1000
    assert flips == 2


# ---- swaps ------------------------------------------------------------------

def test_swap_identities():
    s = initial_configuration(FIG)
    assert swap_within_sector(s, 0, 2, 2) == s
    once = swap_within_sector(s, 0, 1, 4)
    assert once.h_sectors[0] == (0, 4, 2, 3, 1, 5)
    assert swap_within_sector(once, 0, 1, 4) == s


def test_swap_errors():
    s = initial_configuration(FIG)
    with pytest.raises(ValueError):
        swap_within_sector(s, 0, 1, 6)
    t = run(s, 2)
    with pytest.raises(ValueError):
        swap_within_sector(t, 0, 4, 3)
    with pytest.raises(ValueError):
        swap_within_sector(s, 1, 6, DUMMY)


# ---- properties -------------------------------------------------------------

@st.composite
def chip_walks(draw):
    C = draw(st.integers(2, 6))
    L_e = draw(st.integers(1, 3))
    N = draw(st.integers(0, 3 * (C + 1)))
    extra = draw(st.integers(0, 2))
    L = math.ceil(N / (C + 1)) + L_e + extra
    steps = draw(st.lists(st.tuples(st.booleans(), st.integers(0, 10 ** 6)), min_size=1, max_size=80))
    return ChipParams(C=C, N=N, L=max(L, L_e + 1), L_e=L_e), steps


@given(chip_walks())
def test_order_preserved_and_conserved(walk):
    params, steps = walk
    s = initial_configuration(params)
    for do_swap, pick in steps:
        if do_swap:
            k = pick % params.L
            qs = s.sector_qubits(k)
            if len(qs) >= 2:
                a, b = qs[pick % len(qs)], qs[(pick // 7) % len(qs)]
                s = swap_within_sector(s, k, a, b)
        else:
            before = s.qubit_order()
            s = shuttle(s)
            assert s.qubit_order() == before
        assert_conserved(s)
    assert len(s.placement()) == params.N


def _phase_runs(params, cycles=3):
    """Shuttle through several full cycles; yield (phase, V entries per qubit, length)."""
    s = shuttle(initial_configuration(params))
    entries = {q: 0 for q in range(params.N)}
    length = 1
    runs = []
    flips = 0
    while flips < 2 * cycles:
        prev_phase = s.phase
        before = {q for _, q in s.v_occupants()}
        s = shuttle(s)
        length += 1
        for _, q in s.v_occupants():
            if q not in before:
                entries[q] += 1
        if s.phase is not prev_phase:
            runs.append((prev_phase, entries, length))
            entries = {q: 0 for q in range(params.N)}
            length = 0
            flips += 1
    return runs


def _small_params(minimal: bool):
    for C in range(2, 6):
        for L_e in (1, 2, 3):
            for N in range(1, 3 * (C + 1) + 1):
                L = math.ceil(N / (C + 1)) + L_e + (0 if minimal else 1)
                yield ChipParams(C=C, N=N, L=L, L_e=L_e)


def test_phase_liveness():
    for params in list(_small_params(True)) + list(_small_params(False)):
        for _, _, length in _phase_runs(params):
            assert length <= 2 * (params.L + 1) * (params.C + 1)


def test_v_sector_visits_default_length():
    for params in _small_params(False):
        for _, entries, _ in _phase_runs(params):
            assert all(v >= params.L_e for v in entries.values()), params


def test_v_sector_visits_minimal_length():
    for params in _small_params(True):
        if params.r in (0, params.C):
            continue
        for _, entries, _ in _phase_runs(params):
            assert all(v >= params.L_e for v in entries.values()), params


def test_state_serializable():
    s = run(initial_configuration(FIG), 3)
    data = json.loads(json.dumps(s.to_dict()))
    assert data["shuttle_count"] == 3 and data["v_sectors"][0] == 3


# ---- no-QEC chip ------------------------------------------------------------

def test_noqec_initial():
    s = initial_noqec_configuration(C=3, N=5)
    assert s.M == 3
    assert s.chains == ((0, 1, 2), (3, 4, D), (D, D, D))
    with pytest.raises(ValueError):
        initial_noqec_configuration(C=3, N=6, M=2)
    with pytest.raises(ValueError):
        initial_noqec_configuration(C=1, N=1)


def test_noqec_shuttle_cycle():
    s = initial_noqec_configuration(C=3, N=5)
    seen_flip = False
    for _ in range(40):
        before = s.qubit_order()
        s = shuttle_noqec(s)
        assert s.qubit_order() == before
        assert sorted(s.placement()) == list(range(5))
        seen_flip |= s.phase is Phase.LEFT
    assert seen_flip


@given(st.integers(2, 6), st.integers(1, 20), st.integers(0, 60))
def test_noqec_conservation(C, N, steps):
    s = initial_noqec_configuration(C, N)
    for _ in range(steps):
        s = shuttle_noqec(s)
    assert s.qubit_order() == tuple(range(N))


def test_noqec_swap():
    s = initial_noqec_configuration(C=3, N=5)
    t = swap_within_chain(s, 0, 0, 2)
    assert t.chains[0] == (2, 1, 0)
    with pytest.raises(ValueError):
        swap_within_chain(s, 0, 0, 3)
