"""Acceptance gate: one test per criterion, each reported as PASS/FAIL in the summary."""

import itertools
import math
import time

import numpy as np
import pytest

from qccdsim import circuit as C
from qccdsim.analysis import solve_effective
from qccdsim.benchmarks import random_circuit
from qccdsim.chip import DUMMY, ChipParams, initial_configuration, shuttle, swap_within_sector
from qccdsim.circuit import CircuitDag
from qccdsim.cli import main
from qccdsim.colorcode import PauliKind, build_code, exact_enumerator, lookup_decode, min_weight_logical
from qccdsim.pipeline import RunConfig, best_row, run_many
from qccdsim.scheduler import audit_schedule, schedule_ub, schedule_vtb
from qccdsim.statevector import circuit_unitary, equivalent_up_to_phase, gate_matrix, rz_matrix
from qccdsim.transpiler import approximate_rz, optimize_native, to_native, transpile

TWO_PI = 2 * math.pi
SEED = 20240611


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max entry deviation between two matrices after removing a global phase."""
    i = np.unravel_index(np.argmax(np.abs(a)), a.shape)
    ph = b[i] / a[i]
    return float(np.max(np.abs(a * ph / abs(ph) - b)))


def mask(v) -> int:
    return sum(1 << int(q) for q in np.flatnonzero(v))


@pytest.mark.acceptance(1, "transpiler soundness on 200 random 8-12 qubit circuits")
def test_transpiler_soundness(record_property):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        width = int(rng.integers(8, 13))
        dag = random_circuit(width, 60, rng, mcx_max_controls=min(3, 14 - width))
        out = transpile(dag).noqec_circuit
        ok, dev = equivalent_up_to_phase(dag, out, trials=10, seed=SEED,
                                         clean_ancillas=out.num_qubits - width)
        worst = max(worst, dev)
        assert ok, dev
    record_property("detail", f"max deviation {worst:.2e}")
    assert time.perf_counter() - t0 < 300


@pytest.mark.acceptance(2, "Rz approximation bound, 10k angles at t=16")
def test_rz_bound():
    t0 = time.perf_counter()
    angles = np.random.default_rng(SEED).uniform(0, TWO_PI, 10_000)
    for a in angles:
        ap = approximate_rz(float(a), 16)
        assert abs(math.remainder(ap.reconstructed - a, TWO_PI)) <= TWO_PI / 2 ** 16
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.acceptance(3, "native identities by dense matrices to 1e-12")
def test_native_identities():
    t0 = time.perf_counter()
    # X = GPI(0) exactly.
    assert np.max(np.abs(gate_matrix(C.gpi(0.0, 0)) - gate_matrix(C.x(0)))) < 1e-12
    # Every standard single-qubit gate through the native rewrite.
    for g in (C.x(0), C.y(0), C.z(0), C.h(0), C.s(0), C.sdg(0), C.rz(0.77, 0)):
        native = to_native(CircuitDag(1, (g,)), qec_mode=False)
        assert phase_distance(circuit_unitary(native), gate_matrix(g)) < 1e-12
    # H carries global phase i relative to its native form.
    h_native = circuit_unitary(to_native(CircuitDag(1, (C.h(0),)), qec_mode=False))
    assert np.max(np.abs(1j * h_native - gate_matrix(C.h(0)))) < 1e-12
    # CNOT from its five-pulse expansion: CNOT = exp(-i pi/4) * product.
    u = circuit_unitary(to_native(CircuitDag(2, (C.cx(0, 1),)), qec_mode=False))
    assert np.max(np.abs(np.exp(-1j * math.pi / 4) * u - gate_matrix(C.cx(0, 1)))) < 1e-12
    u = circuit_unitary(to_native(CircuitDag(2, (C.cx(1, 0),)), qec_mode=False))
    assert phase_distance(u, circuit_unitary(CircuitDag(2, (C.cx(1, 0),)))) < 1e-12
    # GPI(t1) then GPI(t2) equals Rz(2(t2 - t1)) up to phase, and the merge pass realises it.
    for t1, t2 in itertools.product(np.linspace(0, TWO_PI, 7), repeat=2):
        pair = CircuitDag(1, (C.gpi(float(t1), 0), C.gpi(float(t2), 0)))
        assert phase_distance(circuit_unitary(pair), rz_matrix(2 * (t2 - t1))) < 1e-12
        merged = optimize_native(pair)
        assert len(merged) == 0
        assert phase_distance(circuit_unitary(merged), circuit_unitary(pair)) < 1e-12
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.acceptance(4, "color-code construction, commutation and distance")
def test_color_code_construction():
    t0 = time.perf_counter()
    for d, n in ((3, 7), (5, 17), (7, 31)):
        code = build_code(d)
        assert code.n == n == (d + 1) ** 2 // 2 - 1
        assert not ((code.stabilizers_x.astype(int) @ code.stabilizers_z.T.astype(int)) % 2).any()
        # Exhaustive: no zero-syndrome, logically nontrivial pattern below weight d.
        rows = [np.uint64(mask(r)) for r in code.stabilizers_x]
        lz = np.uint64(mask(code.logical_z))
        found_at_d = False
        for w in range(1, d + 1):
            combos = np.array(list(itertools.combinations(range(n), w)), dtype=np.uint64)
            e = (np.uint64(1) << combos).sum(axis=1, dtype=np.uint64)
            zero = np.ones(len(e), dtype=bool)
            for r in rows:
                zero &= (np.bitwise_count(e & r) & 1) == 0
            logical = (np.bitwise_count(e[zero] & lz) & 1).astype(bool)
            if w < d:
                assert not logical.any(), (d, w)
            elif d < 7:
                found_at_d = bool(logical.any())
            if d == 7 and w == 6:
                break
        if d < 7:
            assert found_at_d
        else:
            assert min_weight_logical(code.stabilizers_x, 6) is None
    assert time.perf_counter() - t0 < 600


def _independent_enumerator(d: int) -> list[int]:
    """Brute-force A_w with a decoder and stabilizer group built here."""
    code = build_code(d)
    n = code.n
    rows = [mask(r) for r in code.stabilizers_z]
    table: dict[int, int] = {}
    for w in range(n + 1):
        for sup in itertools.combinations(range(n), w):
            e = sum(1 << q for q in sup)
            s = sum(((bin(e & r).count("1") & 1) << i) for i, r in enumerate(rows))
            table.setdefault(s, e)
        if len(table) == 1 << len(rows):
            break
    group = set()
    for coeffs in itertools.product((0, 1), repeat=len(rows)):
        g = 0
        for c, r in zip(coeffs, rows):
            if c:
                g ^= r
        group.add(g)
    errs = np.arange(1 << n, dtype=np.uint64)
    synd = np.zeros(len(errs), dtype=np.int64)
    for i, r in enumerate(rows):
        synd |= ((np.bitwise_count(errs & np.uint64(r)) & 1).astype(np.int64) << i)
    corr = np.array([table[s] for s in range(1 << len(rows))], dtype=np.uint64)
    residual = errs ^ corr[synd]
    group_arr = np.array(sorted(group), dtype=np.uint64)
    ok = np.isin(residual, group_arr)
    return list(np.bincount(np.bitwise_count(errs[ok]).astype(np.int64), minlength=n + 1))


@pytest.mark.acceptance(5, "enumerator oracle equivalence for d=3 and d=5")
def test_enumerator_oracle():
    t0 = time.perf_counter()
    code3 = build_code(3)
    h = code3.stabilizers_z.astype(int)
    # Pattern by pattern for d=3: decoder residual in the stabilizer group iff counted.
    group = {tuple(np.array(c) @ h % 2) for c in itertools.product((0, 1), repeat=3)}
    counts = [0] * 8
    for e_int in range(128):
        e = np.array([(e_int >> q) & 1 for q in range(7)], dtype=np.uint8)
        r = lookup_decode(code3, code3.syndrome(e, PauliKind.X), PauliKind.X) ^ e
        counts[int(e.sum())] += tuple(r) in group
    enum3 = exact_enumerator(code3)
    assert list(enum3.A) == counts == _independent_enumerator(3)
    enum5 = exact_enumerator(build_code(5))
    brute5 = _independent_enumerator(5)
    assert list(enum5.A) == brute5
    assert all(brute5[w] == math.comb(17, w) for w in range(3))
    assert time.perf_counter() - t0 < 60


@pytest.mark.acceptance(6, "schedule legality: 100 random circuits x {UB, VTB} x d in {3, 5}")
def test_schedule_legality(record_property):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    checked = 0
    for _ in range(100):
        width = int(rng.integers(2, 11))
        dag = transpile(random_circuit(width, 30, rng, mcx_max_controls=3), precision=8).qec_circuit
        c_len = int(rng.integers(2, 7))
        for d in (3, 5):
            params = ChipParams.derive(C=c_len, N=dag.num_qubits, d=d)
            for fn in (schedule_ub, schedule_vtb):
                problems = audit_schedule(fn(dag, params), dag, params)
                assert problems == [], problems[:5]
                checked += 1
    record_property("detail", f"{checked} schedules audited")
    assert time.perf_counter() - t0 < 600


@pytest.mark.acceptance(7, "shuttle-rule conformance on the worked example")
def test_shuttle_conformance():
    t0 = time.perf_counter()
    D = DUMMY
    params = ChipParams(C=5, N=8, L=3, L_e=1)
    s = initial_configuration(params)
    assert s.h_sectors == ((0, 1, 2, 3, 4, 5), (6, 7, D, D, D, D), (D,) * 6)
    s = shuttle(s)
    assert s.v_sectors[0] == 5 and s.h_sectors[0] == (0, 1, 2, 3, 4)
    s = shuttle(s)
    assert s.v_sectors[0] == 4 and s.h_sectors[0] == (D, 0, 1, 2, 3) and s.h_sectors[1][0] == 5
    s = shuttle(s)
    assert s.v_sectors[0] == 3 and s.h_sectors[1][:2] == (4, 5)
    rng = np.random.default_rng(SEED)
    for _ in range(1000):
        c_len = int(rng.integers(2, 7))
        l_e = int(rng.integers(1, 4))
        n = int(rng.integers(0, 3 * (c_len + 1) + 1))
        p = ChipParams.derive(C=c_len, N=n, d=3, L_e=l_e)
        st = initial_configuration(p)
        for _ in range(int(rng.integers(1, 60))):
            if rng.random() < 0.3:
                k = int(rng.integers(p.L))
                qs = st.sector_qubits(k)
                if len(qs) >= 2:
                    a, b = rng.choice(qs, 2, replace=False)
                    st = swap_within_sector(st, k, int(a), int(b))
                continue
            before = st.qubit_order()
            st = shuttle(st)
            assert st.qubit_order() == before
        assert sorted(st.placement()) == list(range(n))
    assert time.perf_counter() - t0 < 60


@pytest.mark.acceptance(8, "effective-error inversion round trip to 1e-10")
def test_effective_inversion():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    for _ in range(1000):
        n1, n2 = int(rng.integers(0, 10 ** 6)), int(rng.integers(1, 10 ** 6))
        p = float(10 ** rng.uniform(-9, -1))
        log_p = n1 * math.log1p(-0.1 * p) + n2 * math.log1p(-p)
        p1, p2 = solve_effective(math.exp(log_p), n1, n2, log_p_succ=log_p)
        assert abs(p2 - p) <= 1e-10 * p and p1 == pytest.approx(p2 / 10)
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.acceptance(9, "distance scaling of p2Q* for QFT-32 under VTB at optimal C")
def test_distance_scaling(record_property):
    t0 = time.perf_counter()
    base = RunConfig(algorithm="QFT", width=32, policy="VTB", p_2q=1e-4)
    stars = {}
    for d in (3, 5, 7):
        rows = run_many([base.replace(d=d, C=c) for c in range(2, 31)])
        best = best_row(rows)
        assert best is not None
        stars[d] = (best.report.p2q_star, best.config.C)
    record_property("detail", ", ".join(f"d={d}: p2Q*={p:.2e} at C={c}" for d, (p, c) in stars.items()))
    p3, p5, p7 = (stars[d][0] for d in (3, 5, 7))
    assert p3 > p5 > p7
    assert p3 / p5 >= 10 and p5 / p7 >= 10
    assert time.perf_counter() - t0 < 1800


@pytest.mark.acceptance(10, "T/P_succ finite for GS-16 with d=5,7; no-QEC short chains below 1e-3")
def test_grover_runtime(record_property):
    t0 = time.perf_counter()
    base = RunConfig(algorithm="GS", width=16, p_2q=1e-4, C=5)
    qec = {d: run_many([base.replace(d=d)])[0].report for d in (5, 7)}
    for rep in qec.values():
        assert rep is not None and math.isfinite(rep.t_over_p) and rep.P_succ > 0
    noqec = run_many([base.replace(d=0, C=c) for c in range(2, 31)])
    best = best_row(noqec)
    assert best is not None
    record_property("detail", f"T/P d=5 {qec[5].t_over_p:.3e}, d=7 {qec[7].t_over_p:.3e}; "
                              f"best no-QEC P={best.report.P_succ:.2e} at C={best.config.C}")
    assert best.report.P_succ < 1e-3
    assert time.perf_counter() - t0 < 1800


@pytest.mark.acceptance(11, "determinism: repeated invocations give byte-identical CSV")
def test_determinism(tmp_path):
    outputs = []
    for i, workers in enumerate(("1", "1", "2")):
        path = tmp_path / f"out{i}.csv"
        assert main(["sweep-c", "--algorithm", "QFT", "--width", "6", "--c-range", "2:5", "--seed", "7",
                     "--workers", workers, "--csv", str(path)]) == 0
        outputs.append(path.read_bytes())
    for i, args in enumerate((["run"], ["run"])):
        path = tmp_path / f"run{i}.csv"
        assert main(args + ["--algorithm", "GS", "--width", "5", "--d", "5", "--csv", str(path)]) == 0
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    assert outputs[3] == outputs[4]
