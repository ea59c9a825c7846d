import csv
import io
import json

import pytest

from qccdsim.analysis import CSV_COLUMNS
from qccdsim.cli import main
from qccdsim.pipeline import (
    RunConfig,
    coerce,
    load_config,
    run_many,
    run_single,
    sweep_chain_length,
    sweep_error,
    volumetric,
)


def rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def cli(capsys, *argv) -> str:
    assert main(list(argv)) == 0
    return capsys.readouterr().out


# ---- configuration -------------------------------------------------------

def test_coerce_types():
    assert coerce("C", "7") == 7
    assert coerce("p_2q", "1e-4") == 1e-4
    assert coerce("shuttle_all", "false") is False
    assert coerce("L", "none") is None
    with pytest.raises(KeyError):
        coerce("bogus", "1")
    with pytest.raises(ValueError):
        coerce("h_reduction", "maybe")


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(d=4)
    with pytest.raises(ValueError):
        RunConfig(policy="FAST")


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[qccdsim]\nalgorithm = BV\nwidth = 5\nC = 3\np_2q = 0.001\n")
    assert load_config(cfg)["width"] == 5
    out = rows(cli(capsys, "run", "--config", str(cfg), "--C", "4"))
    assert out[0]["algorithm"] == "BV" and out[0]["N"] == "5" and out[0]["C"] == "4"
    assert float(out[0]["p_2Q"]) == 1e-3


def test_config_missing_section(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[other]\nC = 3\n")
    with pytest.raises(ValueError):
        load_config(cfg)


# ---- run_single ------------------------------------------------------------

def test_zero_error_success():
    rep = run_single(RunConfig(algorithm="QFT", width=8, d=3, policy="UB", p_2q=0.0))
    assert rep.P_succ == 1.0


def test_bv64_has_no_macros():
    rep = run_single(RunConfig(algorithm="BV", width=64, d=5, policy="VTB", p_2q=1e-4))
    assert rep.counters["nontransversal"] == 0 and 0 < rep.P_succ <= 1


def test_noqec_mode_policy_tag():
    rep = run_single(RunConfig(algorithm="QFT", width=4, d=0, C=2))
    assert rep.policy == "NOQEC" and rep.d == 0 and rep.counters["extraction"] == 0


def test_stage_attribution(tmp_path):
    bad = tmp_path / "bad.qasm"
    bad.write_text("qreg q[2];\nfoo q[0];\n")
    with pytest.raises(RuntimeError, match="transpile"):
        run_single(RunConfig(input_file=str(bad)))


# ---- sweeps ------------------------------------------------------------------

def test_degenerate_sweep_ties_to_smallest_c(tmp_path):
    empty = tmp_path / "empty.qasm"
    empty.write_text("qreg q[3];\n")
    res = sweep_chain_length(RunConfig(input_file=str(empty), p_2q=0.0), [2, 3, 4])
    assert all(r.report.P_succ == 1.0 for r in res)
    best = [r for r in res if r.extra["optimal"]]
    assert {(r.extra["variant"], r.config.C) for r in best} == {("qec", 2), ("noqec", 2)}
    assert [r.extra["variant"] for r in res].count("long") == 1


def test_optimal_row_is_argmax():
    res = sweep_chain_length(RunConfig(algorithm="QFT", width=6), [2, 3, 5])
    for variant in ("qec", "noqec"):
        group = [r for r in res if r.extra["variant"] == variant]
        best = [r for r in group if r.extra["optimal"]]
        assert len(best) == 1
        assert all(best[0].report.P_succ >= r.report.P_succ for r in group)


def test_bv256_prefers_long_chains():
    base = RunConfig(algorithm="BV", width=256, d=3)
    for d in (3, 0):
        short = run_single(base.replace(C=2, d=d))
        long = run_single(base.replace(C=30, d=d))
        assert long.P_succ >= short.P_succ


def test_error_sweep_monotone_and_zero_column():
    grid = [0.0, 1e-5, 1e-4, 1e-3]
    res = sweep_error(RunConfig(algorithm="QFT", width=5, C=3), grid, [0, 3, 5])
    for d in (0, 3, 5):
        vals = [r.report.P_succ for r in res if r.config.d == d]
        assert vals[0] == 1.0
        assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_volumetric_row_count():
    res = volumetric(RunConfig(C=3), [3, 4, 5], ["QFT", "BV"])
    assert len(res) == 6
    assert all(r.extra["depth"] for r in res)


def test_sweep_isolation(tmp_path):
    good = RunConfig(algorithm="BV", width=4, C=2)
    bad = good.replace(input_file=str(tmp_path / "missing.qasm"))
    res = run_many([good, bad, good])
    assert res[0].report is not None and res[2].report is not None
    assert res[1].report is None and res[1].error
    assert res[0].report.P_succ == res[2].report.P_succ


def test_parallel_matches_serial():
    cfgs = [RunConfig(algorithm="QFT", width=4, C=c) for c in (2, 3, 4)]
    serial = [r.report.to_json() for r in run_many(cfgs, 1)]
    parallel = [r.report.to_json() for r in run_many(cfgs, 2)]
    assert serial == parallel


# ---- subcommands -------------------------------------------------------------

def test_cli_run_csv_and_json(tmp_path, capsys):
    js = tmp_path / "r.json"
    out = cli(capsys, "run", "--algorithm", "QFT", "--width", "4", "--json", str(js))
    header = out.splitlines()[0].split(",")
    assert header == list(CSV_COLUMNS)
    assert json.loads(js.read_text())["algorithm"] == "QFT"


def test_cli_determinism(capsys):
    args = ["sweep-c", "--algorithm", "BV", "--width", "5", "--c-range", "2:4", "--seed", "3"]
    assert cli(capsys, *args) == cli(capsys, *args)


def test_cli_transpile(tmp_path, capsys):
    out = cli(capsys, "transpile", "--algorithm", "QFT", "--width", "3", "--out-dir", str(tmp_path))
    log = [json.loads(x) for x in out.splitlines()]
    assert log[0]["pass"] == "terminal_measure"
    assert (tmp_path / "qec.qasm").exists() and (tmp_path / "noqec.qasm").exists()
    assert len(json.loads((tmp_path / "noqec_virtual_rz.json").read_text())) == 3


def test_cli_schedule(tmp_path, capsys):
    path = tmp_path / "s.jsonl"
    cli(capsys, "schedule", "--algorithm", "BV", "--width", "4", "--C", "2", "--out", str(path))
    lines = path.read_text().splitlines()
    assert "summary" in json.loads(lines[-1])


def test_cli_analyze(capsys):
    data = json.loads(cli(capsys, "analyze", "--algorithm", "BV", "--width", "4", "--d", "5"))
    assert data["d"] == 5 and data["policy"] == "VTB"


def test_cli_sweep_p(capsys):
    out = rows(cli(capsys, "sweep-p", "--algorithm", "BV", "--width", "4", "--p-grid", "0,1e-4",
                   "--distances", "0,3"))
    assert len(out) == 4 and out[0]["P_succ"] == "1.0"


def test_cli_volumetric(capsys):
    out = rows(cli(capsys, "volumetric", "--widths", "3,4", "--algorithms", "QFT,BV"))
    assert len(out) == 4 and "depth" in out[0]


def test_cli_verify_random(capsys):
    out = cli(capsys, "verify", "--circuits", "3", "--qubits", "5", "--gates", "30")
    assert out.count("PASS") == 3


def test_cli_verify_input(capsys):
    out = cli(capsys, "verify", "--algorithm", "GS", "--width", "4", "--circuits", "0")
    assert "PASS" in out


def test_cli_cache_enumerator(tmp_path, capsys):
    out = cli(capsys, "cache-enumerator", "--d", "3", "--dir", str(tmp_path))
    assert len(out.split()) == 2
    assert (tmp_path / "enumerator_d3_X.txt").exists()


def test_cli_error_exit(capsys):
    assert main(["run", "--d", "4"]) == 2
    assert "error" in capsys.readouterr().err
