"""
Command-line front end.

Settings resolve as: built-in defaults, then ``--config FILE`` (INI, section
``[qccdsim]``), then explicit flags. Every RunConfig field has a flag of the
same name with dashes, e.g. ``--p-2q 1e-4`` or ``--shuttle-all false``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .benchmarks import random_circuit
from .colorcode import CACHE_ENV, _DATA_DIR, cache_dirs, cache_enumerator
from .analysis import csv_table
from .pipeline import (
    DEFAULT_C_RANGE,
    RunConfig,
    build_schedule,
    coerce,
    load_circuit,
    load_config,
    rows_to_csv,
    run_single,
    sweep_chain_length,
    sweep_error,
    transpile_config,
    volumetric,
)
from .qasm import write_circuit
from .statevector import MAX_QUBITS, equivalent_up_to_phase
from .transpiler import transpile

_CONFIG_FIELDS = [f.name for f in dataclasses.fields(RunConfig)]


def _int_list(text: str) -> list[int]:
    """``2:30`` (inclusive range) or ``2,5,10``."""
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="INI file with a [qccdsim] section")
    for name in _CONFIG_FIELDS:
        g.add_argument("--" + name.replace("_", "-"), dest=name, default=None, metavar="VALUE")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(load_config(args.config))
    for name in _CONFIG_FIELDS:
        raw = getattr(args, name, None)
        if raw is not None:
            values[name] = coerce(name, raw)
    return RunConfig(**values)


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_transpile(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = transpile_config(cfg)
    for rec in out.pass_log:
        print(json.dumps({"pass": rec.name, "before": rec.before, "after": rec.after}))
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "qec.qasm").write_text(write_circuit(out.qec_circuit), encoding="utf-8")
        (d / "noqec.qasm").write_text(write_circuit(out.noqec_circuit), encoding="utf-8")
        virtual = list(out.noqec_circuit.metadata.get("virtual_rz", ()))
        (d / "noqec_virtual_rz.json").write_text(json.dumps(virtual), encoding="utf-8")
    return 0


def cmd_schedule(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    _emit(build_schedule(cfg).to_jsonl(), args.out)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    _emit(json.dumps(run_single(cfg).to_dict(), indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    report = run_single(cfg)
    _emit(csv_table([report]), args.csv)
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n", encoding="utf-8")
    return 0


def cmd_sweep_c(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    c_values = _int_list(args.c_range) if args.c_range else list(DEFAULT_C_RANGE)
    _emit(rows_to_csv(sweep_chain_length(cfg, c_values)), args.csv)
    return 0


def cmd_sweep_p(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    rows = sweep_error(cfg, _float_list(args.p_grid), _int_list(args.distances))
    _emit(rows_to_csv(rows), args.csv)
    return 0


def cmd_volumetric(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    algs = [a.strip() for a in args.algorithms.split(",")] if args.algorithms else None
    _emit(rows_to_csv(volumetric(cfg, _int_list(args.widths), algs)), args.csv)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    """Check the no-QEC transpiled circuit against the input on random states."""
    cfg = resolve_config(args)
    rng = np.random.default_rng(cfg.seed)
    if cfg.input_file or args.circuits == 0:
        jobs = [("input", transpile_config(cfg), None)]
    else:
        jobs = []
        for i in range(args.circuits):
            dag = random_circuit(args.qubits, args.gates, rng, mcx_max_controls=2, seed=cfg.seed)
            jobs.append((f"random[{i}]", transpile(dag, cfg.precision, cfg.h_reduction), dag))
    failures = 0
    for label, out, original in jobs:
        src = original if original is not None else load_circuit(cfg)
        aux = out.noqec_circuit.num_qubits - src.num_qubits
        if out.noqec_circuit.num_qubits > MAX_QUBITS:
            print(f"{label}: skipped, {out.noqec_circuit.num_qubits} qubits exceeds the oracle limit")
            continue
        ok, dev = equivalent_up_to_phase(src, out.noqec_circuit, trials=args.trials, seed=cfg.seed,
                                         clean_ancillas=aux)
        failures += not ok
        print(f"{label}: {'PASS' if ok else 'FAIL'} max deviation {dev:.3e}")
    return 1 if failures else 0


def cmd_cache_enumerator(args: argparse.Namespace) -> int:
    directory = Path(args.dir) if args.dir else (cache_dirs()[0] if cache_dirs() else _DATA_DIR)
    directory.mkdir(parents=True, exist_ok=True)
    def progress(done: int, total: int) -> None:
        print(f"{done}/{total}", file=sys.stderr)

    for path in cache_enumerator(args.d, directory, progress=progress):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qccdsim", description="Shuttling trapped-ion chip simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("transpile", help="emit both native circuits and the pass log")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_transpile)

    s = sub.add_parser("schedule", help="emit the schedule as JSON lines")
    s.add_argument("--out")
    s.set_defaults(func=cmd_schedule)

    s = sub.add_parser("analyze", help="print the run report as JSON")
    s.add_argument("--out")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("run", help="one parameter point, CSV row plus optional JSON")
    s.add_argument("--csv")
    s.add_argument("--json")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep-c", help="chain-length sweep")
    s.add_argument("--c-range", help="'2:30' or '2,5,10'")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_sweep_c)

    s = sub.add_parser("sweep-p", help="two-qubit error sweep per distance")
    s.add_argument("--p-grid", required=True, help="comma-separated probabilities")
    s.add_argument("--distances", default="0,3,5,7")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_sweep_p)

    s = sub.add_parser("volumetric", help="width sweep per algorithm")
    s.add_argument("--widths", required=True)
    s.add_argument("--algorithms")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_volumetric)

    s = sub.add_parser("verify", help="state-vector check of the transpiler")
    s.add_argument("--circuits", type=int, default=10, help="random circuits (0: use the configured input)")
    s.add_argument("--qubits", type=int, default=8)
    s.add_argument("--gates", type=int, default=60)
    s.add_argument("--trials", type=int, default=10)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("cache-enumerator", help=f"offline exact enumeration (directory defaults to ${CACHE_ENV})")
    s.add_argument("--d", type=int, default=7)
    s.add_argument("--dir")
    s.set_defaults(func=cmd_cache_enumerator)

    for name, sp in sub.choices.items():
        if name != "cache-enumerator":
            _add_config_flags(sp)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, RuntimeError, OSError) as exc:
        print(f"qccdsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
