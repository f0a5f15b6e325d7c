"""Command-line front end: compile, simulate, solve, verify, anneal, trace, presets."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from .analog import PRESETS, ParameterError, dump_preset, get_preset
from .bench import monte_carlo, results_csv, summary_json
from .lhz import (LayoutError, compile_layout, decode_logical, dump_layout, encode_logical, evaluate_lhz,
                  fully_consistent, load_layout)
from .problem import MaxCutGraph, ProblemError, as_ising, cut_value, load_problem
from .readout import ReadoutError
from .reference import AnnealSchedule, SolverError, brute_force_ising, brute_force_lhz, metropolis_anneal
from .sim import SimConfig, SimulationError, run

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**63:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^63)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lhzbench", description="LHZ parity compiler and parametric-oscillator Ising bench")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def sim_args(sp):
        sp.add_argument("--preset", default="ideal-1ghz", help="built-in name or preset JSON file")
        sp.add_argument("--seed", type=_seed, default=None, help="master seed (default: drawn and echoed)")
        sp.add_argument("--steps-per-pump", type=_positive_int, default=128)
        sp.add_argument("--t-end", type=float, default=None, help="seconds (default: preset)")
        sp.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
        sp.add_argument("--amp-threshold", type=float, default=0.2)
        sp.add_argument("--reference", choices=("auto", "pump", "fixed", "spin1"), default="auto")

    c = sub.add_parser("compile", help="compile a problem file to an LHZ layout")
    c.add_argument("--problem", required=True)
    c.add_argument("--penalty", type=float, default=None)
    c.add_argument("--out", default=None, help="layout file (default: stdout)")

    s = sub.add_parser("simulate", help="Monte Carlo runs of a compiled layout")
    s.add_argument("--layout", required=True)
    s.add_argument("--problem", default=None, help="optional problem file for cut / Ising energies")
    s.add_argument("--runs", type=_positive_int, default=20)
    s.add_argument("--out", required=True, help="output directory")
    sim_args(s)

    v = sub.add_parser("solve", help="compile, simulate and decode a problem")
    v.add_argument("--problem", required=True)
    v.add_argument("--penalty", type=float, default=None)
    v.add_argument("--runs", type=_positive_int, default=20)
    v.add_argument("--format", choices=("json", "csv"), default="json")
    sim_args(v)

    f = sub.add_parser("verify", help="brute-force oracles and LHZ/Ising equivalence")
    f.add_argument("--problem", required=True)
    f.add_argument("--penalty", type=float, default=None)
    f.add_argument("--format", choices=("json", "csv"), default="json")

    a = sub.add_parser("anneal", help="Metropolis reference annealer on a layout")
    a.add_argument("--layout", required=True)
    a.add_argument("--sweeps", type=_positive_int, default=10_000)
    a.add_argument("--restarts", type=_positive_int, default=100)
    a.add_argument("--seed", type=_seed, default=None)
    a.add_argument("--t-hot", type=float, default=None)
    a.add_argument("--t-cold", type=float, default=None)
    a.add_argument("--format", choices=("json", "csv"), default="json")

    t = sub.add_parser("trace", help="export one run's waveforms")
    t.add_argument("--layout", required=True)
    t.add_argument("--out", required=True, help="CSV path, or binary path with --binary")
    t.add_argument("--run-index", type=int, default=0)
    t.add_argument("--stride", type=_positive_int, default=8, help="record every n-th step")
    t.add_argument("--binary", action="store_true", help="write <f8 rows plus a JSON sidecar")
    sim_args(t)

    r = sub.add_parser("presets", help="list or export built-in presets")
    r.add_argument("--export", default=None, metavar="NAME")
    r.add_argument("--out", default=None)
    return p


def _echo_config(args: argparse.Namespace, extra: Optional[dict] = None) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "threads"}
    if extra:
        cfg.update(extra)
    print("config " + json.dumps(cfg, sort_keys=True), file=sys.stderr)
    return cfg


def _resolve_seed(args) -> None:
    if getattr(args, "seed", "absent") is None:
        args.seed = int(np.random.SeedSequence().entropy % 2**63)


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def _sim_setup(args, layout):
    preset = get_preset(args.preset)
    network = preset.network(layout)
    t_end = preset.t_end if args.t_end is None else args.t_end
    config = SimConfig.for_network(network, t_end, args.seed, args.steps_per_pump, preset=preset.name)
    return preset, network, config


def cmd_compile(args) -> int:
    _echo_config(args)
    layout = compile_layout(as_ising(load_problem(args.problem)), args.penalty)
    _write(dump_layout(layout), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    _resolve_seed(args)
    layout = load_layout(args.layout)
    problem = load_problem(args.problem) if args.problem else None
    preset, network, config = _sim_setup(args, layout)
    cfg = _echo_config(args, {"dt": config.dt, "t_end": config.t_end})
    stats = monte_carlo(network, layout, config, args.runs, problem, threads=args.threads,
                        amp_threshold=args.amp_threshold, reference=args.reference)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(results_csv(stats))
    # the output location is not part of the experiment, so reruns elsewhere compare equal
    recorded = {k: v for k, v in cfg.items() if k != "out"}
    (out / "summary.json").write_text(summary_json(stats, {"config": recorded}) + "\n")
    print(f"runs={stats.runs} even_parity_prob={stats.even_parity_prob:.4f} "
          f"success_prob={'unverified' if stats.success_prob is None else f'{stats.success_prob:.4f}'} "
          f"-> {out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    _resolve_seed(args)
    problem = load_problem(args.problem)
    layout = compile_layout(as_ising(problem), args.penalty)
    preset, network, config = _sim_setup(args, layout)
    cfg = _echo_config(args, {"dt": config.dt, "t_end": config.t_end})
    stats = monte_carlo(network, layout, config, args.runs, problem, threads=args.threads,
                        amp_threshold=args.amp_threshold, reference=args.reference)
    ok = [r for r in stats.records if not r.failure]
    consistent = [r for r in ok if r.consistent]
    pool = consistent or ok
    if not pool:
        raise SimulationError("every run failed")
    best = min(pool, key=lambda r: (r.ising_energy, r.lhz_energy, r.run_index))
    report = {
        "config": cfg,
        "best_run": best.run_index,
        "assignment": list(best.assignment),
        "consistent": best.consistent,
        "ising_energy": best.ising_energy,
        "cut": best.cut,
        "lhz_energy": best.lhz_energy,
        "pattern": best.pattern,
        "runs": stats.runs,
        "consistent_runs": len(consistent),
        "even_parity_prob": stats.even_parity_prob,
        "success_prob": "unverified" if stats.success_prob is None else stats.success_prob,
    }
    if args.format == "json":
        _write(json.dumps(report, indent=2), None)
    else:
        _write(_rows_csv([{k: v if not isinstance(v, (list, dict)) else json.dumps(v)
                           for k, v in report.items() if k != "config"}]), None)
    return EXIT_OK


def cmd_verify(args) -> int:
    _echo_config(args)
    problem = load_problem(args.problem)
    ising = as_ising(problem)
    layout = compile_layout(ising, args.penalty)
    ground = brute_force_ising(ising)
    lo, states = brute_force_lhz(layout)
    decoded = set()
    all_consistent = True
    for st in states:
        all_consistent &= fully_consistent(layout, st.spins)
        decoded.add(decode_logical(layout, st.spins)[0])
    # brute_force_ising lists both members of each flip pair; the decode fixes s_1 = +1
    expected = {g for g in ground.states if g[0] == 1}
    rows = []
    for g in sorted(expected, reverse=True):
        row = {"assignment": " ".join(str(x) for x in g), "ising_energy": ground.energy,
               "lhz_energy": evaluate_lhz(layout, encode_logical(layout, g))}
        if isinstance(problem, MaxCutGraph):
            row["cut"] = cut_value(problem, g)
        rows.append(row)
    report = {
        "n": layout.n, "k": layout.k, "tiles": len(layout.tiles), "fixed_slots": layout.n_fixed,
        "penalty": layout.penalty,
        "ising_ground_energy": ground.energy,
        "lhz_ground_energy": lo,
        "lhz_minimizers": len(states),
        "all_minimizers_consistent": all_consistent,
        "decode_matches_ising_ground_set": decoded == expected,
        "energy_offset": lo - ground.energy,
        "ground_states": rows,
    }
    equivalent = all_consistent and decoded == expected and abs(lo - ground.energy) < 1e-9
    report["equivalent"] = equivalent
    if args.format == "json":
        _write(json.dumps(report, indent=2), None)
    else:
        _write(_rows_csv(rows), None)
    return EXIT_OK if equivalent else EXIT_RUNTIME


def cmd_anneal(args) -> int:
    _resolve_seed(args)
    _echo_config(args)
    layout = load_layout(args.layout)
    schedule = AnnealSchedule(args.sweeps, args.t_hot, args.t_cold)
    res = metropolis_anneal(layout, args.restarts, schedule, args.seed)
    ground = brute_force_lhz(layout)[0] if layout.k <= 20 else None
    rows = []
    for r in range(args.restarts):
        st = res.best_state(r)
        assignment, _ = decode_logical(layout, st.spins)
        rows.append({"restart": r, "best_energy": float(res.best_energy[r]),
                     "spins": "".join("+" if s > 0 else "-" for s in st.spins),
                     "ancilla": " ".join(str(a) for a in st.ancilla),
                     "assignment": " ".join(str(x) for x in assignment),
                     "consistent": fully_consistent(layout, st.spins)})
    best = float(np.min(res.best_energy))
    hits = None if ground is None else int(np.sum(res.best_energy <= ground + 1e-9))
    if args.format == "json":
        _write(json.dumps({"seed": args.seed, "restarts": args.restarts, "sweeps": args.sweeps,
                           "best_energy": best,
                           "ground_energy": "unverified" if ground is None else ground,
                           "restarts_at_ground": "unverified" if hits is None else hits,
                           "results": rows}, indent=2), None)
    else:
        _write(_rows_csv(rows), None)
    return EXIT_OK


def cmd_trace(args) -> int:
    _resolve_seed(args)
    layout = load_layout(args.layout)
    preset, network, config = _sim_setup(args, layout)
    config = replace(config, record_stride=args.stride)
    _echo_config(args, {"dt": config.dt, "t_end": config.t_end})
    if args.run_index < 0:
        raise UsageError("--run-index must be >= 0")
    trace = run(network, config, args.run_index)
    if args.binary:
        trace.to_binary(args.out)
    else:
        trace.to_csv(args.out)
    print(f"samples={trace.times.size} units={trace.n_units} -> {args.out}")
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.export is None:
        for name, p in PRESETS.items():
            print(f"{name}\tf0={p.spin.f0:.4e} Hz\tt_end={p.t_end:.3e} s\t{p.notes}")
        return EXIT_OK
    _write(dump_preset(get_preset(args.export)), args.out)
    return EXIT_OK


COMMANDS = {
    "compile": cmd_compile, "simulate": cmd_simulate, "solve": cmd_solve, "verify": cmd_verify,
    "anneal": cmd_anneal, "trace": cmd_trace, "presets": cmd_presets,
}


def _fail(code: int, kind: str, message: str, location: str = "") -> int:
    doc = {"error": kind, "exit_code": code, "message": message}
    if location:
        doc["location"] = location
    print(json.dumps(doc), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except ProblemError as exc:
        return _fail(EXIT_INPUT, "problem", str(exc), exc.location)
    except (LayoutError, ParameterError, ReadoutError, SolverError) as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, str(exc))
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        return _fail(EXIT_INPUT, "io", str(exc))
    except SimulationError as exc:
        return _fail(EXIT_RUNTIME, "simulation", str(exc))
    except ValueError as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, str(exc))
    except (ArithmeticError, MemoryError, OSError) as exc:
        return _fail(EXIT_RUNTIME, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
