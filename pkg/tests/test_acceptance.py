"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (also collected in the terminal
summary).  Tolerances are the ones the criteria state; nothing is relaxed.
"""

import itertools
import json
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from lhzbench.analog import PRESETS, single_unit, tank_energy
from lhzbench.bench import FAILED, even_pattern, monte_carlo, time_to_solution
from lhzbench.cli import main
from lhzbench.lhz import (
    Tile, compile_layout, decode_logical, fully_consistent, min_penalty_of_tile, single_tile,
)
from lhzbench.problem import IsingProblem, complete_graph, maxcut_to_ising
from lhzbench.readout import PUMP_PHASE
from lhzbench.reference import (
    AnnealSchedule, brute_force_ising, brute_force_lhz, metropolis_anneal, metropolis_two_state,
)
from lhzbench.sim import SimConfig, run, run_batch, run_state

IDEAL = PRESETS["ideal-1ghz"]
K4_FILE = Path(__file__).resolve().parents[1] / "problems" / "k4.json"
SEED = 0


def test_c01_structure(criterion, tmp_path):
    start = time.perf_counter()
    out = tmp_path / "k4.layout.json"
    assert main(["compile", "--problem", str(K4_FILE), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    pairs = [tuple(s["pair"]) for s in doc["spins"]]
    named = [[None if fx else pairs[m] for m, fx in zip(t["members"], t["fixed"])] for t in doc["tiles"]]
    figure = [[(1, 2), (1, 3), (2, 3), None], [(1, 3), (1, 4), (2, 4), (2, 3)], [(2, 3), (2, 4), (3, 4), None]]
    ok = doc["k"] == 6 and len(doc["tiles"]) == 3 and named == figure
    for n in range(2, 9):
        lay = compile_layout(IsingProblem(n))
        ok &= lay.k == n * (n - 1) // 2 and len(lay.tiles) == (n - 1) * (n - 2) // 2 and lay.n_fixed == n - 2
    elapsed = time.perf_counter() - start
    criterion(1, "K4 compiles to k=6, 3 tiles, 2 fixed slots; counts hold for n=2..8",
              ok and elapsed < 1.0, f"{elapsed:.2f} s")


def test_c02_parity_penalty_table(criterion):
    c = 3.0
    ok, rows = True, 0
    for tile, width in ((Tile((0, 1, 2, 3)), 4), (Tile((0, 1, 2, None)), 3)):
        for spins in itertools.product((-1, 1), repeat=width):
            total = sum(spins) + tile.n_fixed
            expected = 0.0 if total in (-4, 0, 4) else 4 * c
            ok &= min_penalty_of_tile(tile, spins, c)[1] == expected
            rows += 1
    criterion(2, "min-ancilla penalty is 0 for even sums and 4C otherwise", ok, f"{rows} patterns")


def test_c03_oracle_equivalence(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    checked, ok = 0, True
    for n in (3, 4, 5):
        pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
        for _ in range(20):
            w = rng.choice([-3, -2, -1, 1, 2, 3], size=len(pairs))
            problem = IsingProblem(n, {p: float(x) for p, x in zip(pairs, w)})
            layout = compile_layout(problem)
            ground = brute_force_ising(problem)
            lo, states = brute_force_lhz(layout)
            ok &= all(fully_consistent(layout, s.spins) for s in states)
            decoded = {decode_logical(layout, s.spins)[0] for s in states}
            ok &= decoded == {g for g in ground.states if g[0] == 1}
            ok &= lo == ground.energy
            checked += 1
    elapsed = time.perf_counter() - start
    criterion(3, "LHZ minimizers decode onto Ising ground sets with zero offset",
              ok and elapsed < 60, f"{checked} instances, {elapsed:.1f} s")


def test_c04_physics_sanity(criterion):
    tank = replace(IDEAL.spin, G0=0.0, dG=0.0, R_loss=math.inf, I_s=0.0)
    t0 = 1.0 / tank.f0
    q0 = [tank.C0 * 0.1]
    cfg = SimConfig(dt=t0 / 128, t_end=100 * t0, S_v=0.0)
    trace = run(single_unit(tank), cfg, q0=q0)
    v, t = trace.voltages[:, 0], trace.times
    z = np.flatnonzero((v[:-1] > 0) & (v[1:] <= 0))
    tz = t[z] + (t[z + 1] - t[z]) * v[z] / (v[z] - v[z + 1])
    freq = (len(tz) - 1) / (tz[-1] - tz[0])

    q, i = run_state(single_unit(tank), cfg, q0=q0)
    e0 = tank_energy(q0, [0.0], tank)[0]
    drift = abs(tank_energy(q, i, tank)[0] - e0) / e0

    pumped = single_unit(IDEAL.spin)

    def final(div):
        c = SimConfig(dt=t0 / div, t_end=20 * t0, S_v=0.0)
        qq, ii = run_state(pumped, c, q0=q0)
        return np.array([qq[0] / tank.C0, ii[0] * math.sqrt(tank.L / tank.C0)])

    ref = final(2048)
    e64, e128 = (np.linalg.norm(final(d) - ref) for d in (64, 128))
    ratio = e64 / e128
    ok = abs(freq / 1e9 - 1) <= 0.005 and drift < 0.01 and 8 <= ratio <= 32
    criterion(4, "1 GHz resonance, lossless drift < 1%, dt-halving ratio in [8, 32]", ok,
              f"f={freq / 1e9:.5f} GHz, drift={drift:.2e}, ratio={ratio:.1f}")


def test_c05_phase_bistability(criterion):
    start = time.perf_counter()
    net = single_unit(IDEAL.spin)
    cfg = SimConfig.for_network(net, t_end=400e-9, seed=SEED)
    batch = run_batch(net, cfg, range(200))
    phi = np.angle(batch.tail_phasors[:, 0]) - PUMP_PHASE
    centre = np.angle(np.mean(np.exp(2j * phi))) / 2  # axis of the antipodal pair
    d = np.angle(np.exp(1j * (phi - centre)))
    near_a = np.abs(d) <= math.pi / 6
    near_b = np.abs(np.abs(d) - math.pi) <= math.pi / 6
    frac_a, frac_b = near_a.mean(), near_b.mean()
    elapsed = time.perf_counter() - start
    ok = bool(np.all(near_a | near_b)) and 0.35 <= frac_a <= 0.65 and 0.35 <= frac_b <= 0.65 and elapsed < 300
    criterion(5, "200 seeds form two antipodal phase clusters holding 35-65% each", ok,
              f"{frac_a:.2f}/{frac_b:.2f}, axis {centre:+.3f} rad vs pump, {elapsed:.0f} s")


def test_c06_single_tile_statistics(criterion):
    start = time.perf_counter()
    layout = single_tile()
    net = IDEAL.network(layout)
    cfg = SimConfig.for_network(net, IDEAL.t_end, SEED, preset=IDEAL.name)
    stats = monte_carlo(net, layout, cfg, 500)
    evens = ["".join(p) for p in itertools.product("+-", repeat=4) if even_pattern(layout, "".join(p))]
    freqs = np.array([stats.histogram.get(p, 0) for p in evens]) / stats.runs
    elapsed = time.perf_counter() - start
    ratio = freqs.max() / freqs.min() if freqs.min() > 0 else math.inf
    ok = (len(evens) == 8 and stats.even_parity_prob >= 0.80 and freqs.min() >= 0.02 and ratio <= 5
          and elapsed < 900)
    criterion(6, "single tile: P(even) >= 0.80, all 8 even patterns >= 2%, max/min <= 5", ok,
              f"P(even)={stats.even_parity_prob:.3f}, min={freqs.min():.3f}, ratio={ratio:.2f}, {elapsed:.0f} s")


def test_c07_k4_maxcut(criterion):
    start = time.perf_counter()
    graph = complete_graph(4)
    layout = compile_layout(maxcut_to_ising(graph))
    net = IDEAL.network(layout)
    cfg = SimConfig.for_network(net, IDEAL.t_end, SEED, preset=IDEAL.name)
    stats = monte_carlo(net, layout, cfg, 200, graph)
    consistent = [r for r in stats.records if r.consistent]
    good = [r for r in consistent if r.cut == 4]
    elapsed = time.perf_counter() - start
    frac = len(good) / stats.runs
    ok = frac >= 0.5 and len(good) == len(consistent) and elapsed < 1200
    criterion(7, "K4: >= 50% consistent with cut 4, every consistent decode has cut 4", ok,
              f"{len(good)}/{stats.runs} cut-4, {len(consistent) - len(good)} other consistent, "
              f"{stats.histogram.get(FAILED, 0)} failed, {elapsed:.0f} s")


def test_c08_metropolis(criterion):
    start = time.perf_counter()
    layout = compile_layout(maxcut_to_ising(complete_graph(4)))
    ground, _ = brute_force_lhz(layout)
    res = metropolis_anneal(layout, restarts=100, schedule=AnnealSchedule(10_000), seed=SEED)
    hits = int(np.sum(res.best_energy <= ground + 1e-9))
    delta, temp = 1.0, 0.7
    exact = math.exp(-delta / temp) / (1 + math.exp(-delta / temp))
    got = metropolis_two_state(delta, temp, steps=1_000_000, chains=1000, seed=SEED)
    rel = abs(got - exact) / exact
    elapsed = time.perf_counter() - start
    criterion(8, "Metropolis: >= 95/100 restarts at optimum, two-state balance within 2%",
              hits >= 95 and rel <= 0.02 and elapsed < 60, f"{hits}/100, rel err {rel:.4f}, {elapsed:.1f} s")


def test_c09_tts(criterion):
    exact = time_to_solution(0.9, 100e-9) == pytest.approx(200e-9, rel=1e-12)
    ps = np.linspace(0.01, 0.99, 99)
    tts = [time_to_solution(p, 100e-9) for p in ps]
    monotone = all(a >= b for a, b in zip(tts, tts[1:]))
    criterion(9, "TTS(0.9, 100 ns) = 200 ns and decreasing in p", bool(exact) and monotone,
              f"{time_to_solution(0.9, 100e-9) * 1e9:.6f} ns")


def test_c10_reproducibility(criterion, tmp_path, capsys):
    layout = tmp_path / "k4.layout.json"
    commands = {
        "compile": (["compile", "--problem", str(K4_FILE), "--out", "{out}/layout.json"], ["layout.json"]),
        "verify": (["verify", "--problem", str(K4_FILE)], []),
        "anneal": (["anneal", "--layout", str(layout), "--sweeps", "500", "--restarts", "10", "--seed", "7"], []),
        "anneal-csv": (["anneal", "--layout", str(layout), "--sweeps", "500", "--restarts", "10",
                        "--seed", "7", "--format", "csv"], []),
        "simulate": (["simulate", "--layout", str(layout), "--problem", str(K4_FILE), "--runs", "4", "--seed", "7",
                      "--t-end", "6e-8", "--steps-per-pump", "16", "--out", "{out}"],
                     ["results.csv", "summary.json"]),
        "solve": (["solve", "--problem", str(K4_FILE), "--runs", "2", "--seed", "7", "--t-end", "6e-8",
                   "--steps-per-pump", "16"], []),
        "trace": (["trace", "--layout", str(layout), "--seed", "7", "--t-end", "4e-9", "--steps-per-pump", "16",
                   "--out", "{out}/trace.csv"], ["trace.csv"]),
    }
    assert main(["compile", "--problem", str(K4_FILE), "--out", str(layout)]) == 0
    capsys.readouterr()
    mismatched = []
    for name, (argv, files) in commands.items():
        outputs = []
        for attempt in ("a", "b"):
            out = tmp_path / name / attempt
            out.mkdir(parents=True)
            assert main([a.replace("{out}", str(out)) for a in argv]) == 0
            stdout = capsys.readouterr().out.replace(str(out), "<out>")
            outputs.append([stdout.encode()] + [(out / f).read_bytes() for f in files])
        if outputs[0] != outputs[1]:
            mismatched.append(name)
    criterion(10, "same seed reruns give byte-identical CSV/JSON", not mismatched,
              f"{len(commands)} commands" + (f", mismatched: {mismatched}" if mismatched else ""))
