"""Monte Carlo harness: many seeded runs, readout, oracle comparison, TTS."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analog import NetworkModel
from .lhz import LhzLayout, evaluate_lhz, relax_ancillas
from .problem import Problem
from .readout import PhysicalReadout, binarize, solve_readout
from .reference import MAX_LHZ_K, brute_force_lhz
from .sim import BatchResult, SimConfig, run_batch, settle_index

FAILED = "failed"
DEFAULT_CHUNK = 100


def time_to_solution(p_success: float, t_run: float, p_target: float = 0.99) -> float:
    """Expected time to reach ``p_target`` with independent runs of length ``t_run``."""
    if not 0 <= p_success <= 1:
        raise ValueError(f"p_success must be in [0, 1], got {p_success}")
    if not 0 < p_target < 1:
        raise ValueError(f"p_target must be in (0, 1), got {p_target}")
    if p_success == 0:
        return math.inf
    if p_success >= p_target:
        return t_run
    return t_run * math.log(1 - p_target) / math.log(1 - p_success)


def pattern_key(spins: Sequence[int]) -> str:
    return "".join("+" if s > 0 else "-" for s in spins)


def even_pattern(layout: LhzLayout, key: str) -> bool:
    """True when every tile product of the pattern (fixed slots +1) is +1."""
    s = [1 if c == "+" else -1 for c in key]
    return all(t.product(s) == 1 for t in layout.tiles)


@dataclass(frozen=True)
class RunRecord:
    run_index: int
    pattern: str
    ancilla_levels: tuple[int, ...] = ()
    even_parity: bool = False
    consistent: bool = False
    assignment: tuple[int, ...] = ()
    lhz_energy: Optional[float] = None
    ising_energy: Optional[float] = None
    cut: Optional[float] = None
    success: Optional[bool] = None
    settle_time: float = math.inf
    failure: str = ""


@dataclass
class RunStats:
    runs: int
    histogram: dict[str, int]
    even_parity_prob: float
    success_prob: Optional[float]  # None when the oracle is out of reach
    settle_times: list[float]
    tts_99: Optional[float]
    t_run: float
    seed: int
    records: list[RunRecord] = field(default_factory=list, repr=False)

    @property
    def verified(self) -> bool:
        return self.success_prob is not None

    def to_dict(self) -> dict:
        finite = [t for t in self.settle_times if math.isfinite(t)]
        return {
            "runs": self.runs,
            "seed": self.seed,
            "t_run": self.t_run,
            "histogram": dict(sorted(self.histogram.items())),
            "even_parity_prob": self.even_parity_prob,
            "success_prob": self.success_prob if self.verified else "unverified",
            "tts_99": _json_float(self.tts_99) if self.verified else "unverified",
            "settle_times": [_json_float(t) for t in self.settle_times],
            "settle_time_median": _json_float(float(np.median(finite))) if finite else None,
            "settled_fraction": len(finite) / self.runs if self.runs else 0.0,
        }


def _json_float(x):
    if x is None:
        return None
    return x if math.isfinite(x) else "inf"


def _window_patterns(batch: BatchResult, r: int, network: NetworkModel, layout: LhzLayout,
                     amp_threshold: float, reference: str) -> list[tuple]:
    out = []
    for w in range(batch.window_phasors.shape[1]):
        x = batch.window_phasors[r, w]
        ro = binarize(np.angle(x), np.abs(x), network, layout, amp_threshold, reference)
        out.append(ro.spins + ro.ancilla_levels)
    return out


def _records(batch: BatchResult, network: NetworkModel, layout: LhzLayout, problem: Optional[Problem],
             ground: Optional[float], amp_threshold: float, reference: str) -> list[RunRecord]:
    recs = []
    for r, idx in enumerate(batch.run_indices):
        idx = int(idx)
        if idx in batch.failures:
            recs.append(RunRecord(idx, FAILED, failure=batch.failures[idx]))
            continue
        x = batch.tail_phasors[r]
        ro: PhysicalReadout = binarize(np.angle(x), np.abs(x), network, layout, amp_threshold, reference)
        sol = solve_readout(ro, layout, problem)
        success = None
        if ground is not None:
            best = evaluate_lhz(layout, relax_ancillas(layout, ro.spins))
            success = bool(sol.consistent and best <= ground + 1e-9)
        k = settle_index(_window_patterns(batch, r, network, layout, amp_threshold, reference))
        settle = math.inf if k is None else float(batch.window_starts[k])
        recs.append(RunRecord(
            idx, pattern_key(ro.spins), ro.ancilla_levels, all(sol.tile_flags), sol.consistent,
            sol.assignment, sol.lhz_energy, sol.ising_energy, sol.cut, success, settle,
        ))
    return recs


def monte_carlo(network: NetworkModel, layout: LhzLayout, config: SimConfig, runs: int,
                problem: Optional[Problem] = None, *, threads: int = 1, chunk: int = DEFAULT_CHUNK,
                amp_threshold: float = 0.2, reference: str = "auto", window_cycles: int = 16,
                tail_fraction: float = 0.25) -> RunStats:
    """Run ``runs`` seeded simulations and aggregate readout statistics.

    Runs are integrated in fixed-size chunks so results do not depend on
    ``threads``; each run draws from its own (seed, run index) stream.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    if chunk < 1 or threads < 1:
        raise ValueError("chunk and threads must be >= 1")
    ground = brute_force_lhz(layout)[0] if layout.k <= MAX_LHZ_K else None
    chunks = [list(range(s, min(s + chunk, runs))) for s in range(0, runs, chunk)]

    def work(idx):
        batch = run_batch(network, config, idx, window_cycles=window_cycles, tail_fraction=tail_fraction)
        return _records(batch, network, layout, problem, ground, amp_threshold, reference)

    if threads == 1 or len(chunks) == 1:
        parts = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    records = sorted((r for part in parts for r in part), key=lambda r: r.run_index)
    return aggregate(records, layout, config, verified=ground is not None)


def aggregate(records: Sequence[RunRecord], layout: LhzLayout, config: SimConfig, verified: bool) -> RunStats:
    """Reduce per-run records; order of ``records`` does not matter."""
    records = sorted(records, key=lambda r: r.run_index)
    hist: dict[str, int] = {}
    for r in records:
        hist[r.pattern] = hist.get(r.pattern, 0) + 1
    n = len(records)
    even = sum(c for key, c in hist.items() if key != FAILED and even_pattern(layout, key))
    success = sum(bool(r.success) for r in records) / n if verified else None
    t_run = config.n_steps * config.dt
    tts = time_to_solution(success, t_run) if verified else None
    return RunStats(n, dict(sorted(hist.items())), even / n, success,
                    [r.settle_time for r in records], tts, t_run, config.seed, list(records))


CSV_FIELDS = ("run_index", "seed", "pattern", "ancilla_levels", "even_parity", "consistent", "assignment",
              "lhz_energy", "ising_energy", "cut", "success", "settle_time", "failure")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else "inf"
    if isinstance(v, tuple):
        return " ".join(str(x) for x in v)
    return str(v)


def results_csv(stats: RunStats) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in stats.records:
        row = {**r.__dict__, "seed": stats.seed}
        w.writerow([_cell(row[f]) for f in CSV_FIELDS])
    return buf.getvalue()


def summary_json(stats: RunStats, extra: Optional[dict] = None) -> str:
    doc = stats.to_dict()
    if extra:
        doc = {**extra, **doc}
    return json.dumps(doc, indent=2)
