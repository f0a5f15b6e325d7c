"""Fixed-step stochastic transient simulation of an oscillator network.

Each dynamic unit carries capacitor charge q and inductor current i_L with
v = q / C(t).  The deterministic part is advanced with classical RK4 and the
thermal noise current is added once per step (Euler-Maruyama).  Several runs
are integrated side by side as rows of one array; every run draws from its own
generator keyed by (seed, run index), so results do not depend on batching.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Optional, Sequence

import numpy as np

from .analog import NetworkModel, pump_gain

BOLTZMANN = 1.380649e-23
NOISE_BLOCK = 256  # steps of noise drawn per generator call


class SimulationError(RuntimeError):
    def __init__(self, message: str, time: float = math.nan, unit: int = -1):
        self.time = time
        self.unit = unit
        super().__init__(message)


def noise_psd(R_N: float, T: float) -> float:
    """Voltage noise density of two parallel R_N resistors: 4 k T (R_N / 2)."""
    if R_N <= 0 or T < 0:
        raise ValueError("R_N must be > 0 and T >= 0")
    return 4.0 * BOLTZMANN * T * (R_N / 2.0)


def noise_current_std(S_v: float, dt: float, R_N: float) -> float:
    """Per-step std of the injected current: sqrt(S_v / (2 dt)) / R_N."""
    return math.sqrt(S_v / (2.0 * dt)) / R_N


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_end: float
    seed: int = 0
    R_N: float = 10.0
    T: float = 300.0
    S_v: Optional[float] = None  # overrides (R_N, T) when given
    record_stride: int = 1
    ic_scale: float = 1e-4  # initial charge std, in units of C0 * V_k
    preset: str = ""

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.t_end >= self.dt:
            raise ValueError("t_end must be >= dt")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.S_v is not None and self.S_v < 0:
            raise ValueError("S_v must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def psd(self) -> float:
        return noise_psd(self.R_N, self.T) if self.S_v is None else self.S_v

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @classmethod
    def for_network(cls, network: NetworkModel, t_end: float, seed: int = 0,
                    steps_per_pump: int = 128, **kw) -> "SimConfig":
        return cls(dt=1.0 / (steps_per_pump * network.fp), t_end=t_end, seed=seed, **kw)


def run_generator(seed: int, run_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(run_index,))))


@dataclass
class Trace:
    times: np.ndarray  # (samples,)
    voltages: np.ndarray  # (samples, units)
    dt: float
    seed: int
    run_index: int = 0
    preset: str = ""
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.voltages.ndim != 2 or self.voltages.shape[0] != self.times.shape[0]:
            raise ValueError("voltages must be (samples, units) matching times")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def n_units(self) -> int:
        return self.voltages.shape[1]

    def slice(self, start: int, stop: int) -> "Trace":
        return Trace(self.times[start:stop], self.voltages[start:stop], self.dt, self.seed,
                     self.run_index, self.preset, self.labels)

    def metadata(self) -> dict:
        return {"dt": self.dt, "seed": self.seed, "run_index": self.run_index, "preset": self.preset,
                "samples": int(self.times.size), "units": self.n_units, "labels": list(self.labels),
                "columns": ["t"] + [f"unit_{u}" for u in range(self.n_units)],
                "dtype": "<f8", "order": "row-major"}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"unit_{u}" for u in range(self.n_units)])
            for t, row in zip(self.times, self.voltages):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    def to_binary(self, path) -> None:
        """Little-endian float64, row-major [t, v_0..v_m] rows, with a JSON sidecar."""
        data = np.column_stack([self.times, self.voltages]).astype("<f8")
        with open(path, "wb") as fh:
            fh.write(data.tobytes(order="C"))
        with open(str(path) + ".json", "w") as fh:
            json.dump(self.metadata(), fh, indent=2)

    @classmethod
    def from_binary(cls, path) -> "Trace":
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
        data = np.fromfile(path, dtype="<f8").reshape(meta["samples"], meta["units"] + 1)
        return cls(data[:, 0].copy(), data[:, 1:].copy(), meta["dt"], meta["seed"], meta["run_index"],
                   meta["preset"], tuple(meta["labels"]))


class _Kernel:
    """Array form of a NetworkModel for the integrator."""

    def __init__(self, network: NetworkModel):
        self.network = network
        units = network.units
        self.dyn = np.array([u for u, unit in enumerate(units) if unit.params is not None], dtype=int)
        self.refs = np.array([u for u, unit in enumerate(units) if unit.params is None], dtype=int)
        params = [units[u].params for u in self.dyn]
        self.L = np.array([p.L for p in params])
        self.C0 = np.array([p.C0 for p in params])
        self.G_loss = np.array([1.0 / p.R_loss for p in params])
        self.I_s = np.array([p.I_s for p in params])
        self.V_k = np.array([p.V_k for p in params])
        self.scale = np.array([units[u].pump_multiplier * (1 + network.pump_bias[u]) for u in self.dyn])
        self.groups: list[tuple[object, np.ndarray]] = []
        for p in dict.fromkeys(params):
            self.groups.append((p, np.array([q is p or q == p for q in params])))
        self.fp = network.fp
        self.w_ref = math.pi * network.fp
        self.a_ref = network.reference_amplitude

        full = network.coupling_matrix()
        g_abs = np.zeros_like(full)
        for c in network.couplings:
            g_abs[c.a, c.b] += c.conductance
            g_abs[c.b, c.a] += c.conductance
        self.G_self = g_abs[self.dyn].sum(axis=1) + self.G_loss
        self.K = full[np.ix_(self.dyn, self.dyn)]
        self.ext = full[np.ix_(self.dyn, self.refs)].sum(axis=1) + np.asarray(network.field_drive)[self.dyn]
        self.has_clip = bool(np.any(self.I_s > 0))
        self.inv_V_k = 1.0 / self.V_k
        self.two_I_s = 2.0 * self.I_s
        self.inv_L = 1.0 / self.L

    def v_ref(self, t: float) -> float:
        return self.a_ref * math.cos(self.w_ref * t - math.pi / 4)

    def capacitance(self, t) -> np.ndarray:
        """C(t) per dynamic unit; a 1-d array of times gives shape (times, units)."""
        t = np.asarray(t, dtype=float)
        g = np.empty(t.shape + self.C0.shape)
        for p, mask in self.groups:
            g[..., mask] = np.asarray(pump_gain(p, t))[..., None]
        return self.C0 * (1.0 + self.scale * g * np.cos(2 * math.pi * self.fp * t)[..., None])

    def v_ref_table(self, t: np.ndarray) -> np.ndarray:
        return self.a_ref * np.cos(self.w_ref * t - math.pi / 4)

    def rhs(self, inv_c, vr, q, i_l):
        """Time derivatives given precomputed 1/C(t) and reference voltage."""
        v = q * inv_c
        dq = -i_l - v * self.G_self - v @ self.K - self.ext * vr
        if self.has_clip:
            x = np.minimum(np.maximum(v * self.inv_V_k, -40.0), 40.0)
            dq -= self.two_I_s * np.sinh(x)
        return dq, v * self.inv_L

    def deriv(self, t, q, i_l):
        return self.rhs(1.0 / self.capacitance(t), self.v_ref(t), q, i_l)

    def voltages(self, t, q) -> np.ndarray:
        """Node voltages of every unit (dynamic and reference) for a (runs, dyn) state."""
        out = np.empty(q.shape[:-1] + (len(self.network.units),))
        out[..., self.dyn] = q / self.capacitance(t)
        out[..., self.refs] = self.v_ref(t)
        return out


@dataclass
class BatchResult:
    """Windowed single-bin phasors at f_ref for a batch of runs."""

    run_indices: np.ndarray
    window_starts: np.ndarray  # (windows,)
    window_phasors: np.ndarray  # (runs, windows, units), complex, amplitude-normalised
    tail_phasors: np.ndarray  # (runs, units)
    tail_start: float
    t_end: float
    reference_phasor: complex  # +1 reference waveform over the tail window
    window_reference: np.ndarray  # (windows,)
    failures: dict = field(default_factory=dict)  # run index -> message


def _integrate(kernel: _Kernel, config: SimConfig, run_indices: Sequence[int],
               on_sample: Callable[[int, float, np.ndarray], None], sample_stride: int,
               q0: Optional[np.ndarray] = None, i0: Optional[np.ndarray] = None):
    n_runs = len(run_indices)
    gens = [run_generator(config.seed, r) for r in run_indices]
    ic_std = config.ic_scale * kernel.C0 * kernel.V_k
    q = np.stack([g.normal(0.0, 1.0, kernel.C0.size) for g in gens]) * ic_std if n_runs else np.zeros((0, kernel.C0.size))
    if q0 is not None:
        q = np.broadcast_to(np.asarray(q0, dtype=float), q.shape).copy()
    i_l = np.zeros_like(q) if i0 is None else np.broadcast_to(np.asarray(i0, dtype=float), q.shape).copy()
    dt = config.dt
    n = config.n_steps
    sigma = noise_current_std(config.psd, dt, config.R_N) if config.psd > 0 else 0.0
    alive = np.ones(n_runs, dtype=bool)
    failures: dict[int, str] = {}
    noise = None
    # a diverging run overflows before it is caught at the next block boundary
    with np.errstate(over="ignore", invalid="ignore"):
        on_sample(0, 0.0, q)
        for step in range(n):
            j = step % NOISE_BLOCK
            if j == 0:
                block = min(NOISE_BLOCK, n - step)
                # pump and reference terms depend on time only: tabulate t, t + dt/2, t + dt
                ts = (step + np.arange(2 * block + 1) / 2) * dt
                inv_c = 1.0 / kernel.capacitance(ts)
                vr = kernel.v_ref_table(ts)
                if sigma:
                    noise = np.stack([g.standard_normal((block, kernel.C0.size)) for g in gens], axis=1)
                if not np.all(np.isfinite(q)):
                    _record_failures(failures, kernel, run_indices, q, step * dt)
                    alive &= np.all(np.isfinite(q), axis=1)
                    q[~alive] = 0.0
                    i_l[~alive] = 0.0
            a, b, c = 2 * j, 2 * j + 1, 2 * j + 2
            k1q, k1i = kernel.rhs(inv_c[a], vr[a], q, i_l)
            k2q, k2i = kernel.rhs(inv_c[b], vr[b], q + dt / 2 * k1q, i_l + dt / 2 * k1i)
            k3q, k3i = kernel.rhs(inv_c[b], vr[b], q + dt / 2 * k2q, i_l + dt / 2 * k2i)
            k4q, k4i = kernel.rhs(inv_c[c], vr[c], q + dt * k3q, i_l + dt * k3i)
            q = q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
            i_l = i_l + dt / 6 * (k1i + 2 * k2i + 2 * k3i + k4i)
            if sigma:
                q += (sigma * dt) * noise[j]
            if (step + 1) % sample_stride == 0:
                on_sample(step + 1, (step + 1) * dt, q)
    if not np.all(np.isfinite(q)):
        _record_failures(failures, kernel, run_indices, q, n * dt)
    return q, i_l, failures


def _record_failures(failures: dict, kernel: _Kernel, run_indices, q: np.ndarray, t: float) -> None:
    for r in np.flatnonzero(~np.all(np.isfinite(q), axis=1)):
        u = int(np.flatnonzero(~np.isfinite(q[r]))[0])
        failures.setdefault(int(run_indices[r]), f"non-finite state at t={t:.6e} s, unit {int(kernel.dyn[u])}")


def run(network: NetworkModel, config: SimConfig, run_index: int = 0,
        q0: Optional[Sequence[float]] = None, i0: Optional[Sequence[float]] = None) -> Trace:
    """Simulate one run and record every ``record_stride``-th step.

    ``q0`` / ``i0`` override the seeded initial charges / inductor currents
    of the dynamic units.
    """
    kernel = _Kernel(network)
    times, rows = [], []

    def sample(step, t, q):
        times.append(t)
        rows.append(kernel.voltages(t, q)[0])

    _, _, failures = _integrate(kernel, config, [run_index], sample, config.record_stride, q0, i0)
    if failures:
        msg = failures[run_index]
        raise SimulationError(msg)
    return Trace(np.array(times), np.array(rows), config.dt, config.seed, run_index, config.preset,
                 tuple(u.label for u in network.units))


def run_state(network: NetworkModel, config: SimConfig, run_index: int = 0,
              q0: Optional[Sequence[float]] = None, i0: Optional[Sequence[float]] = None):
    """Final (q, i_L) of the dynamic units for one run (used by the physics checks)."""
    kernel = _Kernel(network)
    q, i_l, failures = _integrate(kernel, config, [run_index], lambda *a: None, config.n_steps + 1, q0, i0)
    if failures:
        raise SimulationError(failures[run_index])
    return q[0], i_l[0]


def window_steps(config: SimConfig, f_ref: float, cycles: int) -> int:
    """Steps spanning a whole number of reference cycles (closest to ``cycles``)."""
    per_cycle = 1.0 / (f_ref * config.dt)
    return max(1, int(round(cycles * per_cycle)))


def run_batch(network: NetworkModel, config: SimConfig, run_indices: Sequence[int],
              window_cycles: int = 16, tail_fraction: float = 0.25,
              samples_per_cycle: int = 16) -> BatchResult:
    """Integrate several runs at once; keep per-window and tail phasors at f_ref."""
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must be in (0, 1]")
    kernel = _Kernel(network)
    f = network.f_ref
    n = config.n_steps
    stride = max(1, int(round(1.0 / (f * config.dt * samples_per_cycle))))
    win = window_steps(config, f, window_cycles)
    win = max(stride, win // stride * stride)
    n_win = n // win
    tail_cycles = int(math.floor(tail_fraction * n * config.dt * f))
    if tail_cycles < 8:
        raise ValueError(f"tail window holds {tail_cycles} cycles; need at least 8")
    tail = window_steps(config, f, tail_cycles) // stride * stride
    tail_first = n - tail
    n_runs = len(run_indices)
    n_units = len(network.units)
    win_acc = np.zeros((n_runs, max(n_win, 1), n_units), dtype=complex)
    win_ref = np.zeros(max(n_win, 1), dtype=complex)
    win_cnt = np.zeros(max(n_win, 1))
    tail_acc = np.zeros((n_runs, n_units), dtype=complex)
    tail_ref = 0j
    tail_cnt = 0

    def sample(step, t, q):
        nonlocal tail_acc, tail_ref, tail_cnt
        rot = complex(math.cos(2 * math.pi * f * t), -math.sin(2 * math.pi * f * t))
        v = kernel.voltages(t, q)
        vr = kernel.v_ref(t) / kernel.a_ref if kernel.a_ref else math.cos(2 * math.pi * f * t - math.pi / 4)
        w = step // win
        if step < n_win * win:
            win_acc[:, w] += v * rot
            win_ref[w] += vr * rot
            win_cnt[w] += 1
        if step >= tail_first and step < n:
            tail_acc += v * rot
            tail_ref += vr * rot
            tail_cnt += 1

    _, _, failures = _integrate(kernel, config, list(run_indices), sample, stride)
    failed = np.isin(np.asarray(run_indices), list(failures))
    win_acc[failed] = np.nan
    tail_acc[failed] = np.nan
    cnt = np.maximum(win_cnt, 1)
    return BatchResult(
        run_indices=np.asarray(run_indices),
        window_starts=np.arange(max(n_win, 1)) * win * config.dt,
        window_phasors=2 * win_acc / cnt[None, :, None],
        tail_phasors=2 * tail_acc / max(tail_cnt, 1),
        tail_start=tail_first * config.dt,
        t_end=n * config.dt,
        reference_phasor=2 * tail_ref / max(tail_cnt, 1),
        window_reference=2 * win_ref / cnt,
        failures=failures,
    )


def settle_index(patterns: Sequence[Hashable]) -> Optional[int]:
    """First window index from which every pattern equals the final one.

    Returns None when only the final window carries the final pattern (no
    confirmation that the state is stable).
    """
    if not patterns:
        return None
    final = patterns[-1]
    k = len(patterns) - 1
    while k > 0 and patterns[k - 1] == final:
        k -= 1
    if k == len(patterns) - 1 and len(patterns) > 1:
        return None
    return k


def settle_time(trace: Trace, readout_fn: Callable[[Trace], Hashable], window: int) -> float:
    """Earliest window start after which the decoded pattern never changes (inf if never)."""
    if trace.times.size == 0:
        raise ValueError("empty trace")
    window = max(1, int(window))
    starts = list(range(0, trace.times.size - window + 1, window)) or [0]
    patterns = [readout_fn(trace.slice(s, s + window)) for s in starts]
    k = settle_index(patterns)
    return math.inf if k is None else float(trace.times[starts[k]])
