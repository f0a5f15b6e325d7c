"""Reference solvers: exhaustive enumeration and Metropolis annealing.

Both work directly on the energies defined in ``problem`` and ``lhz`` so they
serve as independent oracles for the analog pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lhz import ANCILLA_LEVELS, LhzLayout, PhysicalState
from .problem import IsingProblem

MAX_ISING_N = 24
MAX_LHZ_K = 20
_CHUNK = 1 << 16
_TOL = 1e-9


class SolverError(ValueError):
    pass


@dataclass(frozen=True)
class GroundSet:
    """Minimum energy and every minimizer (as +/-1 tuples)."""

    energy: float
    states: tuple[tuple[int, ...], ...]


def _spin_rows(start: int, stop: int, width: int) -> np.ndarray:
    # bit b of the row index -> spin b; bit 0 set means -1
    idx = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(width, dtype=np.int64)) & 1
    return 1 - 2 * bits


def _ising_arrays(problem: IsingProblem) -> tuple[np.ndarray, np.ndarray]:
    j = np.zeros((problem.n, problem.n))
    for (a, b), w in problem.couplings.items():
        j[a - 1, b - 1] = w
    return j, np.asarray(problem.fields)


def brute_force_ising(problem: IsingProblem) -> GroundSet:
    """Exact minimum of -sum J' s s - sum h s over all 2^n assignments."""
    n = problem.n
    if n > MAX_ISING_N:
        raise SolverError(f"exhaustive Ising search limited to n <= {MAX_ISING_N}, got {n}")
    j, h = _ising_arrays(problem)
    best = math.inf
    found: list[np.ndarray] = []
    total = 1 << n
    for start in range(0, total, _CHUNK):
        s = _spin_rows(start, min(start + _CHUNK, total), n)
        e = -np.einsum("ri,ij,rj->r", s, j, s) - s @ h
        lo = float(e.min())
        if lo < best - _TOL:
            best, found = lo, []
        if lo <= best + _TOL:
            found.append(s[e <= best + _TOL])
    states = np.concatenate(found)
    return GroundSet(best, tuple(tuple(int(x) for x in row) for row in states))


def _tile_matrix(layout: LhzLayout) -> tuple[np.ndarray, np.ndarray]:
    m = np.zeros((len(layout.tiles), layout.k))
    fixed = np.zeros(len(layout.tiles))
    for t, tile in enumerate(layout.tiles):
        m[t, list(tile.spins)] = 1
        fixed[t] = tile.n_fixed
    return m, fixed


def brute_force_lhz(layout: LhzLayout) -> tuple[float, tuple[PhysicalState, ...]]:
    """Exact minimum of the LHZ energy over spins and ancilla levels.

    For each spin pattern the ancilla minimization is separable per tile, so
    every minimizing (spins, ancilla) combination is listed.
    """
    k = layout.k
    if k > MAX_LHZ_K:
        raise SolverError(f"exhaustive LHZ search limited to k <= {MAX_LHZ_K}, got {k}")
    m, fixed = _tile_matrix(layout)
    levels = np.array(ANCILLA_LEVELS, dtype=float)
    fields = np.asarray(layout.local_fields)
    s = _spin_rows(0, 1 << k, k)
    sums = s @ m.T + fixed  # (patterns, tiles)
    pen = layout.penalty * (sums[..., None] + levels) ** 2  # (patterns, tiles, levels)
    best_pen = pen.min(axis=2)
    e = s @ fields + best_pen.sum(axis=1)
    lo = float(e.min())
    out = []
    for row in np.flatnonzero(e <= lo + _TOL):
        choices = [
            [int(levels[a]) for a in np.flatnonzero(pen[row, t] <= best_pen[row, t] + _TOL)]
            for t in range(len(layout.tiles))
        ]
        for combo in _product(choices):
            out.append(PhysicalState(tuple(int(x) for x in s[row]), tuple(combo)))
    return lo, tuple(out)


def _product(choices):
    if not choices:
        yield ()
        return
    for head in choices[0]:
        for rest in _product(choices[1:]):
            yield (head,) + rest


@dataclass(frozen=True)
class AnnealSchedule:
    sweeps: int = 10_000
    t_hot: Optional[float] = None
    t_cold: Optional[float] = None

    def temperatures(self, layout: LhzLayout) -> np.ndarray:
        hot = self.t_hot if self.t_hot is not None else default_t_hot(layout)
        cold = self.t_cold if self.t_cold is not None else 0.01 * hot
        if not (hot > 0 and cold > 0):
            raise SolverError("annealing temperatures must be positive")
        if self.sweeps < 1:
            raise SolverError("need at least one sweep")
        if self.sweeps == 1:
            return np.array([cold])
        return np.geomspace(hot, cold, self.sweeps)


def default_t_hot(layout: LhzLayout) -> float:
    return 2.0 * (float(np.sum(np.abs(layout.local_fields))) + 4.0 * layout.penalty * len(layout.tiles))


@dataclass
class AnnealResult:
    best_energy: np.ndarray  # (restarts,)
    best_spins: np.ndarray  # (restarts, k)
    best_ancilla: np.ndarray  # (restarts, tiles)
    final_energy: np.ndarray
    seed: int
    trace: Optional[np.ndarray] = field(default=None, repr=False)

    def best_state(self, r: int) -> PhysicalState:
        return PhysicalState(tuple(int(x) for x in self.best_spins[r]),
                             tuple(int(x) for x in self.best_ancilla[r]))


def _restart_generators(seed: int, restarts: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,))))
            for r in range(restarts)]


def metropolis_anneal(layout: LhzLayout, restarts: int = 100, schedule: AnnealSchedule = AnnealSchedule(),
                      seed: int = 0) -> AnnealResult:
    """Metropolis annealing over spins and ancilla levels, vectorized across restarts.

    One sweep proposes a flip of every physical spin in turn, then one move of
    every ancilla to a neighbouring level (0 <-> +-4, chosen with equal
    probability; a move off the end of the ladder is rejected), which keeps the
    proposal symmetric.
    """
    if restarts < 1:
        raise SolverError("need at least one restart")
    k, n_tiles = layout.k, len(layout.tiles)
    m, fixed = _tile_matrix(layout)
    temps = schedule.temperatures(layout)
    fields = np.asarray(layout.local_fields)
    c = layout.penalty
    gens = _restart_generators(seed, restarts)
    # each sweep draws k + 2*tiles uniforms per restart from its own stream
    per_sweep = k + 2 * n_tiles

    s = np.stack([g.choice(np.array([-1, 1]), size=k) for g in gens]) if k else np.zeros((restarts, 0), int)
    a = np.zeros((restarts, n_tiles), dtype=np.int64)
    sums = s @ m.T + fixed
    energy = s @ fields + c * np.sum((sums + a) ** 2, axis=1)
    best_e = energy.copy()
    best_s, best_a = s.copy(), a.copy()
    tiles_of = [np.flatnonzero(m[:, i]) for i in range(k)]

    for temp in temps:
        u = np.stack([g.random(per_sweep) for g in gens])
        for i in range(k):
            ts = tiles_of[i]
            delta_sum = -2 * s[:, i]
            old = sums[:, ts] + a[:, ts]
            d_e = -2 * s[:, i] * fields[i] + c * np.sum((old + delta_sum[:, None]) ** 2 - old**2, axis=1)
            accept = (d_e <= 0) | (u[:, i] < np.exp(-np.maximum(d_e, 0) / temp))
            s[accept, i] *= -1
            sums[np.ix_(accept, ts)] += delta_sum[accept, None]
            energy[accept] += d_e[accept]
        for t in range(n_tiles):
            step = np.where(u[:, k + 2 * t] < 0.5, -4, 4)
            new = a[:, t] + step
            valid = np.abs(new) <= 4
            tot = sums[:, t]
            d_e = c * ((tot + new) ** 2 - (tot + a[:, t]) ** 2)
            accept = valid & ((d_e <= 0) | (u[:, k + 2 * t + 1] < np.exp(-np.maximum(d_e, 0) / temp)))
            a[accept, t] = new[accept]
            energy[accept] += d_e[accept]
        better = energy < best_e - _TOL
        best_e[better] = energy[better]
        best_s[better] = s[better]
        best_a[better] = a[better]
    return AnnealResult(best_e, best_s, best_a, energy, seed)


def metropolis_two_state(delta: float, temperature: float, steps: int, chains: int = 100,
                         seed: int = 0) -> float:
    """Fraction of time a two-level system spends in its upper level.

    Uses the same acceptance rule as ``metropolis_anneal``; the closed form is
    exp(-delta/T) / (1 + exp(-delta/T)).
    """
    g = np.random.Generator(np.random.PCG64(seed))
    state = np.zeros(chains, dtype=bool)  # True = upper level
    upper = 0
    per_chain = steps // chains
    for _ in range(per_chain):
        u = g.random(chains)
        d_e = np.where(state, -delta, delta)
        accept = (d_e <= 0) | (u < np.exp(-np.maximum(d_e, 0) / temperature))
        state ^= accept
        upper += int(state.sum())
    return upper / (per_chain * chains)
