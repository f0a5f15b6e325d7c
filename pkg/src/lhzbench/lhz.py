"""LHZ parity compilation of all-to-all Ising instances.

Every logical pair (i, j) becomes one physical spin whose value stands for the
product s_i s_j.  Four-body plaquettes ("tiles") force each product loop to be
consistent; lattice-edge slots are pinned to +1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .problem import IsingProblem, Pair, ProblemError

ANCILLA_LEVELS = (0, -4, 4)  # tie-break order for min_penalty_of_tile


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class Tile:
    """Four member slots; ``None`` marks a fixed +1 boundary slot."""

    members: tuple[Optional[int], ...]

    def __post_init__(self):
        if len(self.members) != 4:
            raise LayoutError(f"tile needs exactly 4 slots, got {len(self.members)}")
        spins = self.spins
        if self.n_fixed > 1:
            raise LayoutError("tile has more than one fixed slot")
        if len(set(spins)) != len(spins):
            raise LayoutError(f"tile members not distinct: {self.members}")

    @property
    def spins(self) -> tuple[int, ...]:
        return tuple(m for m in self.members if m is not None)

    @property
    def n_fixed(self) -> int:
        return sum(m is None for m in self.members)

    def member_sum(self, spins: Sequence[int]) -> int:
        return int(sum(spins[m] for m in self.spins) + self.n_fixed)

    def product(self, spins: Sequence[int]) -> int:
        p = 1
        for m in self.spins:
            p *= int(spins[m])
        return p


@dataclass(frozen=True)
class LhzLayout:
    n: int
    pairs: tuple[Pair, ...]
    local_fields: tuple[float, ...]
    tiles: tuple[Tile, ...]
    penalty: float

    def __post_init__(self):
        if self.penalty <= 0:
            raise LayoutError(f"penalty strength must be > 0, got {self.penalty}")
        if len(self.local_fields) != len(self.pairs):
            raise LayoutError("one local field per physical spin required")

    @property
    def k(self) -> int:
        return len(self.pairs)

    @property
    def n_fixed(self) -> int:
        return sum(t.n_fixed for t in self.tiles)

    def index_of(self, i: int, j: int) -> int:
        return self.pairs.index((min(i, j), max(i, j)))

    def tiles_of(self, spin: int) -> list[int]:
        return [t for t, tile in enumerate(self.tiles) if spin in tile.spins]


@dataclass(frozen=True)
class PhysicalState:
    spins: tuple[int, ...]
    ancilla: tuple[int, ...]

    def __post_init__(self):
        if any(abs(s) != 1 for s in self.spins):
            raise LayoutError("physical spins must be +1 or -1")
        if any(a not in ANCILLA_LEVELS for a in self.ancilla):
            raise LayoutError("ancilla levels must be in {-4, 0, +4}")


def default_penalty(local_fields: Sequence[float]) -> float:
    """1 + sum |J|: any violation (cost 4C) outweighs every field gain."""
    return 1.0 + float(np.sum(np.abs(local_fields)))


def plaquettes(n: int) -> list[tuple[Pair, Pair, Pair, Optional[Pair]]]:
    """Pair-labelled tiles for n logical spins; the fourth slot is None when fixed."""
    out = []
    for i in range(1, n):
        for j in range(i + 1, n):
            lower = None if i + 1 == j else (i + 1, j)
            out.append(((i, j), (i, j + 1), (i + 1, j + 1), lower))
    return out


def compile_layout(problem: IsingProblem, penalty: Optional[float] = None) -> LhzLayout:
    """Compile an all-to-all Ising instance onto the LHZ layout."""
    if problem.n < 2:
        raise ProblemError(f"LHZ layout needs n >= 2, got {problem.n}", "n")
    if problem.has_fields:
        raise ProblemError("nonzero logical fields h are not supported by the LHZ layout", "fields")
    pairs = tuple((i, j) for i in range(1, problem.n + 1) for j in range(i + 1, problem.n + 1))
    fields = tuple(-problem.coupling(i, j) for i, j in pairs)
    index = {p: k for k, p in enumerate(pairs)}
    tiles = tuple(
        Tile(tuple(None if p is None else index[p] for p in slots)) for slots in plaquettes(problem.n)
    )
    c = default_penalty(fields) if penalty is None else float(penalty)
    if c <= 0:
        raise ProblemError(f"penalty strength must be > 0, got {c}", "penalty")
    return LhzLayout(problem.n, pairs, fields, tiles, c)


def single_tile(penalty: float = 1.0) -> LhzLayout:
    """A bare four-member tile with no fixed slot and zero fields."""
    return LhzLayout(4, ((1, 2), (1, 3), (1, 4), (2, 3)), (0.0,) * 4, (Tile((0, 1, 2, 3)),), penalty)


def _check_spins(layout: LhzLayout, spins: Sequence[int]) -> np.ndarray:
    s = np.asarray(spins, dtype=np.int64)
    if s.shape != (layout.k,):
        raise LayoutError(f"expected {layout.k} physical spins, got {s.size}")
    if not np.all(np.abs(s) == 1):
        raise LayoutError("physical spins must be +1 or -1")
    return s


def penalty_of_tile(tile: Tile, spins: Sequence[int], level: int, c: float = 1.0) -> float:
    return c * (tile.member_sum(spins) + level) ** 2


def min_penalty_of_tile(tile: Tile, spins: Sequence[int], c: float = 1.0) -> tuple[int, float]:
    """Best ancilla level and its penalty; ties prefer 0."""
    total = tile.member_sum(spins)
    level = min(ANCILLA_LEVELS, key=lambda a: (total + a) ** 2)
    return level, c * (total + level) ** 2


def linear_energy(layout: LhzLayout, spins: Sequence[int]) -> float:
    s = _check_spins(layout, spins)
    return float(np.dot(layout.local_fields, s))


def evaluate_lhz(layout: LhzLayout, state: PhysicalState) -> float:
    s = _check_spins(layout, state.spins)
    if len(state.ancilla) != len(layout.tiles):
        raise LayoutError(f"expected {len(layout.tiles)} ancilla levels, got {len(state.ancilla)}")
    energy = float(np.dot(layout.local_fields, s))
    for tile, a in zip(layout.tiles, state.ancilla):
        energy += penalty_of_tile(tile, s, a, layout.penalty)
    return energy


def relax_ancillas(layout: LhzLayout, spins: Sequence[int]) -> PhysicalState:
    s = _check_spins(layout, spins)
    levels = tuple(min_penalty_of_tile(t, s)[0] for t in layout.tiles)
    return PhysicalState(tuple(int(x) for x in s), levels)


def encode_logical(layout: LhzLayout, assignment: Sequence[int]) -> PhysicalState:
    a = np.asarray(assignment, dtype=np.int64)
    if a.shape != (layout.n,):
        raise LayoutError(f"expected {layout.n} logical spins, got {a.size}")
    spins = [int(a[i - 1] * a[j - 1]) for i, j in layout.pairs]
    return relax_ancillas(layout, spins)


def tile_consistency(layout: LhzLayout, spins: Sequence[int]) -> tuple[bool, ...]:
    s = _check_spins(layout, spins)
    return tuple(t.product(s) == 1 for t in layout.tiles)


def decode_logical(layout: LhzLayout, spins: Sequence[int]) -> tuple[tuple[int, ...], tuple[bool, ...]]:
    """Logical assignment with s_1 = +1 read off the (1, j) spins, plus per-tile flags."""
    s = _check_spins(layout, spins)
    logical = [1] + [int(s[layout.index_of(1, j)]) for j in range(2, layout.n + 1)]
    return tuple(logical), tile_consistency(layout, s)


def fully_consistent(layout: LhzLayout, spins: Sequence[int]) -> bool:
    s = _check_spins(layout, spins)
    logical, _ = decode_logical(layout, s)
    return all(s[k] == logical[i - 1] * logical[j - 1] for k, (i, j) in enumerate(layout.pairs))


def layout_to_dict(layout: LhzLayout) -> dict:
    return {
        "n": layout.n,
        "k": layout.k,
        "penalty": layout.penalty,
        "spins": [
            {"index": k, "pair": list(p), "local_field": f}
            for k, (p, f) in enumerate(zip(layout.pairs, layout.local_fields))
        ],
        "tiles": [
            {"members": [-1 if m is None else m for m in t.members],
             "fixed": [m is None for m in t.members]}
            for t in layout.tiles
        ],
    }


def layout_from_dict(doc: dict) -> LhzLayout:
    try:
        spins = sorted(doc["spins"], key=lambda e: e["index"])
        pairs = tuple((int(e["pair"][0]), int(e["pair"][1])) for e in spins)
        fields = tuple(float(e["local_field"]) for e in spins)
        tiles = tuple(
            Tile(tuple(None if fx else int(m) for m, fx in zip(t["members"], t["fixed"])))
            for t in doc["tiles"]
        )
        layout = LhzLayout(int(doc["n"]), pairs, fields, tiles, float(doc["penalty"]))
    except (KeyError, TypeError, IndexError) as exc:
        raise LayoutError(f"malformed layout document: {exc!r}") from None
    if layout.k != layout.n * (layout.n - 1) // 2:
        raise LayoutError(f"layout has {layout.k} spins, expected n(n-1)/2")
    return layout


def dump_layout(layout: LhzLayout) -> str:
    return json.dumps(layout_to_dict(layout), indent=2)


def load_layout(path) -> LhzLayout:
    with open(path) as fh:
        try:
            return layout_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise LayoutError(f"malformed layout JSON: {exc}") from None
