"""Logical problem instances: Ising and weighted Max-Cut.

Logical spins are labelled 1..n (the problem-file convention); assignments are
plain sequences where position ``p`` holds spin ``p + 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

Pair = tuple[int, int]


class ProblemError(ValueError):
    """Invalid problem document or instance; ``location`` says where."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


def _canonical_pair(i: int, j: int, n: int, location: str) -> Pair:
    if isinstance(i, bool) or isinstance(j, bool) or not isinstance(i, int) or not isinstance(j, int):
        raise ProblemError("indices must be integers", location)
    if not (1 <= i <= n and 1 <= j <= n):
        raise ProblemError(f"index out of range 1..{n}: ({i}, {j})", location)
    if i == j:
        raise ProblemError(f"self-pair ({i}, {j})", location)
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class IsingProblem:
    n: int
    couplings: Mapping[Pair, float] = field(default_factory=dict)
    fields: tuple[float, ...] = ()

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ProblemError(f"n must be a positive integer, got {self.n!r}", "n")
        canon: dict[Pair, float] = {}
        for (i, j), w in self.couplings.items():
            key = _canonical_pair(i, j, self.n, f"couplings[{i},{j}]")
            if key in canon:
                raise ProblemError(f"duplicate pair {key}", f"couplings[{i},{j}]")
            canon[key] = float(w)
        object.__setattr__(self, "couplings", dict(sorted(canon.items())))
        fields = tuple(float(h) for h in self.fields) or (0.0,) * self.n
        if len(fields) != self.n:
            raise ProblemError(f"expected {self.n} fields, got {len(fields)}", "fields")
        object.__setattr__(self, "fields", fields)

    def coupling(self, i: int, j: int) -> float:
        return self.couplings.get((min(i, j), max(i, j)), 0.0)

    @property
    def has_fields(self) -> bool:
        return any(h != 0.0 for h in self.fields)


@dataclass(frozen=True)
class MaxCutGraph:
    n: int
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ProblemError(f"n must be a positive integer, got {self.n!r}", "n")
        seen: dict[Pair, float] = {}
        for k, (i, j, w) in enumerate(self.edges):
            key = _canonical_pair(i, j, self.n, f"edges[{k}]")
            if key in seen:
                raise ProblemError(f"duplicate edge {key}", f"edges[{k}]")
            seen[key] = float(w)
        object.__setattr__(self, "edges", tuple((i, j, w) for (i, j), w in sorted(seen.items())))

    @property
    def total_weight(self) -> float:
        return sum(w for _, _, w in self.edges)


Problem = Union[IsingProblem, MaxCutGraph]


def _check_assignment(n: int, spins: Sequence[int]) -> np.ndarray:
    s = np.asarray(spins)
    if s.shape != (n,):
        raise ProblemError(f"assignment length {s.size} does not match n={n}", "assignment")
    if not np.all(np.abs(s) == 1):
        raise ProblemError("assignment values must be +1 or -1", "assignment")
    return s.astype(np.int64)


def maxcut_to_ising(graph: MaxCutGraph) -> IsingProblem:
    """Ising form whose minimum is the maximum cut (J' = -w, h = 0)."""
    return IsingProblem(graph.n, {(i, j): -w for i, j, w in graph.edges})


def evaluate_ising(problem: IsingProblem, spins: Sequence[int]) -> float:
    """-sum J'_ij s_i s_j - sum h_i s_i."""
    s = _check_assignment(problem.n, spins)
    energy = 0.0
    for (i, j), w in problem.couplings.items():
        energy -= w * s[i - 1] * s[j - 1]
    for h, si in zip(problem.fields, s):
        energy -= h * si
    return float(energy)


def cut_value(graph: MaxCutGraph, spins: Sequence[int]) -> float:
    s = _check_assignment(graph.n, spins)
    return float(sum(w * (1 - s[i - 1] * s[j - 1]) / 2 for i, j, w in graph.edges))


def parse_problem(document: str) -> Problem:
    """Parse a JSON problem document into a validated instance."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"malformed JSON: {exc.msg}", f"line {exc.lineno} col {exc.colno}") from None
    if not isinstance(doc, dict):
        raise ProblemError("document must be a JSON object", "$")
    kind = doc.get("type")
    if kind not in ("maxcut", "ising"):
        raise ProblemError(f"type must be 'maxcut' or 'ising', got {kind!r}", "$.type")
    n = doc.get("n")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ProblemError(f"n must be a positive integer, got {n!r}", "$.n")
    edges = doc.get("edges", [])
    if not isinstance(edges, list):
        raise ProblemError("edges must be a list", "$.edges")
    parsed = []
    for k, e in enumerate(edges):
        loc = f"$.edges[{k}]"
        if not isinstance(e, dict) or not {"i", "j"} <= e.keys():
            raise ProblemError("edge must be an object with i, j and optional w", loc)
        w = e.get("w", 1.0)
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise ProblemError(f"weight must be a number, got {w!r}", loc + ".w")
        parsed.append((e["i"], e["j"], float(w)))
    if kind == "maxcut":
        if "fields" in doc:
            raise ProblemError("fields are only allowed for type 'ising'", "$.fields")
        try:
            return MaxCutGraph(n, tuple(parsed))
        except ProblemError as exc:
            raise ProblemError(str(exc).split(": ", 1)[-1], "$." + exc.location) from None
    fields = doc.get("fields", [0.0] * n)
    if not isinstance(fields, list) or any(isinstance(h, bool) or not isinstance(h, (int, float)) for h in fields):
        raise ProblemError("fields must be a list of numbers", "$.fields")
    couplings: dict[Pair, float] = {}
    for k, (i, j, w) in enumerate(parsed):
        key = _canonical_pair(i, j, n, f"$.edges[{k}]")
        if key in couplings:
            raise ProblemError(f"duplicate edge {key}", f"$.edges[{k}]")
        couplings[key] = w
    try:
        return IsingProblem(n, couplings, tuple(fields))
    except ProblemError as exc:
        raise ProblemError(str(exc).split(": ", 1)[-1], "$." + exc.location) from None


def dump_problem(problem: Problem) -> str:
    """Serialize to the problem-file JSON (canonical pair order)."""
    if isinstance(problem, MaxCutGraph):
        doc = {"type": "maxcut", "n": problem.n,
               "edges": [{"i": i, "j": j, "w": w} for i, j, w in problem.edges]}
    else:
        doc = {"type": "ising", "n": problem.n,
               "edges": [{"i": i, "j": j, "w": w} for (i, j), w in problem.couplings.items()],
               "fields": list(problem.fields)}
    return json.dumps(doc, indent=2)


def load_problem(path) -> Problem:
    with open(path) as fh:
        return parse_problem(fh.read())


def as_ising(problem: Problem) -> IsingProblem:
    return maxcut_to_ising(problem) if isinstance(problem, MaxCutGraph) else problem


def complete_graph(n: int, weight: float = 1.0) -> MaxCutGraph:
    return MaxCutGraph(n, tuple((i, j, weight) for i in range(1, n + 1) for j in range(i + 1, n + 1)))
