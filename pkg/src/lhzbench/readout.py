"""Phase readout: voltage traces -> physical spins, ancilla levels, logical solutions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analog import NetworkModel
from .lhz import LhzLayout, PhysicalState, decode_logical, evaluate_lhz, fully_consistent
from .problem import MaxCutGraph, Problem, as_ising, cut_value, evaluate_ising
from .sim import Trace

# phase of the pumped +1 waveform cos(pi fp t - pi/4) at the readout frequency fp/2
PUMP_PHASE = -math.pi / 4
MIN_CYCLES = 8


class ReadoutError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalReadout:
    phases: tuple[float, ...]  # per unit, radians in [-pi, pi]
    amplitudes: tuple[float, ...]  # per unit, volts
    spins: tuple[int, ...]
    ancilla_levels: tuple[int, ...]
    reference: str  # unit label, or "pump"
    low_confidence: tuple[bool, ...] = ()  # per spin: amplitude below threshold

    @property
    def state(self) -> PhysicalState:
        return PhysicalState(self.spins, self.ancilla_levels)


def tail_window(n_samples: int, sample_dt: float, f0: float, tail_fraction: float) -> int:
    """Samples in the final ``tail_fraction`` of a record, trimmed to whole cycles of f0."""
    if not 0 < tail_fraction <= 1:
        raise ReadoutError(f"tail_fraction must be in (0, 1], got {tail_fraction}")
    cycles = math.floor(tail_fraction * n_samples * sample_dt * f0 + 1e-9)
    if cycles < MIN_CYCLES:
        raise ReadoutError(f"tail window holds {cycles} cycles of f0; need at least {MIN_CYCLES}")
    return min(n_samples, int(round(cycles / (f0 * sample_dt))))


def project(times: np.ndarray, voltages: np.ndarray, f0: float) -> np.ndarray:
    """Complex single-bin projection 2/W sum v e^{-i 2 pi f0 t} along axis 0."""
    rot = np.exp(-2j * np.pi * f0 * np.asarray(times))
    return 2.0 * np.tensordot(rot, voltages, axes=(0, 0)) / len(times)


def extract_phase_amplitude(trace: Trace, f0: float, tail_fraction: float = 0.25) -> tuple[np.ndarray, np.ndarray]:
    """Per-unit phase (rad) and amplitude (V) at f0 over the tail of a trace."""
    if trace.times.size < 2:
        raise ReadoutError("trace needs at least two samples")
    sample_dt = float(trace.times[1] - trace.times[0])
    w = tail_window(trace.times.size, sample_dt, f0, tail_fraction)
    x = project(trace.times[-w:], trace.voltages[-w:], f0)
    return np.angle(x), np.abs(x)


def binarize(phases, amplitudes, network: NetworkModel, layout: LhzLayout,
             amp_threshold: float = 0.2, reference: str = "auto") -> PhysicalReadout:
    """Threshold phases into spins and ancilla levels.

    ``reference``: "auto" (first fixed unit if any, else the pump phase),
    "pump", "fixed" or "spin1".  Spins are +1 when cos(phase - ref) >= 0.
    Ancilla halves count +-2 unless their amplitude is below
    ``amp_threshold`` times the median spin amplitude; a tile with only one
    live half reads as level 0.
    """
    phases = np.asarray(phases, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=float)
    if phases.shape != (len(network.units),) or amplitudes.shape != phases.shape:
        raise ReadoutError(f"expected {len(network.units)} phases and amplitudes, got {phases.shape}")
    spin_u = network.spin_units
    if len(spin_u) != layout.k or len(network.tile_ancillas) != len(layout.tiles):
        raise ReadoutError("network does not match layout")
    fixed = network.indices("fixed")
    if reference == "auto":
        reference = "fixed" if fixed else "pump"
    if reference == "pump":
        ref_phase, ref_label = PUMP_PHASE, "pump"
    elif reference == "fixed":
        if not fixed:
            raise ReadoutError("network has no fixed unit to use as reference")
        ref_phase, ref_label = phases[fixed[0]], network.units[fixed[0]].label
    elif reference == "spin1":
        ref_phase, ref_label = phases[spin_u[0]], network.units[spin_u[0]].label
    else:
        raise ReadoutError(f"unknown reference {reference!r}")

    sign = np.where(np.cos(phases - ref_phase) >= 0, 1, -1)
    median = float(np.median(amplitudes[spin_u])) if spin_u else 0.0
    cut = amp_threshold * median
    levels = []
    for h1, h2 in network.tile_ancillas:
        live = [2 * int(sign[h]) for h in (h1, h2) if amplitudes[h] >= cut and amplitudes[h] > 0]
        levels.append(sum(live) if len(live) == 2 else 0)
    spin_amp = amplitudes[spin_u]
    low = tuple(bool(a <= 0 or a < cut) for a in spin_amp)
    return PhysicalReadout(
        tuple(float(p) for p in phases), tuple(float(a) for a in amplitudes),
        tuple(int(sign[u]) for u in spin_u), tuple(levels), ref_label, low,
    )


@dataclass(frozen=True)
class Solution:
    readout: PhysicalReadout
    assignment: tuple[int, ...]
    tile_flags: tuple[bool, ...]
    consistent: bool
    lhz_energy: float
    ising_energy: Optional[float] = None
    cut: Optional[float] = None

    def to_dict(self) -> dict:
        r = self.readout
        return {
            "reference": r.reference,
            "phases": list(r.phases),
            "amplitudes": list(r.amplitudes),
            "spins": list(r.spins),
            "ancilla_levels": list(r.ancilla_levels),
            "low_confidence": list(r.low_confidence),
            "assignment": list(self.assignment),
            "tile_consistency": list(self.tile_flags),
            "consistent": self.consistent,
            "lhz_energy": self.lhz_energy,
            "ising_energy": self.ising_energy,
            "cut": self.cut,
        }


def solve_readout(readout: PhysicalReadout, layout: LhzLayout, problem: Optional[Problem] = None) -> Solution:
    """Decode a readout and evaluate it under both energy functions."""
    assignment, flags = decode_logical(layout, readout.spins)
    consistent = fully_consistent(layout, readout.spins)
    lhz_e = evaluate_lhz(layout, readout.state)
    ising_e = cut = None
    if problem is not None:
        ising_e = evaluate_ising(as_ising(problem), assignment)
        if isinstance(problem, MaxCutGraph):
            cut = cut_value(problem, assignment)
    return Solution(readout, assignment, flags, consistent, lhz_e, ising_e, cut)


def read_solution(trace: Trace, layout: LhzLayout, network: NetworkModel, problem: Optional[Problem] = None,
                  *, f0: Optional[float] = None, tail_fraction: float = 0.25, amp_threshold: float = 0.2,
                  reference: str = "auto") -> Solution:
    phases, amps = extract_phase_amplitude(trace, network.f_ref if f0 is None else f0, tail_fraction)
    readout = binarize(phases, amps, network, layout, amp_threshold, reference)
    return solve_readout(readout, layout, problem)


def dump_solution(solution: Solution) -> str:
    return json.dumps(solution.to_dict(), indent=2)
