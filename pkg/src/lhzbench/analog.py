"""Behavioral device models and the coupled oscillator network built from a layout.

Units are parametric LC tanks (charge pump on the capacitor, soft diode
clipper, parallel loss).  Spin units carry the physical LHZ spins, every tile
gets an ancilla made of two tanks pumped twice as hard, and fixed +1 slots
become either ferro-locked tanks or ideal phase-reference sources.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import i1e

from .lhz import LhzLayout

ENVELOPES = ("linear-gain", "quadratic-envelope")
FIXED_MODES = ("oscillator", "source")
ANTIFERRO = 1
FERRO = -1


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class OscillatorParams:
    """One parametric tank.  ``R_loss=inf`` or ``I_s=0`` disable loss / clipping."""

    L: float
    C0: float
    G0: float
    dG: float
    Ta: float
    fp: float
    R_loss: float = 1e3
    I_s: float = 1e-9
    V_k: float = 0.05
    envelope: str = "linear-gain"

    def __post_init__(self):
        for name in ("L", "C0", "Ta", "fp", "R_loss", "V_k"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.I_s < 0:
            raise ParameterError(f"I_s must be >= 0, got {self.I_s}")
        if self.G0 < 0 or self.dG < 0:
            raise ParameterError("G0 and dG must be >= 0")
        if self.G0 + self.dG >= 1:
            raise ParameterError(f"G0 + dG = {self.G0 + self.dG} >= 1: capacitance would cross zero")
        if self.envelope not in ENVELOPES:
            raise ParameterError(f"envelope must be one of {ENVELOPES}, got {self.envelope!r}")

    @property
    def f0(self) -> float:
        return 1.0 / (2 * math.pi * math.sqrt(self.L * self.C0))

    @property
    def g_max(self) -> float:
        return self.G0 + self.dG


@dataclass(frozen=True)
class CouplingSpec:
    r_nn: float = 200.0
    r_na: float = 250.0
    r_aa: float = 46.0

    def __post_init__(self):
        for name in ("r_nn", "r_na", "r_aa"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0")


def pump_gain(p: OscillatorParams, t):
    """Modulation depth of the pump at time ``t`` (scalar or array)."""
    x = np.minimum(np.asarray(t, dtype=float) / p.Ta, 1.0)
    if p.envelope == "linear-gain":
        return p.G0 + p.dG * x
    return p.g_max * x**2


def capacitance(p: OscillatorParams, t, multiplier: float = 1.0):
    t = np.asarray(t, dtype=float)
    return p.C0 * (1.0 + multiplier * pump_gain(p, t) * np.cos(2 * math.pi * p.fp * t))


def clipper_current(v, I_s: float, V_k: float):
    """Anti-parallel diode pair: I_s (e^{v/V_k} - e^{-v/V_k}), saturated beyond 40 V_k."""
    x = np.clip(np.asarray(v, dtype=float) / V_k, -40.0, 40.0)
    return 2.0 * I_s * np.sinh(x)


def steady_amplitude(p: OscillatorParams, load: float, multiplier: float = 1.0) -> float:
    """Sinusoidal amplitude where pump gain, load and clipper balance (describing function).

    The pump supplies a negative conductance of multiplier*g_max*C0*w0/2 at
    half the pump frequency; ``load`` is the linear conductance seen by the tank.
    """
    w0 = math.pi * p.fp
    excess = multiplier * p.g_max * p.C0 * w0 / 2 - load - 1.0 / p.R_loss
    if excess <= 0 or p.I_s == 0:
        return 0.0 if excess <= 0 else math.inf

    def balance(a):
        # fundamental of 2 I_s sinh(a cos/V_k) is 4 I_s I1(a/V_k)
        x = a / p.V_k
        return 4 * p.I_s * i1e(x) * math.exp(x) / a - excess

    return float(brentq(balance, 1e-6 * p.V_k, 40 * p.V_k))


@dataclass(frozen=True)
class Unit:
    role: str  # "spin" | "ancilla" | "fixed"
    index: int  # physical spin, tile, or fixed-slot number
    half: int = 0  # 1 or 2 for ancilla halves
    params: Optional[OscillatorParams] = None
    pump_multiplier: float = 1.0

    @property
    def label(self) -> str:
        if self.role == "spin":
            return f"spin{self.index}"
        if self.role == "fixed":
            return f"fixed{self.index}"
        return f"anc{self.index}.{self.half}"


@dataclass(frozen=True)
class Coupling:
    a: int
    b: int
    conductance: float
    sign: int = ANTIFERRO


@dataclass(frozen=True)
class NetworkModel:
    units: tuple[Unit, ...]
    couplings: tuple[Coupling, ...]
    field_drive: tuple[float, ...]  # siemens, times the reference waveform
    pump_bias: tuple[float, ...]  # relative pump-depth offset per unit
    reference_amplitude: float
    fp: float
    tile_units: tuple[tuple[int, ...], ...] = ()  # member units per tile
    tile_ancillas: tuple[tuple[int, int], ...] = ()
    name: str = ""

    @property
    def f_ref(self) -> float:
        """Readout / reference frequency: half the pump frequency."""
        return self.fp / 2

    def indices(self, role: str) -> list[int]:
        return [u for u, unit in enumerate(self.units) if unit.role == role]

    @property
    def spin_units(self) -> list[int]:
        return self.indices("spin")

    def coupling_matrix(self) -> np.ndarray:
        m = np.zeros((len(self.units), len(self.units)))
        for c in self.couplings:
            m[c.a, c.b] += c.sign * c.conductance
            m[c.b, c.a] += c.sign * c.conductance
        return m


def build_network(
    layout: LhzLayout,
    params: OscillatorParams,
    coupling: CouplingSpec,
    *,
    ancilla_params: Optional[OscillatorParams] = None,
    ancilla_multiplier: float = 2.0,
    intra_ancilla_sign: int = FERRO,
    fixed_mode: str = "oscillator",
    fixed_link: float = 5e-3,
    load_matched_pump: bool = True,
    fixed_multiplier: float = 1.0,
    field_strength: float = 0.0,
    pump_bias: float = 0.0,
    reference_amplitude: Optional[float] = None,
    name: str = "",
) -> NetworkModel:
    """Wire spins, fixed +1 units and ancilla pairs tile by tile.

    ``fixed_mode="oscillator"`` makes every fixed slot a pumped tank; all of
    them are ferro-locked to the first one (the hub), and local fields become
    couplings between each spin and the hub, antiferro for J > 0.  With
    ``fixed_mode="source"`` fixed slots are ideal sinusoids in the +1 phase and
    local fields are injected from the same waveform.

    ``load_matched_pump`` scales the pump depth of spin and fixed units by
    their total linear load relative to a member of a single tile, so spins
    shared by several tiles sit at the same distance from threshold.
    ``fixed_multiplier`` further scales the pump of oscillator-mode fixed
    units so the hub can lead the spins through threshold.
    """
    if fixed_mode not in FIXED_MODES:
        raise ParameterError(f"fixed_mode must be one of {FIXED_MODES}, got {fixed_mode!r}")
    anc = ancilla_params or params
    if not math.isclose(anc.fp, params.fp):
        raise ParameterError("spin and ancilla tanks must share the pump frequency")
    fields = np.asarray(layout.local_fields, dtype=float)
    j_max = float(np.max(np.abs(fields))) if fields.size else 0.0
    rel = fields / j_max if j_max > 0 else np.zeros_like(fields)

    fixed_params = params if fixed_mode == "oscillator" else None
    units: list[Unit] = [Unit("spin", k, 0, params, 1.0) for k in range(layout.k)]
    slot_unit: dict[int, int] = {}
    for t, tile in enumerate(layout.tiles):
        if tile.n_fixed:
            slot_unit[t] = len(units)
            units.append(Unit("fixed", len(slot_unit) - 1, 0, fixed_params, 1.0))
    tile_ancillas = []
    for t in range(len(layout.tiles)):
        tile_ancillas.append((len(units), len(units) + 1))
        units += [Unit("ancilla", t, h, anc, ancilla_multiplier) for h in (1, 2)]

    merged: dict[tuple[int, int, int], float] = {}

    def couple(a, b, g, sign=ANTIFERRO):
        key = (min(a, b), max(a, b), sign)
        merged[key] = merged.get(key, 0.0) + g

    tile_units = []
    for t, tile in enumerate(layout.tiles):
        members = [slot_unit[t] if m is None else m for m in tile.members]
        tile_units.append(tuple(members))
        for x in range(4):
            for y in range(x + 1, 4):
                couple(members[x], members[y], 1.0 / coupling.r_nn)
        h1, h2 = tile_ancillas[t]
        for m in members:
            couple(m, h1, 1.0 / coupling.r_na)
            couple(m, h2, 1.0 / coupling.r_na)
        couple(h1, h2, 1.0 / coupling.r_aa, intra_ancilla_sign)

    drive = np.zeros(len(units))
    if fixed_mode == "oscillator" and slot_unit:
        hub = min(slot_unit.values())
        for u in slot_unit.values():
            if u != hub:
                couple(hub, u, fixed_link, FERRO)
        for k in range(layout.k):
            if rel[k] != 0:
                couple(k, hub, field_strength * abs(rel[k]), ANTIFERRO if rel[k] > 0 else FERRO)
    else:
        # with no hub (n <= 2 or source mode) fields come from the +1 waveform
        drive[: layout.k] = field_strength * rel
    couplings = tuple(Coupling(a, b, g, s) for (a, b, s), g in sorted(merged.items()))

    if load_matched_pump:
        load = np.zeros(len(units))
        for c in couplings:
            load[c.a] += c.conductance
            load[c.b] += c.conductance
        base = 3 / coupling.r_nn + 2 / coupling.r_na
        units = [
            replace(u, pump_multiplier=(load[i] + 1 / u.params.R_loss) / (base + 1 / u.params.R_loss))
            if u.role != "ancilla" and u.params is not None else u
            for i, u in enumerate(units)
        ]

    if fixed_multiplier != 1.0:
        units = [
            replace(u, pump_multiplier=u.pump_multiplier * fixed_multiplier)
            if u.role == "fixed" and u.params is not None else u
            for u in units
        ]

    bias = np.zeros(len(units))
    bias[: layout.k] = pump_bias * rel
    for u, unit in enumerate(units):
        if unit.params is not None:
            depth = unit.pump_multiplier * (1 + abs(bias[u])) * unit.params.g_max
            if depth >= 1:
                raise ParameterError(f"{unit.label}: effective pump depth {depth:.3f} >= 1")
    if reference_amplitude is None:
        reference_amplitude = steady_amplitude(params, 2 / coupling.r_nn + 2 / coupling.r_na)
    return NetworkModel(
        tuple(units), couplings, tuple(drive), tuple(bias), float(reference_amplitude), params.fp,
        tuple(tile_units), tuple(tile_ancillas), name,
    )


def single_unit(params: OscillatorParams, multiplier: float = 1.0, name: str = "single") -> NetworkModel:
    """One uncoupled tank, e.g. for bistability and resonance checks."""
    if multiplier * params.g_max >= 1:
        raise ParameterError(f"effective pump depth {multiplier * params.g_max:.3f} >= 1")
    ref = steady_amplitude(params, 0.0, multiplier)
    return NetworkModel((Unit("spin", 0, 0, params, multiplier),), (), (0.0,), (0.0,),
                        ref if math.isfinite(ref) else 0.0, params.fp, name=name)


@dataclass(frozen=True)
class Preset:
    """Named parameter set: tank values, wiring resistors and run duration."""

    name: str
    spin: OscillatorParams
    ancilla: OscillatorParams
    coupling: CouplingSpec
    ancilla_multiplier: float = 2.0
    intra_ancilla: str = "ferro"
    fixed_mode: str = "oscillator"
    fixed_link: float = 5e-3
    load_matched_pump: bool = True
    fixed_multiplier: float = 1.0
    field_strength: float = 0.0
    pump_bias: float = 0.0
    reference_amplitude: Optional[float] = None
    t_end: float = 1e-6
    notes: str = field(default="", compare=False)

    def network(self, layout: LhzLayout) -> NetworkModel:
        return build_network(
            layout, self.spin, self.coupling,
            ancilla_params=self.ancilla,
            ancilla_multiplier=self.ancilla_multiplier,
            intra_ancilla_sign=FERRO if self.intra_ancilla == "ferro" else ANTIFERRO,
            fixed_mode=self.fixed_mode,
            fixed_link=self.fixed_link,
            load_matched_pump=self.load_matched_pump,
            fixed_multiplier=self.fixed_multiplier,
            field_strength=self.field_strength,
            pump_bias=self.pump_bias,
            reference_amplitude=self.reference_amplitude,
            name=self.name,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "Preset":
        try:
            doc = dict(doc)
            doc["spin"] = OscillatorParams(**doc["spin"])
            doc["ancilla"] = OscillatorParams(**doc["ancilla"])
            doc["coupling"] = CouplingSpec(**doc["coupling"])
            if doc.get("intra_ancilla", "ferro") not in ("ferro", "antiferro"):
                raise ParameterError("intra_ancilla must be 'ferro' or 'antiferro'")
            return cls(**doc)
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"malformed preset: {exc}") from None


def _ideal_1ghz() -> Preset:
    # 1 GHz tank with 1-ohm impedance; 200/250/46 ohm tile wiring resistors.
    spin = OscillatorParams(
        L=159.15e-12, C0=159.15e-12, G0=0.035, dG=0.013, Ta=200e-9, fp=2e9,
        R_loss=1e3, I_s=1e-9, V_k=0.05, envelope="linear-gain",
    )
    ancilla = replace(spin, R_loss=28.0, V_k=0.15)
    return Preset(
        "ideal-1ghz", spin, ancilla, CouplingSpec(200.0, 250.0, 46.0),
        fixed_multiplier=1.25, field_strength=5e-4, t_end=1.8e-6,
        notes="ideal tanks at 1 GHz; ancilla halves pumped 2x with heavier loss and 3x clipper knee",
    )


def _cmos_like_13ghz() -> Preset:
    f0 = 13.37e9
    w0 = 2 * math.pi * f0
    # same 1-ohm tank impedance as the ideal preset, rescaled to 13.37 GHz
    spin = OscillatorParams(
        L=1.0 / w0, C0=1.0 / w0, G0=0.035, dG=0.013, Ta=20e-9, fp=2 * f0,
        R_loss=1e3, I_s=1e-9, V_k=0.05, envelope="quadratic-envelope",
    )
    ancilla = replace(spin, R_loss=28.0, V_k=0.15)
    return Preset(
        "cmos-like-13ghz", spin, ancilla, CouplingSpec(200.0, 250.0, 46.0),
        fixed_multiplier=1.25, field_strength=5e-4, t_end=140e-9,
        notes="13.37 GHz tanks, 26.74 GHz pump, quadratic envelope reaching full depth at 20 ns",
    )


PRESETS = {p.name: p for p in (_ideal_1ghz(), _cmos_like_13ghz())}


def get_preset(name_or_path: str) -> Preset:
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    try:
        with open(name_or_path) as fh:
            return Preset.from_dict(json.load(fh))
    except FileNotFoundError:
        raise ParameterError(
            f"unknown preset {name_or_path!r}; built-ins: {', '.join(PRESETS)}"
        ) from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"malformed preset JSON: {exc}") from None


def dump_preset(preset: Preset) -> str:
    return json.dumps(preset.to_dict(), indent=2)


def resonance(L: float, C: float) -> float:
    return 1.0 / (2 * math.pi * math.sqrt(L * C))


def tank_energy(q: Sequence[float], i_l: Sequence[float], p: OscillatorParams) -> np.ndarray:
    q = np.asarray(q)
    i_l = np.asarray(i_l)
    return q**2 / (2 * p.C0) + p.L * i_l**2 / 2
