"""
Source, waveguide and ring filter composed into the two-port device.

Powers add incoherently everywhere: the emitters, the bulk emission and
the laser are mutually incoherent, so port spectra are the source
density times the relevant port transmission times the waveguide loss.
The ring at heater voltage V is the V = 0 ring rigidly shifted by
``ring_shift(V)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .analysis import LorentzianFit, fit_lorentzian
from .emitter import (
    BackgroundSource,
    EmitterLine,
    SourceCoupling,
    background_spectrum,
    line_center,
    line_spectrum,
    lorentzian_density,
    polarization_weight,
)
from .errors import ConfigError
from .ring import (
    RingParams,
    drop_transmission,
    free_spectral_range,
    nearest_resonance,
    through_transmission,
)
from .tuning import TuningCalibration, align_voltage, emitter_shift, ring_shift

DB_PER_NEPER_AMPLITUDE = 20.0 * math.log10(math.e)
LINE_WINDOW_WIDTHS = 10.0
DROP_THRESHOLD = 0.5
PUMP_WAVELENGTH = 532.0
FILTER_MODES = ("none", "ring", "ideal")


@dataclass(frozen=True)
class LossBand:
    start: float  # nm
    stop: float  # nm
    db_per_cm: float

    def __post_init__(self) -> None:
        if self.db_per_cm < 0:
            raise ConfigError("waveguide loss must be non-negative")
        if not self.stop > self.start:
            raise ConfigError("loss band must have stop > start")


def _default_bands() -> tuple[LossBand, ...]:
    # visible-band absorption of the SiN film vs the low-loss near-infrared band
    return (LossBand(400.0, 600.0, 150.0), LossBand(600.0, 1100.0, 3.0))


@dataclass(frozen=True)
class Losses:
    """
    Waveguide propagation loss by wavelength band and path lengths [cm].

    ``band_nm`` is the wavelength range over which spectra are valid.
    """

    bands: tuple[LossBand, ...] = field(default_factory=_default_bands)
    input_cm: float = 0.1
    through_cm: float = 0.1
    drop_cm: float = 0.1
    band_nm: tuple[float, float] = (500.0, 950.0)

    def __post_init__(self) -> None:
        if min(self.input_cm, self.through_cm, self.drop_cm) < 0:
            raise ConfigError("path lengths must be non-negative")
        if not self.band_nm[1] > self.band_nm[0] > 0:
            raise ConfigError(f"invalid validity band {self.band_nm}")
        object.__setattr__(self, "bands", tuple(self.bands))
        object.__setattr__(self, "band_nm", tuple(float(x) for x in self.band_nm))

    def db_per_cm(self, wavelength) -> np.ndarray:
        lam = np.asarray(wavelength, dtype=float)
        out = np.zeros_like(lam)
        for band in self.bands:
            out = np.where((lam >= band.start) & (lam < band.stop), band.db_per_cm, out)
        return out

    def path_cm(self, port: str) -> float:
        if port == "input":
            return self.input_cm
        if port == "through":
            return self.input_cm + self.through_cm
        if port == "drop":
            return self.input_cm + self.drop_cm
        raise ConfigError(f"unknown port {port!r}")

    def factor(self, wavelength, port: str) -> np.ndarray:
        """Power transmission of the waveguide path to ``port``."""
        return 10.0 ** (-self.db_per_cm(wavelength) * self.path_cm(port) / 10.0)

    def to_dict(self) -> dict:
        return {
            "bands": [{"start_nm": b.start, "stop_nm": b.stop, "db_per_cm": b.db_per_cm} for b in self.bands],
            "input_cm": self.input_cm,
            "through_cm": self.through_cm,
            "drop_cm": self.drop_cm,
            "band_nm": list(self.band_nm),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> Losses:
        kwargs = {}
        if "bands" in data:
            kwargs["bands"] = tuple(
                LossBand(float(b["start_nm"]), float(b["stop_nm"]), float(b["db_per_cm"])) for b in data["bands"]
            )
        for key in ("input_cm", "through_cm", "drop_cm"):
            if key in data:
                kwargs[key] = float(data[key])
        if "band_nm" in data:
            kwargs["band_nm"] = tuple(float(x) for x in data["band_nm"])
        unknown = set(data) - {"bands", "input_cm", "through_cm", "drop_cm", "band_nm"}
        if unknown:
            raise ConfigError(f"unknown losses keys: {sorted(unknown)}")
        return cls(**kwargs)


def undercoupling_attenuation_db(gap_increase_um: float = 0.4, decay_length_um: float = 0.1) -> float:
    """
    Extra drop-port attenuation from a longer effective coupling gap.

    Each coupler's cross-coupling amplitude decays as exp(−Δg/δ), i.e.
    20·log10(e)·Δg/δ dB of power per coupler, and the pump crosses two.
    """
    if decay_length_um <= 0:
        raise ConfigError("coupling decay length must be positive")
    if gap_increase_um < 0:
        raise ConfigError("gap increase must be non-negative")
    return 2.0 * DB_PER_NEPER_AMPLITUDE * gap_increase_um / decay_length_um


@dataclass(frozen=True)
class PumpBudget:
    """Attenuation terms [dB] acting on the pump between injection and drop port."""

    material_absorption_db: float = 15.0
    undercoupling_db: float = field(default_factory=undercoupling_attenuation_db)
    modal_mismatch_db: float = 15.0

    def __post_init__(self) -> None:
        for name in ("material_absorption_db", "undercoupling_db", "modal_mismatch_db"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    @property
    def terms_db(self) -> float:
        return self.material_absorption_db + self.undercoupling_db + self.modal_mismatch_db

    def to_dict(self) -> dict:
        return {
            "material_absorption_db": self.material_absorption_db,
            "undercoupling_db": self.undercoupling_db,
            "modal_mismatch_db": self.modal_mismatch_db,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> PumpBudget:
        data = dict(data)
        if "undercoupling_db" not in data and ("gap_increase_um" in data or "decay_length_um" in data):
            data["undercoupling_db"] = undercoupling_attenuation_db(
                float(data.pop("gap_increase_um", 0.4)), float(data.pop("decay_length_um", 0.1))
            )
        unknown = set(data) - {"material_absorption_db", "undercoupling_db", "modal_mismatch_db"}
        if unknown:
            raise ConfigError(f"unknown pump_budget keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class CircuitConfig:
    """Emitters, waveguide, ring and heater forming one filtered channel."""

    ring: RingParams
    tuning: TuningCalibration
    emitters: tuple[EmitterLine, ...]
    backgrounds: tuple[BackgroundSource, ...] = ()
    coupling: SourceCoupling = field(default_factory=SourceCoupling)
    losses: Losses = field(default_factory=Losses)
    pump_budget: PumpBudget = field(default_factory=PumpBudget)

    def __post_init__(self) -> None:
        object.__setattr__(self, "emitters", tuple(self.emitters))
        object.__setattr__(self, "backgrounds", tuple(self.backgrounds))
        labels = [e.label for e in self.emitters] + [b.name for b in self.backgrounds]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"component labels must be unique, got {labels}")

    def line(self, label: str) -> EmitterLine:
        for e in self.emitters:
            if e.label == label:
                return e
        raise ConfigError(f"no emitter line labelled {label!r} (have {[e.label for e in self.emitters]})")

    @property
    def pump(self) -> BackgroundSource | None:
        for b in self.backgrounds:
            if b.kind == "pump":
                return b
        return None


@dataclass(frozen=True)
class PortSpectra:
    grid: np.ndarray
    through: np.ndarray
    drop: np.ndarray

    def __post_init__(self) -> None:
        if np.any(np.diff(self.grid) <= 0):
            raise ConfigError("spectral grid must be strictly increasing")


def _pols(pol: str) -> tuple[str, ...]:
    if pol == "both":
        return ("TE", "TM")
    if pol in ("TE", "TM"):
        return (pol,)
    raise ConfigError(f"polarization must be TE, TM or both, got {pol!r}")


def _check_band(cfg: CircuitConfig, grid: np.ndarray) -> None:
    lo, hi = cfg.losses.band_nm
    if grid.size == 0 or grid[0] < lo or grid[-1] > hi:
        raise ConfigError(f"wavelength grid must lie within the validity band {lo}-{hi} nm")


def _port_factors(cfg: CircuitConfig, wavelengths: np.ndarray, offset: float, pol: str, pump: bool):
    """Through and drop power factors for one polarization with the ring shifted by ``offset``."""
    shifted = wavelengths - offset
    t_thru = through_transmission(cfg.ring, shifted, pol)
    t_drop = drop_transmission(cfg.ring, shifted, pol)
    if pump:
        thru = t_thru * cfg.losses.factor(wavelengths, "through")
        drop = t_drop * 10.0 ** (-cfg.pump_budget.terms_db / 10.0)
    else:
        eff = cfg.coupling.forward_efficiency
        thru = eff * t_thru * cfg.losses.factor(wavelengths, "through")
        drop = eff * t_drop * cfg.losses.factor(wavelengths, "drop")
    return thru, drop


def component_port_spectra(
    cfg: CircuitConfig, voltage: float, grid, pol: str = "TE"
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Through/drop densities of each constituent, keyed by label."""
    g = np.asarray(grid, dtype=float)
    _check_band(cfg, g)
    offset = float(ring_shift(cfg.tuning, voltage))
    out: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for line in cfg.emitters:
        src = line_spectrum(line, g, voltage, cfg.tuning)
        out[line.label] = _accumulate(cfg, g, offset, pol, src, line.te_fraction, pump=False)
    for bg in cfg.backgrounds:
        src = background_spectrum(bg, g)
        out[bg.name] = _accumulate(cfg, g, offset, pol, src, bg.te_fraction, pump=bg.kind == "pump")
    return out


def _accumulate(cfg, g, offset, pol, src, te_fraction, pump):
    thru = np.zeros_like(g)
    drop = np.zeros_like(g)
    for p in _pols(pol):
        w = polarization_weight(te_fraction, p)
        if w == 0:
            continue
        f_thru, f_drop = _port_factors(cfg, g, offset, p, pump)
        thru += w * src * f_thru
        drop += w * src * f_drop
    return thru, drop


def port_spectra(cfg: CircuitConfig, voltage: float, grid, pol: str = "TE") -> PortSpectra:
    """Through- and drop-port spectral densities [counts/s/nm] at heater ``voltage``."""
    g = np.asarray(grid, dtype=float)
    comps = component_port_spectra(cfg, voltage, g, pol)
    thru = np.zeros_like(g)
    drop = np.zeros_like(g)
    for t, d in comps.values():
        thru += t
        drop += d
    return PortSpectra(g, thru, drop)


def source_port_spectrum(cfg: CircuitConfig, voltage: float, grid, pol: str = "TE") -> np.ndarray:
    """Forward-guided flux arriving at the ring (no filtering, no propagation loss)."""
    g = np.asarray(grid, dtype=float)
    total = np.zeros_like(g)
    for line in cfg.emitters:
        w = sum(polarization_weight(line.te_fraction, p) for p in _pols(pol))
        total += w * cfg.coupling.forward_efficiency * line_spectrum(line, g, voltage, cfg.tuning)
    for bg in cfg.backgrounds:
        w = sum(polarization_weight(bg.te_fraction, p) for p in _pols(pol))
        eff = 1.0 if bg.kind == "pump" else cfg.coupling.forward_efficiency
        total += w * eff * background_spectrum(bg, g)
    return total


def line_window(line: EmitterLine, center: float, points: int = 4001) -> np.ndarray:
    """Integration grid spanning ±10 linewidths around ``center``."""
    half = LINE_WINDOW_WIDTHS * line.linewidth_fwhm
    return np.linspace(center - half, center + half, points)


def _line_powers_at(cfg: CircuitConfig, line: EmitterLine, center: float, offset: float, pol: str):
    g = line_window(line, center)
    src = lorentzian_density(g, center, line.linewidth_fwhm, line.emission_rate)
    thru, drop = _accumulate(cfg, g, offset, pol, src, line.te_fraction, pump=False)
    return float(np.trapezoid(thru, g)), float(np.trapezoid(drop, g))


def line_port_powers(cfg: CircuitConfig, voltage: float, label: str, pol: str = "TE") -> tuple[float, float]:
    """Line-integrated (through, drop) power [counts/s] over ±10 linewidths."""
    line = cfg.line(label)
    center = line_center(line, voltage, cfg.tuning)
    offset = float(ring_shift(cfg.tuning, voltage))
    return _line_powers_at(cfg, line, center, offset, pol)


def selectivity_db(cfg: CircuitConfig, voltage: float, label: str, pol: str = "TE") -> float:
    """
    Through-port rejection of a line [dB].

    Ratio of the line's through-port power with the ring parked half an
    FSR away (no alignment) to its power at ``voltage``.
    """
    line = cfg.line(label)
    center = line_center(line, voltage, cfg.tuning)
    offset = float(ring_shift(cfg.tuning, voltage))
    thru, _ = _line_powers_at(cfg, line, center, offset, pol)
    unshifted = center - offset
    anti = nearest_resonance(cfg.ring, unshifted) + 0.5 * free_spectral_range(cfg.ring, unshifted)
    ref, _ = _line_powers_at(cfg, line, center, center - anti, pol)
    if thru <= 0:
        return math.inf
    return 10.0 * math.log10(ref / thru)


def pump_budget_table(cfg: CircuitConfig, pol: str = "TE") -> dict[str, float]:
    """Pump-suppression terms [dB] including the ring's own drop attenuation at the pump wavelength."""
    pump = cfg.pump
    wavelength = pump.center if pump is not None else PUMP_WAVELENGTH
    t_drop = drop_transmission(cfg.ring, wavelength, pol)
    ring_db = math.inf if t_drop <= 0 else -10.0 * math.log10(t_drop)
    b = cfg.pump_budget
    table = {
        "pump_wavelength_nm": wavelength,
        "material_absorption_db": b.material_absorption_db,
        "undercoupling_db": b.undercoupling_db,
        "modal_mismatch_db": b.modal_mismatch_db,
        "ring_drop_attenuation_db": ring_db,
    }
    table["total_db"] = b.terms_db + ring_db
    return table


def pump_suppression_db(cfg: CircuitConfig, pol: str = "TE") -> float:
    """Total pump attenuation into the drop port [dB]."""
    return pump_budget_table(cfg, pol)["total_db"]


@dataclass(frozen=True)
class SweepResult:
    voltages: np.ndarray
    detuning_shift: np.ndarray  # nm, emitter red shift plus ring blue shift
    drop: dict[str, np.ndarray]
    through: dict[str, np.ndarray]

    @property
    def labels(self) -> list[str]:
        return list(self.drop)


def qwdm_sweep(
    cfg: CircuitConfig, voltages: Sequence[float], labels: Sequence[str] | None = None, pol: str = "TE"
) -> SweepResult:
    """Line-integrated drop/through power of each line versus heater voltage."""
    v = np.asarray(voltages, dtype=float)
    if v.size == 0:
        raise ConfigError("voltage grid is empty")
    labels = list(labels) if labels is not None else [e.label for e in cfg.emitters]
    if not labels:
        raise ConfigError("no emitter lines to sweep")
    shift = np.asarray(emitter_shift(cfg.tuning, v)) - np.asarray(ring_shift(cfg.tuning, v))
    drop = {lab: np.empty(v.size) for lab in labels}
    thru = {lab: np.empty(v.size) for lab in labels}
    for i, vi in enumerate(v):
        for lab in labels:
            thru[lab][i], drop[lab][i] = line_port_powers(cfg, float(vi), lab, pol)
    return SweepResult(v, np.atleast_1d(shift), drop, thru)


def fit_sweep_lorentzian(cfg: CircuitConfig, sweep: SweepResult, label: str) -> LorentzianFit:
    """
    Lorentzian fit of one drop-port sweep curve in the detuning-shift variable.

    The fit uses one FSR of detuning centred on the curve maximum, so a
    neighbouring resonance order never enters the window.
    """
    y = sweep.drop[label]
    x = sweep.detuning_shift
    i = int(np.argmax(y))
    fsr = free_spectral_range(cfg.ring, cfg.line(label).center_wavelength)
    mask = np.abs(x - x[i]) <= 0.5 * fsr
    return fit_lorentzian(x[mask], y[mask])


def drop_peak_transmission(ring: RingParams, pol: str = "TE") -> float:
    c = ring.coupling(pol)
    return (1 - c.t1**2) * (1 - c.t2**2) * c.a / (1 - c.round_trip) ** 2


def demux_assignment(
    cfg: CircuitConfig, voltage: float, threshold: float = DROP_THRESHOLD, pol: str = "TE"
) -> dict[str, str]:
    """Route of each line at ``voltage``: ``"drop"`` if its drop transmission exceeds ``threshold`` of the peak."""
    offset = float(ring_shift(cfg.tuning, voltage))
    peak = drop_peak_transmission(cfg.ring, pol)
    out = {}
    for line in cfg.emitters:
        t = drop_transmission(cfg.ring, line_center(line, voltage, cfg.tuning) - offset, pol)
        out[line.label] = "drop" if t >= threshold * peak else "through"
    return out


def _band_grid(cfg: CircuitConfig, step: float = 0.005) -> np.ndarray:
    lo, hi = cfg.losses.band_nm
    return np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)


def collected_powers(
    cfg: CircuitConfig, label: str, mode: str, pol: str = "TE", voltage: float | None = None
) -> dict[str, float]:
    """
    Detected-band power [counts/s] of each constituent for a filter setting.

    ``ring``: drop port with the ring aligned to ``label`` (unless a
    voltage is given). ``none``: the guided forward flux with no filter.
    ``ideal``: only the selected line.
    """
    if mode not in FILTER_MODES:
        raise ConfigError(f"filter must be one of {FILTER_MODES}, got {mode!r}")
    target = cfg.line(label)
    if mode == "ideal":
        return {label: target.emission_rate * cfg.coupling.forward_efficiency}
    if mode == "ring" and voltage is None:
        voltage = align_voltage(cfg.ring, cfg.tuning, target.center_wavelength, "TE" if pol == "both" else pol)
    voltage = 0.0 if voltage is None else voltage
    offset = float(ring_shift(cfg.tuning, voltage))
    powers: dict[str, float] = {}
    for line in cfg.emitters:
        center = line_center(line, voltage, cfg.tuning)
        if mode == "ring":
            powers[line.label] = _line_powers_at(cfg, line, center, offset, pol)[1]
        else:
            g = line_window(line, center)
            w = sum(polarization_weight(line.te_fraction, p) for p in _pols(pol))
            src = w * cfg.coupling.forward_efficiency * lorentzian_density(
                g, center, line.linewidth_fwhm, line.emission_rate
            )
            powers[line.label] = float(np.trapezoid(src * cfg.losses.factor(g, "input"), g))
    grid = _band_grid(cfg)
    for bg in cfg.backgrounds:
        if bg.kind == "pump":
            lam = np.array([bg.center])
            if mode == "ring":
                total = 0.0
                for p in _pols(pol):
                    w = polarization_weight(bg.te_fraction, p)
                    total += w * bg.rate * float(_port_factors(cfg, lam, offset, p, pump=True)[1][0])
                powers[bg.name] = total
            else:
                w = sum(polarization_weight(bg.te_fraction, p) for p in _pols(pol))
                powers[bg.name] = w * bg.rate * float(cfg.losses.factor(lam, "input")[0])
            continue
        src = background_spectrum(bg, grid)
        if mode == "ring":
            _, drop = _accumulate(cfg, grid, offset, pol, src, bg.te_fraction, pump=False)
            powers[bg.name] = float(np.trapezoid(drop, grid))
        else:
            w = sum(polarization_weight(bg.te_fraction, p) for p in _pols(pol))
            dens = w * cfg.coupling.forward_efficiency * src * cfg.losses.factor(grid, "input")
            powers[bg.name] = float(np.trapezoid(dens, grid))
    return powers


def signal_fraction(
    cfg: CircuitConfig, label: str, mode: str, pol: str = "TE", voltage: float | None = None
) -> float:
    """Share ρ of detected photons that come from line ``label``."""
    powers = collected_powers(cfg, label, mode, pol, voltage)
    total = sum(powers.values())
    if total <= 0:
        raise ConfigError("no detected power for the selected filter setting")
    return powers[label] / total
