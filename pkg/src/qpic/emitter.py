"""
Spectral description of the nanowire quantum-dot source.

Discrete transitions are Lorentzian lines whose centers follow the
emitter temperature; the broadband bulk-InP emission is Gaussian; the
excitation laser is a delta line. All densities are in counts/s/nm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .tuning import TuningCalibration, emitter_shift

BACKGROUND_KINDS = ("bulk_inp", "pump")


@dataclass(frozen=True)
class EmitterLine:
    """
    One quantum-dot transition.

    ``emission_rate`` is the photon rate of the transition before it is
    split into the forward/backward waveguide directions by
    :class:`SourceCoupling`.
    """

    label: str
    center_wavelength: float  # nm, at base temperature
    linewidth_fwhm: float  # nm
    emission_rate: float  # counts/s
    lifetime: float = 1.0  # ns
    g2_intrinsic: float = 0.0
    te_fraction: float = 1.0

    def __post_init__(self) -> None:
        if not self.linewidth_fwhm > 0:
            raise ConfigError(f"line {self.label}: linewidth must be positive")
        if self.emission_rate < 0:
            raise ConfigError(f"line {self.label}: rate must be non-negative")
        if not self.lifetime > 0:
            raise ConfigError(f"line {self.label}: lifetime must be positive")
        if not 0 <= self.g2_intrinsic <= 1:
            raise ConfigError(f"line {self.label}: g2 must lie in [0, 1]")
        if not 0 <= self.te_fraction <= 1:
            raise ConfigError(f"line {self.label}: te_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "center_nm": self.center_wavelength,
            "fwhm_nm": self.linewidth_fwhm,
            "rate_cps": self.emission_rate,
            "lifetime_ns": self.lifetime,
            "g2": self.g2_intrinsic,
            "te_fraction": self.te_fraction,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> EmitterLine:
        try:
            return cls(
                label=str(data["label"]),
                center_wavelength=float(data["center_nm"]),
                linewidth_fwhm=float(data["fwhm_nm"]),
                emission_rate=float(data["rate_cps"]),
                lifetime=float(data.get("lifetime_ns", 1.0)),
                g2_intrinsic=float(data.get("g2", 0.0)),
                te_fraction=float(data.get("te_fraction", 1.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"emitter entry missing key {exc}") from None


@dataclass(frozen=True)
class BackgroundSource:
    """
    Incoherent (Poissonian) background.

    ``bulk_inp`` is broadband nanowire emission and is scaled by the
    source coupling like the quantum-dot lines. ``pump`` is the
    excitation laser; its ``rate`` is the flux already leaked into the
    waveguide, and a non-positive width makes it a delta line.
    """

    kind: str
    center: float
    width_fwhm: float
    rate: float
    te_fraction: float = 0.5
    label: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in BACKGROUND_KINDS:
            raise ConfigError(f"unknown background kind {self.kind!r}")
        if self.rate < 0:
            raise ConfigError("background rate must be non-negative")
        if not 0 <= self.te_fraction <= 1:
            raise ConfigError("background te_fraction must lie in [0, 1]")
        if self.kind == "bulk_inp" and not self.width_fwhm > 0:
            raise ConfigError("bulk_inp background needs a positive width")

    @property
    def name(self) -> str:
        return self.label or self.kind

    @property
    def statistics(self) -> str:
        return "poissonian"

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "center_nm": self.center,
            "fwhm_nm": self.width_fwhm,
            "rate_cps": self.rate,
            "te_fraction": self.te_fraction,
        }
        if self.label:
            out["label"] = self.label
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> BackgroundSource:
        try:
            return cls(
                kind=str(data["kind"]),
                center=float(data["center_nm"]),
                width_fwhm=float(data.get("fwhm_nm", 0.0)),
                rate=float(data["rate_cps"]),
                te_fraction=float(data.get("te_fraction", 0.5)),
                label=data.get("label"),
            )
        except KeyError as exc:
            raise ConfigError(f"background entry missing key {exc}") from None


@dataclass(frozen=True)
class SourceCoupling:
    """Fractions of the emission guided forward (toward the ring) and backward."""

    forward_efficiency: float = 0.18
    backward_efficiency: float = 0.24

    def __post_init__(self) -> None:
        f, b = self.forward_efficiency, self.backward_efficiency
        if not (0 <= f <= 1 and 0 <= b <= 1):
            raise ConfigError("coupling efficiencies must lie in [0, 1]")
        if f + b > 1 + 1e-12:
            raise ConfigError(f"forward + backward coupling = {f + b} exceeds 1")

    def efficiency(self, direction: str) -> float:
        if direction == "forward":
            return self.forward_efficiency
        if direction == "backward":
            return self.backward_efficiency
        raise ConfigError(f"direction must be 'forward' or 'backward', got {direction!r}")

    def to_dict(self) -> dict:
        return {"forward": self.forward_efficiency, "backward": self.backward_efficiency}

    @classmethod
    def from_dict(cls, data: Mapping) -> SourceCoupling:
        return cls(float(data.get("forward", 0.18)), float(data.get("backward", 0.24)))


def _grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ConfigError("wavelength grid must be a non-empty 1-D array")
    return g


def polarization_weight(te_fraction: float, pol: str | None) -> float:
    if pol is None or pol == "both":
        return 1.0
    if pol == "TE":
        return te_fraction
    if pol == "TM":
        return 1.0 - te_fraction
    raise ConfigError(f"unknown polarization {pol!r}")


def line_center(line: EmitterLine, voltage: float = 0.0, cal: TuningCalibration | None = None) -> float:
    """Line center [nm] after the thermal red shift at ``voltage``."""
    if cal is None:
        return line.center_wavelength
    return line.center_wavelength + float(emitter_shift(cal, voltage))


def lorentzian_density(grid: np.ndarray, center: float, fwhm: float, rate: float) -> np.ndarray:
    hw = 0.5 * fwhm
    return rate * (hw / np.pi) / ((grid - center) ** 2 + hw * hw)


def line_spectrum(
    line: EmitterLine,
    grid,
    voltage: float = 0.0,
    cal: TuningCalibration | None = None,
) -> np.ndarray:
    """Lorentzian spectral density of ``line`` on ``grid``; integrates to the rate."""
    g = _grid(grid)
    return lorentzian_density(g, line_center(line, voltage, cal), line.linewidth_fwhm, line.emission_rate)


def _cell_widths(g: np.ndarray) -> np.ndarray:
    # trapezoid weight of each sample
    if g.size == 1:
        return np.ones(1)
    w = np.empty_like(g)
    w[1:-1] = 0.5 * (g[2:] - g[:-2])
    w[0] = 0.5 * (g[1] - g[0])
    w[-1] = 0.5 * (g[-1] - g[-2])
    return w


def background_spectrum(bg: BackgroundSource, grid) -> np.ndarray:
    """
    Spectral density of a background source on ``grid``.

    A delta line (or one narrower than the local grid spacing) is
    deposited on the nearest sample so that the trapezoid integral
    returns its rate; outside the grid it contributes nothing.
    """
    g = _grid(grid)
    out = np.zeros_like(g)
    if bg.rate == 0:
        return out
    if bg.kind == "bulk_inp":
        sigma = bg.width_fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        return bg.rate * np.exp(-0.5 * ((g - bg.center) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))
    if g.size > 1 and not (g[0] <= bg.center <= g[-1]):
        return out
    i = int(np.argmin(np.abs(g - bg.center)))
    widths = _cell_widths(g)
    if bg.width_fwhm > 0 and bg.width_fwhm > 2 * widths[i]:
        return lorentzian_density(g, bg.center, bg.width_fwhm, bg.rate)
    out[i] = bg.rate / widths[i]
    return out


def source_spectrum(
    lines: Sequence[EmitterLine],
    backgrounds: Sequence[BackgroundSource],
    grid,
    voltage: float = 0.0,
    cal: TuningCalibration | None = None,
    pol: str | None = None,
) -> np.ndarray:
    """
    Incoherent sum of all lines and backgrounds.

    ``pol`` selects the TE or TM share of each constituent; ``None`` (or
    ``"both"``) returns the unpolarized total.
    """
    g = _grid(grid)
    total = np.zeros_like(g)
    for name, density in component_spectra(lines, backgrounds, g, voltage, cal, pol):
        total += density
    return total


def component_spectra(
    lines: Iterable[EmitterLine],
    backgrounds: Iterable[BackgroundSource],
    grid,
    voltage: float = 0.0,
    cal: TuningCalibration | None = None,
    pol: str | None = None,
) -> list[tuple[str, np.ndarray]]:
    """Per-constituent polarized densities as ``(name, density)`` pairs."""
    g = _grid(grid)
    out = []
    for line in lines:
        w = polarization_weight(line.te_fraction, pol)
        out.append((line.label, w * line_spectrum(line, g, voltage, cal)))
    for bg in backgrounds:
        w = polarization_weight(bg.te_fraction, pol)
        out.append((bg.name, w * background_spectrum(bg, g)))
    return out


def directed_spectrum(spectrum: np.ndarray, coupling: SourceCoupling, direction: str = "forward") -> np.ndarray:
    """Share of an emitted spectrum guided in one waveguide direction."""
    return coupling.efficiency(direction) * np.asarray(spectrum, dtype=float)


def default_lines() -> list[EmitterLine]:
    """Illustrative trion/exciton pair; positions and rates are not measured values."""
    return [
        EmitterLine("T", 880.0, 0.002, 1.0e6, lifetime=1.0, g2_intrinsic=0.13, te_fraction=1.0),
        EmitterLine("X", 881.45, 0.002, 1.5e5, lifetime=1.0, g2_intrinsic=0.13, te_fraction=1.0),
    ]
