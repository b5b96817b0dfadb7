"""
Add-drop microring resonator model.

Closed-form power transfer functions of a ring coupled to two bus
waveguides, the resonance metrics derived from them, and an inverse
solver that recovers the coupling coefficients from a target free
spectral range and loaded linewidth.

Theory
------
With round-trip phase φ, bus/drop self-coupling amplitudes t1, t2 and
round-trip amplitude transmission a:

    T_thru = (t2²a² − 2·t1·t2·a·cos φ + t1²) / (1 − 2·t1·t2·a·cos φ + (t1·t2·a)²)
    T_drop = (1 − t1²)(1 − t2²)·a            / (1 − 2·t1·t2·a·cos φ + (t1·t2·a)²)

The effective index is linear in wavelength around a reference point,
n_eff(λ) = n_eff(λ_ref) − (λ − λ_ref)(n_g − n_eff(λ_ref))/λ_ref, which
makes the group index exactly n_g everywhere and gives

    φ(λ) = 2π·L·n_g/λ − 2π·L·(n_g − n_eff(λ_ref))/λ_ref

so resonance positions are analytic: λ_m = L·n_g / (m + L(n_g − n_eff_ref)/λ_ref).

Units: wavelengths in nm, radius in µm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.typing import ArrayLike

from .errors import ConfigError

POLARIZATIONS = ("TE", "TM")
DEFAULT_LOSS_A = 0.99
CRITICAL_TOL = 1e-3


@dataclass(frozen=True)
class Coupling:
    """
    Coupling coefficients for one polarization.

    Parameters
    ----------
    t1 : float
        Amplitude self-coupling at the bus (input/through) coupler.
    t2 : float
        Amplitude self-coupling at the drop coupler.
    a : float
        Round-trip amplitude transmission (1 = lossless).
    """

    t1: float
    t2: float
    a: float = DEFAULT_LOSS_A

    def __post_init__(self) -> None:
        for name in ("t1", "t2", "a"):
            value = getattr(self, name)
            if not (0.0 < value <= 1.0) or not math.isfinite(value):
                raise ConfigError(f"coupling {name} must lie in (0, 1], got {value}")

    @property
    def round_trip(self) -> float:
        """Product t1·t2·a that sets the loaded linewidth."""
        return self.t1 * self.t2 * self.a

    def to_dict(self) -> dict:
        return {"t1": self.t1, "t2": self.t2, "a": self.a}

    @classmethod
    def from_dict(cls, data: Mapping) -> Coupling:
        try:
            return cls(float(data["t1"]), float(data["t2"]), float(data.get("a", DEFAULT_LOSS_A)))
        except KeyError as exc:
            raise ConfigError(f"coupling entry missing key {exc}") from None


@dataclass(frozen=True)
class RingParams:
    """
    Geometry, dispersion and per-polarization couplings of the ring.

    Parameters
    ----------
    radius : float
        Ring radius [µm].
    group_index : float
        Group index n_g (sets the FSR).
    n_eff_ref : float
        Effective index at ``lambda_ref`` (sets absolute resonance positions).
    lambda_ref : float
        Reference wavelength [nm].
    couplings : mapping
        ``{"TE": Coupling, "TM": Coupling}``; either entry may be absent.
    """

    radius: float
    group_index: float
    n_eff_ref: float
    lambda_ref: float
    couplings: Mapping[str, Coupling] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ConfigError(f"radius must be positive, got {self.radius}")
        if not self.group_index >= 1:
            raise ConfigError(f"group index must be >= 1, got {self.group_index}")
        if not self.n_eff_ref > 0:
            raise ConfigError(f"effective index must be positive, got {self.n_eff_ref}")
        if not self.lambda_ref > 0:
            raise ConfigError(f"reference wavelength must be positive, got {self.lambda_ref}")
        couplings = dict(self.couplings)
        for pol, c in couplings.items():
            if pol not in POLARIZATIONS:
                raise ConfigError(f"unknown polarization {pol!r}; expected one of {POLARIZATIONS}")
            if not isinstance(c, Coupling):
                raise ConfigError(f"coupling for {pol} must be a Coupling")
        object.__setattr__(self, "couplings", couplings)

    @property
    def length(self) -> float:
        """Round-trip length L = 2πR [nm]."""
        return 2.0 * math.pi * self.radius * 1e3

    @property
    def _order_offset(self) -> float:
        return self.length * (self.group_index - self.n_eff_ref) / self.lambda_ref

    def coupling(self, pol: str) -> Coupling:
        try:
            return self.couplings[pol]
        except KeyError:
            raise ConfigError(
                f"ring has no coupling entry for polarization {pol!r} "
                f"(available: {sorted(self.couplings)})"
            ) from None

    def with_coupling(self, pol: str, coupling: Coupling) -> RingParams:
        couplings = dict(self.couplings)
        couplings[pol] = coupling
        return RingParams(self.radius, self.group_index, self.n_eff_ref, self.lambda_ref, couplings)

    def effective_index(self, wavelength: ArrayLike) -> np.ndarray:
        lam = np.asarray(wavelength, dtype=float)
        return self.n_eff_ref - (lam - self.lambda_ref) * (self.group_index - self.n_eff_ref) / self.lambda_ref

    def order(self, wavelength: ArrayLike) -> np.ndarray:
        """Fractional resonance order φ/2π at ``wavelength``."""
        lam = np.asarray(wavelength, dtype=float)
        return self.length * self.group_index / lam - self._order_offset

    def phase(self, wavelength: ArrayLike) -> np.ndarray:
        """Round-trip phase φ(λ) [rad]."""
        return 2.0 * np.pi * self.order(wavelength)

    def resonance_wavelength(self, order: ArrayLike) -> np.ndarray:
        """Wavelength of integer resonance ``order`` [nm]."""
        m = np.asarray(order, dtype=float)
        return self.length * self.group_index / (m + self._order_offset)

    def to_dict(self) -> dict:
        return {
            "radius_um": self.radius,
            "group_index": self.group_index,
            "n_eff_ref": self.n_eff_ref,
            "lambda_ref_nm": self.lambda_ref,
            "couplings": {pol: c.to_dict() for pol, c in sorted(self.couplings.items())},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> RingParams:
        try:
            couplings = {pol: Coupling.from_dict(c) for pol, c in data["couplings"].items()}
            return cls(
                radius=float(data["radius_um"]),
                group_index=float(data["group_index"]),
                n_eff_ref=float(data["n_eff_ref"]),
                lambda_ref=float(data["lambda_ref_nm"]),
                couplings=couplings,
            )
        except KeyError as exc:
            raise ConfigError(f"ring block missing key {exc}") from None
        except (TypeError, AttributeError) as exc:
            raise ConfigError(f"malformed ring block: {exc}") from None


def _check_wavelength(wavelength: ArrayLike) -> np.ndarray:
    lam = np.asarray(wavelength, dtype=float)
    if np.any(~(lam > 0)):
        raise ConfigError("wavelength must be positive")
    return lam


def _denominator(c: Coupling, cos_phi: np.ndarray) -> np.ndarray:
    x = c.round_trip
    return 1.0 - 2.0 * x * cos_phi + x * x


def through_transmission(ring: RingParams, wavelength: ArrayLike, pol: str = "TE") -> np.ndarray | float:
    """Through-port power transmission at ``wavelength`` [nm]."""
    c = ring.coupling(pol)
    lam = _check_wavelength(wavelength)
    cos_phi = np.cos(ring.phase(lam))
    x = c.round_trip
    num = (c.t2 * c.a) ** 2 - 2.0 * x * cos_phi + c.t1**2
    out = np.clip(num / _denominator(c, cos_phi), 0.0, 1.0)
    return out if out.ndim else float(out)


def drop_transmission(ring: RingParams, wavelength: ArrayLike, pol: str = "TE") -> np.ndarray | float:
    """Drop-port power transmission at ``wavelength`` [nm]."""
    c = ring.coupling(pol)
    lam = _check_wavelength(wavelength)
    cos_phi = np.cos(ring.phase(lam))
    num = (1.0 - c.t1**2) * (1.0 - c.t2**2) * c.a
    out = np.clip(num / _denominator(c, cos_phi), 0.0, 1.0)
    return out if out.ndim else float(out)


def free_spectral_range(ring: RingParams, wavelength: float) -> float:
    """FSR = λ²/(n_g·L) [nm]."""
    lam = float(_check_wavelength(wavelength))
    return lam * lam / (ring.group_index * ring.length)


def linewidth_from_round_trip(x: float, fsr: float) -> float:
    """Loaded FWHM for round-trip product ``x`` = t1·t2·a at a given FSR."""
    return fsr * (1.0 - x) / (math.pi * math.sqrt(x))


def resonance_fwhm(ring: RingParams, wavelength: float, pol: str = "TE") -> float:
    """
    Loaded resonance FWHM [nm].

    Uses the high-finesse expression (1 − x)·λ²/(π·n_g·L·√x) with
    x = t1·t2·a. Raises :class:`ConfigError` when x = 1, where the
    resonance has zero width.
    """
    c = ring.coupling(pol)
    x = c.round_trip
    if x >= 1.0:
        raise ConfigError(
            f"degenerate {pol} resonance: t1*t2*a = {x} (uncoupled lossless ring has infinite Q)"
        )
    return linewidth_from_round_trip(x, free_spectral_range(ring, wavelength))


def finesse(ring: RingParams, wavelength: float, pol: str = "TE") -> float:
    return free_spectral_range(ring, wavelength) / resonance_fwhm(ring, wavelength, pol)


def nearest_resonance(ring: RingParams, wavelength: float, pol: str | None = None) -> float:
    """
    Resonance wavelength closest to ``wavelength`` [nm].

    Resonance positions do not depend on polarization in this model;
    ``pol`` is accepted for interface symmetry.
    """
    lam = float(_check_wavelength(wavelength))
    m0 = math.floor(float(ring.order(lam)))
    candidates = ring.resonance_wavelength(np.array([m0 - 1, m0, m0 + 1, m0 + 2]))
    candidates = candidates[candidates > 0]
    return float(candidates[np.argmin(np.abs(candidates - lam))])


def next_resonance_above(ring: RingParams, wavelength: float, tol: float = 1e-9) -> float:
    """Smallest resonance wavelength ≥ ``wavelength − tol`` [nm]."""
    lam = float(_check_wavelength(wavelength))
    # resonance wavelength decreases with order, so the red-side neighbour has the lower order
    m = math.floor(float(ring.order(lam - tol)))
    return float(ring.resonance_wavelength(m))


def is_critically_coupled(ring: RingParams, pol: str = "TE", tol: float = CRITICAL_TOL) -> bool:
    """True when |t1 − t2·a| < tol (zero on-resonance through transmission)."""
    c = ring.coupling(pol)
    return abs(c.t1 - c.t2 * c.a) < tol


def round_trip_for_finesse(fsr: float, fwhm: float) -> float:
    """
    Invert the linewidth formula for x = t1·t2·a.

    (1 − x)/√x = π·FWHM/FSR is a quadratic in s = √x with a single
    positive root.
    """
    k = math.pi * fwhm / fsr
    s = (-k + math.sqrt(k * k + 4.0)) / 2.0
    return s * s


def solve_couplings(
    target_fsr: float,
    target_fwhm: float,
    wavelength: float,
    radius: float,
    loss_a: float = DEFAULT_LOSS_A,
    critical: bool = True,
) -> tuple[Coupling, float]:
    """
    Couplings and group index that reproduce a measured FSR and FWHM.

    Parameters
    ----------
    target_fsr, target_fwhm : float
        Free spectral range and loaded FWHM [nm].
    wavelength : float
        Wavelength at which both were measured [nm].
    radius : float
        Ring radius [µm].
    loss_a : float
        Round-trip amplitude transmission, a free calibration knob since
        only the loaded linewidth is observable.
    critical : bool
        If True, impose t1 = t2·a (critical coupling). Otherwise the two
        couplers are taken identical, t1 = t2.

    Returns
    -------
    coupling : Coupling
    group_index : float
    """
    if not (target_fsr > 0 and target_fwhm > 0):
        raise ConfigError("target FSR and FWHM must be positive")
    if not target_fwhm < target_fsr:
        raise ConfigError(
            f"infeasible: FWHM ({target_fwhm} nm) must be smaller than FSR ({target_fsr} nm)"
        )
    if not 0 < loss_a <= 1:
        raise ConfigError(f"loss_a must lie in (0, 1], got {loss_a}")
    if not (wavelength > 0 and radius > 0):
        raise ConfigError("wavelength and radius must be positive")

    length = 2.0 * math.pi * radius * 1e3
    group_index = wavelength**2 / (target_fsr * length)
    x = round_trip_for_finesse(target_fsr, target_fwhm)
    if not 0 < x < 1:
        raise ConfigError(f"infeasible: required t1*t2*a = {x} outside (0, 1)")

    if critical:
        # t1 = t2·a and t1·t2·a = x  =>  t1 = √x, t2 = √x / a
        t1 = math.sqrt(x)
        t2 = t1 / loss_a
        if t2 > 1:
            raise ConfigError(
                f"infeasible: critical coupling needs t2 = {t2:.6f} > 1; "
                f"t1*t2*a = {x:.6f} exceeds a^2 = {loss_a**2:.6f} (increase loss_a or FWHM)"
            )
    else:
        t1 = t2 = math.sqrt(x / loss_a)
        if t1 > 1:
            raise ConfigError(
                f"infeasible: t1 = t2 = {t1:.6f} > 1; t1*t2*a = {x:.6f} exceeds a = {loss_a}"
            )
    return Coupling(t1, t2, loss_a), group_index


def anchored_effective_index(radius: float, wavelength: float, n_eff_guess: float) -> float:
    """Effective index nearest ``n_eff_guess`` that puts a resonance exactly at ``wavelength``."""
    length = 2.0 * math.pi * radius * 1e3
    order = round(n_eff_guess * length / wavelength)
    return order * wavelength / length


def gap_scaled_coupling(
    reference: Coupling, reference_gap: float, gap: float, decay_length: float
) -> Coupling:
    """
    Couplings at a different coupler gap.

    Cross-coupling amplitudes κ = √(1 − t²) follow κ(g) = κ(g_ref)·exp(−(g − g_ref)/δ).
    Gaps and decay length share one unit.
    """
    if decay_length <= 0:
        raise ConfigError("coupling decay length must be positive")
    scale = math.exp(-(gap - reference_gap) / decay_length)

    def rescale(t: float) -> float:
        kappa = math.sqrt(1.0 - t * t) * scale
        if kappa >= 1.0:
            raise ConfigError(
                f"gap {gap} too small for decay length {decay_length}: cross-coupling {kappa:.4f} >= 1"
            )
        return math.sqrt(1.0 - kappa * kappa)

    return Coupling(rescale(reference.t1), rescale(reference.t2), reference.a)


def build_ring(
    radius: float = 70.0,
    fsr: float = 0.96,
    fwhm: float = 0.13,
    wavelength: float = 880.0,
    lambda_ref: float | None = None,
    loss_a: float = DEFAULT_LOSS_A,
    te_gap: float = 180.0,
    tm_critical_gap: float = 340.0,
    tm_decay_length: float = 400.0,
    n_eff_guess: float = 1.70,
    critical: bool = True,
) -> RingParams:
    """
    Ring calibrated to a measured FSR/FWHM with a resonance at ``lambda_ref``.

    TE is critically coupled at the device gap (symmetric couplers if
    ``critical`` is False). The TM couplers would be
    critical at ``tm_critical_gap``; at the narrower device gap their
    cross-coupling grows exponentially, leaving TM over-coupled.
    """
    te, n_g = solve_couplings(fsr, fwhm, wavelength, radius, loss_a, critical=critical)
    tm = gap_scaled_coupling(te, tm_critical_gap, te_gap, tm_decay_length)
    anchor = wavelength if lambda_ref is None else lambda_ref
    n_eff = anchored_effective_index(radius, anchor, n_eff_guess)
    return RingParams(radius, n_g, n_eff, anchor, {"TE": te, "TM": tm})
