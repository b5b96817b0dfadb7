"""
Thermo-optic tuning of the ring and of the quantum-dot emission.

The heater blue-shifts the ring (negative thermo-optic cladding) and, by
warming the chip, red-shifts the emitter. Both follow Joule heating, so
the ring shift and the emitter temperature rise are quadratic in the
heater voltage. The emitter wavelength follows a Varshni-type law in
temperature, Δλ(T) = A·T²/(T + B).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import brentq

from .errors import ConfigError, NumericalError
from .ring import RingParams, free_spectral_range, nearest_resonance, next_resonance_above

# 15 V shifts the ring by 120% of a 0.96 nm FSR
DEFAULT_RING_COEFF = 1.2 * 0.96 / 15.0**2
# 12.5 V heats the emitter from 5 K to 35 K
DEFAULT_TEMP_COEFF = 30.0 / 12.5**2
ALIGN_TOL = 1e-3

_JSON_KEYS = {
    "heater_ohms": "heater_resistance",
    "ring_nm_per_v2": "ring_shift_coeff",
    "base_k": "base_temperature",
    "temp_k_per_v2": "temp_coeff",
    "varshni_a": "varshni_a",
    "varshni_b": "varshni_b",
    "max_v": "max_voltage",
}


@dataclass(frozen=True)
class TuningCalibration:
    """
    Heater and tuning-law constants.

    Parameters
    ----------
    heater_resistance : float
        Heater resistance [Ω].
    ring_shift_coeff : float
        Ring blue shift per V² [nm/V²]; applied shift is −k·V².
    base_temperature : float
        Cryostat temperature [K].
    temp_coeff : float
        Emitter temperature rise per V² [K/V²].
    varshni_a : float
        Emitter shift scale [nm/K].
    varshni_b : float
        Emitter shift temperature scale [K].
    max_voltage : float
        Upper bound of the safe operating range [V].
    """

    heater_resistance: float = 2800.0
    ring_shift_coeff: float = DEFAULT_RING_COEFF
    base_temperature: float = 5.0
    temp_coeff: float = DEFAULT_TEMP_COEFF
    varshni_a: float = 0.06
    varshni_b: float = 250.0
    max_voltage: float = 15.0

    def __post_init__(self) -> None:
        if not self.heater_resistance > 0:
            raise ConfigError("heater resistance must be positive")
        if self.ring_shift_coeff < 0 or self.temp_coeff < 0:
            raise ConfigError("tuning coefficients must be non-negative")
        if not self.base_temperature > 0:
            raise ConfigError("base temperature must be positive")
        if self.varshni_a <= 0 or self.varshni_b <= 0:
            raise ConfigError("Varshni constants must be positive")
        if not self.max_voltage > 0:
            raise ConfigError("max voltage must be positive")

    def to_dict(self) -> dict:
        fields = asdict(self)
        return {key: fields[attr] for key, attr in _JSON_KEYS.items()}

    @classmethod
    def from_dict(cls, data: Mapping) -> TuningCalibration:
        unknown = set(data) - set(_JSON_KEYS)
        if unknown:
            raise ConfigError(f"unknown tuning keys: {sorted(unknown)}")
        return cls(**{_JSON_KEYS[k]: float(v) for k, v in data.items()})


def _check_voltage(cal: TuningCalibration, voltage: ArrayLike) -> np.ndarray:
    v = np.asarray(voltage, dtype=float)
    if np.any(~((v >= 0) & (v <= cal.max_voltage))):
        raise ConfigError(f"voltage outside [0, {cal.max_voltage}] V: {voltage}")
    return v


def _out(v: np.ndarray):
    return v if v.ndim else float(v)


def heater_power(cal: TuningCalibration, voltage: ArrayLike):
    """Joule power V²/R [W]."""
    v = np.asarray(voltage, dtype=float)
    return _out(v * v / cal.heater_resistance)


def ring_shift(cal: TuningCalibration, voltage: ArrayLike):
    """Ring resonance shift [nm], ≤ 0."""
    v = _check_voltage(cal, voltage)
    return _out(-cal.ring_shift_coeff * v * v)


def emitter_temperature(cal: TuningCalibration, voltage: ArrayLike):
    """Emitter temperature [K] at heater ``voltage``."""
    v = _check_voltage(cal, voltage)
    return _out(cal.base_temperature + cal.temp_coeff * v * v)


def varshni_shift(cal: TuningCalibration, temperature: ArrayLike):
    """Absolute Varshni term A·T²/(T + B) [nm]."""
    t = np.asarray(temperature, dtype=float)
    return _out(cal.varshni_a * t * t / (t + cal.varshni_b))


def varshni_slope(cal: TuningCalibration, temperature: ArrayLike):
    """dΔλ/dT [nm/K]."""
    t = np.asarray(temperature, dtype=float)
    b = cal.varshni_b
    return _out(cal.varshni_a * t * (t + 2 * b) / (t + b) ** 2)


def emitter_shift(cal: TuningCalibration, voltage: ArrayLike):
    """Emitter red shift [nm] relative to its wavelength at base temperature."""
    temp = np.asarray(emitter_temperature(cal, voltage))
    return _out(np.asarray(varshni_shift(cal, temp)) - varshni_shift(cal, cal.base_temperature))


def detuning_rate(cal: TuningCalibration, voltage: float) -> float:
    """d(λ_emitter − λ_resonance)/dV [nm/V]; both mechanisms add."""
    v = float(_check_voltage(cal, voltage))
    ring_rate = 2.0 * cal.ring_shift_coeff * v
    emitter_rate = float(varshni_slope(cal, emitter_temperature(cal, v))) * 2.0 * cal.temp_coeff * v
    return ring_rate + emitter_rate


def alignment_residual(ring: RingParams, cal: TuningCalibration, line_wavelength: float, voltage: float) -> float:
    """Signed distance [nm] from the shifted line to the nearest shifted resonance."""
    line = line_wavelength + emitter_shift(cal, voltage)
    shift = ring_shift(cal, voltage)
    # resonances of the shifted ring sit at λ_m + shift
    return line - (nearest_resonance(ring, line - shift) + shift)


def align_voltage(
    ring: RingParams,
    cal: TuningCalibration,
    line_wavelength: float,
    pol: str = "TE",
    tol: float = ALIGN_TOL,
) -> float:
    """
    Lowest heater voltage that puts ``line_wavelength`` on a ring resonance.

    The ring moves blue and the emitter moves red, so the line can only
    meet the first resonance on its red side. The detuning against that
    resonance is monotone in voltage and is bracketed on [0, max_voltage].
    """
    ring.coupling(pol)
    target = next_resonance_above(ring, line_wavelength)

    def detuning(v: float) -> float:
        return (line_wavelength + emitter_shift(cal, v)) - (target + ring_shift(cal, v))

    d0 = detuning(0.0)
    if abs(d0) < 1e-9:
        return 0.0
    d1 = detuning(cal.max_voltage)
    if d1 < 0:
        raise NumericalError(
            f"no alignment voltage in [0, {cal.max_voltage}] V: residual detuning "
            f"{d0:+.4f} nm at 0 V and {d1:+.4f} nm at {cal.max_voltage} V"
        )
    v = brentq(detuning, 0.0, cal.max_voltage, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    residual = alignment_residual(ring, cal, line_wavelength, v)
    if abs(residual) >= tol:
        raise NumericalError(f"alignment residual {residual:.2e} nm exceeds {tol} nm")
    return float(v)


def tuning_coverage(ring: RingParams, cal: TuningCalibration, wavelength: float) -> float:
    """|ring shift at max voltage| as a fraction of the FSR."""
    return abs(ring_shift(cal, cal.max_voltage)) / free_spectral_range(ring, wavelength)


def fit_varshni(t1: float, shift1: float, t2: float, shift2: float, base: float) -> tuple[float, float]:
    """
    Varshni constants (A, B) through two (temperature, shift) anchors.

    Shifts are relative to ``base``. Solves for B by bracketing on the
    ratio shift1/shift2, which is independent of A.
    """
    def rel(b: float, t: float) -> float:
        return t * t / (t + b) - base * base / (base + b)

    target = shift1 / shift2
    f = lambda b: rel(b, t1) / rel(b, t2) - target  # noqa: E731
    lo, hi = 1e-6, 1e6
    if f(lo) * f(hi) > 0:
        raise NumericalError("Varshni anchors are not consistent with a positive B")
    b = brentq(f, lo, hi, xtol=1e-10)
    a = shift2 / rel(b, t2)
    if not (a > 0 and math.isfinite(a)):
        raise NumericalError(f"Varshni fit produced A = {a}")
    return a, b
