"""Numerical helpers for measuring and fitting spectral peaks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .errors import NumericalError


def half_max_width(x: np.ndarray, y: np.ndarray) -> float:
    """
    Full width at half maximum of the highest peak in ``y``.

    Half-maximum crossings are located by linear interpolation. The peak
    must fall to half its height on both sides within the sampled range.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    half = 0.5 * y[i]
    left = np.nonzero(y[:i] < half)[0]
    right = np.nonzero(y[i:] < half)[0]
    if left.size == 0 or right.size == 0:
        raise NumericalError("peak does not reach half maximum inside the scanned range")
    j = left[-1]
    k = i + right[0]
    x_left = np.interp(half, [y[j], y[j + 1]], [x[j], x[j + 1]])
    x_right = np.interp(half, [y[k], y[k - 1]], [x[k], x[k - 1]])
    return float(x_right - x_left)


def local_minima(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Parabola-refined positions of interior local minima of ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    idx = np.nonzero((y[1:-1] < y[:-2]) & (y[1:-1] <= y[2:]))[0] + 1
    out = []
    for i in idx:
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        denom = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        out.append(x[i] + shift * (x[i + 1] - x[i]))
    return np.array(out)


def lorentzian(x, amplitude, center, fwhm, offset):
    hw = 0.5 * fwhm
    return amplitude * hw * hw / ((x - center) ** 2 + hw * hw) + offset


@dataclass(frozen=True)
class LorentzianFit:
    amplitude: float
    center: float
    fwhm: float
    offset: float
    r_squared: float


def fit_lorentzian(x: np.ndarray, y: np.ndarray) -> LorentzianFit:
    """Least-squares Lorentzian-plus-offset fit; returns parameters and R²."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    base = float(np.min(y))
    p0 = [y[i] - base, x[i], max(_guess_width(x, y), np.ptp(x) / 50), base]
    try:
        popt, _ = curve_fit(lorentzian, x, y, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        raise NumericalError(f"Lorentzian fit did not converge: {exc}") from None
    resid = y - lorentzian(x, *popt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return LorentzianFit(float(popt[0]), float(popt[1]), abs(float(popt[2])), float(popt[3]), r2)


def _guess_width(x, y):
    try:
        return half_max_width(x, y - np.min(y))
    except NumericalError:
        return np.ptp(x) / 10
