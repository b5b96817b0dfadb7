"""
g² dip fitting with a Gaussian instrument response.

Model: g²(τ) = B·[1 − (1 − g0)·h(τ)], where h is exp(−|τ|/τ_c)
convolved with a zero-mean Gaussian of width σ. At zero delay the
convolution shrinks the dip depth by

    f(r) = exp(1/(2r²))·erfc(1/(√2·r)) = erfcx(1/(√2·r)),   r = τ_c/σ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import erfc, erfcx

from ..errors import ConfigError, NumericalError
from .correlation import G2Curve
from .simulation import make_rng

SQRT2 = math.sqrt(2.0)
MIN_BINS = 20


def dip_reduction_factor(tau_c: float, sigma: float) -> float:
    """Measured/true dip depth at τ = 0 for correlation time ``tau_c`` and IRF width ``sigma``."""
    if tau_c <= 0:
        raise ConfigError("correlation time must be positive")
    if sigma <= 0:
        return 1.0
    return float(erfcx(sigma / (SQRT2 * tau_c)))


def convolved_dip(tau, tau_c: float, sigma: float) -> np.ndarray:
    """exp(−|τ|/τ_c) convolved with a Gaussian of standard deviation ``sigma``."""
    u = np.abs(np.asarray(tau, dtype=float))
    if sigma <= 0:
        return np.exp(-u / tau_c)
    s, c = sigma, tau_c
    gauss = np.exp(-0.5 * (u / s) ** 2)
    b2 = (s / c + u / s) / SQRT2
    second = erfcx(b2) * gauss
    b1 = (s / c - u / s) / SQRT2
    with np.errstate(over="ignore", invalid="ignore"):
        first_pos = erfcx(np.maximum(b1, 0.0)) * gauss
        first_neg = np.exp(0.5 * (s / c) ** 2 - u / c) * erfc(b1)
    first = np.where(b1 >= 0, first_pos, first_neg)
    return 0.5 * (first + second)


def g2_model(tau, g0: float, tau_c: float, baseline: float, sigma: float) -> np.ndarray:
    return baseline * (1.0 - (1.0 - g0) * convolved_dip(tau, tau_c, sigma))


@dataclass(frozen=True)
class G2FitResult:
    """
    Fitted antibunching dip.

    ``g2_raw`` is the IRF-convolved model at τ = 0 relative to the fitted
    baseline; ``g2_corrected`` is the underlying dip value g0. Times in ps.
    """

    g2_raw: float
    g2_corrected: float
    tau_c: float
    sigma: float
    baseline: float
    uncertainties: dict = field(default_factory=dict)
    residual: float = float("nan")

    @property
    def dip_factor(self) -> float:
        """(1 − g2_raw)/(1 − g2_corrected), the IRF dip-reduction factor."""
        return dip_reduction_factor(self.tau_c, self.sigma)

    def to_dict(self) -> dict:
        def clean(x):
            return float(x) if math.isfinite(x) else None

        return {
            "g2_raw": clean(self.g2_raw),
            "g2_corrected": clean(self.g2_corrected),
            "tau_c_ps": clean(self.tau_c),
            "sigma_ps": clean(self.sigma),
            "baseline": clean(self.baseline),
            "uncertainties": {k: clean(v) for k, v in self.uncertainties.items()},
            "residual": clean(self.residual),
        }


def _initial_guess(x: np.ndarray, y: np.ndarray, sigma: float) -> list[float]:
    order = np.argsort(np.abs(x))
    outer = y[order[int(0.8 * x.size):]]
    base = float(np.median(outer)) if outer.size else float(np.max(y))
    base = base if base > 0 else 1.0
    center = float(np.mean(y[order[:3]])) / base
    depth = 1.0 - center
    tau = np.ptp(x) / 20.0
    if depth > 0.05:
        rel = (base - y) / (base * depth)
        beyond = np.abs(x)[rel < math.exp(-1)]
        if beyond.size:
            tau = max(float(beyond.min()), 1.0)
    tau = max(tau - sigma / 2.0, tau / 2.0)
    return [float(np.clip(center, 0.0, 1.5)), tau, base]


def fit_g2(curve: G2Curve, irf_sigma: float) -> G2FitResult:
    """
    Least-squares fit of the IRF-convolved dip model to a g² curve.

    With counts available the fit is Poisson-weighted: a first pass uses
    the observed counts as variances, a second pass the model's expected
    counts, excluding bins where the expectation is zero. Without counts
    every bin carries equal weight.

    Parameters
    ----------
    curve : G2Curve
        Delays in ps and normalized g².
    irf_sigma : float
        Standard deviation of the delay response [ps]; 0 disables the
        convolution.
    """
    x = np.asarray(curve.delays, dtype=float)
    y = np.asarray(curve.g2, dtype=float)
    if x.size < MIN_BINS:
        raise ConfigError(f"fit needs at least {MIN_BINS} bins, got {x.size}")
    if irf_sigma < 0:
        raise ConfigError("IRF width must be non-negative")

    def model(tau, g0, tau_c, baseline):
        return g2_model(tau, g0, tau_c, baseline, irf_sigma)

    p0 = _initial_guess(x, y, irf_sigma)
    bounds = ([0.0, 1e-3, 0.0], [2.0, 1e3 * max(np.ptp(x), 1.0), np.inf])
    weighted = curve.counts is not None and curve.norm
    sig = np.sqrt(np.maximum(curve.counts, 1.0)) / curve.norm if weighted else None
    mask = np.ones(x.size, dtype=bool)
    residual = float("nan")
    try:
        popt, pcov = curve_fit(model, x, y, p0=p0, sigma=sig, absolute_sigma=bool(weighted), bounds=bounds, maxfev=20000)
        if weighted:
            expected = model(x, *popt) * curve.norm
            mask = expected > 0
            sig = np.sqrt(expected[mask]) / curve.norm
            popt, pcov = curve_fit(
                model, x[mask], y[mask], p0=popt, sigma=sig, absolute_sigma=True, bounds=bounds, maxfev=20000
            )
    except (RuntimeError, ValueError) as exc:
        resid = y - model(x, *p0)
        residual = float(np.sum(resid**2))
        raise NumericalError(f"g2 fit did not converge (last residual {residual:.4g}): {exc}") from None

    resid = y[mask] - model(x[mask], *popt)
    dof = max(int(mask.sum()) - 3, 1)
    residual = float(np.sum((resid / sig) ** 2) / dof) if weighted else float(np.sum(resid**2) / dof)
    if not weighted:
        pcov = pcov  # curve_fit already scales by the residual variance

    g0, tau_c, baseline = (float(p) for p in popt)
    errs = np.sqrt(np.clip(np.diag(pcov), 0.0, np.inf))
    f = dip_reduction_factor(tau_c, irf_sigma)
    g2_raw = 1.0 - (1.0 - g0) * f
    # delta-method error on g2_raw from (g0, tau_c)
    h = 1e-6 * tau_c
    dfdt = (dip_reduction_factor(tau_c + h, irf_sigma) - dip_reduction_factor(tau_c - h, irf_sigma)) / (2 * h)
    grad = np.array([f, -(1.0 - g0) * dfdt])
    var_raw = float(grad @ pcov[:2, :2] @ grad)
    uncertainties = {
        "g2_raw": math.sqrt(var_raw) if var_raw >= 0 else float("nan"),
        "g2_corrected": float(errs[0]),
        "tau_c_ps": float(errs[1]),
        "baseline": float(errs[2]),
    }
    return G2FitResult(g2_raw, g0, tau_c, float(irf_sigma), baseline, uncertainties, residual)


def synthetic_g2_curve(
    g0: float,
    tau_c: float,
    sigma: float,
    delays,
    counts_per_bin: float | None = None,
    seed=None,
) -> G2Curve:
    """
    Model g² curve on ``delays`` [ps], optionally with Poisson counting noise.

    ``counts_per_bin`` is the expected coincidence count at g² = 1.
    """
    d = np.asarray(delays, dtype=float)
    g = g2_model(d, g0, tau_c, 1.0, sigma)
    if counts_per_bin is None:
        return G2Curve(d, g)
    counts = make_rng(seed).poisson(g * counts_per_bin)
    return G2Curve(d, counts / counts_per_bin, counts, float(counts_per_bin))


def predict_measured_g2(g_signal, rho):
    """g² measured when a fraction ``rho`` of photons come from the source and the rest are Poissonian."""
    return 1.0 + np.square(rho) * (np.asarray(g_signal) - 1.0)


def background_corrected_g2(g_measured, rho):
    """Invert :func:`predict_measured_g2` for the source's own g²."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0) or np.any(rho > 1):
        raise ConfigError("signal fraction must lie in (0, 1]")
    return 1.0 + (np.asarray(g_measured) - 1.0) / rho**2


def signal_fraction_for_g2(g_measured: float, g_signal: float = 0.0) -> float:
    """Signal fraction ρ that turns ``g_signal`` into ``g_measured``."""
    if not g_signal <= g_measured <= 1:
        raise ConfigError("need g_signal <= g_measured <= 1")
    if g_signal == 1:
        raise ConfigError("a Poissonian source has no defined signal fraction")
    return math.sqrt((1.0 - g_measured) / (1.0 - g_signal))
