import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from qpic.errors import ConfigError, NumericalError
from qpic.photon_stats import (
    G2Curve,
    background_corrected_g2,
    convolved_dip,
    dip_reduction_factor,
    fit_g2,
    predict_measured_g2,
    signal_fraction_for_g2,
    synthetic_g2_curve,
)

SIGMA = math.hypot(150.0, 150.0)
DELAYS = np.arange(-100, 101) * 50.0


def _quad_dip(tau, tau_c, sigma):
    def f(s):
        return math.exp(-abs(tau - s) / tau_c) * math.exp(-0.5 * (s / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))

    return quad(f, -12 * sigma, 12 * sigma, points=[tau], limit=400, epsabs=1e-14)[0]


@pytest.mark.parametrize("tau", [0.0, 100.0, -350.0, 2000.0])
@pytest.mark.parametrize("tau_c,sigma", [(424.0, 212.0), (100.0, 300.0), (1000.0, 10.0), (20.0, 400.0)])
def test_convolved_dip_matches_quadrature(tau, tau_c, sigma):
    assert convolved_dip(tau, tau_c, sigma) == pytest.approx(_quad_dip(tau, tau_c, sigma), rel=1e-7, abs=1e-12)


def test_reduction_factor_is_zero_delay_convolution():
    for tau_c, sigma in [(424.0, 212.0), (50.0, 500.0)]:
        assert dip_reduction_factor(tau_c, sigma) == pytest.approx(_quad_dip(0.0, tau_c, sigma), rel=1e-8)
    assert dip_reduction_factor(100.0, 0.0) == 1.0
    with pytest.raises(ConfigError):
        dip_reduction_factor(0.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(tau_c=st.floats(1.0, 1e4), sigma=st.floats(0.0, 1e4))
def test_reduction_factor_bounds(tau_c, sigma):
    f = dip_reduction_factor(tau_c, sigma)
    assert 0.0 < f <= 1.0
    assert dip_reduction_factor(tau_c, sigma * 1.5 + 1.0) <= f


def test_convolved_dip_stable_far_out():
    v = convolved_dip(np.array([0.0, 1e4, 1e6]), 1.0, 500.0)
    assert np.all(np.isfinite(v))
    assert v[2] == 0.0


def test_zero_jitter_raw_equals_corrected():
    fit = fit_g2(synthetic_g2_curve(0.2, 400.0, 0.0, DELAYS), 0.0)
    assert fit.g2_raw == pytest.approx(fit.g2_corrected, abs=1e-12)
    assert fit.g2_corrected == pytest.approx(0.2, abs=1e-6)
    assert fit.tau_c == pytest.approx(400.0, rel=1e-5)


@pytest.mark.parametrize("g0,lo,hi", [(0.13, 0.36, 0.42), (0.40, 0.55, 0.61)])
def test_noiseless_raw_windows(g0, lo, hi):
    fit = fit_g2(synthetic_g2_curve(g0, 2 * SIGMA, SIGMA, DELAYS), SIGMA)
    assert fit.g2_corrected == pytest.approx(g0, abs=1e-6)
    assert lo <= fit.g2_raw <= hi
    assert (1 - fit.g2_raw) / (1 - fit.g2_corrected) == pytest.approx(fit.dip_factor, rel=1e-9)


@pytest.mark.parametrize("g0", [0.0, 0.13, 0.4, 0.7])
def test_noisy_fit_recovers_parameters(g0):
    curve = synthetic_g2_curve(g0, 424.0, SIGMA, DELAYS, counts_per_bin=2000, seed=5)
    fit = fit_g2(curve, SIGMA)
    assert fit.g2_corrected == pytest.approx(g0, abs=4 * fit.uncertainties["g2_corrected"] + 1e-3)
    assert fit.baseline == pytest.approx(1.0, abs=0.01)
    assert 0.5 < fit.residual < 2.0


@pytest.mark.slow
def test_uncertainty_coverage():
    g0 = 0.13
    true_raw = 1 - (1 - g0) * dip_reduction_factor(424.0, SIGMA)
    hits = hits_raw = 0
    for seed in range(100):
        fit = fit_g2(synthetic_g2_curve(g0, 424.0, SIGMA, DELAYS, counts_per_bin=500, seed=seed), SIGMA)
        hits += abs(fit.g2_corrected - g0) <= 2 * fit.uncertainties["g2_corrected"]
        hits_raw += abs(fit.g2_raw - true_raw) <= 2 * fit.uncertainties["g2_raw"]
    assert hits >= 90
    assert hits_raw >= 90


def test_fit_to_dict_is_json_safe():
    fit = fit_g2(synthetic_g2_curve(0.3, 300.0, 100.0, DELAYS), 100.0)
    d = fit.to_dict()
    assert set(d) == {"g2_raw", "g2_corrected", "tau_c_ps", "sigma_ps", "baseline", "uncertainties", "residual"}
    assert d["sigma_ps"] == 100.0


def test_fit_errors():
    with pytest.raises(ConfigError):
        fit_g2(synthetic_g2_curve(0.1, 300.0, 0.0, DELAYS[:10]), 0.0)
    with pytest.raises(ConfigError):
        fit_g2(synthetic_g2_curve(0.1, 300.0, 0.0, DELAYS), -1.0)
    bad = G2Curve(DELAYS, np.full(DELAYS.size, np.nan))
    with pytest.raises(NumericalError, match="residual"):
        fit_g2(bad, 0.0)


def test_mixture_law():
    assert predict_measured_g2(0.0, 1.0) == 0.0
    assert predict_measured_g2(0.0, 0.0) == 1.0
    assert predict_measured_g2(0.13, 0.8308) == pytest.approx(1 - 0.8308**2 * 0.87)
    with pytest.raises(ConfigError):
        background_corrected_g2(0.5, 0.0)


@settings(max_examples=200, deadline=None)
@given(g=st.floats(0.0, 1.0), rho=st.floats(0.05, 1.0))
def test_mixture_inverse(g, rho):
    meas = predict_measured_g2(g, rho)
    assert g <= meas + 1e-12 <= 1 + 1e-12
    assert background_corrected_g2(meas, rho) == pytest.approx(g, abs=1e-9)
    if g < 0.999:
        assert signal_fraction_for_g2(float(np.clip(meas, g, 1.0)), g) == pytest.approx(rho, abs=1e-6)


def test_signal_fraction_errors():
    with pytest.raises(ConfigError):
        signal_fraction_for_g2(1.2)
    with pytest.raises(ConfigError):
        signal_fraction_for_g2(1.0, 1.0)
