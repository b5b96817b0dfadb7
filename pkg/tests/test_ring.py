import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpic.errors import ConfigError
from qpic.ring import (
    anchored_effective_index,
    Coupling,
    RingParams,
    build_ring,
    drop_transmission,
    finesse,
    free_spectral_range,
    gap_scaled_coupling,
    is_critically_coupled,
    nearest_resonance,
    next_resonance_above,
    resonance_fwhm,
    round_trip_for_finesse,
    solve_couplings,
    through_transmission,
)
from qpic.analysis import half_max_width, local_minima

# high-precision values from a separate mpmath computation
NG_CAL = 1.83407124896374625
X_CAL = 0.65555080791405473
T1_CAL = 0.80966092156782195
T2_CAL = 0.81783931471497167
FSR_NG_183 = 0.96213573716130951
SCANNED_FWHM = 0.13100085457171540
SCANNED_SPACING = 0.96104841645431380
TM_T1 = 0.48312961534826763
TM_T2 = 0.51287125528843765


def simple_ring(t1=0.9, t2=0.9, a=0.99, ng=1.83, radius=70.0, lam_ref=880.0):
    c = Coupling(t1, t2, a)
    # n_eff chosen so that lam_ref is exactly on resonance
    n_eff = anchored_effective_index(radius, lam_ref, 1.7)
    return RingParams(radius, ng, n_eff, lam_ref, {"TE": c, "TM": c})


@pytest.fixture(scope="module")
def calibrated_ring():
    return build_ring(lambda_ref=880.0)


def test_coupling_validation():
    with pytest.raises(ConfigError):
        Coupling(1.2, 0.5)
    with pytest.raises(ConfigError):
        Coupling(0.5, 0.5, 0.0)


def test_ring_validation():
    with pytest.raises(ConfigError):
        RingParams(-1.0, 1.8, 1.7, 880.0, {"TE": Coupling(0.9, 0.9)})
    with pytest.raises(ConfigError):
        RingParams(70.0, 0.9, 1.7, 880.0, {"TE": Coupling(0.9, 0.9)})


def test_missing_polarization_is_config_error():
    ring = RingParams(70.0, 1.83, 1.7, 880.0, {"TE": Coupling(0.9, 0.9)})
    with pytest.raises(ConfigError):
        through_transmission(ring, 880.0, "TM")


def test_critical_coupling_on_resonance_is_zero():
    ring = simple_ring(t1=0.8 * 0.99, t2=0.8, a=0.99)
    assert through_transmission(ring, 880.0) == pytest.approx(0.0, abs=1e-12)


def test_uncoupled_ring_is_transparent():
    ring = simple_ring(t1=1.0, t2=1.0, a=0.95)
    lam = np.linspace(879, 881, 101)
    np.testing.assert_allclose(through_transmission(ring, lam), 1.0)
    np.testing.assert_allclose(drop_transmission(ring, lam), 0.0, atol=1e-15)


def test_lossless_symmetric_full_transfer():
    ring = simple_ring(t1=0.8, t2=0.8, a=1.0)
    assert drop_transmission(ring, 880.0) == pytest.approx(1.0, rel=1e-12)


def test_fsr_examples():
    ring = simple_ring(ng=1.83)
    assert free_spectral_range(ring, 880.0) == pytest.approx(FSR_NG_183, rel=1e-12)
    assert free_spectral_range(simple_ring(ng=3.66), 880.0) == pytest.approx(FSR_NG_183 / 2, rel=1e-12)
    assert free_spectral_range(ring, 1760.0) == pytest.approx(4 * FSR_NG_183, rel=1e-12)


def test_fsr_matches_scanned_spacing(calibrated_ring):
    lam = np.linspace(878.0, 882.5, 400001)
    minima = local_minima(lam, through_transmission(calibrated_ring, lam))
    spacing = np.diff(minima)
    i = np.argmin(np.abs(minima[:-1] - 880.0))
    assert spacing[i] == pytest.approx(SCANNED_SPACING, rel=1e-5)
    assert spacing[i] == pytest.approx(free_spectral_range(calibrated_ring, 880.0), rel=5e-3)


def test_solve_couplings_calibration_targets():
    c, ng = solve_couplings(0.96, 0.13, 880.0, 70.0, 0.99, critical=True)
    assert ng == pytest.approx(NG_CAL, rel=1e-12)
    assert c.round_trip == pytest.approx(X_CAL, rel=1e-12)
    assert c.t1 == pytest.approx(T1_CAL, rel=1e-12)
    assert c.t2 == pytest.approx(T2_CAL, rel=1e-12)
    assert c.t1 == pytest.approx(c.t2 * c.a, rel=1e-14)


def test_solve_couplings_lossless_symmetric():
    c, _ = solve_couplings(0.96, 0.13, 880.0, 70.0, 1.0, critical=True)
    assert c.t1 == pytest.approx(T1_CAL, rel=1e-12)
    assert c.t2 == pytest.approx(T1_CAL, rel=1e-12)


def test_solve_couplings_non_critical_symmetric():
    c, _ = solve_couplings(0.96, 0.13, 880.0, 70.0, 0.99, critical=False)
    assert c.t1 == c.t2
    assert c.round_trip == pytest.approx(X_CAL, rel=1e-12)


@pytest.mark.parametrize(
    "fsr, fwhm, a, match",
    [(0.96, 0.96, 0.99, "FSR"), (0.96, 1.2, 0.99, "FSR"), (0.96, -0.1, 0.99, "positive"), (0.96, 0.13, 1.5, "loss_a")],
)
def test_solve_couplings_infeasible(fsr, fwhm, a, match):
    with pytest.raises(ConfigError, match=match):
        solve_couplings(fsr, fwhm, 880.0, 70.0, a)


def test_solve_couplings_critical_needs_t2_below_one():
    # finesse 500 needs x ≈ 0.9937 > a² = 0.98
    with pytest.raises(ConfigError, match="t2"):
        solve_couplings(0.96, 0.96 / 500, 880.0, 70.0, 0.99, critical=True)


@pytest.mark.parametrize("fin", [2, 5, 7.4, 20, 50, 100, 200, 500])
def test_solve_couplings_round_trip_over_finesse(fin):
    fsr, fwhm = 0.96, 0.96 / fin
    c, ng = solve_couplings(fsr, fwhm, 880.0, 70.0, 1.0, critical=True)
    ring = RingParams(70.0, ng, 1.7, 880.0, {"TE": c})
    assert free_spectral_range(ring, 880.0) == pytest.approx(fsr, rel=5e-3)
    assert resonance_fwhm(ring, 880.0) == pytest.approx(fwhm, rel=5e-3)


def test_calibrated_ring_scanned_fwhm(calibrated_ring):
    res = nearest_resonance(calibrated_ring, 880.0)
    lam = np.linspace(res - 0.4, res + 0.4, 200001)
    width = half_max_width(lam, drop_transmission(calibrated_ring, lam))
    assert width == pytest.approx(SCANNED_FWHM, rel=1e-4)
    assert width == pytest.approx(0.13, abs=0.007)
    assert resonance_fwhm(calibrated_ring, 880.0) == pytest.approx(width, rel=0.02)


def test_fwhm_degenerate_raises():
    ring = simple_ring(t1=1.0, t2=1.0, a=1.0)
    with pytest.raises(ConfigError):
        resonance_fwhm(ring, 880.0)


def test_tm_overcoupled_and_broader(calibrated_ring):
    tm = calibrated_ring.coupling("TM")
    assert tm.t1 == pytest.approx(TM_T1, rel=1e-12)
    assert tm.t2 == pytest.approx(TM_T2, rel=1e-12)
    assert tm.t1 < tm.t2 * tm.a
    assert is_critically_coupled(calibrated_ring, "TE")
    assert not is_critically_coupled(calibrated_ring, "TM")
    assert resonance_fwhm(calibrated_ring, 880.0, "TM") > resonance_fwhm(calibrated_ring, 880.0, "TE")


def test_gap_scaling_identity():
    c = Coupling(0.8, 0.85, 0.99)
    same = gap_scaled_coupling(c, 200.0, 200.0, 300.0)
    assert same.t1 == pytest.approx(c.t1)
    assert same.t2 == pytest.approx(c.t2)


def test_nearest_resonance_examples(calibrated_ring):
    res = nearest_resonance(calibrated_ring, 880.0)
    fsr = free_spectral_range(calibrated_ring, res)
    assert res == pytest.approx(880.0, abs=1e-9)
    assert nearest_resonance(calibrated_ring, res + fsr / 4) == pytest.approx(res, abs=1e-9)
    # dense-scan oracle for the next order
    lam = np.linspace(res + 0.5 * fsr, res + 1.5 * fsr, 200001)
    scanned = lam[np.argmax(drop_transmission(calibrated_ring, lam))]
    assert nearest_resonance(calibrated_ring, res + 0.6 * fsr) == pytest.approx(scanned, abs=1e-5)


def test_next_resonance_above(calibrated_ring):
    res = nearest_resonance(calibrated_ring, 880.0)
    assert next_resonance_above(calibrated_ring, res) == pytest.approx(res)
    nxt = next_resonance_above(calibrated_ring, res + 1e-3)
    assert nxt > res
    assert nxt - res == pytest.approx(free_spectral_range(calibrated_ring, res), rel=5e-3)


def test_finesse_calibrated(calibrated_ring):
    assert finesse(calibrated_ring, 880.0) == pytest.approx(0.96 / 0.13, rel=1e-9)


def test_round_trip_for_finesse_inverts_formula():
    x = round_trip_for_finesse(0.96, 0.13)
    assert (1 - x) / math.sqrt(x) == pytest.approx(math.pi * 0.13 / 0.96)


def test_json_round_trip(calibrated_ring):
    back = RingParams.from_dict(calibrated_ring.to_dict())
    assert back == calibrated_ring


def test_from_dict_missing_key():
    with pytest.raises(ConfigError):
        RingParams.from_dict({"radius_um": 70.0})


unit = st.floats(0.05, 1.0)


@settings(max_examples=200, deadline=None)
@given(t1=unit, t2=unit, a=unit, lam=st.floats(500.0, 1100.0))
def test_energy_bound(t1, t2, a, lam):
    ring = simple_ring(t1, t2, a)
    total = through_transmission(ring, lam) + drop_transmission(ring, lam)
    assert 0.0 <= through_transmission(ring, lam) <= 1.0 + 1e-12
    assert total <= 1.0 + 1e-12


def test_energy_bound_many_draws():
    rng = np.random.default_rng(0)
    n = 10_000
    t1, t2 = rng.uniform(0.05, 1.0, (2, n))
    a = rng.uniform(0.05, 1.0, n)
    a[: n // 4] = 1.0
    lam = rng.uniform(800.0, 960.0, n)
    totals = np.empty(n)
    for i in range(n):
        ring = simple_ring(t1[i], t2[i], a[i])
        totals[i] = through_transmission(ring, lam[i]) + drop_transmission(ring, lam[i])
    assert np.all(totals <= 1 + 1e-12)
    lossless = a == 1.0
    np.testing.assert_allclose(totals[lossless], 1.0, atol=1e-12)
    assert np.all(totals[~lossless] < 1.0)


@settings(max_examples=100, deadline=None)
@given(t2=st.floats(0.3, 0.999), a=st.floats(0.5, 1.0))
def test_critical_null_property(t2, a):
    ring = simple_ring(t1=t2 * a, t2=t2, a=a)
    assert through_transmission(ring, 880.0) < 1e-9


@settings(max_examples=50, deadline=None)
@given(offset=st.floats(-0.45, 0.45))
def test_periodicity(offset):
    ring = build_ring(lambda_ref=880.0)
    res = nearest_resonance(ring, 880.0)
    fsr = free_spectral_range(ring, res)
    lam = res + offset * fsr
    nxt = next_resonance_above(ring, res + 1e-6)
    # same fractional position within the adjacent order
    lam2 = nxt + offset * free_spectral_range(ring, nxt)
    assert abs(through_transmission(ring, lam) - through_transmission(ring, lam2)) < 1e-3


@settings(max_examples=60, deadline=None)
@given(fin=st.floats(2.0, 500.0), a=st.floats(0.999, 1.0))
def test_solve_round_trip_property(fin, a):
    c, ng = solve_couplings(0.96, 0.96 / fin, 880.0, 70.0, a, critical=fin < 300)
    ring = RingParams(70.0, ng, 1.7, 880.0, {"TE": c})
    assert resonance_fwhm(ring, 880.0) == pytest.approx(0.96 / fin, rel=5e-3)
