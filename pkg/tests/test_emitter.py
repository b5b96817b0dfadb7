import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpic.emitter import (
    BackgroundSource,
    EmitterLine,
    SourceCoupling,
    background_spectrum,
    component_spectra,
    default_lines,
    directed_spectrum,
    line_center,
    line_spectrum,
    polarization_weight,
    source_spectrum,
)
from qpic.errors import ConfigError
from qpic.tuning import TuningCalibration, emitter_shift

CAL = TuningCalibration()


def lorentz_fraction(half_window, fwhm):
    # share of a Lorentzian's area within ±half_window of its center
    return 2 / math.pi * math.atan(2 * half_window / fwhm)


def test_line_integrates_to_rate():
    line = EmitterLine("T", 880.0, 0.01, 2.0e5)
    g = np.linspace(879.0, 881.0, 400001)
    total = np.trapezoid(line_spectrum(line, g), g)
    assert total == pytest.approx(2.0e5 * lorentz_fraction(1.0, 0.01), rel=1e-6)


def test_line_peak_and_width():
    line = EmitterLine("T", 880.0, 0.02, 1.0)
    peak = line_spectrum(line, np.array([880.0]))[0]
    assert peak == pytest.approx(2 / (math.pi * 0.02))
    half = line_spectrum(line, np.array([880.01]))[0]
    assert half == pytest.approx(peak / 2)


def test_line_follows_emitter_shift():
    line = EmitterLine("T", 880.0, 0.002, 1.0)
    assert line_center(line, 12.5, CAL) == pytest.approx(880.0 + emitter_shift(CAL, 12.5))
    assert line_center(line, 12.5) == 880.0
    g = np.linspace(880.0, 880.5, 50001)
    dens = line_spectrum(line, g, 12.5, CAL)
    assert g[np.argmax(dens)] == pytest.approx(line_center(line, 12.5, CAL), abs=1e-5)


def test_bulk_background_integrates_to_rate():
    bg = BackgroundSource("bulk_inp", 830.0, 35.0, 1e6)
    g = np.linspace(500.0, 950.0, 90001)
    assert np.trapezoid(background_spectrum(bg, g), g) == pytest.approx(1e6, rel=1e-9)


def test_bulk_background_width():
    bg = BackgroundSource("bulk_inp", 830.0, 35.0, 1.0)
    g = np.array([830.0, 847.5])
    d = background_spectrum(bg, g)
    assert d[1] == pytest.approx(d[0] / 2)


def test_pump_delta_integrates_to_rate():
    bg = BackgroundSource("pump", 532.0, 0.0, 5e9)
    g = np.linspace(500.0, 600.0, 1001)
    dens = background_spectrum(bg, g)
    assert np.count_nonzero(dens) == 1
    assert np.trapezoid(dens, g) == pytest.approx(5e9)


def test_pump_outside_grid_contributes_nothing():
    bg = BackgroundSource("pump", 532.0, 0.0, 5e9)
    g = np.linspace(800.0, 900.0, 11)
    assert not np.any(background_spectrum(bg, g))


def test_polarization_split_conserves_total():
    lines = [EmitterLine("T", 880.0, 0.01, 1e5, te_fraction=0.7)]
    bgs = [BackgroundSource("bulk_inp", 830.0, 35.0, 1e6, te_fraction=0.4)]
    g = np.linspace(860.0, 900.0, 2001)
    te = source_spectrum(lines, bgs, g, pol="TE")
    tm = source_spectrum(lines, bgs, g, pol="TM")
    both = source_spectrum(lines, bgs, g, pol="both")
    np.testing.assert_allclose(te + tm, both, rtol=1e-12)


def test_component_spectra_sum_to_total():
    g = np.linspace(870.0, 890.0, 2001)
    bgs = [BackgroundSource("bulk_inp", 830.0, 35.0, 1e6)]
    comps = component_spectra(default_lines(), bgs, g)
    assert [name for name, _ in comps] == ["T", "X", "bulk_inp"]
    np.testing.assert_allclose(sum(d for _, d in comps), source_spectrum(default_lines(), bgs, g))


def test_polarization_weight_errors():
    assert polarization_weight(0.3, None) == 1.0
    with pytest.raises(ConfigError):
        polarization_weight(0.3, "XY")


def test_source_coupling_ratio_and_bounds():
    c = SourceCoupling()
    assert c.forward_efficiency / c.backward_efficiency == pytest.approx(0.75)
    assert c.backward_efficiency == pytest.approx(0.24)
    with pytest.raises(ConfigError):
        SourceCoupling(0.6, 0.5)
    with pytest.raises(ConfigError):
        c.efficiency("sideways")
    np.testing.assert_allclose(directed_spectrum(np.ones(3), c, "backward"), 0.24)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"linewidth_fwhm": 0.0},
        {"emission_rate": -1.0},
        {"g2_intrinsic": 1.5},
        {"te_fraction": -0.1},
        {"lifetime": 0.0},
    ],
)
def test_line_validation(kwargs):
    base = {"label": "T", "center_wavelength": 880.0, "linewidth_fwhm": 0.01, "emission_rate": 1.0}
    base.update(kwargs)
    with pytest.raises(ConfigError):
        EmitterLine(**base)


def test_background_validation():
    with pytest.raises(ConfigError):
        BackgroundSource("laser", 532.0, 0.0, 1.0)
    with pytest.raises(ConfigError):
        BackgroundSource("bulk_inp", 830.0, 0.0, 1.0)
    with pytest.raises(ConfigError):
        BackgroundSource("pump", 532.0, 0.0, -1.0)


def test_json_round_trips():
    for line in default_lines():
        assert EmitterLine.from_dict(line.to_dict()) == line
    bg = BackgroundSource("bulk_inp", 830.0, 35.0, 1e6, 0.5, label="nw")
    assert BackgroundSource.from_dict(bg.to_dict()) == bg
    assert SourceCoupling.from_dict(SourceCoupling().to_dict()) == SourceCoupling()
    with pytest.raises(ConfigError):
        EmitterLine.from_dict({"label": "T"})


@settings(max_examples=50, deadline=None)
@given(center=st.floats(850, 910), fwhm=st.floats(0.001, 0.5), rate=st.floats(0, 1e7))
def test_line_density_non_negative_and_symmetric(center, fwhm, rate):
    line = EmitterLine("L", center, fwhm, rate)
    d = np.linspace(0, 3 * fwhm, 7)
    left = line_spectrum(line, center - d)
    right = line_spectrum(line, center + d)
    assert np.all(left >= 0)
    np.testing.assert_allclose(left, right, rtol=1e-9)
