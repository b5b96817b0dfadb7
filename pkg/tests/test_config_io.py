import json
from pathlib import Path

import numpy as np
import pytest

from qpic.circuit import port_spectra, qwdm_sweep
from qpic.config import (
    HBTSettings,
    config_from_dict,
    default_config,
    dump_config,
    load_config,
    qwdm_config,
)
from qpic.errors import ConfigError
from qpic.io import (
    MANIFEST_SUFFIX,
    build_manifest,
    histogram_metadata,
    read_histogram_csv,
    read_spectra_csv,
    read_sweep_csv,
    read_tags_csv,
    write_histogram_csv,
    write_json,
    write_manifests,
    write_spectra_csv,
    write_sweep_csv,
    write_tags_csv,
)
from qpic.photon_stats import coincidence_histogram

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("factory", [default_config, qwdm_config])
def test_config_round_trip(tmp_path, factory):
    cfg = factory()
    dump_config(cfg, tmp_path / "c.json")
    again = load_config(tmp_path / "c.json")
    assert again.to_dict() == cfg.to_dict()
    assert again == cfg


@pytest.mark.parametrize("name", ["default.json", "qwdm_two_dots.json", "single_dot.json"])
def test_shipped_configs_load(name):
    cfg = load_config(CONFIGS / name)
    assert cfg.circuit.emitters


def test_shipped_default_matches_builtin():
    assert load_config(CONFIGS / "default.json") == default_config()


def test_missing_blocks_take_defaults():
    cfg = config_from_dict({"hbt": {"duration_s": 0.5}})
    assert cfg.circuit == default_config().circuit
    assert cfg.hbt.duration_s == 0.5
    assert load_config(None) == default_config()


@pytest.mark.parametrize(
    "data",
    [
        {"rings": {}},
        {"hbt": {"speed": 1}},
        {"hbt": {"rate_cps": -1}},
        {"hbt": {"pol": "XY"}},
        {"hbt": {"detectors": [{}]}},
        [],
    ],
)
def test_bad_config_rejected(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_unreadable_or_invalid_config(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(bad)


def test_hbt_settings_round_trip():
    h = HBTSettings(rate_cps=1e5, line="X", pol="both")
    assert HBTSettings.from_dict(h.to_dict()) == h


def test_spectra_csv_bit_exact(tmp_path):
    cfg = default_config().circuit
    g = np.linspace(875.0, 885.0, 1001)
    ps = port_spectra(cfg, 3.3, g)
    write_spectra_csv(tmp_path / "s.csv", ps)
    back = read_spectra_csv(tmp_path / "s.csv")
    for a, b in ((ps.grid, back.grid), (ps.through, back.through), (ps.drop, back.drop)):
        np.testing.assert_array_equal(a, b)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "wavelength_nm,through,drop"


def test_sweep_csv_round_trip(tmp_path):
    cfg = qwdm_config()
    sweep = qwdm_sweep(cfg.circuit, np.linspace(0, 15, 31))
    write_sweep_csv(tmp_path / "w.csv", sweep)
    back = read_sweep_csv(tmp_path / "w.csv", cfg.circuit.tuning)
    np.testing.assert_array_equal(back.voltages, sweep.voltages)
    np.testing.assert_allclose(back.detuning_shift, sweep.detuning_shift, rtol=0, atol=1e-15)
    assert back.labels == sweep.labels
    for label in sweep.labels:
        np.testing.assert_array_equal(back.drop[label], sweep.drop[label])
        np.testing.assert_array_equal(back.through[label], sweep.through[label])


def test_tags_csv_round_trip(tmp_path):
    t1 = np.array([0.1, 5.0, 5.0, 1e9 / 3])
    t2 = np.array([5.0, 7.25])
    write_tags_csv(tmp_path / "t.csv", t1, t2)
    a, b = read_tags_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(a, t1)
    np.testing.assert_array_equal(b, t2)
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[2:5] == ["5.0,1", "5.0,1", "5.0,2"]


def test_histogram_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    t1 = np.sort(rng.uniform(0, 1e6, 2000))
    t2 = np.sort(rng.uniform(0, 1e6, 2000))
    h = coincidence_histogram(t1, t2, 50.0, 3.0, duration=1e-3)
    path = tmp_path / "h.csv"
    write_histogram_csv(path, h)
    write_manifests([path], build_manifest("hbt", None, 1, [path], {}, {"histogram": histogram_metadata(h)}))
    back = read_histogram_csv(path)
    np.testing.assert_array_equal(back.counts, h.counts)
    np.testing.assert_array_equal(back.delays, h.delays)
    assert back.total_singles == h.total_singles
    assert back.duration == h.duration and back.bin_width == h.bin_width
    bare = read_histogram_csv(path, metadata={})
    assert bare.bin_width == 50.0


@pytest.mark.parametrize(
    "text",
    ["", "a,b\n1,2\n", "time_ns,channel\n1.0,3\n", "time_ns,channel\nabc,1\n"],
)
def test_malformed_csv(tmp_path, text):
    p = tmp_path / "x.csv"
    p.write_text(text)
    with pytest.raises(ConfigError):
        read_tags_csv(p)


def test_json_rejects_nan(tmp_path):
    with pytest.raises(ValueError):
        write_json(tmp_path / "x.json", {"a": float("nan")})


def test_manifest_fields(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    cfg = tmp_path / "c.json"
    dump_config(default_config(), cfg)
    out = tmp_path / "o.csv"
    out.write_text("x\n")
    m = build_manifest("spectra", str(cfg), None, [out], {"voltage": 1.0})
    assert m["timestamp"] == "1970-01-01T00:00:00Z"
    assert m["outputs"] == ["o.csv"]
    assert len(m["config_sha256"]) == 64
    side = write_manifests([out], m)[0]
    assert side.name == "o.csv" + MANIFEST_SUFFIX
    assert json.loads(side.read_text()) == m

