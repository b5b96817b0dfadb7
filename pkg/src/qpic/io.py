"""
CSV/JSON readers and writers and run manifests.

Floats are written with Python's shortest round-trip representation, so
every CSV reads back to bit-identical arrays.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .circuit import PortSpectra, SweepResult
from .errors import ConfigError
from .photon_stats.correlation import CoincidenceHistogram
from .tuning import TuningCalibration, emitter_shift, ring_shift

MANIFEST_SUFFIX = ".manifest.json"


def _fmt(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header: Sequence[str], columns: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(zip(*columns))


def _read_rows(path: str | Path, expected: Sequence[str] | None = None) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise ConfigError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if expected is not None and header != list(expected):
        raise ConfigError(f"{path}: expected header {','.join(expected)}, got {','.join(header)}")
    return header, body


def _column(body, i, dtype=float) -> np.ndarray:
    try:
        return np.array([dtype(r[i]) for r in body])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"malformed CSV row: {exc}") from None


# spectra


def write_spectra_csv(path: str | Path, spectra: PortSpectra) -> None:
    cols = [[_fmt(v) for v in a] for a in (spectra.grid, spectra.through, spectra.drop)]
    _write_rows(Path(path), ("wavelength_nm", "through", "drop"), cols)


def read_spectra_csv(path: str | Path) -> PortSpectra:
    _, body = _read_rows(path, ("wavelength_nm", "through", "drop"))
    return PortSpectra(_column(body, 0), _column(body, 1), _column(body, 2))


# sweeps


def write_sweep_csv(path: str | Path, sweep: SweepResult) -> None:
    header = ["voltage_v"]
    cols = [[_fmt(v) for v in sweep.voltages]]
    for label in sweep.labels:
        header += [f"{label}_drop", f"{label}_through"]
        cols += [[_fmt(v) for v in sweep.drop[label]], [_fmt(v) for v in sweep.through[label]]]
    _write_rows(Path(path), header, cols)


def read_sweep_csv(path: str | Path, cal: TuningCalibration | None = None) -> SweepResult:
    """Parse a sweep CSV; the detuning shift is recomputed from ``cal`` (defaults if omitted)."""
    header, body = _read_rows(path)
    if header[0] != "voltage_v" or len(header) % 2 != 1:
        raise ConfigError(f"{path}: not a sweep CSV")
    v = _column(body, 0)
    drop, thru = {}, {}
    for k in range(1, len(header), 2):
        label = header[k].removesuffix("_drop")
        if header[k] != f"{label}_drop" or header[k + 1] != f"{label}_through":
            raise ConfigError(f"{path}: unexpected columns {header[k]}, {header[k + 1]}")
        drop[label] = _column(body, k)
        thru[label] = _column(body, k + 1)
    cal = cal or TuningCalibration()
    shift = np.atleast_1d(np.asarray(emitter_shift(cal, v)) - np.asarray(ring_shift(cal, v)))
    return SweepResult(v, shift, drop, thru)


# time tags


def write_tags_csv(path: str | Path, tags1, tags2) -> None:
    """Both channels merged in time order; ties keep channel 1 first."""
    t = np.concatenate([np.asarray(tags1, float), np.asarray(tags2, float)])
    ch = np.concatenate([np.ones(len(tags1), dtype=int), np.full(len(tags2), 2, dtype=int)])
    order = np.lexsort((ch, t))
    _write_rows(Path(path), ("time_ns", "channel"), ([_fmt(x) for x in t[order]], ch[order].tolist()))


def read_tags_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    _, body = _read_rows(path, ("time_ns", "channel"))
    t = _column(body, 0)
    ch = _column(body, 1, int)
    if np.any((ch != 1) & (ch != 2)):
        raise ConfigError(f"{path}: channel must be 1 or 2")
    return t[ch == 1], t[ch == 2]


# histograms


def write_histogram_csv(path: str | Path, hist: CoincidenceHistogram) -> None:
    _write_rows(Path(path), ("delay_ps", "counts"), ([_fmt(d) for d in hist.delays], hist.counts.tolist()))


def histogram_metadata(hist: CoincidenceHistogram) -> dict:
    return {"bin_ps": hist.bin_width, "singles": list(hist.total_singles), "duration_s": hist.duration}


def read_histogram_csv(path: str | Path, metadata: Mapping | None = None) -> CoincidenceHistogram:
    """
    Parse a histogram CSV.

    Singles and duration come from ``metadata`` or, if omitted, from the
    ``histogram`` entry of the file's manifest sidecar when present.
    """
    _, body = _read_rows(path, ("delay_ps", "counts"))
    delays = _column(body, 0)
    counts = _column(body, 1, int)
    if metadata is None:
        side = Path(str(path) + MANIFEST_SUFFIX)
        metadata = json.loads(side.read_text()).get("histogram", {}) if side.exists() else {}
    if "bin_ps" in metadata:
        bin_ps = float(metadata["bin_ps"])
    elif delays.size > 1:
        bin_ps = float(delays[1] - delays[0])
    else:
        raise ConfigError(f"{path}: cannot infer the bin width")
    singles = tuple(int(s) for s in metadata.get("singles", (0, 0)))
    return CoincidenceHistogram(bin_ps, delays, counts, singles, float(metadata.get("duration_s", 0.0)))


# JSON and manifests


def write_json(path: str | Path, data: Mapping) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n")


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch and epoch.isdigit() else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def build_manifest(
    command: str,
    config_path: str | None,
    seed: int | None,
    outputs: Sequence[str],
    overrides: Mapping,
    extra: Mapping | None = None,
) -> dict:
    """
    Record of one CLI run.

    Output paths are stored as file names relative to the output
    directory so that reruns into different directories compare equal.
    The timestamp honours ``SOURCE_DATE_EPOCH``.
    """
    manifest = {
        "command": command,
        "config_path": config_path,
        "config_sha256": file_sha256(config_path) if config_path else None,
        "seed": seed,
        "outputs": [Path(p).name for p in outputs],
        "overrides": dict(overrides),
        "version": __version__,
        "timestamp": _timestamp(),
    }
    if extra:
        manifest.update(extra)
    return manifest


def write_manifests(outputs: Sequence[str | Path], manifest: Mapping) -> list[Path]:
    """Write ``manifest`` as a sidecar next to every output file."""
    written = []
    for out in outputs:
        side = Path(str(out) + MANIFEST_SUFFIX)
        write_json(side, manifest)
        written.append(side)
    return written
