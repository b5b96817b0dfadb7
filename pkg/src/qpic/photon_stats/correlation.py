"""Start-multistop coincidence histograms and g² normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import ConfigError


@dataclass(frozen=True)
class CoincidenceHistogram:
    """
    Binned delays t2 − t1 between two tag streams.

    ``delays`` are bin centers [ps], symmetric about zero with a bin
    centered on zero delay. ``bin_width`` is in ps and ``duration`` in s.
    """

    bin_width: float
    delays: np.ndarray
    counts: np.ndarray
    total_singles: tuple[int, int]
    duration: float

    def __post_init__(self) -> None:
        if np.any(self.counts < 0):
            raise ConfigError("coincidence counts must be non-negative")
        if self.delays.shape != self.counts.shape:
            raise ConfigError("delays and counts must have the same length")

    @property
    def edges(self) -> np.ndarray:
        return np.append(self.delays - 0.5 * self.bin_width, self.delays[-1] + 0.5 * self.bin_width)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: CoincidenceHistogram) -> CoincidenceHistogram:
        if self.bin_width != other.bin_width or not np.array_equal(self.delays, other.delays):
            raise ConfigError("histograms with different binning cannot be added")
        n1 = self.total_singles[0] + other.total_singles[0]
        n2 = self.total_singles[1] + other.total_singles[1]
        return CoincidenceHistogram(
            self.bin_width, self.delays, self.counts + other.counts, (n1, n2), self.duration + other.duration
        )


def _binning(bin_ps: float, window_ns: float) -> tuple[float, int, float]:
    if not (bin_ps > 0 and window_ns > 0):
        raise ConfigError("bin width and window must be positive")
    b = bin_ps * 1e-3
    half = int(round(window_ns / b))
    if half < 1:
        raise ConfigError("window must span at least one bin on each side")
    return b, 2 * half + 1, -(half + 0.5) * b


def _bin_index(d: np.ndarray, e0: float, b: float) -> np.ndarray:
    return np.floor((d - e0) / b).astype(np.int64)


def _infer_duration(tags1: np.ndarray, tags2: np.ndarray) -> float:
    both = [t for t in (tags1, tags2) if t.size]
    if not both:
        return 0.0
    lo = min(t[0] for t in both)
    hi = max(t[-1] for t in both)
    return max(hi - lo, 0.0) * 1e-9


def _make(bin_ps, nb, counts, tags1, tags2, duration):
    half = nb // 2
    delays = np.arange(-half, half + 1) * float(bin_ps)
    if duration is None:
        duration = _infer_duration(tags1, tags2)
    return CoincidenceHistogram(float(bin_ps), delays, counts, (int(tags1.size), int(tags2.size)), float(duration))


def coincidence_histogram(
    tags1, tags2, bin_ps: float, window_ns: float, duration: float | None = None
) -> CoincidenceHistogram:
    """
    Histogram every pair (i, j) with delay t2[j] − t1[i] inside ±window.

    Tags are sorted times in ns. Candidate partners are located with
    ``searchsorted`` over a range one bin wider than the window; the bin
    of each candidate is then computed exactly as the brute-force counter
    does, so both agree pair for pair.
    """
    t1 = np.asarray(tags1, dtype=float)
    t2 = np.asarray(tags2, dtype=float)
    b, nb, e0 = _binning(bin_ps, window_ns)
    counts = np.zeros(nb, dtype=np.int64)
    if t1.size and t2.size:
        lo = np.searchsorted(t2, t1 + (e0 - b), side="left")
        hi = np.searchsorted(t2, t1 + (-e0 + b), side="right")
        span = hi - lo
        for k in range(int(span.max(initial=0))):
            sel = np.nonzero(span > k)[0]
            d = t2[lo[sel] + k] - t1[sel]
            idx = _bin_index(d, e0, b)
            idx = idx[(idx >= 0) & (idx < nb)]
            counts += np.bincount(idx, minlength=nb)
    return _make(bin_ps, nb, counts, t1, t2, duration)


def brute_force_histogram(
    tags1, tags2, bin_ps: float, window_ns: float, duration: float | None = None
) -> CoincidenceHistogram:
    """O(N1·N2) reference counter over all pairs."""
    t1 = np.asarray(tags1, dtype=float)
    t2 = np.asarray(tags2, dtype=float)
    b, nb, e0 = _binning(bin_ps, window_ns)
    counts = np.zeros(nb, dtype=np.int64)
    for ti in t1:
        for tj in t2:
            i = int(_bin_index(np.array([tj - ti]), e0, b)[0])
            if 0 <= i < nb:
                counts[i] += 1
    return _make(bin_ps, nb, counts, t1, t2, duration)


@dataclass(frozen=True)
class G2Curve:
    delays: np.ndarray  # ps
    g2: np.ndarray
    counts: np.ndarray | None = None
    norm: float | None = None  # counts per unit g² in each bin


def normalize_g2(hist: CoincidenceHistogram) -> G2Curve:
    """Coincidences divided by the uncorrelated expectation N1·N2·Δt/T."""
    n1, n2 = hist.total_singles
    if n1 == 0 or n2 == 0 or hist.duration <= 0:
        raise ConfigError("normalization needs non-zero singles and a positive duration")
    norm = n1 * n2 * (hist.bin_width * 1e-12) / hist.duration
    return G2Curve(hist.delays.copy(), hist.counts / norm, hist.counts.copy(), norm)


def zero_delay_g2(curve: G2Curve, half_width_ps: float | None = None) -> tuple[float, float]:
    """
    Mean g² over the bins within ``half_width_ps`` of zero, with its Poisson error.

    Defaults to the single zero-delay bin.
    """
    if half_width_ps is None:
        sel = np.array([int(np.argmin(np.abs(curve.delays)))])
    else:
        sel = np.nonzero(np.abs(curve.delays) <= half_width_ps)[0]
    if curve.counts is None or curve.norm is None:
        return float(np.mean(curve.g2[sel])), float("nan")
    c = float(curve.counts[sel].sum())
    n = sel.size * curve.norm
    return c / n, max(np.sqrt(c), 1.0) / n


@dataclass(frozen=True)
class FlatnessTest:
    chi2: float
    dof: int
    p_value: float

    def passes(self, alpha: float = 0.01) -> bool:
        return self.p_value > alpha


def flatness_test(hist: CoincidenceHistogram) -> FlatnessTest:
    """Pearson χ² of the counts against a constant level (Poisson errors)."""
    c = hist.counts.astype(float)
    mu = c.mean()
    if mu <= 0:
        raise ConfigError("flatness test needs at least one coincidence")
    chi2 = float(np.sum((c - mu) ** 2) / mu)
    dof = c.size - 1
    return FlatnessTest(chi2, dof, float(stats.chi2.sf(chi2, dof)))
