"""
Monte-Carlo photon streams and detection.

Times are in ns, count rates in counts/s, durations in s. Every routine
takes ``seed`` as an int, a :class:`numpy.random.Generator` or None, so
a fixed seed reproduces identical arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

NS_PER_S = 1e9
EPOCH_CHUNK = 1 << 20


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector.

    ``jitter_sigma`` [ps] is the Gaussian timing response of this detector
    alone; a start-stop pair is broadened by the quadrature sum of both.
    """

    jitter_sigma: float = 150.0
    efficiency: float = 1.0
    dead_time: float = 0.0  # ns

    def __post_init__(self) -> None:
        if self.jitter_sigma < 0:
            raise ConfigError("detector jitter must be non-negative")
        if not 0 <= self.efficiency <= 1:
            raise ConfigError("detector efficiency must lie in [0, 1]")
        if self.dead_time < 0:
            raise ConfigError("dead time must be non-negative")

    def to_dict(self) -> dict:
        return {"jitter_ps": self.jitter_sigma, "efficiency": self.efficiency, "dead_time_ns": self.dead_time}

    @classmethod
    def from_dict(cls, data) -> DetectorModel:
        return cls(
            float(data.get("jitter_ps", 150.0)),
            float(data.get("efficiency", 1.0)),
            float(data.get("dead_time_ns", 0.0)),
        )


def pair_jitter(det1: DetectorModel, det2: DetectorModel) -> float:
    """Width [ps] of the delay response for a coincidence between two detectors."""
    return math.hypot(det1.jitter_sigma, det2.jitter_sigma)


@dataclass(frozen=True)
class TwoLevelEmitter:
    """
    Continuously pumped two-level emitter.

    Parameters
    ----------
    lifetime : float
        Radiative lifetime τ [ns].
    pump_rate : float
        Excitation rate W [1/ns].
    efficiency : float
        Probability that an emitted photon is kept (collection).
    """

    lifetime: float
    pump_rate: float
    efficiency: float = 1.0

    def __post_init__(self) -> None:
        if not (self.lifetime > 0 and self.pump_rate > 0):
            raise ConfigError("lifetime and pump rate must be positive")
        if not 0 < self.efficiency <= 1:
            raise ConfigError("efficiency must lie in (0, 1]")

    @property
    def correlation_time(self) -> float:
        """τ_c = 1/(W + 1/τ) [ns]."""
        return correlation_time(self.lifetime, self.pump_rate)

    @property
    def cycle_rate(self) -> float:
        """Emission rate before collection losses [1/ns]."""
        return 1.0 / (1.0 / self.pump_rate + self.lifetime)


def correlation_time(lifetime: float, pump_rate: float) -> float:
    return 1.0 / (pump_rate + 1.0 / lifetime)


def pump_rate_for_correlation_time(lifetime: float, tau_c: float) -> float:
    """Excitation rate [1/ns] giving correlation time ``tau_c`` [ns]."""
    w = 1.0 / tau_c - 1.0 / lifetime
    if w <= 0:
        raise ConfigError(f"correlation time {tau_c} ns must be shorter than the lifetime {lifetime} ns")
    return w


def simulate_emitter_stream(
    rate: float, lifetime: float, pump_rate: float, duration: float, seed=None
) -> np.ndarray:
    """
    Antibunched photon arrival times [ns] from a CW-pumped two-level emitter.

    Each emission cycle is an exponential excitation wait (rate
    ``pump_rate``) followed by an exponential decay (``lifetime``); each
    cycle ends with one photon, kept with probability η chosen so the
    mean kept rate equals ``rate``. The gap between kept photons is the
    sum of a geometric(η) number of cycles, which is sampled directly as
    Gamma(K, 1/W) + Gamma(K, τ).

    Raises
    ------
    ConfigError
        Non-positive inputs, or ``rate`` above the saturated emission rate.
    """
    if not (rate > 0 and lifetime > 0 and pump_rate > 0 and duration > 0):
        raise ConfigError("rate, lifetime, pump rate and duration must all be positive")
    rng = make_rng(seed)
    emitter = TwoLevelEmitter(lifetime, pump_rate)
    target = rate / NS_PER_S
    eta = target / emitter.cycle_rate
    if eta > 1:
        raise ConfigError(
            f"requested rate {rate:.3g} cps exceeds the emitter cycle rate {emitter.cycle_rate * NS_PER_S:.3g} cps"
        )
    t_end = duration * NS_PER_S
    expected = target * t_end
    block = int(expected + 6 * math.sqrt(expected) + 64)
    chunks = []
    t0 = 0.0
    while True:
        k = rng.geometric(eta, size=block)
        gaps = rng.gamma(k, 1.0 / pump_rate) + rng.gamma(k, lifetime)
        times = t0 + np.cumsum(gaps)
        chunks.append(times)
        if times[-1] >= t_end:
            break
        t0 = times[-1]
        block = max(64, block // 4)
    out = np.concatenate(chunks)
    return out[out < t_end]


def mix_background(stream: np.ndarray, bg_rate: float, duration: float, seed=None) -> np.ndarray:
    """Merge a homogeneous Poisson background of ``bg_rate`` [cps] into ``stream``."""
    if bg_rate < 0 or duration <= 0:
        raise ConfigError("background rate must be non-negative and duration positive")
    stream = np.asarray(stream, dtype=float)
    if bg_rate == 0:
        return stream.copy()
    rng = make_rng(seed)
    t_end = duration * NS_PER_S
    n = rng.poisson(bg_rate * duration)
    bg = rng.uniform(0.0, t_end, size=n)
    return np.sort(np.concatenate([stream, bg]), kind="stable")


def poisson_stream(rate: float, duration: float, seed=None) -> np.ndarray:
    return mix_background(np.empty(0), rate, duration, seed)


def apply_dead_time(times: np.ndarray, dead_time: float) -> np.ndarray:
    """Drop tags within ``dead_time`` [ns] of the previous kept tag (non-paralyzable)."""
    if dead_time <= 0 or times.size < 2 or np.all(np.diff(times) >= dead_time):
        return times
    keep = np.zeros(times.size, dtype=bool)
    last = -math.inf
    for i, t in enumerate(times.tolist()):
        if t - last >= dead_time:
            keep[i] = True
            last = t
    return times[keep]


def detect(stream: np.ndarray, det: DetectorModel, seed=None) -> np.ndarray:
    """Efficiency loss, Gaussian jitter and dead time applied to one detector's photons."""
    rng = make_rng(seed)
    stream = np.asarray(stream, dtype=float)
    kept = stream[rng.random(stream.size) < det.efficiency]
    if det.jitter_sigma > 0:
        kept = kept + rng.normal(0.0, det.jitter_sigma * 1e-3, size=kept.size)
        kept = np.sort(kept, kind="stable")
    return apply_dead_time(kept, det.dead_time)


def split_and_detect(stream: np.ndarray, det1: DetectorModel, det2: DetectorModel, seed=None):
    """50/50 beamsplitter followed by two detectors; returns the two tag arrays [ns]."""
    rng = make_rng(seed)
    stream = np.asarray(stream, dtype=float)
    to_first = rng.random(stream.size) < 0.5
    tags1 = detect(stream[to_first], det1, rng)
    tags2 = detect(stream[~to_first], det2, rng)
    return tags1, tags2


def _epoch_blocks(rate_first: float, rate_second: float, t_end: float, rng: np.random.Generator):
    """
    Alternating state epochs covering [0, t_end), state 0 first.

    Yields ``(starts, lengths, states)`` blocks of at most ``EPOCH_CHUNK``
    epochs so that fast toggling over long runs stays in bounded memory.
    """
    if rate_first <= 0:
        yield np.zeros(1), np.array([t_end]), np.zeros(1, dtype=np.int8)
        return
    if rate_second <= 0:
        first = min(float(rng.exponential(1.0 / rate_first)), t_end)
        if first >= t_end:
            yield np.zeros(1), np.array([t_end]), np.zeros(1, dtype=np.int8)
        else:
            yield np.array([0.0, first]), np.array([first, t_end - first]), np.array([0, 1], dtype=np.int8)
        return
    mean_pair = 1.0 / rate_first + 1.0 / rate_second
    expected = t_end / mean_pair
    pairs = min(int(expected * 1.1 + 5.0 * math.sqrt(expected) + 8), EPOCH_CHUNK // 2)
    t0 = 0.0
    while t0 < t_end:
        d = np.empty(2 * pairs)
        d[0::2] = rng.exponential(1.0 / rate_first, pairs)
        d[1::2] = rng.exponential(1.0 / rate_second, pairs)
        ends = t0 + np.cumsum(d)
        n = int(np.searchsorted(ends, t_end, side="left")) + 1
        n = min(n, ends.size)
        ends = np.minimum(ends[:n], t_end)
        starts = np.concatenate([[t0], ends[:-1]])
        yield starts, ends - starts, (np.arange(n) % 2).astype(np.int8)
        t0 = float(ends[-1])
        pairs = max(8, min(pairs, int((t_end - t0) / mean_pair * 1.1 + 5.0 * math.sqrt((t_end - t0) / mean_pair) + 8)))


def _renewal_in_epochs(starts, lengths, emitter: TwoLevelEmitter, rng: np.random.Generator) -> np.ndarray:
    """
    Kept photon times of a two-level emitter restarted in its ground state at each epoch start.

    Collection thinning is folded into the renewal gaps: the wait for the
    next kept photon spans K ~ Geometric(η) emission cycles.
    """
    if starts.size == 0:
        return np.empty(0)
    eta = emitter.efficiency
    mean = (1.0 / emitter.pump_rate + emitter.lifetime) / eta
    n = np.ceil(lengths / mean * 1.2 + 3.0 * np.sqrt(lengths / mean) + 1.0).astype(np.int64)
    covered = np.zeros(starts.size)
    pending = np.arange(starts.size)
    out = []
    while pending.size:
        counts = n[pending]
        total = int(counts.sum())
        k = rng.geometric(eta, total) if eta < 1 else np.ones(total)
        cycles = rng.gamma(k, 1.0 / emitter.pump_rate) + rng.gamma(k, emitter.lifetime)
        seg = np.repeat(np.arange(pending.size), counts)
        first = np.cumsum(counts) - counts
        # per-epoch cumulative sums without cross-epoch accumulation
        csum = np.cumsum(cycles)
        base = csum[first] - cycles[first]
        local = csum - base[seg] + covered[pending][seg]
        inside = local < lengths[pending][seg]
        out.append(starts[pending][seg][inside] + local[inside])
        end = local[first + counts - 1]
        unfinished = end < lengths[pending]
        covered[pending[unfinished]] = end[unfinished]
        pending = pending[unfinished]
    return np.sort(np.concatenate(out), kind="stable")


def toggled_emission_rate(emitter: TwoLevelEmitter, leave_rate: float, cycle_time: float) -> float:
    """
    Mean kept-photon rate [1/ns] of one charge state under toggling.

    In an epoch of length Exp(``leave_rate``) started from the ground
    state, each emission cycle completes before the epoch ends with
    probability φ = W/(W + γ)·(1/τ)/(1/τ + γ), so an epoch holds φ/(1 − φ)
    cycles on average. One such epoch occurs per ``cycle_time``, the mean
    duration of a neutral-plus-charged pair [ns].
    """
    if leave_rate <= 0:
        return emitter.cycle_rate * emitter.efficiency
    g = leave_rate
    phi = emitter.pump_rate / (emitter.pump_rate + g) * (1.0 / emitter.lifetime) / (1.0 / emitter.lifetime + g)
    return emitter.efficiency * phi / (1.0 - phi) / cycle_time


def simulate_charge_toggled_streams(
    x_params: TwoLevelEmitter,
    t_params: TwoLevelEmitter,
    toggle_in_rate: float,
    toggle_out_rate: float,
    duration: float,
    seed=None,
    return_epochs: bool = False,
):
    """
    Exciton and trion photon times [ns] from an emitter whose charge state flips.

    The dot starts neutral. It captures a charge at ``toggle_in_rate`` and
    loses it at ``toggle_out_rate`` [1/ns]. Neutral epochs emit only X
    photons, charged epochs only T photons, and each epoch starts with
    the dot in its ground state.

    Returns ``(x_times, t_times)``, plus the epoch table
    ``(starts, lengths, states)`` when ``return_epochs`` is set.
    """
    if duration <= 0:
        raise ConfigError("duration must be positive")
    if toggle_in_rate < 0 or toggle_out_rate < 0:
        raise ConfigError("toggle rates must be non-negative")
    rng = make_rng(seed)
    t_end = duration * NS_PER_S
    xs, ts, table = [], [], []
    for starts, lengths, states in _epoch_blocks(toggle_in_rate, toggle_out_rate, t_end, rng):
        nt = states == 0
        xs.append(_renewal_in_epochs(starts[nt], lengths[nt], x_params, rng))
        ts.append(_renewal_in_epochs(starts[~nt], lengths[~nt], t_params, rng))
        if return_epochs:
            table.append((starts, lengths, states))
    x = np.concatenate(xs)
    t = np.concatenate(ts)
    if return_epochs:
        return x, t, tuple(np.concatenate(c) for c in zip(*table))
    return x, t
