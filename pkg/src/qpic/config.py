"""
JSON configuration for the full device and the HBT measurement.

A config file is one JSON object with the blocks ``ring``, ``tuning``,
``emitters``, ``backgrounds``, ``coupling``, ``losses``, ``pump_budget``
and an optional ``hbt`` block. Missing blocks fall back to defaults;
unknown top-level keys are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .circuit import CircuitConfig, Losses, PumpBudget
from .emitter import BackgroundSource, EmitterLine, SourceCoupling, default_lines
from .errors import ConfigError
from .photon_stats.simulation import DetectorModel
from .ring import RingParams, build_ring, free_spectral_range, next_resonance_above
from .tuning import TuningCalibration

TOP_LEVEL_KEYS = ("ring", "tuning", "emitters", "backgrounds", "coupling", "losses", "pump_budget", "hbt")

# resonance anchor of the default ring, a little to the red of the trion line
DEFAULT_LAMBDA_REF = 880.3
# bulk emission rate giving a drop-port signal fraction of about 0.83 for the T line
DEFAULT_BULK_RATE = 1.83e6
DEFAULT_PUMP_RATE = 1.0e12


@dataclass(frozen=True)
class HBTSettings:
    """
    Correlation-measurement settings.

    ``rate_cps`` is the total photon rate reaching the beamsplitter;
    ``tau_c_ps`` fixes the pump rate of the simulated emitter through
    τ_c = 1/(W + 1/τ). Toggle rates [1/ns] drive the X/T charge model,
    which runs for ``cross_duration_s`` at ``cross_rate_cps`` per line;
    every charge epoch is simulated explicitly, so long runs are slow.
    """

    rate_cps: float = 4.0e6
    tau_c_ps: float = 2.0 * math.hypot(150.0, 150.0)
    duration_s: float = 2.0
    bin_ps: float = 50.0
    window_ns: float = 5.0
    detectors: tuple[DetectorModel, DetectorModel] = (DetectorModel(), DetectorModel())
    line: str = "T"
    pol: str = "TE"
    toggle_in_per_ns: float = 0.5
    toggle_out_per_ns: float = 0.5
    cross_duration_s: float = 0.05
    cross_rate_cps: float = 1.0e8

    def __post_init__(self) -> None:
        object.__setattr__(self, "detectors", tuple(self.detectors))
        if len(self.detectors) != 2:
            raise ConfigError("hbt needs exactly two detectors")
        for name in ("rate_cps", "tau_c_ps", "duration_s", "bin_ps", "window_ns", "cross_duration_s", "cross_rate_cps"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"hbt {name} must be positive")
        if self.toggle_in_per_ns < 0 or self.toggle_out_per_ns < 0:
            raise ConfigError("toggle rates must be non-negative")
        if self.pol not in ("TE", "TM", "both"):
            raise ConfigError(f"hbt pol must be TE, TM or both, got {self.pol!r}")

    def to_dict(self) -> dict:
        return {
            "rate_cps": self.rate_cps,
            "tau_c_ps": self.tau_c_ps,
            "duration_s": self.duration_s,
            "bin_ps": self.bin_ps,
            "window_ns": self.window_ns,
            "detectors": [d.to_dict() for d in self.detectors],
            "line": self.line,
            "pol": self.pol,
            "toggle_in_per_ns": self.toggle_in_per_ns,
            "toggle_out_per_ns": self.toggle_out_per_ns,
            "cross_duration_s": self.cross_duration_s,
            "cross_rate_cps": self.cross_rate_cps,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> HBTSettings:
        known = set(cls().to_dict())
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown hbt keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            if key == "detectors":
                kwargs[key] = tuple(DetectorModel.from_dict(d) for d in value)
            elif key in ("line", "pol"):
                kwargs[key] = str(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class Config:
    circuit: CircuitConfig
    hbt: HBTSettings = field(default_factory=HBTSettings)

    def to_dict(self) -> dict:
        c = self.circuit
        return {
            "ring": c.ring.to_dict(),
            "tuning": c.tuning.to_dict(),
            "emitters": [e.to_dict() for e in c.emitters],
            "backgrounds": [b.to_dict() for b in c.backgrounds],
            "coupling": c.coupling.to_dict(),
            "losses": c.losses.to_dict(),
            "pump_budget": c.pump_budget.to_dict(),
            "hbt": self.hbt.to_dict(),
        }


def default_backgrounds(bulk_rate: float = DEFAULT_BULK_RATE, pump_rate: float = DEFAULT_PUMP_RATE):
    return (
        BackgroundSource("bulk_inp", 830.0, 35.0, bulk_rate, te_fraction=0.5),
        BackgroundSource("pump", 532.0, 0.0, pump_rate, te_fraction=0.5),
    )


def default_circuit() -> CircuitConfig:
    return CircuitConfig(
        ring=build_ring(lambda_ref=DEFAULT_LAMBDA_REF),
        tuning=TuningCalibration(),
        emitters=tuple(default_lines()),
        backgrounds=default_backgrounds(),
    )


def default_config() -> Config:
    return Config(default_circuit())


def qwdm_config(separation: float = 10.0, center: float = 880.0) -> Config:
    """
    Two quantum dots ``separation`` nm apart sharing one ring.

    The dots sit off the heater (no emitter heating) and a 0.9 kΩ heater
    drives the ring. Each line starts a different fraction of an FSR to
    the blue of a resonance, so the two are picked up at different
    voltages within one sweep.
    """
    ring = build_ring(lambda_ref=center)
    tuning = TuningCalibration(heater_resistance=900.0, temp_coeff=0.0)
    lines = []
    for label, target, lead in (("QD1", center - separation / 2, 0.35), ("QD2", center + separation / 2, 0.8)):
        res = next_resonance_above(ring, target)
        fsr = free_spectral_range(ring, res)
        lines.append(EmitterLine(label, res - lead * fsr, 0.002, 1.0e6, g2_intrinsic=0.13))
    circuit = CircuitConfig(ring, tuning, tuple(lines), ())
    return Config(circuit)


def config_from_dict(data: Mapping) -> Config:
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - set(TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = default_circuit()
    try:
        ring = RingParams.from_dict(data["ring"]) if "ring" in data else base.ring
        tuning = TuningCalibration.from_dict(data["tuning"]) if "tuning" in data else base.tuning
        emitters = (
            tuple(EmitterLine.from_dict(e) for e in data["emitters"]) if "emitters" in data else base.emitters
        )
        backgrounds = (
            tuple(BackgroundSource.from_dict(b) for b in data["backgrounds"])
            if "backgrounds" in data
            else base.backgrounds
        )
        coupling = SourceCoupling.from_dict(data["coupling"]) if "coupling" in data else base.coupling
        losses = Losses.from_dict(data["losses"]) if "losses" in data else base.losses
        budget = PumpBudget.from_dict(data["pump_budget"]) if "pump_budget" in data else base.pump_budget
        hbt = HBTSettings.from_dict(data["hbt"]) if "hbt" in data else HBTSettings()
    except (TypeError, AttributeError) as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return Config(CircuitConfig(ring, tuning, emitters, backgrounds, coupling, losses, budget), hbt)


def load_config(path: str | Path | None) -> Config:
    """Read a JSON config; ``None`` gives the built-in defaults."""
    if path is None:
        return default_config()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(data)


def dump_config(cfg: Config, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
