"""Photon time-tag simulation, coincidence counting and g² fitting."""

from .correlation import (
    CoincidenceHistogram,
    FlatnessTest,
    G2Curve,
    brute_force_histogram,
    coincidence_histogram,
    flatness_test,
    normalize_g2,
    zero_delay_g2,
)
from .fitting import (
    G2FitResult,
    background_corrected_g2,
    convolved_dip,
    dip_reduction_factor,
    fit_g2,
    g2_model,
    predict_measured_g2,
    signal_fraction_for_g2,
    synthetic_g2_curve,
)
from .simulation import (
    DetectorModel,
    TwoLevelEmitter,
    apply_dead_time,
    correlation_time,
    detect,
    mix_background,
    pair_jitter,
    poisson_stream,
    pump_rate_for_correlation_time,
    simulate_charge_toggled_streams,
    simulate_emitter_stream,
    split_and_detect,
    toggled_emission_rate,
)

__all__ = [
    "CoincidenceHistogram",
    "DetectorModel",
    "FlatnessTest",
    "G2Curve",
    "G2FitResult",
    "TwoLevelEmitter",
    "apply_dead_time",
    "background_corrected_g2",
    "brute_force_histogram",
    "coincidence_histogram",
    "convolved_dip",
    "correlation_time",
    "detect",
    "dip_reduction_factor",
    "fit_g2",
    "flatness_test",
    "g2_model",
    "mix_background",
    "normalize_g2",
    "pair_jitter",
    "poisson_stream",
    "predict_measured_g2",
    "pump_rate_for_correlation_time",
    "signal_fraction_for_g2",
    "simulate_charge_toggled_streams",
    "simulate_emitter_stream",
    "split_and_detect",
    "synthetic_g2_curve",
    "toggled_emission_rate",
    "zero_delay_g2",
]
