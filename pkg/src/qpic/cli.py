"""
Command-line front end.

Subcommands write plot-ready CSV/JSON into ``--out`` and a
``<file>.manifest.json`` sidecar next to every output. Exit codes: 0 on
success, 2 for configuration errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .circuit import (
    PortSpectra,
    demux_assignment,
    fit_sweep_lorentzian,
    port_spectra,
    pump_budget_table,
    qwdm_sweep,
    signal_fraction,
)
from .config import Config, load_config
from .errors import ConfigError, NumericalError
from .io import (
    build_manifest,
    histogram_metadata,
    write_histogram_csv,
    write_json,
    write_manifests,
    write_spectra_csv,
    write_sweep_csv,
    write_tags_csv,
)
from .photon_stats import (
    TwoLevelEmitter,
    coincidence_histogram,
    detect,
    fit_g2,
    flatness_test,
    mix_background,
    normalize_g2,
    pair_jitter,
    pump_rate_for_correlation_time,
    simulate_charge_toggled_streams,
    simulate_emitter_stream,
    split_and_detect,
    toggled_emission_rate,
    zero_delay_g2,
)
from .photon_stats.simulation import make_rng
from .ring import (
    RingParams,
    build_ring,
    drop_transmission,
    finesse,
    free_spectral_range,
    is_critically_coupled,
    resonance_fwhm,
    through_transmission,
)
from .tuning import align_voltage, ring_shift

SEED_ENV = "QPIC_SEED"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


# helpers


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _overrides(args, names) -> dict:
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _finish(args, outputs, overrides, seed=None, extra=None) -> None:
    manifest = build_manifest(args.command, args.config, seed, [str(p) for p in outputs], overrides, extra)
    write_manifests(outputs, manifest)
    for p in outputs:
        print(p)


def _config(args) -> Config:
    return load_config(args.config)


# spectra


def cmd_spectra(args) -> int:
    cfg = _config(args)
    circuit = cfg.circuit
    if args.ring:
        try:
            ring = RingParams.from_dict(json.loads(Path(args.ring).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load ring file {args.ring}: {exc}") from None
        circuit = dataclasses.replace(circuit, ring=ring)
    if args.points < 2:
        raise ConfigError("--points must be at least 2")
    if not args.grid_stop > args.grid_start:
        raise ConfigError("--grid-stop must exceed --grid-start")
    voltage = args.voltage
    if args.align:
        pol = "TE" if args.pol == "both" else args.pol
        voltage = align_voltage(circuit.ring, circuit.tuning, circuit.line(args.align).center_wavelength, pol)
    grid = np.linspace(args.grid_start, args.grid_stop, args.points)
    if args.transmission:
        # unit flat source, no waveguide loss: the bare filter response
        shifted = grid - float(ring_shift(circuit.tuning, voltage))
        pols = ("TE", "TM") if args.pol == "both" else (args.pol,)
        w = 1.0 / len(pols)
        thru = sum(w * np.asarray(through_transmission(circuit.ring, shifted, p)) for p in pols)
        drop = sum(w * np.asarray(drop_transmission(circuit.ring, shifted, p)) for p in pols)
        spectra = PortSpectra(grid, thru, drop)
    else:
        spectra = port_spectra(circuit, voltage, grid, args.pol)
    out = _out_dir(args) / "spectra.csv"
    write_spectra_csv(out, spectra)
    names = ("voltage", "align", "pol", "grid_start", "grid_stop", "points", "transmission", "ring")
    _finish(args, [out], _overrides(args, names), extra={"voltage_v": float(voltage)})
    return EXIT_OK


# sweep


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.v_steps < 1:
        raise ConfigError("--v-steps must be at least 1")
    if args.v_stop < args.v_start:
        raise ConfigError("--v-stop must not be below --v-start")
    voltages = np.linspace(args.v_start, args.v_stop, args.v_steps)
    labels = args.lines.split(",") if args.lines else None
    sweep = qwdm_sweep(cfg.circuit, voltages, labels, args.pol)
    out_dir = _out_dir(args)
    outputs = [out_dir / "sweep.csv"]
    write_sweep_csv(outputs[0], sweep)
    if args.fit:
        report = {}
        for label in sweep.labels:
            peak_v = float(sweep.voltages[int(np.argmax(sweep.drop[label]))])
            entry = {"peak_voltage_v": peak_v, "demux_at_peak": demux_assignment(cfg.circuit, peak_v)}
            try:
                fit = fit_sweep_lorentzian(cfg.circuit, sweep, label)
                entry.update(
                    {
                        "center_shift_nm": fit.center,
                        "fwhm_nm": fit.fwhm,
                        "amplitude": fit.amplitude,
                        "offset": fit.offset,
                        "r_squared": fit.r_squared,
                    }
                )
            except NumericalError as exc:
                entry["fit_error"] = str(exc)
            report[label] = entry
        outputs.append(out_dir / "sweep_fit.json")
        write_json(outputs[1], report)
    names = ("v_start", "v_stop", "v_steps", "lines", "pol", "fit")
    _finish(args, outputs, _overrides(args, names))
    return EXIT_OK


# hbt


def _auto_streams(cfg: Config, args, rng):
    hbt = cfg.hbt
    circuit = cfg.circuit
    line = circuit.line(args.line or hbt.line)
    pol = args.pol or hbt.pol
    rho = signal_fraction(circuit, line.label, args.filter, pol)
    # the line's own imperfect purity enters as an uncorrelated share
    rho_eff = rho * math.sqrt(1.0 - line.g2_intrinsic)
    duration = args.duration if args.duration is not None else hbt.duration_s
    pump = pump_rate_for_correlation_time(line.lifetime, hbt.tau_c_ps * 1e-3)
    signal_rate = rho_eff * hbt.rate_cps
    if signal_rate > 0:
        stream = simulate_emitter_stream(signal_rate, line.lifetime, pump, duration, rng)
    else:
        stream = np.empty(0)
    stream = mix_background(stream, (1.0 - rho_eff) * hbt.rate_cps, duration, rng)
    tags1, tags2 = split_and_detect(stream, *hbt.detectors, seed=rng)
    info = {"line": line.label, "filter": args.filter, "pol": pol, "signal_fraction": rho, "effective_signal_fraction": rho_eff}
    return tags1, tags2, duration, info


def _cross_streams(cfg: Config, args, rng):
    hbt = cfg.hbt
    circuit = cfg.circuit
    x_line, t_line = circuit.line("X"), circuit.line("T")
    duration = args.duration if args.duration is not None else hbt.cross_duration_s
    pair_time = 1.0 / hbt.toggle_in_per_ns + 1.0 / hbt.toggle_out_per_ns if min(
        hbt.toggle_in_per_ns, hbt.toggle_out_per_ns
    ) > 0 else math.inf
    emitters = []
    for line, leave in ((x_line, hbt.toggle_in_per_ns), (t_line, hbt.toggle_out_per_ns)):
        pump = pump_rate_for_correlation_time(line.lifetime, hbt.tau_c_ps * 1e-3)
        full = toggled_emission_rate(TwoLevelEmitter(line.lifetime, pump), leave, pair_time) * 1e9
        eta = min(1.0, hbt.cross_rate_cps / full) if full > 0 else 1.0
        emitters.append(TwoLevelEmitter(line.lifetime, pump, eta))
    x, t = simulate_charge_toggled_streams(
        emitters[0], emitters[1], hbt.toggle_in_per_ns, hbt.toggle_out_per_ns, duration, rng
    )
    tags1 = detect(x, hbt.detectors[0], rng)
    tags2 = detect(t, hbt.detectors[1], rng)
    info = {"line": "X-T", "filter": "cross", "toggle_in_per_ns": hbt.toggle_in_per_ns, "toggle_out_per_ns": hbt.toggle_out_per_ns}
    return tags1, tags2, duration, info


def cmd_hbt(args) -> int:
    cfg = _config(args)
    hbt = cfg.hbt
    seed = _seed(args)
    rng = make_rng(seed)
    bin_ps = args.bin_ps if args.bin_ps is not None else hbt.bin_ps
    window_ns = args.window_ns if args.window_ns is not None else hbt.window_ns
    if args.cross:
        tags1, tags2, duration, info = _cross_streams(cfg, args, rng)
    else:
        tags1, tags2, duration, info = _auto_streams(cfg, args, rng)
    if duration <= 0:
        raise ConfigError("--duration must be positive")
    hist = coincidence_histogram(tags1, tags2, bin_ps, window_ns, duration)
    if hist.total == 0:
        raise NumericalError("no coincidences recorded; increase --duration or the count rate")
    out_dir = _out_dir(args)
    outputs = [out_dir / "histogram.csv", out_dir / "fit.json"]
    write_histogram_csv(outputs[0], hist)
    curve = normalize_g2(hist)
    sigma = pair_jitter(*hbt.detectors)
    fit = fit_g2(curve, sigma)
    report = fit.to_dict()
    g0, g0_err = zero_delay_g2(curve)
    flat = flatness_test(hist)
    report.update(
        {
            "g2_zero_bin": g0,
            "g2_zero_bin_err": g0_err,
            "flatness_p": flat.p_value,
            "coincidences": hist.total,
            **info,
        }
    )
    write_json(outputs[1], report)
    if args.save_tags:
        outputs.append(out_dir / "tags.csv")
        write_tags_csv(outputs[-1], tags1, tags2)
    names = ("duration", "bin_ps", "window_ns", "filter", "line", "pol", "cross", "save_tags")
    _finish(args, outputs, _overrides(args, names), seed, extra={"histogram": histogram_metadata(hist)})
    return EXIT_OK


# design


def cmd_design(args) -> int:
    ring = build_ring(
        radius=args.radius,
        fsr=args.fsr,
        fwhm=args.fwhm,
        wavelength=args.wavelength,
        lambda_ref=args.lambda_ref,
        loss_a=args.loss_a,
        critical=args.critical,
    )
    out = _out_dir(args) / "ring.json"
    write_json(out, ring.to_dict())
    lam = args.wavelength
    te = ring.coupling("TE")
    summary = {
        "group_index": ring.group_index,
        "t1": te.t1,
        "t2": te.t2,
        "round_trip": te.round_trip,
        "fsr_nm": free_spectral_range(ring, lam),
        "fwhm_nm": resonance_fwhm(ring, lam, "TE"),
        "finesse": finesse(ring, lam, "TE"),
        "critical_TE": is_critically_coupled(ring, "TE"),
    }
    print(json.dumps(summary, indent=2), file=sys.stderr)
    names = ("fsr", "fwhm", "radius", "wavelength", "lambda_ref", "loss_a", "critical")
    _finish(args, [out], _overrides(args, names), extra={"design": summary})
    return EXIT_OK


# suppression


def cmd_suppression(args) -> int:
    cfg = _config(args)
    budget = cfg.circuit.pump_budget
    if args.zero_budget:
        budget = dataclasses.replace(budget, material_absorption_db=0.0, undercoupling_db=0.0, modal_mismatch_db=0.0)
    for flag, name in (
        ("material_db", "material_absorption_db"),
        ("undercoupling_db", "undercoupling_db"),
        ("modal_db", "modal_mismatch_db"),
    ):
        value = getattr(args, flag)
        if value is not None:
            budget = dataclasses.replace(budget, **{name: value})
    circuit = dataclasses.replace(cfg.circuit, pump_budget=budget)
    table = pump_budget_table(circuit, args.pol)
    out_dir = _out_dir(args)
    outputs = [out_dir / "suppression.json", out_dir / "suppression.csv"]
    clean = {k: (v if math.isfinite(v) else None) for k, v in table.items()}
    write_json(outputs[0], clean)
    with open(outputs[1], "w") as fh:
        fh.write("term,db\n")
        for key, value in table.items():
            if key != "pump_wavelength_nm":
                fh.write(f"{key.removesuffix('_db')},{float(value)!r}\n")
    names = ("zero_budget", "material_db", "undercoupling_db", "modal_db", "pol")
    _finish(args, outputs, _overrides(args, names))
    return EXIT_OK


# parser


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpic", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON config file (built-in defaults if omitted)")
        else:
            p.set_defaults(config=None)
        p.add_argument("--out", default=".", help="output directory (default: current)")

    p = sub.add_parser("spectra", help="through/drop port spectra")
    common(p)
    p.add_argument("--voltage", type=float, default=0.0, help="heater voltage [V]")
    p.add_argument("--align", metavar="LINE", help="use the voltage that aligns LINE with a resonance")
    p.add_argument("--pol", choices=("TE", "TM", "both"), default="TE")
    p.add_argument("--grid-start", type=float, default=875.0, help="nm")
    p.add_argument("--grid-stop", type=float, default=885.0, help="nm")
    p.add_argument("--points", type=int, default=20001)
    p.add_argument("--transmission", action="store_true", help="bare filter response to a flat unit source")
    p.add_argument("--ring", help="ring JSON (as written by 'design') replacing the config ring")
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("sweep", help="line-integrated port powers versus heater voltage")
    common(p)
    p.add_argument("--v-start", type=float, default=0.0)
    p.add_argument("--v-stop", type=float, default=15.0)
    p.add_argument("--v-steps", type=int, default=301)
    p.add_argument("--lines", help="comma-separated line labels (default: all)")
    p.add_argument("--pol", choices=("TE", "TM", "both"), default="TE")
    p.add_argument("--fit", action="store_true", help="also write Lorentzian fits of the drop curves")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hbt", help="simulate an HBT measurement and fit g2")
    common(p)
    p.add_argument("--duration", type=_positive_float, help="integration time [s]")
    p.add_argument("--seed", type=int, help=f"RNG seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--bin-ps", type=_positive_float)
    p.add_argument("--window-ns", type=_positive_float)
    p.add_argument("--filter", choices=("none", "ring", "ideal"), default="ring")
    p.add_argument("--line", help="emitter line to measure")
    p.add_argument("--pol", choices=("TE", "TM", "both"))
    p.add_argument("--cross", action="store_true", help="X-T cross-correlation with charge toggling")
    p.add_argument("--save-tags", action="store_true", help="also write the detector time tags")
    p.set_defaults(func=cmd_hbt)

    p = sub.add_parser("design", help="ring couplings from a target FSR and FWHM")
    common(p, config=False)
    p.add_argument("--fsr", type=float, default=0.96, help="nm")
    p.add_argument("--fwhm", type=float, default=0.13, help="nm")
    p.add_argument("--radius", type=float, default=70.0, help="µm")
    p.add_argument("--lambda", dest="wavelength", type=float, default=880.0, help="nm")
    p.add_argument("--lambda-ref", type=float, help="resonance anchor [nm] (default: --lambda)")
    p.add_argument("--loss-a", type=float, default=0.99, help="round-trip amplitude transmission")
    p.add_argument("--critical", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("suppression", help="pump-suppression budget")
    common(p)
    p.add_argument("--pol", choices=("TE", "TM"), default="TE")
    p.add_argument("--zero-budget", action="store_true", help="set all budget terms to 0 dB")
    p.add_argument("--material-db", type=float)
    p.add_argument("--undercoupling-db", type=float)
    p.add_argument("--modal-db", type=float)
    p.set_defaults(func=cmd_suppression)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"qpic: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"qpic: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
