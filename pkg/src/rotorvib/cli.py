"""``rotorvib`` command line: one subcommand per workflow.

Exit codes: 0 ok, 2 usage (including out-of-range indices), 3 input format, 4 computation, 5 selftest failure.
Every subcommand accepts ``--config file.json``; explicit flags override it.
Outputs are staged in a temporary directory and moved into ``--output-dir``
only when the command succeeds.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from .diagnosis import RuleConstants, TrendStore, diagnose, order_spectrum, overall_levels, trend_append, trend_evaluate
from .errors import ComputationError, InputError
from .frf import estimate_frf_h1, frf_curve, receptance_direct, receptance_general, receptance_symmetric, write_frf_csv
from .orbit import average_orbit, detect_tacho, order_filter, slice_revolutions, whirl_direction, write_orbit_csv
from .rotor import (
    JeffcottParams,
    SystemMatrices,
    build_jeffcott,
    eigen_general,
    eigen_symmetric,
    envelope_peak_speed,
    modal_from_json,
    modal_to_json,
    simulate_rundown,
    stability_bound,
)
from .shock import (
    ExponentialWindow,
    HalfHannWindow,
    LimitOverlay,
    apply_decay_window,
    capture_shocks,
    validate_limits,
    write_shock_report,
)
from .signal_core import highpass_filter, ingest_csv, write_csv

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_COMPUTE, EXIT_SELFTEST = 0, 2, 3, 4, 5

COMMON = {"input": None, "output_dir": "out", "plot": False, "seed": 0}

DEFAULTS = {
    "simulate": {"m": 10.0, "k": 1e6, "zeta": 0.02, "polar_inertia": 0.0, "diametral_inertia": 0.0,
                 "tilt_stiffness": 0.0, "unbalance": 1e-4, "rpm": None, "rpm_start": None,
                 "rpm_end": None, "duration": 5.0, "dt": None},
    "orbit": {"y": "y", "z": "z", "order": 0, "n_revs": None, "samples_per_rev": 128, "highpass": None,
              "threshold": None, "hysteresis": 0.0, "rotation_sense": "ccw"},
    "frf": {"force": None, "response": None, "n_averages": 16, "overlap": 0.5, "n_dof": 4,
            "n_freq": 200, "omega_spin": 0.0, "j": 0, "k": 0},
    "shock": {"channel": None, "trigger_level": None, "pre_window": 0.01, "post_window": 0.05,
              "holdoff": None, "overlay": None, "fit": False, "window": None, "tau": None, "ramp": None,
              "region_start": None, "region_end": None},
    "diagnose": {"channel": "y", "max_order": 8.0, "samples_per_rev": 128, "threshold": None,
                 "reference": None, "modal": None, "m": None, "k": None, "rules": None},
    "trend": {"store": None, "point_id": "point-1", "timestamp": None, "channel": None,
              "band_low": 2.0, "band_high": None, "v_rms": None, "a_rms": 0.0, "d_rms": 0.0,
              "baseline": None, "rules": None},
    "selftest": {"n_systems": 10, "n_freq": 50, "n_per_fault": 5, "rules": None},
}


class SelftestFailure(Exception):
    pass


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rotorvib", description="Rotor vibration simulation and diagnostics")
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(sp):
        sp.add_argument("--input", default=S)
        sp.add_argument("--output-dir", default=S)
        sp.add_argument("--config", default=S)
        sp.add_argument("--plot", action="store_true", default=S)
        sp.add_argument("--seed", type=int, default=S)
        return sp

    sp = common(sub.add_parser("simulate", help="Jeffcott rotor run at constant speed or along a ramp"))
    for name in ("m", "k", "zeta", "polar-inertia", "diametral-inertia", "tilt-stiffness", "unbalance",
                 "rpm", "rpm-start", "rpm-end", "duration", "dt"):
        sp.add_argument(f"--{name}", type=float, default=S)

    sp = common(sub.add_parser("orbit", help="key-phasor referenced orbit"))
    sp.add_argument("--y", default=S)
    sp.add_argument("--z", default=S)
    sp.add_argument("--order", type=int, default=S, help="0 = averaged raw orbit")
    sp.add_argument("--n-revs", type=int, default=S)
    sp.add_argument("--samples-per-rev", type=int, default=S)
    sp.add_argument("--highpass", type=float, default=S, help="high-pass cutoff in Hz")
    sp.add_argument("--threshold", type=float, default=S)
    sp.add_argument("--hysteresis", type=float, default=S)
    sp.add_argument("--rotation-sense", choices=("ccw", "cw"), default=S)

    sp = common(sub.add_parser("frf", help="H1 estimate from a record, or modal-vs-direct check"))
    sp.add_argument("--force", default=S)
    sp.add_argument("--response", default=S)
    sp.add_argument("--n-averages", type=int, default=S)
    sp.add_argument("--overlap", type=float, default=S)
    sp.add_argument("--n-dof", type=int, default=S)
    sp.add_argument("--n-freq", type=int, default=S)
    sp.add_argument("--omega-spin", type=float, default=S)
    sp.add_argument("--j", type=int, default=S)
    sp.add_argument("--k", type=int, default=S)

    sp = common(sub.add_parser("shock", help="shock capture, limit check and decay window"))
    sp.add_argument("--channel", default=S)
    for name in ("trigger-level", "pre-window", "post-window", "holdoff", "tau", "ramp",
                 "region-start", "region-end"):
        sp.add_argument(f"--{name}", type=float, default=S)
    sp.add_argument("--overlay", default=S)
    sp.add_argument("--fit", action="store_true", default=S)
    sp.add_argument("--window", choices=("exponential", "half_hann"), default=S)

    sp = common(sub.add_parser("diagnose", help="order spectrum and rule-based fault report"))
    sp.add_argument("--channel", default=S)
    sp.add_argument("--max-order", type=float, default=S)
    sp.add_argument("--samples-per-rev", type=int, default=S)
    sp.add_argument("--threshold", type=float, default=S)
    sp.add_argument("--reference", default=S)
    sp.add_argument("--modal", default=S, help="modal model JSON")
    sp.add_argument("--m", type=float, default=S, help="Jeffcott disc mass for the modal model")
    sp.add_argument("--k", type=float, default=S, help="Jeffcott shaft stiffness for the modal model")
    sp.add_argument("--rules", default=S)

    sp = common(sub.add_parser("trend", help="append overall levels and evaluate alarms"))
    sp.add_argument("--store", default=S)
    sp.add_argument("--point-id", default=S)
    sp.add_argument("--channel", default=S)
    for name in ("timestamp", "band-low", "band-high", "v-rms", "a-rms", "d-rms", "baseline"):
        sp.add_argument(f"--{name}", type=float, default=S)
    sp.add_argument("--rules", default=S)

    sp = common(sub.add_parser("selftest", help="oracle-equivalence and corpus-fidelity checks"))
    sp.add_argument("--n-systems", type=int, default=S)
    sp.add_argument("--n-freq", type=int, default=S)
    sp.add_argument("--n-per-fault", type=int, default=S)
    sp.add_argument("--rules", default=S)
    return p


def _resolve(ns: argparse.Namespace) -> dict:
    flags = vars(ns).copy()
    command = flags.pop("command")
    config_path = flags.pop("config", None)
    allowed = {**COMMON, **DEFAULTS[command]}
    from_file = {}
    if config_path is not None:
        try:
            from_file = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise InputError(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"config file {config_path} is not valid JSON: {exc}") from None
        unknown = set(from_file) - set(allowed)
        if unknown:
            raise UsageError(f"unknown config keys for {command!r}: {sorted(unknown)}")
    cfg = {**allowed, **from_file, **flags}
    for key in ("input", "reference", "modal", "overlay", "rules"):
        path = cfg.get(key)
        if path is not None and not Path(path).exists():
            raise InputError(f"{key} file not found: {path}")
    cfg["command"] = command
    return cfg


@contextmanager
def _staged(output_dir: Path):
    """Yield a scratch directory whose files land in ``output_dir`` only on success."""
    output_dir = Path(output_dir)
    parent = output_dir.parent
    parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".rotorvib-", dir=parent))
    try:
        yield tmp
        output_dir.mkdir(parents=True, exist_ok=True)
        for f in sorted(tmp.iterdir()):
            shutil.move(str(f), str(output_dir / f.name))
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _rpm(w):
    return w * 60 / (2 * np.pi)


def _load_record(path):
    return ingest_csv(path)


def _auto_threshold(ch) -> float:
    return 0.5 * (float(ch.samples.min()) + float(ch.samples.max()))


# --------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, out: Path) -> list[str]:
    p = JeffcottParams(cfg["m"], cfg["k"], cfg["zeta"], cfg["polar_inertia"], cfg["diametral_inertia"],
                       cfg["unbalance"], cfg["tilt_stiffness"])
    sys_ = build_jeffcott(p)
    if cfg["rpm"] is not None:
        w0 = w1 = cfg["rpm"] * 2 * np.pi / 60
    elif cfg["rpm_start"] is not None and cfg["rpm_end"] is not None:
        w0, w1 = cfg["rpm_start"] * 2 * np.pi / 60, cfg["rpm_end"] * 2 * np.pi / 60
    else:
        raise InputError("give --rpm, or both --rpm-start and --rpm-end")
    duration = cfg["duration"]
    if not duration > 0:
        raise ComputationError(f"duration must be > 0, got {duration}")
    dt = cfg["dt"] or 0.5 * stability_bound(sys_, max(w0, w1))
    rec = simulate_rundown(sys_, p, (w0, w1), dt, duration)
    write_csv(rec, out / "record.csv")
    modal = eigen_symmetric(sys_)
    summary = {
        "natural_frequencies_rad_s": [float(w) for w in modal.omega_r],
        "natural_frequencies_hz": [float(w / (2 * np.pi)) for w in modal.omega_r],
        "revolutions": rec.metadata["revolutions"],
        "tacho_pulses": rec.metadata["tacho_pulses"],
        "dt_s": dt,
        "samples": rec.n_samples,
    }
    lines = [
        "natural frequencies: " + ", ".join(f"{w:.4f} rad/s ({w / (2 * np.pi):.4f} Hz)" for w in modal.omega_r),
        f"revolutions: {summary['revolutions']:.3f}",
        f"tacho pulses: {summary['tacho_pulses']}",
    ]
    if w0 != w1:
        t_peak, w_peak = envelope_peak_speed(rec)
        summary["max_envelope_time_s"] = t_peak
        summary["max_envelope_speed_rad_s"] = w_peak
        lines.append(f"speed at maximum y-envelope: {w_peak:.4f} rad/s ({_rpm(w_peak):.1f} RPM) at t = {t_peak:.4f} s")
    _write_json(out / "summary.json", summary)
    return lines


def cmd_orbit(cfg, out: Path) -> list[str]:
    rec = _load_record(cfg["input"])
    if rec.tacho is None:
        raise InputError("record has no tacho channel")
    y, z = rec[cfg["y"]], rec[cfg["z"]]
    mode = "raw"
    if cfg["highpass"] is not None:
        y, z = highpass_filter(y, cfg["highpass"]), highpass_filter(z, cfg["highpass"])
        mode = "highpass"
    threshold = cfg["threshold"] if cfg["threshold"] is not None else _auto_threshold(rec.tacho)
    train = detect_tacho(rec.tacho, threshold, cfg["hysteresis"], rec.start_time)
    slices = slice_revolutions(y, z, train, cfg["samples_per_rev"], rec.start_time, mode)
    if cfg["order"]:
        orbit = order_filter(slices, cfg["order"])
    else:
        orbit = average_orbit(slices, cfg["n_revs"])
    whirl = whirl_direction(orbit, cfg["rotation_sense"])
    write_orbit_csv(orbit, out / "orbit.csv")
    if cfg["plot"]:
        from .plots import plot_orbit
        plot_orbit(orbit, out / "orbit.svg")
    return [
        f"revolutions used: {orbit.n_revs_averaged} (dropped {slices.n_dropped})",
        f"mean speed: {orbit.mean_speed:.4f} rad/s ({_rpm(orbit.mean_speed):.1f} RPM)",
        f"filter mode: {orbit.label}",
        f"whirl: {whirl}",
    ]


def _random_system(rng, n, omega_spin):
    A = rng.normal(size=(n, n))
    M = A @ A.T + n * np.eye(n)
    B = rng.normal(size=(n, n))
    K = (B @ B.T + n * np.eye(n)) * 1e3
    C = rng.uniform(0.001, 0.05) * M + rng.uniform(1e-5, 1e-3) * K
    G = rng.normal(size=(n, n))
    G = G - G.T
    return SystemMatrices(M, C, K, G, omega_spin)


def _max_relative_deviation(sys_, model, omegas) -> float:
    """Largest |modal - direct| over all entries, relative to max |direct| at that frequency."""
    worst = 0.0
    n = sys_.n
    fn = receptance_symmetric if not sys_.is_gyroscopic else receptance_general
    for w in omegas:
        D = receptance_direct(sys_, w)
        S = np.array([[fn(model, w, j, k) for k in range(n)] for j in range(n)])
        worst = max(worst, float(np.abs(S - D).max() / np.abs(D).max()))
    return worst


def cmd_frf(cfg, out: Path) -> list[str]:
    if cfg["input"] is not None:
        rec = _load_record(cfg["input"])
        force = rec[cfg["force"]] if cfg["force"] else next(c for c in rec.channels if c.role == "force")
        resp = rec[cfg["response"]] if cfg["response"] else next(c for c in rec.channels if c.role == "vibration")
        est = estimate_frf_h1(force, resp, cfg["n_averages"], cfg["overlap"], cfg["j"], cfg["k"])
        write_frf_csv(est.curve, out / "frf.csv")
        with (out / "coherence.csv").open("w") as fh:
            fh.write("frequency_rad_s,coherence\n")
            for w, c in zip(est.curve.frequencies, est.coherence):
                fh.write(f"{w:.12g},{c:.9g}\n")
        if cfg["plot"]:
            from .plots import plot_frf
            plot_frf([est.curve], out / "frf.svg")
        return [f"H1 estimate: {est.curve.frequencies.size} bins, mean coherence {est.coherence.mean():.4f}"]

    rng = np.random.default_rng(cfg["seed"])
    sys_ = _random_system(rng, cfg["n_dof"], cfg["omega_spin"])
    if sys_.is_gyroscopic:
        model = eigen_general(sys_)
        w_max = 2 * model.natural_frequencies.max()
    else:
        model = eigen_symmetric(sys_.at_speed(0.0))
        w_max = 2 * model.omega_r.max()
    omegas = np.sort(rng.uniform(0, w_max, cfg["n_freq"]))
    dev = _max_relative_deviation(sys_, model, omegas)
    modal_curve = frf_curve(model, omegas, cfg["j"], cfg["k"])
    direct_curve = frf_curve(sys_, omegas, cfg["j"], cfg["k"])
    write_frf_csv(modal_curve, out / "frf_modal.csv")
    write_frf_csv(direct_curve, out / "frf_direct.csv")
    (out / "modal.json").write_text(modal_to_json(model) + "\n")
    if cfg["plot"]:
        from .plots import plot_frf
        plot_frf([modal_curve, direct_curve], out / "frf.svg")
    method = "complex-mode" if sys_.is_gyroscopic else "real-mode"
    return [f"{method} superposition vs direct inversion, n = {sys_.n}, {omegas.size} frequencies",
            f"max relative deviation: {dev:.3e}"]


def cmd_shock(cfg, out: Path) -> list[str]:
    rec = _load_record(cfg["input"])
    lines = []
    if cfg["window"] is not None:
        start = cfg["region_start"] if cfg["region_start"] is not None else rec.start_time
        end = cfg["region_end"]
        if end is None:
            if rec.tacho is None:
                raise InputError("give --region-end or supply a tacho channel (first pulse ends the region)")
            end = detect_tacho(rec.tacho, _auto_threshold(rec.tacho), 0.0, rec.start_time).pulse_times[0]
        if cfg["window"] == "exponential":
            if cfg["tau"] is None:
                raise InputError("--tau is required for the exponential window")
            window = ExponentialWindow(cfg["tau"])
        else:
            if cfg["ramp"] is None:
                raise InputError("--ramp is required for the half_hann window")
            window = HalfHannWindow(cfg["ramp"])
        rec = apply_decay_window(rec, window, (start, end))
        write_csv(rec, out / "windowed.csv")
        lines.append(f"{cfg['window']} window applied over [{start:.4g}, {end:.4g}] s")
    ch = rec[cfg["channel"]] if cfg["channel"] else next(c for c in rec.channels if c.role == "vibration")
    if cfg["trigger_level"] is None:
        raise InputError("--trigger-level is required")
    events = capture_shocks(ch, cfg["trigger_level"], cfg["pre_window"], cfg["post_window"],
                            cfg["holdoff"], rec.start_time)
    overlay = LimitOverlay.from_json(Path(cfg["overlay"]).read_text()) if cfg["overlay"] else None
    verdicts = [validate_limits(e, overlay, cfg["fit"]) if overlay else None for e in events]
    write_shock_report(events, verdicts, out / "shock_report.json")
    if cfg["plot"]:
        from .plots import plot_shock
        for i, (e, v) in enumerate(zip(events, verdicts)):
            plot_shock(e, out / f"shock_{i}.svg", overlay, v.shift if v else 0.0)
    lines.append(f"events captured: {len(events)}")
    for e, v in zip(events, verdicts):
        verdict = "" if v is None else f", verdict {v.label}"
        lines.append(f"  t = {e.trigger_time:.6f} s, peak {e.peak_amplitude:.6g}, duration {e.duration_10pct:.6g} s{verdict}")
    return lines


def _spectrum_of(rec, cfg):
    if rec.tacho is None:
        raise InputError("record has no tacho channel")
    threshold = cfg["threshold"] if cfg["threshold"] is not None else _auto_threshold(rec.tacho)
    train = detect_tacho(rec.tacho, threshold, 0.0, rec.start_time)
    return order_spectrum(rec[cfg["channel"]], train, cfg["max_order"], cfg["samples_per_rev"], rec.start_time)


def cmd_diagnose(cfg, out: Path) -> list[str]:
    rec = _load_record(cfg["input"])
    spectrum = _spectrum_of(rec, cfg)
    reference = _spectrum_of(_load_record(cfg["reference"]), cfg) if cfg["reference"] else None
    modal = None
    if cfg["modal"]:
        modal = modal_from_json(Path(cfg["modal"]).read_text())
    elif cfg["m"] is not None and cfg["k"] is not None:
        modal = eigen_symmetric(build_jeffcott(JeffcottParams(cfg["m"], cfg["k"])))
    rules = RuleConstants.load(cfg["rules"])
    report = diagnose(spectrum, modal, reference=reference, rules=rules)
    with (out / "order_spectrum.csv").open("w") as fh:
        fh.write("order,amplitude\n")
        for o, a in zip(spectrum.orders, spectrum.amplitudes):
            fh.write(f"{o:.2f},{a:.9g}\n")
    _write_json(out / "fault_report.json", report.to_dict())
    if cfg["plot"]:
        from .plots import plot_order_spectrum
        plot_order_spectrum(spectrum, out / "order_spectrum.svg")
    lines = [f"mean speed: {spectrum.mean_speed:.4f} rad/s ({_rpm(spectrum.mean_speed):.1f} RPM)"]
    for name, v in report.verdicts.items():
        lines.append(f"  {name:<13} {'DETECTED' if v.detected else 'not detected'} "
                     f"(confidence {v.confidence:.2f}): {v.evidence}")
    return lines


def cmd_trend(cfg, out: Path) -> list[str]:
    if cfg["store"] is None:
        raise InputError("--store is required")
    store = TrendStore(cfg["store"], RuleConstants.load(cfg["rules"]))
    point = cfg["point_id"]
    if cfg["baseline"] is not None:
        store.set_baseline(point, cfg["baseline"])
    if cfg["input"] is not None:
        rec = _load_record(cfg["input"])
        ch = rec[cfg["channel"]] if cfg["channel"] else next(c for c in rec.channels if c.role == "vibration")
        high = cfg["band_high"] if cfg["band_high"] is not None else 0.45 * ch.sample_rate
        levels = overall_levels(ch, (cfg["band_low"], high))
    elif cfg["v_rms"] is not None:
        levels = {"v_rms_mm_s": cfg["v_rms"], "a_rms_g": cfg["a_rms"], "d_rms_um": cfg["d_rms"]}
    else:
        levels = None
    if levels is not None:
        h = store.history(point)
        ts = cfg["timestamp"] if cfg["timestamp"] is not None else (h[-1].ts + 1 if h else 0.0)
        trend_append(store, point, levels, ts)
    status = trend_evaluate(store, point)
    h = store.history(point)
    _write_json(out / "trend_status.json", {"point_id": point, "status": status,
                                             "latest_v_rms_mm_s": h[-1].v_rms_mm_s,
                                             "baseline_v_rms_mm_s": store.baseline(point),
                                             "entries": len(h)})
    if cfg["plot"]:
        from .plots import plot_trend
        plot_trend(h, out / "trend.svg", point)
    return [f"{point}: latest {h[-1].v_rms_mm_s:.4g} mm/s RMS, baseline {store.baseline(point):.4g}, status {status}"]


def run_selftest(n_systems: int = 10, n_freq: int = 50, n_per_fault: int = 5,
                 rules: RuleConstants | None = None, seed: int = 0) -> tuple[bool, list[str]]:
    """Reduced oracle-equivalence and corpus-fidelity suites."""
    rng = np.random.default_rng(seed)
    lines = []
    ok = True
    worst_sym = worst_gyro = 0.0
    for _ in range(n_systems):
        n = int(rng.integers(2, 7))
        sys_ = _random_system(rng, n, float(rng.uniform(1, 50)))
        sym = sys_.at_speed(0.0)
        m = eigen_symmetric(sym)
        w = rng.uniform(0, 2 * m.omega_r.max(), n_freq)
        worst_sym = max(worst_sym, _max_relative_deviation(sym, m, w))
        worst_gyro = max(worst_gyro, _max_relative_deviation(sys_, eigen_general(sys_), w))
    for name, dev in (("real-mode oracle equivalence", worst_sym), ("complex-mode oracle equivalence", worst_gyro)):
        passed = dev < 1e-8
        ok &= passed
        lines.append(f"{'PASS' if passed else 'FAIL'} {name}: max relative deviation {dev:.2e} (< 1e-8)")
    cases = corpus_mod.generate_corpus(n_per_fault, seed)
    score = corpus_mod.score_corpus(cases, rules=rules, n_scalings=3, seed=seed)
    ok &= score.passed
    lines.append(f"{'PASS' if score.passed else 'FAIL'} corpus fidelity")
    lines.extend(score.summary_lines())
    return ok, lines


def cmd_selftest(cfg, out: Path) -> list[str]:
    rules = RuleConstants.load(cfg["rules"])
    ok, lines = run_selftest(cfg["n_systems"], cfg["n_freq"], cfg["n_per_fault"], rules, cfg["seed"])
    (out / "selftest.txt").write_text("\n".join(lines) + "\n")
    if not ok:
        failing = [l for l in lines if l.startswith("FAIL")]
        raise SelftestFailure("\n".join(lines) + "\nfailing properties:\n" + "\n".join(failing))
    return lines


COMMANDS = {"simulate": cmd_simulate, "orbit": cmd_orbit, "frf": cmd_frf, "shock": cmd_shock,
            "diagnose": cmd_diagnose, "trend": cmd_trend, "selftest": cmd_selftest}

_NEEDS_INPUT = {"orbit", "shock", "diagnose"}


def main(argv=None) -> int:
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        cfg = _resolve(ns)
        if cfg["command"] in _NEEDS_INPUT and cfg["input"] is None:
            raise UsageError(f"{cfg['command']} requires --input")
        with _staged(Path(cfg["output_dir"])) as scratch:
            lines = COMMANDS[cfg["command"]](cfg, scratch)
    except (UsageError, IndexError) as exc:
        print(f"rotorvib: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SelftestFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SELFTEST
    except (InputError, KeyError, StopIteration, ValueError) as exc:
        if isinstance(exc, ComputationError):
            print(f"rotorvib: {exc}", file=sys.stderr)
            return EXIT_COMPUTE
        msg = f"channel not found: {exc}" if isinstance(exc, KeyError) else str(exc) or type(exc).__name__
        print(f"rotorvib: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except ComputationError as exc:
        print(f"rotorvib: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    print("\n".join(lines))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
