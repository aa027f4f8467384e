"""Command-line experiment dispatch with bit-stable CSV/summary output.

Usage: ``rabisim <experiment> [--config FILE] [--out DIR] [--set k=v ...]``
or ``rabisim --list-defaults``.  One CSV is written per time series and
exactly one flat-text summary per run.  Output is deterministic: no
timestamps, no randomness, fixed column order, fixed float formatting.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from .biastee import bias_tee_compensate, rc_response
from .config import EXPERIMENTS, ConfigError, RunConfig, apply_overrides, default_config_text, parse_config
from .device import MHZ, NS, TWOPI
from .experiments import (
    run_avoided_crossing,
    run_collapse_revival,
    run_constraint_violation,
    run_detuning_map,
    run_full_rabi,
    run_parasitic_study,
    run_scheme_verification,
    run_vacuum_rabi,
    truncation_guard,
)
from .lindblad import IntegrationError, TimeGrid, TimeSeries
from .signal_tools import FitError, NoPeakError
from .transmon import transmon_charge_diagonalize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_FIT = 4
EXIT_IO = 5

_FLOAT_FMT = "%.11e"  # 12 significant digits


def _verbose() -> bool:
    return os.environ.get("RABISIM_VERBOSE", "") not in ("", "0")


def _log(msg: str):
    if _verbose():
        print(msg, file=sys.stderr)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "%.12g" % x
    return str(x)


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]):
    """Deterministic CSV: 12 significant digits, '\\n' endings."""
    rows = len(columns[0])
    for c in columns:
        if len(c) != rows:
            raise ValueError("CSV columns must share one length")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(_FLOAT_FMT % c[i] for c in columns) + "\n")


def emit_csv(series: TimeSeries, path: Path):
    """Time series as CSV: t_ns first, traces in insertion order."""
    header = ["t_ns"] + list(series.traces.keys())
    columns = [series.times / NS] + [series.traces[k] for k in series.traces]
    write_csv(path, header, columns)


def write_summary(path: Path, entries: dict):
    """Flat text summary, one ``key = value`` per line; None entries skipped."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, val in entries.items():
            if val is None:
                continue
            fh.write(f"{key} = {_fmt(val)}\n")


def _grid_from(cfg: RunConfig, auto_duration: float, auto_samples: int) -> TimeGrid:
    duration = cfg["duration_us"] or auto_duration
    samples = cfg["samples"] or auto_samples
    return TimeGrid.to(duration, samples)


def _common_summary(cfg: RunConfig) -> dict:
    return {
        "experiment": cfg.experiment,
        "g_mhz": cfg.g_value() / MHZ,
        "qubit_levels": cfg["qubit_levels"],
        "fock_dim": cfg["fock_dim"],
        "deterministic": cfg["deterministic"],
    }


def _series_drift(summary: dict, series: TimeSeries, prefix: str = ""):
    meta = series.metadata
    for key in ("trace_drift", "hermiticity_drift", "min_eigenvalue", "norm_drift"):
        if key in meta:
            summary[f"{prefix}{key}"] = float(meta[key])


# ---------------------------------------------------------------------------
# experiment runners


def _run_vacuum_rabi(cfg: RunConfig, out: Path) -> dict:
    params = cfg.device_params()
    grid = _grid_from(cfg, 0.8e-6, 1601)
    series, fit = run_vacuum_rabi(params, grid, dissipation=cfg["dissipation"])
    emit_csv(series, out / "vacuum_rabi.csv")
    summary = _common_summary(cfg)
    summary.update(
        two_g_fit_mhz=fit.omega / MHZ,
        gamma_fit_per_s=fit.gamma,
        fit_amplitude=fit.amplitude,
        fit_offset=fit.offset,
        fit_residual_norm=fit.residual_norm,
    )
    _series_drift(summary, series)
    if cfg["check_truncation"]:
        flagged, change = truncation_guard(
            lambda p: run_vacuum_rabi(p, grid, dissipation=cfg["dissipation"])[0], params
        )
        summary["truncation_flagged"] = flagged
        summary["truncation_max_change"] = change
    return summary


def _run_detuning_map(cfg: RunConfig, out: Path) -> dict:
    params = cfg.device_params()
    span = cfg["detuning_span_mhz"]
    count = cfg["detuning_count"]
    detunings = np.linspace(-span, span, count) + 0.0
    grid = _grid_from(cfg, 0.4e-6, 801)
    result = run_detuning_map(params, detunings, grid, dissipation=cfg["dissipation"])
    traces = {
        f"P_e_det_{d / MHZ:+.3f}MHz".replace("+", "p").replace("-", "m").replace(".", "_"): row
        for d, row in zip(result.detunings, result.population)
    }
    emit_csv(TimeSeries(times=result.times, traces=traces), out / "detuning_map.csv")
    summary = _common_summary(cfg)
    for d, fq, c in zip(result.detunings, result.frequencies, result.contrasts):
        tag = f"{d / MHZ:+.3f}".replace("+", "p").replace("-", "m").replace(".", "_")
        summary[f"frequency_mhz_det_{tag}"] = fq / MHZ if math.isfinite(fq) else None
        summary[f"contrast_det_{tag}"] = c
    return summary


def _run_collapse_revival(cfg: RunConfig, out: Path) -> dict:
    params = cfg.device_params()
    w_eff = cfg["omega_eff_mhz"]
    duration = cfg["duration_us"] or None
    result = run_collapse_revival(
        params,
        eta1=cfg["eta1_mhz"],
        omega_eff=w_eff,
        initial_qubit=cfg["initial_state"],
        phi1=cfg["phi1_rad"],
        duration=duration,
        dissipation=cfg["dissipation"],
        parasitic=cfg["parasitic"],
        frame=cfg["frame"],
    )
    emit_csv(result.lab, out / "collapse_revival_lab.csv")
    emit_csv(result.effective, out / "collapse_revival_effective.csv")
    summary = _common_summary(cfg)
    summary.update(
        omega_eff_mhz=w_eff / MHZ,
        eta1_mhz=cfg["eta1_mhz"] / MHZ,
        initial_state=cfg["initial_state"],
        expected_revival_ns=TWOPI / w_eff / NS,
    )
    if result.report is not None:
        summary.update(
            collapse_time_ns=result.report.collapse_time / NS,
            revival_time_ns=result.report.revival_time / NS,
            revival_amplitude=result.report.revival_amplitude,
            revival_period_ns=result.report.revival_period / NS,
        )
    _series_drift(summary, result.lab, "lab_")
    _series_drift(summary, result.effective, "effective_")
    return summary


def _run_full_rabi(cfg: RunConfig, out: Path) -> dict:
    params = cfg.device_params()
    result = run_full_rabi(
        params,
        eta1=cfg["eta1_mhz"],
        eta2=cfg["eta2_mhz"],
        omega_eff=cfg["omega_eff_mhz"],
        initial_qubit=cfg["initial_state"],
        phi1=cfg["phi1_rad"],
        duration=cfg["duration_us"] or None,
        dissipation=cfg["dissipation"],
    )
    emit_csv(result.base, out / "full_rabi_base.csv")
    emit_csv(result.with_eta2, out / "full_rabi_eta2.csv")
    summary = _common_summary(cfg)
    summary.update(
        eta1_mhz=cfg["eta1_mhz"] / MHZ,
        eta2_mhz=cfg["eta2_mhz"] / MHZ,
        omega_eff_mhz=cfg["omega_eff_mhz"] / MHZ,
        eta1_fit_mhz=result.eta1_fit / MHZ,
        critical_indicator=result.critical_indicator,
        osc_rms_base=result.osc_rms_base,
        osc_rms_eta2=result.osc_rms_eta2,
        constraint_warning=result.constraint_warning,
    )
    for k in sorted(result.revival_gain):
        summary[f"revival_amplitude_base_{k}"] = result.revival_amplitude_base[k]
        summary[f"revival_amplitude_eta2_{k}"] = result.revival_amplitude_eta2[k]
        summary[f"revival_gain_{k}"] = result.revival_gain[k]
    return summary


def _run_verify_scheme(cfg: RunConfig, out: Path) -> dict:
    params = cfg.device_params()
    report = run_scheme_verification(
        params,
        omega_eff_values=np.array(cfg["omega_eff_list_mhz"]),
        eta1_values=np.array(cfg["eta1_list_mhz"]),
    )
    for w_eff, ideal in report.ideal_traces.items():
        pass  # per-omega_eff CSVs carry their own grids below
    for w_eff in report.omega_eff_values:
        grid_times = np.linspace(0.0, TWOPI / w_eff, len(report.ideal_traces[w_eff]))
        tag = f"{w_eff / MHZ:g}".replace(".", "_")
        write_csv(
            out / f"verify_scheme_weff{tag}.csv",
            ["t_ns", "n_ideal"],
            [grid_times / NS, report.ideal_traces[w_eff]],
        )
    header = ["t_ns"] + [f"n_eta{e / MHZ:g}".replace(".", "_") for e in sorted(report.driven_traces)]
    cols = [report.times / NS] + [report.driven_traces[e] for e in sorted(report.driven_traces)]
    write_csv(out / "verify_scheme_eta1.csv", header, cols)
    summary = _common_summary(cfg)
    for w_eff in report.omega_eff_values:
        tag = f"{w_eff / MHZ:g}".replace(".", "_")
        summary[f"max_deviation_weff{tag}"] = report.max_deviation[w_eff]
        summary[f"peak_population_weff{tag}"] = report.peak_population[w_eff]
    for (e1, e2), rms in sorted(report.pairwise_rms.items()):
        summary[f"rms_eta{e1 / MHZ:g}_vs_eta{e2 / MHZ:g}".replace(".", "_")] = rms
    return summary


def _run_parasitic(cfg: RunConfig, out: Path) -> dict:
    params = cfg.device_params()
    report = run_parasitic_study(
        params, np.array(cfg["eta_r_list_mhz"]), cfg["omega_eff_mhz"],
        duration=cfg["duration_us"] or None,
    )
    qubit_traces = {}
    for eta_r in sorted(report.qubit_series):
        tag = f"{eta_r / MHZ:g}".replace(".", "_")
        qubit_traces[f"P_e_etar{tag}"] = report.qubit_series[eta_r].trace("P_e")
    times = next(iter(report.qubit_series.values())).times
    emit_csv(TimeSeries(times=times, traces=qubit_traces), out / "parasitic_qubit.csv")
    mode_traces = {
        f"n_etar{f'{eta_r / MHZ:g}'.replace('.', '_')}": tr for eta_r, tr in sorted(report.mode_traces.items())
    }
    emit_csv(TimeSeries(times=report.mode_times, traces=mode_traces), out / "parasitic_mode.csv")
    summary = _common_summary(cfg)
    summary["omega_eff_mhz"] = cfg["omega_eff_mhz"] / MHZ
    for eta_r in sorted(report.envelope_excess):
        tag = f"{eta_r / MHZ:g}".replace(".", "_")
        summary[f"envelope_excess_etar{tag}"] = report.envelope_excess[eta_r]
        summary[f"mode_peak_etar{tag}"] = report.mode_peaks[eta_r]
        period = report.mode_periods[eta_r]
        summary[f"mode_period_ns_etar{tag}"] = period / NS if math.isfinite(period) else None
    return summary


def _run_violate_constraint(cfg: RunConfig, out: Path) -> dict:
    params = cfg.device_params()
    report = run_constraint_violation(
        cfg["violation"],
        params,
        eta1=cfg["eta1_mhz"],
        eta2=cfg["eta2_mhz"],
        omega_eff=cfg["omega_eff_mhz"],
        initial_qubit=cfg["initial_state"],
        dissipation=cfg["dissipation"],
    )
    summary = _common_summary(cfg)
    summary.update(violation=report.mode)
    for k in sorted(report.gain_ratio):
        summary[f"compliant_gain_{k}"] = report.compliant_gain[k]
        summary[f"violated_gain_{k}"] = report.violated_gain[k]
        summary[f"gain_ratio_{k}"] = report.gain_ratio[k]
    return summary


def _run_avoided_crossing(cfg: RunConfig, out: Path) -> dict:
    params = cfg.device_params()
    span = cfg["detuning_span_mhz"]
    count = max(cfg["detuning_count"], 5)
    epsilons = params.omega + np.linspace(-span, span, count)
    result = run_avoided_crossing(params, epsilons)
    header = ["epsilon_ghz", "gap_mhz"] + [f"level_{i}" for i in range(result.levels.shape[1])]
    cols = [epsilons / (TWOPI * 1e9), result.gaps / MHZ] + [
        result.levels[:, i] / MHZ for i in range(result.levels.shape[1])
    ]
    write_csv(out / "avoided_crossing.csv", header, cols)
    summary = _common_summary(cfg)
    summary.update(
        min_gap_mhz=result.min_gap / MHZ,
        epsilon_at_min_ghz=result.epsilon_at_min / (TWOPI * 1e9),
        expected_gap_mhz=2 * params.g / MHZ,
    )
    return summary


def _run_transmon_levels(cfg: RunConfig, out: Path) -> dict:
    ec = cfg["ec_ghz"]
    levels = transmon_charge_diagonalize(
        e_j_ghz=cfg["ej_over_ec"] * ec,
        e_c_ghz=ec,
        n_g=cfg["n_g"],
        charge_cutoff=cfg["charge_cutoff"],
        level_count=cfg["level_count"],
    )
    write_csv(
        out / "transmon_levels.csv",
        ["level", "energy_ghz"],
        [np.arange(levels.level_count, dtype=float), levels.energies_ghz],
    )
    summary = _common_summary(cfg)
    summary.update(
        e_c_ghz=levels.e_c_ghz,
        e_j_ghz=levels.e_j_ghz,
        omega_01_ghz=levels.omega_01 / (TWOPI * 1e9),
        omega_12_ghz=levels.omega_12 / (TWOPI * 1e9),
        anharmonicity_ghz=levels.anharmonicity / (TWOPI * 1e9),
        g12_over_g01=float(levels.coupling_ratios[1, 2]) if levels.level_count >= 3 else None,
    )
    return summary


def _run_bias_tee(cfg: RunConfig, out: Path) -> dict:
    tau = cfg["tau_us"]
    r = cfg["resistance_ohm"]
    length = cfg["pulse_ns"]
    amp = cfg["pulse_amplitude"]
    pad = 0.2 * length
    dt = length / 2000.0
    times = np.arange(0.0, length + 2 * pad + dt / 2, dt)
    ideal = np.where((times >= pad) & (times < pad + length), amp, 0.0)
    seq = bias_tee_compensate(times, ideal, tau, r)
    resp_comp = rc_response(times, seq.compensated, tau, r)
    resp_naive = rc_response(times, r * ideal, tau, r)
    write_csv(
        out / "bias_tee.csv",
        ["t_ns", "ideal", "compensated_voltage", "response_compensated", "response_uncompensated"],
        [times / NS, ideal, seq.compensated, resp_comp, resp_naive],
    )
    on = ideal > 0
    end = np.nonzero(on)[0][-1]
    droop_comp = 1.0 - resp_comp[end] / amp
    droop_naive = 1.0 - resp_naive[end] / amp
    summary = _common_summary(cfg)
    summary.update(
        tau_us=tau / 1e-6,
        pulse_ns=length / NS,
        droop_compensated=droop_comp,
        droop_uncompensated=droop_naive,
    )
    return summary


_RUNNERS = {
    "vacuum-rabi": _run_vacuum_rabi,
    "detuning-map": _run_detuning_map,
    "collapse-revival": _run_collapse_revival,
    "full-rabi": _run_full_rabi,
    "verify-scheme": _run_verify_scheme,
    "parasitic": _run_parasitic,
    "violate-constraint": _run_violate_constraint,
    "avoided-crossing": _run_avoided_crossing,
    "transmon-levels": _run_transmon_levels,
    "bias-tee": _run_bias_tee,
}


def dispatch(cfg: RunConfig, out_dir: str | Path) -> int:
    """Run the configured experiment; write CSVs and one summary."""
    out = Path(out_dir)
    name = cfg.experiment
    if name not in _RUNNERS:
        print(f"error: unknown experiment {name!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out.mkdir(parents=True, exist_ok=True)
        _log(f"running {name} -> {out}")
        summary = _RUNNERS[name](cfg, out)
        write_summary(out / f"{name.replace('-', '_')}_summary.txt", summary)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except (FitError, NoPeakError) as exc:
        print(f"fit failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    _log("done")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--list-defaults" in argv:
        print(default_config_text(), end="")
        return EXIT_OK
    parser = argparse.ArgumentParser(prog="rabisim", description=__doc__)
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", type=str, default=None, help="flat key-value config file")
    parser.add_argument("--out", type=str, default="out", help="output directory")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text)
        overrides = [f"experiment = {args.experiment}"] + [s.replace("=", " = ", 1) for s in args.set]
        cfg = apply_overrides(cfg, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return dispatch(cfg, args.out)


if __name__ == "__main__":
    raise SystemExit(main())
