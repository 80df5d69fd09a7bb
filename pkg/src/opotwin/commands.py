"""High-level runs: gain curve, noise scan, squeezing run.

Each command builds a fresh apparatus from a RunConfig, drives it through
the same procedure an operator would use (lock, tune, measure), and writes
CSV data plus a flat text/JSON report into the output directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analysis import (
    GainPoint,
    NoisePoint,
    SqueezeResult,
    clearance_at,
    correct_electronic,
    db_from_linear,
    extract_minmax,
    fit_shot_noise,
    fit_threshold,
    format_report,
    gains_from_trace,
    shot_noise_residuals_db,
    write_gain_csv,
    write_noise_csv,
)
from .apparatus import MEMS_SEED, Apparatus, lo_power_scan, sa_zero_span
from .config import RunConfig
from .control import LockController, lock_update, optimize_temperatures
from .errors import AboveThresholdError, FitError


def build_apparatus(config: RunConfig, rng_seed: int | None = None) -> Apparatus:
    return Apparatus(
        cavity=config.cavity,
        budget=config.budget,
        thermal=config.initial_thermal(),
        tuning=config.tuning,
        kerr=config.kerr,
        schedule=config.schedule,
        sa=config.sa,
        detector=config.detector,
        drift=config.drift,
        seed_power_mw=config.seed_power_mw,
        lo_power_mw=config.lo_power_mw,
        rng_seed=config.rng_seed if rng_seed is None else rng_seed,
    )


def _engage(config: RunConfig) -> LockController:
    return replace(config.lock, engaged=True, last_max=float("nan"))


def _settle_to_boundary(app: Apparatus) -> None:
    tpp = app.schedule.ticks_per_period
    while app.tick_index % tpp != 0:
        app.step()


def _run_locked_windows(app: Apparatus, ctrl: LockController, n_windows: int):
    """Advance n MEMS periods under lock; returns (outputs, ctrl)."""
    outs = []
    tpp = app.schedule.ticks_per_period
    for _ in range(n_windows * tpp):
        out = app.step()
        outs.append(out)
        if out.seed_window_done and ctrl.engaged:
            ctrl, action = lock_update(ctrl, out.window_max_mw)
            app.laser_detuning += action
    return outs, ctrl


def _write_report(out_dir: Path, stem: str, report: dict) -> None:
    (out_dir / f"{stem}.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (out_dir / f"{stem}.txt").write_text(format_report(report))


# --- gain curve -------------------------------------------------------------


@dataclass
class GainCurveResult:
    points: list
    errors: list
    p_th_fit: float | None
    rms_residual: float | None
    p_th_config: float


def cmd_gain_curve(
    config: RunConfig, pump_powers=None, out_dir: str | Path | None = None
) -> GainCurveResult:
    """Measure gain vs pump power under lock and fit the threshold.

    Pump points at or above threshold are recorded as per-point errors and
    skipped; the fit runs on whatever valid points remain (>= 3 required).
    """
    pump_powers = list(pump_powers if pump_powers is not None else config.gain_curve_pump_w)
    app = build_apparatus(config)
    ctrl = _engage(config)
    _, ctrl = _run_locked_windows(app, ctrl, 10)  # settle the lock

    points, errors = [], []
    for p in pump_powers:
        try:
            app.set_pump_power(p)
        except AboveThresholdError as exc:
            errors.append({"pump_w": p, "error": str(exc)})
            continue
        _settle_to_boundary(app)
        outs, ctrl = _run_locked_windows(app, ctrl, 6)
        seed = [(o.time_s, o.d_r_mw) for o in outs if o.mems == MEMS_SEED]
        times = np.array([t for t, _ in seed])
        values = np.array([v for _, v in seed])
        gains = gains_from_trace(values, times, app.schedule.period, width=0.01)
        points.append(GainPoint(p, float(np.mean(gains))))
    app.set_pump_power(0.0)

    p_th_fit = rms = None
    if len(points) >= 3:
        p_th_fit, rms = fit_threshold(points)
    elif not errors:
        raise FitError(f"need >= 3 pump powers for a threshold fit, got {len(points)}")

    report = {
        "p_th_fit_w": p_th_fit,
        "rms_residual": rms,
        "p_th_config_w": app.p_th,
        "n_points": len(points),
        "errors": errors,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_gain_csv(out / "gain_curve.csv", points)
        _write_report(out, "gain_fit", report)
    return GainCurveResult(points, errors, p_th_fit, rms, app.p_th)


# --- noise scan -------------------------------------------------------------


@dataclass
class NoiseScanResult:
    points: list
    slope_mw_per_mw: float
    offset_dbm: float
    max_residual_db: float
    shot_noise_limited: bool
    clearance_at_lo: float


def cmd_noise_scan(
    config: RunConfig, lo_powers=None, out_dir: str | Path | None = None
) -> NoiseScanResult:
    """Pump-off noise vs LO power; fits the electronic floor and slope."""
    lo_powers = list(lo_powers if lo_powers is not None else config.noise_scan_lo_mw)
    rng = np.random.default_rng(config.rng_seed + 1)
    raw = lo_power_scan(
        lo_powers, config.detector, sa=config.sa, rng=rng, tick_s=config.schedule.tick
    )
    points = [NoisePoint(p, n) for p, n in raw]
    slope, offset_dbm = fit_shot_noise(points)
    resid = shot_noise_residuals_db(points, slope, offset_dbm)
    max_resid = float(np.max(np.abs(resid)))
    clearance = clearance_at(slope, offset_dbm, config.lo_power_mw)

    report = {
        "offset_dbm": offset_dbm,
        "slope_mw_per_mw": slope,
        "max_residual_db": max_resid,
        "shot_noise_limited": bool(max_resid < 0.1),
        "lo_power_mw": config.lo_power_mw,
        "clearance_at_lo": clearance,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_noise_csv(out / "noise_scan.csv", points)
        _write_report(out, "noise_fit", report)
    return NoiseScanResult(points, slope, offset_dbm, max_resid, max_resid < 0.1, clearance)


# --- squeezing run ----------------------------------------------------------


@dataclass
class SqueezeRunResult:
    squeeze: SqueezeResult
    reference_dbm: float
    achieved_gain: float
    temperatures: tuple
    filter_transmission: float | None
    pump_w: float


def _lo_window_extrema(outs, period_s: float, width: float = 0.05):
    """Per-MEMS-window (max, min) of the LO-phase band powers, in mW."""
    lo = [(o.time_s, o.band_power_mw) for o in outs if o.mems != MEMS_SEED]
    times = np.array([t for t, _ in lo])
    values = np.array([v for _, v in lo])
    return extract_minmax(values, times, period_s, width=width)


def cmd_squeeze_run(
    config: RunConfig,
    duration_s: float | None = None,
    filter_transmission: float | None = None,
    out_dir: str | Path | None = None,
) -> SqueezeRunResult:
    """Full squeezing pipeline.

    Lock, optimize the crystal temperatures at the squeeze pump power,
    record a pump-off reference (the trace that defines 0 dB), then record
    the phase-swept squeezing trace and reduce it to raw and
    electronic-noise-corrected levels using the clearance from a noise scan.
    """
    duration_s = duration_s if duration_s is not None else config.squeeze_duration_s

    scan = cmd_noise_scan(config)
    app = build_apparatus(config)
    ctrl = _engage(config)
    _, ctrl = _run_locked_windows(app, ctrl, 10)

    if config.squeeze_pump_w > 0.0:
        t_s, t_d, achieved_gain = optimize_temperatures(
            app, config.optimizer, config.squeeze_pump_w, ctrl=ctrl
        )
        ctrl = replace(ctrl, last_max=float("nan"))  # reference changed during tuning
    else:
        # squeezer off: nothing to optimize, the run records the flat
        # shot-reference trace
        t_s, t_d, achieved_gain = app.thermal.T_S, app.thermal.T_D, 1.0

    # pump-off reference trace: defines the 0 dB line
    app.set_pump_power(0.0)
    app.set_filter(filter_transmission)
    _settle_to_boundary(app)
    n_ref = round(config.reference_duration_s / app.schedule.tick)
    ref_outs, ctrl = _run_locked_windows(app, ctrl, n_ref // app.schedule.ticks_per_period)
    ref_lo = np.array([o.band_power_mw for o in ref_outs if o.mems != MEMS_SEED])
    ref_level = float(np.mean(ref_lo))

    # squeezing trace
    app.set_pump_power(config.squeeze_pump_w)
    _settle_to_boundary(app)
    run_outs, ctrl = _run_locked_windows(
        app, ctrl, round(duration_s / app.schedule.tick) // app.schedule.ticks_per_period
    )
    maxima, minima = _lo_window_extrema(run_outs, app.schedule.period)
    raw_asq_db = db_from_linear(float(np.mean(maxima)) / ref_level)
    raw_sq_db = db_from_linear(float(np.mean(minima)) / ref_level)

    result = SqueezeResult(
        raw_sq_db=raw_sq_db,
        raw_asq_db=raw_asq_db,
        corrected_sq_db=correct_electronic(raw_sq_db, scan.clearance_at_lo),
        corrected_asq_db=correct_electronic(raw_asq_db, scan.clearance_at_lo),
        clearance=scan.clearance_at_lo,
    )
    out = SqueezeRunResult(
        squeeze=result,
        reference_dbm=db_from_linear(ref_level),
        achieved_gain=achieved_gain,
        temperatures=(app.thermal.T_A, t_s, t_d),
        filter_transmission=filter_transmission,
        pump_w=config.squeeze_pump_w,
    )

    if out_dir is not None:
        outp = Path(out_dir)
        outp.mkdir(parents=True, exist_ok=True)
        trace = sa_zero_span(
            np.array([o.band_power_mw for o in run_outs]),
            app.sa,
            app.schedule.tick,
            time_s=np.array([o.time_s for o in run_outs]),
            phase_rad=np.array([o.pump_phase for o in run_outs]),
            mems_pos=np.array([o.mems for o in run_outs]),
        )
        trace.to_csv(outp / "squeeze_trace.csv")
        report = dict(result.as_dict())
        report.update(
            reference_dbm=out.reference_dbm,
            achieved_gain=achieved_gain,
            T_A=app.thermal.T_A,
            T_S=t_s,
            T_D=t_d,
            filter_transmission=filter_transmission,
            pump_w=config.squeeze_pump_w,
        )
        _write_report(outp, "squeeze_result", report)
    return out
