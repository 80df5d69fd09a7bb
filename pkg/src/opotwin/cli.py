"""Command-line entry points.

Subcommands: gain-curve, noise-scan, squeeze-run, fit, serve.
Exit codes: 0 success, 2 precondition/config error, 3 simulation fault.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import commands
from .analysis import (
    fit_shot_noise,
    fit_threshold,
    format_report,
    read_gain_csv,
    read_noise_csv,
)
from .config import RunConfig, default_config_yaml, load_config
from .errors import (
    AboveThresholdError,
    CalibrationError,
    ConfigError,
    DomainError,
    FitError,
    InsufficientDataError,
    LockLostError,
    LockProtocolError,
    OpoTwinError,
    SimulationFault,
)
from .session import SessionServer

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_SIM_FAULT = 3

_PRECONDITION_ERRORS = (ConfigError, DomainError, FitError, CalibrationError, InsufficientDataError)
_FAULT_ERRORS = (SimulationFault, LockLostError, LockProtocolError)


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["rng_seed"] = args.seed
    if getattr(args, "out", None) is not None:
        updates["out_dir"] = str(args.out)
    if getattr(args, "time_factor", None) is not None:
        updates["time_factor"] = args.time_factor
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _print_report(report: dict) -> None:
    sys.stdout.write(format_report(report))


def cmd_gain_curve(args) -> int:
    cfg = _load(args)
    pumps = args.pump_w if args.pump_w else None
    res = commands.cmd_gain_curve(cfg, pump_powers=pumps, out_dir=Path(cfg.out_dir))
    _print_report(
        {
            "p_th_fit_w": res.p_th_fit,
            "rms_residual": res.rms_residual,
            "p_th_config_w": res.p_th_config,
            "n_points": len(res.points),
            "n_errors": len(res.errors),
        }
    )
    for err in res.errors:
        print(f"error at pump {err['pump_w']} W: {err['error']}", file=sys.stderr)
    return EXIT_OK


def cmd_noise_scan(args) -> int:
    cfg = _load(args)
    los = args.lo_mw if args.lo_mw else None
    res = commands.cmd_noise_scan(cfg, lo_powers=los, out_dir=Path(cfg.out_dir))
    _print_report(
        {
            "offset_dbm": res.offset_dbm,
            "slope_mw_per_mw": res.slope_mw_per_mw,
            "max_residual_db": res.max_residual_db,
            "shot_noise_limited": res.shot_noise_limited,
            "clearance_at_lo": res.clearance_at_lo,
        }
    )
    return EXIT_OK


def cmd_squeeze_run(args) -> int:
    cfg = _load(args)
    res = commands.cmd_squeeze_run(
        cfg,
        duration_s=args.duration,
        filter_transmission=args.filter_transmission,
        out_dir=Path(cfg.out_dir),
    )
    report = res.squeeze.as_dict()
    report.update(
        reference_dbm=res.reference_dbm,
        achieved_gain=res.achieved_gain,
        filter_transmission=res.filter_transmission,
        pump_w=res.pump_w,
    )
    _print_report(report)
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.kind == "gain":
        points = read_gain_csv(args.csv)
        p_th, rms = fit_threshold(points)
        report = {"p_th_fit_w": p_th, "rms_residual": rms, "n_points": len(points)}
    else:
        points = read_noise_csv(args.csv)
        slope, offset = fit_shot_noise(points)
        report = {"offset_dbm": offset, "slope_mw_per_mw": slope, "n_points": len(points)}
    _print_report(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"fit_{args.kind}.json").write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def cmd_serve(args) -> int:
    cfg = _load(args)
    factor = args.time_factor if args.time_factor is not None else (cfg.time_factor or 1.0)
    server = SessionServer(cfg, port=args.port, time_factor=factor)
    print(f"serving on {server.host}:{server.port} (time factor {factor})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


def cmd_write_config(args) -> int:
    text = default_config_yaml()
    if args.path == "-":
        sys.stdout.write(text)
    else:
        Path(args.path).write_text(text)
        print(f"wrote {args.path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opotwin", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--seed", type=int, help="override the RNG seed")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("gain-curve", help="measure gain vs pump power and fit the threshold")
    common(sp)
    sp.add_argument("--pump-w", type=float, nargs="+", help="pump powers in W")
    sp.set_defaults(func=cmd_gain_curve)

    sp = sub.add_parser("noise-scan", help="pump-off noise vs LO power calibration")
    common(sp)
    sp.add_argument("--lo-mw", type=float, nargs="+", help="LO powers in mW")
    sp.set_defaults(func=cmd_noise_scan)

    sp = sub.add_parser("squeeze-run", help="full squeezing measurement pipeline")
    common(sp)
    sp.add_argument("--duration", type=float, help="squeeze trace duration in s")
    sp.add_argument(
        "--filter-transmission",
        type=float,
        help="insert a passive filter of this transmission into the squeezed path",
    )
    sp.set_defaults(func=cmd_squeeze_run)

    sp = sub.add_parser("fit", help="fit a gain or noise CSV")
    sp.add_argument("--kind", choices=("gain", "noise"), required=True)
    sp.add_argument("csv", help="input CSV (pump_w,gain or lo_mw,noise_dbm)")
    sp.add_argument("--out", help="directory for the JSON report")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("serve", help="run the operator session endpoint")
    common(sp)
    sp.add_argument("--port", type=int, default=7870)
    sp.add_argument("--time-factor", type=float, help="simulation speed vs wall clock")
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("write-config", help="emit the documented default config")
    sp.add_argument("path", nargs="?", default="-", help="destination file or - for stdout")
    sp.set_defaults(func=cmd_write_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _FAULT_ERRORS as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        return EXIT_SIM_FAULT
    except AboveThresholdError as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        return EXIT_SIM_FAULT
    except _PRECONDITION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OpoTwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
