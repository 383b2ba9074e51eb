"""Headless entry points: scripted runs, log replay, metrics, live service.

Exit codes: 0 success, 2 config error, 3 scenario/input error, 4 runtime
invariant violation.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import metrics
from .config import (
    ConfigError,
    apply_flag_overrides,
    default_config,
    load_config,
    load_scenario,
    merge_config,
)
from .controller import DegenerateGeometryError
from .metrics import SampledSignal
from .service import DEFAULT_ENDPOINT, read_log_config, replay_log, serve
from .simulator import ScenarioError, read_trajectory_csv, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCENARIO = 3
EXIT_RUNTIME = 4


def _add_override_flags(parser):
    parser.add_argument("--config", help="session config YAML")
    parser.add_argument("--rate", type=float, help="control rate override (Hz)")
    parser.add_argument("--alpha-t", type=float, help="translational scale override")
    parser.add_argument("--alpha-r", type=float, help="rotational scale override")
    parser.add_argument("--gain-k", type=float, help="drift-correction gain override (1/s)")
    parser.add_argument("--rcm-offset", type=float, help="pivot offset from tip override (m)")
    parser.add_argument("--seed", type=int, help="scenario seed override (incl. tremor)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rcmteleop",
        description="Pivot-constrained teleoperation: simulate, replay, analyze, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scripted scenario, write trajectory CSV")
    p_run.add_argument("scenario", help="scenario YAML")
    p_run.add_argument("--out", help="trajectory CSV output path")
    p_run.add_argument(
        "--engine",
        choices=("kernel", "reference"),
        default="kernel",
        help="simulation engine (reference = plain-python ground truth)",
    )
    _add_override_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("replay", help="re-run a recorded command log")
    p_rep.add_argument("log", help="session command log (NDJSON)")
    p_rep.add_argument("--out", help="trajectory CSV output path")
    _add_override_flags(p_rep)
    p_rep.set_defaults(func=cmd_replay)

    p_an = sub.add_parser("analyze", help="compute metrics over a CSV")
    p_an.add_argument("csv", help="trajectory CSV or generic t,c1..cn signal CSV")
    p_an.add_argument(
        "--metric",
        required=True,
        choices=("rms-accel", "window-rms", "window-mdf"),
    )
    p_an.add_argument("--window", type=float, default=0.5, help="window length (s)")
    p_an.add_argument("--hop", type=float, default=0.5, help="hop between windows (s)")
    p_an.add_argument("--channel", help="column for windowed metrics (default: first data column)")
    p_an.add_argument("--out", help="feature CSV output path")
    p_an.set_defaults(func=cmd_analyze)

    p_srv = sub.add_parser("serve", help="run the live teleoperation service")
    p_srv.add_argument(
        "--endpoint",
        default=None,
        help="host:port for the TCP stream (default: RCMTELEOP_ENDPOINT env var "
        f"or {DEFAULT_ENDPOINT})",
    )
    p_srv.add_argument("--ws-port", type=int, help="WebSocket port (default TCP port + 1)")
    p_srv.add_argument("--record", help="write the command log here (for replay)")
    p_srv.add_argument("--out", help="write the session trajectory CSV here on shutdown")
    _add_override_flags(p_srv)
    p_srv.set_defaults(func=cmd_serve)

    return parser


def _load_cfg(args, inline=None, base=None):
    cfg = base if base is not None else default_config()
    if inline:
        cfg = merge_config(cfg, inline)
    if args.config:
        cfg = load_config(args.config, base=cfg)
    return apply_flag_overrides(
        cfg,
        rate=args.rate,
        alpha_t=args.alpha_t,
        alpha_r=args.alpha_r,
        gain_k=args.gain_k,
        rcm_offset=args.rcm_offset,
    )


def _print_summary(traj):
    if len(traj) >= 3:
        rms = metrics.rms_accel_norm(SampledSignal(traj.rate, traj.tip))
    else:
        rms = 0.0
    drift = float(traj.rcm_drift.max()) if len(traj) else 0.0
    clearance = float(traj.clearance.min()) if len(traj) else 0.0
    print(f"ticks={len(traj)}")
    print(f"rms_accel_norm_tip_m_s2={rms:.9g}")
    print(f"max_rcm_drift_m={drift:.9g}")
    print(f"min_clearance_m={clearance:.9g}")


def cmd_run(args):
    scenario, inline_cfg = load_scenario(args.scenario)
    cfg = _load_cfg(args, inline=inline_cfg)
    if args.rate is not None:
        scenario = replace(scenario, rate=float(args.rate))
    if args.seed is not None:
        scenario = replace(
            scenario,
            seed=args.seed,
            tremor=replace(scenario.tremor, seed=args.seed),
        )
    if args.rcm_offset is not None:
        scenario = replace(scenario, rcm_offset=float(args.rcm_offset))
    traj = run_scenario(
        scenario,
        cfg.controller,
        cfg.geometry,
        cfg.jaw,
        cfg.channel,
        cfg.debounce_window,
        engine=args.engine,
    )
    if args.out:
        traj.write_csv(args.out)
    _print_summary(traj)
    return EXIT_OK


def cmd_replay(args):
    base = read_log_config(args.log)
    cfg = _load_cfg(args, base=base)
    traj = replay_log(args.log, cfg)
    if args.out:
        traj.write_csv(args.out)
    _print_summary(traj)
    return EXIT_OK


def _analyze_input(path):
    """Load either a trajectory CSV or a generic signal CSV."""
    try:
        cols = read_trajectory_csv(path)
        t = cols["t"]
        rate = 1.0 / float(np.median(np.diff(t))) if len(t) > 1 else 1.0
        return rate, cols, True
    except ValueError:
        rate, cols = metrics.read_signal_csv(path)
        return rate, cols, False


def cmd_analyze(args):
    rate, cols, is_trajectory = _analyze_input(args.csv)
    names = list(cols)

    if args.metric == "rms-accel":
        if is_trajectory:
            pos = np.column_stack((cols["tip_x"], cols["tip_y"], cols["tip_z"]))
        else:
            data_cols = [n for n in names[1:]]
            if len(data_cols) < 3:
                raise ScenarioError("rms-accel needs three position columns")
            pos = np.column_stack([cols[n] for n in data_cols[:3]])
        value = metrics.rms_accel_norm(SampledSignal(rate, pos))
        print(f"rms_accel_norm_m_s2={value:.9g}")
        if args.out:
            series = metrics.FeatureSeries(
                window=len(pos) / rate,
                hop=len(pos) / rate,
                start_times=np.zeros(1),
                values=np.array([value]),
            )
            series.write_csv(args.out)
        return EXIT_OK

    channel = args.channel or names[1]
    if channel not in cols:
        raise ScenarioError(f"no column {channel!r} in {args.csv} (have {names})")
    sig = SampledSignal(rate, cols[channel])
    if args.metric == "window-rms":
        series = metrics.window_rms(sig, args.window, args.hop)
    else:
        series = metrics.window_mdf(sig, args.window, args.hop)
    print(f"windows={len(series)}")
    for t, v in zip(series.start_times, series.values):
        print(f"{t:.6g}\t{v:.9g}")
    if args.out:
        series.write_csv(args.out)
    return EXIT_OK


def cmd_serve(args):
    cfg = _load_cfg(args)
    return serve(
        cfg,
        endpoint=args.endpoint,
        ws_port=args.ws_port,
        log_path=args.record,
        trajectory_out=args.out,
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioError, OSError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except ValueError as exc:
        if isinstance(exc, DegenerateGeometryError):
            print(f"runtime invariant violation: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
