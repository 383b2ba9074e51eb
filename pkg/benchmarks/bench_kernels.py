"""Benchmark the closed-loop kernel: numba-jitted vs plain-python path.

Runs the same scripted scenario through both paths (the plain path in a
child process with RCMTELEOP_NO_NUMBA=1) and reports ticks/second.

    python3 benchmarks/bench_kernels.py [--ticks N]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def time_batch(ticks):
    from rcmteleop import kernels
    from rcmteleop.config import default_config
    from rcmteleop.simulator import Scenario, ScriptEvent, TremorModel, run_scenario

    cfg = default_config()

    def scenario(n):
        return Scenario(
            duration=n / 1000.0,
            rate=1000.0,
            events=(
                ScriptEvent(0.0, "pedal", (True, True)),
                ScriptEvent(0.0, "twist", (0.04, 0.02, -0.03, 0.3, 0.1, -0.2)),
            ),
            tremor=TremorModel(amplitude=0.002, seed=1),
        )

    run = lambda sc: run_scenario(
        sc, cfg.controller, cfg.geometry, cfg.jaw, cfg.channel, cfg.debounce_window
    )
    run(scenario(100))  # warm up (jit compilation on the jitted path)
    t0 = time.perf_counter()
    traj = run(scenario(ticks))
    elapsed = time.perf_counter() - t0
    assert len(traj) == ticks
    return {"numba": kernels.NUMBA_ENABLED, "ticks": ticks, "seconds": elapsed}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ticks", type=int, default=20_000)
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.child:
        print(json.dumps(time_batch(args.ticks)))
        return

    jitted = time_batch(args.ticks)
    env = dict(os.environ, RCMTELEOP_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, __file__, "--child", "--ticks", str(args.ticks)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    plain = json.loads(out.stdout.strip().splitlines()[-1])

    for result, label in ((jitted, "numba @njit"), (plain, "plain numpy/python")):
        rate = result["ticks"] / result["seconds"]
        print(
            f"{label:>20}: {result['ticks']:7d} ticks in {result['seconds']:8.3f} s "
            f"({rate:12.0f} ticks/s)"
        )
    print(f"{'speedup':>20}: {plain['seconds'] / jitted['seconds']:.1f}x")


if __name__ == "__main__":
    main()
