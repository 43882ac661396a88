"""Time the compiled closed-loop kernel against the numpy fallback.

Usage: python benchmarks/bench_kernel.py [--horizon SECONDS] [--repeat N]

Both engines integrate the aircraft scenario with the output-feedback/y_m
scheme (68 states) at dt = 1e-3 and must agree to round-off.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from mracref import kernel
from mracref.scenario import load_scenario
from mracref.sim import build_wiring, integrate

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "aircraft_const.scn"


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=10.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    sc = load_scenario(SCENARIO).replace(horizon=args.horizon)
    wiring = build_wiring(sc)
    steps = sc.nsteps
    print(f"scenario {SCENARIO.name}: {wiring.size} states, {steps} RK4 steps")

    results = {}
    for name in sorted(kernel.ENGINES):
        t, tr = best_of(lambda: integrate(sc, engine=name, wiring=wiring), args.repeat)
        results[name] = (t, tr)
        print(f"{name:>9}: {t:8.3f} s  ({1e6 * t / steps:7.2f} us/step)")
    if "compiled" in results:
        (tc, a), (tp, b) = results["compiled"], results["python"]
        diff = np.max(np.abs(a.theta - b.theta)) / np.max(np.abs(a.theta))
        print(f"speed-up {tp / tc:.1f}x, max relative theta difference {diff:.2e}")
    else:
        print("compiled kernel not available; only the fallback was timed")


if __name__ == "__main__":
    main()
