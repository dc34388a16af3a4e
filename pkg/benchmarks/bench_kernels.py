"""Benchmark: compiled iteration kernel vs the NumPy fallback.

Runs the reference 3-terminal and 8-terminal networks at a few trajectory
lengths with both kernels and prints wall times and the speedup.

Usage: python benchmarks/bench_kernels.py [--iters N]
"""

import argparse
import time

from cvarwf import compiled_available, run
from cvarwf.scenario import PRESETS


def time_run(scenario, kernel: str) -> float:
    start = time.perf_counter()
    run(scenario.solver, scenario.terminals, scenario.fading, kernel=kernel)
    return time.perf_counter() - start


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iters", type=int, default=50_000, help="iterations per run")
    args = parser.parse_args()

    if not compiled_available():
        print("compiled kernel not built; nothing to compare")
        return

    cases = [
        ("table1-3term (model-based)", PRESETS["table1-3term"]()),
        ("table1-3term (risk-neutral)", PRESETS["table1-3term"]().with_phi(1.0)),
        ("table2-realistic8 (pf)", PRESETS["table2-realistic8"]()),
    ]
    print(f"{'case':36s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}")
    for name, scenario in cases:
        scenario = scenario.with_solver(iterations=args.iters)
        t_c = time_run(scenario, "compiled")
        t_p = time_run(scenario, "python")
        print(f"{name:36s} {t_p:9.2f}s {t_c:9.2f}s {t_p / t_c:7.1f}x")


if __name__ == "__main__":
    main()
