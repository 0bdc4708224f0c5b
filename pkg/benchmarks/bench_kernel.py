"""Compiled vs pure-Python stepping kernel.

Runs the same momentum modes through both backends, checks that the
results agree, and reports wall time and throughput (accepted steps per
second).

    python3 benchmarks/bench_kernel.py [--repeat 3] [--python-modes 2]
"""

import argparse
import time

from schwinger_qke.config import PulseConfig
from schwinger_qke.integrator import BACKENDS, evolve_mode
from schwinger_qke.kinetics import MomentumMode

CASES = [
    ("one-photon, short pulse", PulseConfig("single", E0=0.1, omega=2.5, sigma=5.0), MomentumMode(0.3, 0.2)),
    ("multiphoton", PulseConfig("single", E0=0.05, omega=0.5, sigma=3.0), MomentumMode(0.0, 0.0)),
    ("bifrequent, kOmega=20", PulseConfig("bifreq", E0=0.2, omega=0.05, sigma=5.0, kE=0.25, kOmega=20.0),
     MomentumMode(0.0, 0.0)),
]


def time_backend(backend, config, mode, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = evolve_mode(mode, config, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, result


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--python-modes", type=int, default=2,
                        help="how many cases to also run on the slow backend")
    args = parser.parse_args(argv)

    if "compiled" not in BACKENDS:
        print("compiled kernel not built; only the python backend is available")
    print(f"{'case':28s} {'backend':9s} {'steps':>9s} {'time [s]':>10s} {'steps/s':>11s} {'f_final':>14s}")
    for k, (name, config, mode) in enumerate(CASES):
        timings = {}
        for backend in ("compiled", "python"):
            if backend not in BACKENDS or (backend == "python" and k >= args.python_modes):
                continue
            repeat = args.repeat if backend == "compiled" else 1
            elapsed, result = time_backend(backend, config, mode, repeat)
            timings[backend] = (elapsed, result)
            print(f"{name:28s} {backend:9s} {result.n_steps:9d} {elapsed:10.4f} "
                  f"{result.n_steps / elapsed:11.3e} {result.f_final:14.6e}")
        if len(timings) == 2:
            (tc, rc), (tp, rp) = timings["compiled"], timings["python"]
            rel = abs(rc.f_final - rp.f_final) / max(abs(rp.f_final), 1e-300)
            print(f"{'':28s} speedup {tp / tc:8.1f}x, |df|/f = {rel:.1e}")


if __name__ == "__main__":
    main()
