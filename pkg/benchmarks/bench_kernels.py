"""Compare the jitted kernels against the pure-numpy fallback.

The four hot kernels (weighted moments, 2-D histogram, entropy, third
moment) exist in both backends; this script times them on one shared random
dataset and prints a table with the speedup.  Optionally (--sweep) it also
times one reduced end-to-end sweep per backend in a subprocess, because the
pipeline-level backend choice is fixed at import time via QUADINFO_BACKEND.

Usage:
    python3 benchmarks/bench_kernels.py [--samples 200000] [--nb 500]
                                        [--repeats 5] [--sweep]
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from quadinfo import _accel


def make_dataset(n: int, seed: int = 11):
    rng = np.random.default_rng(seed)
    r = rng.normal(scale=0.02, size=n)
    i = rng.normal(scale=0.005, size=n)
    w = r * r + i * i
    p = rng.random(5000) ** 2
    p /= p.sum()
    return r, i, w, p


def time_call(fn, *args, repeats: int) -> float:
    fn(*args)  # warm (JIT compile / cache touch)
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def bench_kernels(n: int, nb: int, repeats: int):
    r, i, w, p = make_dataset(n)
    window_args = (float(r.min()), float(np.ptp(r)) or 1.0,
                   float(i.min()), float(np.ptp(i)) or 1.0, nb)
    cases = {
        "weighted_moments": (r, i, w),
        "histogram_counts": (r, i, w, *window_args),
        "entropy_nats": (p,),
        "third_moment": (r, w),
    }
    rows = []
    for name, args in cases.items():
        row = {"kernel": name}
        for backend, table in sorted(_accel.IMPLEMENTATIONS.items()):
            row[backend] = time_call(table[name], *args, repeats=repeats)
        rows.append(row)

    backends = sorted(_accel.IMPLEMENTATIONS)
    print(f"\nkernel timings, median of {repeats} runs "
          f"({n} samples, nb={nb}):\n")
    header = f"{'kernel':<20}" + "".join(f"{b + ' [ms]':>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for row in rows:
        line = f"{row['kernel']:<20}"
        for b in backends:
            line += f"{row[b] * 1e3:>14.3f}"
        if len(backends) == 2:
            line += f"{row['numpy'] / row['numba']:>10.1f}x"
        print(line)
    if len(backends) < 2:
        print("\n(numba unavailable: only the numpy fallback was timed)")
        return

    # quick cross-backend agreement check on the same data
    m_nb = _accel.IMPLEMENTATIONS["numba"]["weighted_moments"](r, i, w)
    m_np = _accel.IMPLEMENTATIONS["numpy"]["weighted_moments"](r, i, w)
    worst = max(abs(a - b) / max(abs(b), 1e-300)
                for a, b in zip(m_nb, m_np))
    print(f"\nbackend agreement (weighted moments): {worst:.2e} relative")


def bench_sweep():
    code = (
        "import time\n"
        "from quadinfo.config import load_config\n"
        "from quadinfo.pipeline import run_sweep\n"
        "from quadinfo import _accel, BACKEND\n"
        "cfg = load_config('reference', overrides={'grid.nx': 128,"
        " 'grid.ny': 128, 'cm.eps.count': 15})\n"
        "_accel.warmup()\n"
        "t0 = time.perf_counter()\n"
        "run_sweep(cfg)\n"
        "print(f'{BACKEND}: {time.perf_counter() - t0:.2f}s')\n"
    )
    print("\nreduced end-to-end sweep (15 eps, 128x128, nb=500):\n")
    for backend in ("numba", "numpy"):
        env = dict(os.environ, QUADINFO_BACKEND=backend)
        proc = subprocess.run([sys.executable, "-c", code], env=env,
                              capture_output=True, text=True)
        if proc.returncode != 0:
            print(f"{backend}: failed\n{proc.stderr.strip()}")
        else:
            print(proc.stdout.strip())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=200_000)
    parser.add_argument("--nb", type=int, default=500)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--sweep", action="store_true",
                        help="also time a reduced end-to-end sweep per backend")
    args = parser.parse_args(argv)
    print(f"active backend: {_accel.BACKEND}")
    bench_kernels(args.samples, args.nb, args.repeats)
    if args.sweep:
        bench_sweep()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
