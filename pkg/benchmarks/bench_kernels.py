"""Compare the numba and pure-numpy kernel implementations.

Run ``python3 benchmarks/bench_kernels.py``.  Each kernel is timed on the
same inputs under both backends (first call excluded, it pays for numba's
compilation) and the outputs are checked for agreement.
"""

import argparse
import math
import time

import numpy as np

from cryptosieve import _kernels
from cryptosieve.detectors import DetectorConfig, Method
from cryptosieve.models import ShiftModel


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    impls = sorted(_kernels.IMPLEMENTATIONS)
    if "numba" not in impls:
        print("numba is not installed; only the numpy backend is timed")

    cfg = DetectorConfig(Method.CUSUM, ShiftModel(255, 1.2), 3.12)
    alpha, beta = cfg.linear_map
    theta = np.full(args.reps, _kernels.THETA_NEVER, dtype=np.int64)
    image = np.random.default_rng(0).integers(0, 256, size=(2560, 4096), dtype=np.uint8)
    stream = np.random.default_rng(1).normal(-0.05, 1.0, size=1_000_000)

    cases = {
        "simulate (CUSUM, ARL0 runs)": lambda k: k["simulate"](
            np.random.default_rng(2), args.reps, 255.0, 1.2, theta, alpha, beta, cfg.kind,
            cfg.internal_threshold, -math.inf, 10_000, False)[0],
        "byte_histograms (10 MB)": lambda k: k["byte_histograms"](image),
        "first_passage (1e6 steps)": lambda k: k["first_passage"](
            stream, _kernels.KIND_LOGSR, 1e300, -math.inf)[1],
    }
    print(f"{'kernel':32s}" + "".join(f"{name:>12s}" for name in impls) + "     speedup")
    for label, call in cases.items():
        results, outputs = {}, {}
        for name in impls:
            results[name], outputs[name] = best_of(lambda: call(_kernels.IMPLEMENTATIONS[name]),
                                                   args.repeat)
        line = f"{label:32s}" + "".join(f"{results[n] * 1e3:10.1f}ms" for n in impls)
        if len(impls) == 2:
            same = np.allclose(outputs["numba"], outputs["numpy"], rtol=1e-9, atol=1e-9)
            line += f"  {results['numpy'] / results['numba']:8.1f}x{'' if same else '  MISMATCH'}"
        print(line)


if __name__ == "__main__":
    main()
