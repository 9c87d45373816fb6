#!/usr/bin/env python3
"""Benchmark: compiled kernel core vs the pure numpy fallback.

Times the three per-step kernels at the dimensions the estimators use,
then times a full 1000-step REPI stream under each backend (the stream
benchmark re-executes this script in a subprocess because the backend is
chosen at import).

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def random_psd(rng, n):
    A = rng.standard_normal((n, n))
    return np.ascontiguousarray(A @ A.T / n + 0.1 * np.eye(n))


def time_kernel(fn, args_list, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        for args in args_list:
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best / len(args_list)


def bench_kernels(repeat):
    from sepident._kernels import _ref

    try:
        from sepident._kernels import _core
    except ImportError:
        _core = None

    rng = np.random.default_rng(0)
    rows = []
    for n in (3, 7, 12, 24):
        mats = [random_psd(rng, n) for _ in range(200)]
        vecs = [rng.standard_normal(n) for _ in range(200)]
        for name in ("rls_gain", "sm_downdate", "rls_gain_downdate"):
            args = list(zip(mats, vecs))
            t_py = time_kernel(getattr(_ref, name), args, repeat)
            if _core is not None:
                t_cy = time_kernel(getattr(_core, name), args, repeat)
                rows.append((name, n, t_py * 1e6, t_cy * 1e6, t_py / t_cy))
            else:
                rows.append((name, n, t_py * 1e6, float("nan"), float("nan")))
    print(f"{'kernel':<20}{'dim':>5}{'numpy us':>12}{'cython us':>12}{'speedup':>10}")
    for name, n, t_py, t_cy, speedup in rows:
        print(f"{name:<20}{n:>5}{t_py:>12.2f}{t_cy:>12.2f}{speedup:>10.2f}")


STREAM_SNIPPET = """
import time
import numpy as np
import sepident
from sepident.data import SynthSpec, gen_complex_exponential, sample_initial_values, DEFAULT_INIT_RANGES
from sepident.models import ComplexExponential3
from sepident.recursive import EstimatorConfig, run_stream

model = ComplexExponential3()
obs = gen_complex_exponential(SynthSpec(seed=1))
init = sample_initial_values(DEFAULT_INIT_RANGES, 2)
run_stream(model, EstimatorConfig(algorithm="REPI"), obs, init)  # warmup
best = float("inf")
for _ in range(5):
    t0 = time.perf_counter()
    run_stream(model, EstimatorConfig(algorithm="REPI"), obs, init)
    best = min(best, time.perf_counter() - t0)
print(f"{sepident.KERNEL_BACKEND}: {best*1e3:.1f} ms per 1000-step stream")
"""


def bench_stream():
    print("\nfull 1000-step REPI stream:")
    for pure in ("0", "1"):
        env = dict(os.environ, SEPIDENT_PURE_PYTHON=pure)
        out = subprocess.run(
            [sys.executable, "-c", STREAM_SNIPPET], env=env, capture_output=True, text=True
        )
        print(" ", out.stdout.strip() or out.stderr.strip())


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=20, help="timing repetitions (best-of)")
    args = parser.parse_args()
    bench_kernels(args.repeat)
    bench_stream()


if __name__ == "__main__":
    main()
