"""Benchmark the compiled kernels against the pure-Python fallback.

Times the three hot kernels on sampler-realistic shapes, then a full
small model fit under each backend. Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import os
import subprocess
import sys
import time

import numpy as np

from laggard.kernels import _purepy

try:
    from laggard.kernels import _fast
except ImportError:
    _fast = None


def _time(fn, *args, repeat=200):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(n=1000, T=37, k=4):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((n, T))
    cumsums = np.zeros((n, T + 1))
    np.cumsum(x, axis=1, out=cumsums[:, 1:])
    edges = np.sort(rng.choice(np.arange(2, T + 1), size=k - 1, replace=False))
    lo = np.concatenate([[1], edges]).astype(np.int64)
    hi = np.concatenate([edges - 1, [T]]).astype(np.int64)
    U = np.ascontiguousarray(_purepy.interval_sums(cumsums, lo, hi))
    w = np.full(n, 0.7)
    r = rng.standard_normal(n)
    grid = np.zeros((T, T))

    backends = [("python", _purepy)] + ([("cython", _fast)] if _fast else [])
    rows = []
    for name, mod in backends:
        rows.append(
            (
                name,
                _time(mod.interval_sums, cumsums, lo, hi),
                _time(mod.gram_moment, U, w, r),
                _time(mod.add_block, grid, 2, 9, 11, 20, 0.5),
            )
        )
    print(f"kernel timings (best of 200, n={n}, T={T}, {k} intervals):")
    print(f"{'backend':<10}{'interval_sums':>16}{'gram_moment':>16}{'add_block':>16}")
    for name, a, b, c in rows:
        print(f"{name:<10}{a * 1e6:>13.1f} us{b * 1e6:>13.1f} us{c * 1e6:>13.1f} us")
    if len(rows) == 2:
        print(
            "speedup (cython over python): "
            + ", ".join(
                f"{k}: {p / c:.1f}x"
                for k, p, c in zip(
                    ("interval_sums", "gram_moment", "add_block"),
                    rows[0][1:],
                    rows[1][1:],
                )
            )
        )


_FIT_SNIPPET = """
import time
import numpy as np
from laggard import kernels
from laggard.engine import ModelSpec, McmcControl, fit
from laggard.simulate import SimConfig, simulate_dataset, window_curve

cfg = SimConfig(n=500, T=20, exposure_names=("e",),
                theta={"e": window_curve(20, 8, 12, 0.05)}, gamma=(1.0,), noise_sd=1.0)
data, _ = simulate_dataset(cfg, seed=0)
t0 = time.time()
fit(ModelSpec(), data, McmcControl(n_burn=200, n_iter=400, n_thin=2, seed=0))
print(f"  {kernels.BACKEND}: {time.time() - t0:.2f} s (n=500, T=20, 600 sweeps)")
"""


def bench_fit():
    print("\nfull TDLM fit:")
    for backend in ("python", "cython") if _fast else ("python",):
        env = dict(os.environ, LAGGARD_KERNELS=backend)
        subprocess.run([sys.executable, "-c", _FIT_SNIPPET], env=env, check=True)


if __name__ == "__main__":
    if _fast is None:
        print("compiled backend unavailable; benchmarking pure Python only")
    bench_kernels()
    bench_fit()
