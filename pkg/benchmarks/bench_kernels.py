"""Time the replay kernels: numba (if available) against the plain version.

    python benchmarks/bench_kernels.py [--n 200000] [--repeat 5]

The first numba call includes compilation, so it is run once before timing.
"""

import argparse
import time

import numpy as np

from ecnfallback import kernels
from ecnfallback.fallback_detect import ONE, ClassicEcnScore, ScoreParams


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(n: int):
    rng = np.random.default_rng(0)
    args = rng.integers(1, 1 << 24, n, dtype=np.int64)
    rtts = (20_000 + rng.integers(0, 2_000, n)).astype(np.int64)
    rtts[n // 2:] += 5_000
    kinds = rng.choice(4, size=n, p=[0.85, 0.1, 0.04, 0.01]).astype(np.int64)
    v = rng.integers(1, 1 << 20, n, dtype=np.int64)
    d = rng.integers(1, 1 << 20, n, dtype=np.int64)
    s_fp = (rng.uniform(0, 1, n) * (ONE // 4)).astype(np.int64)
    p = ScoreParams()
    sc = ClassicEcnScore(p)
    t = np.cumsum(rng.integers(1, 200, n)).astype(np.int64)
    fid = rng.integers(0, 8, n, dtype=np.int64)
    size = np.full(n, 1500, dtype=np.int64)
    n_bins = int(t[-1] // 100_000) + 1
    return {
        "carry_ilog2_series": (args, 9, 3 << 8),
        "rtt_replay": (rtts, 8, 9, True),
        "score_replay": (kinds, v, d, s_fp, sc.floor, sc.ceil, ONE, sc.v0_lg, sc.d0_lg,
                         p.v_lg, p.d_lg, 17, 18),
        "rolling_rate": (t, size, 1_000_000),
        "binned_bytes": (t, fid, size, 8, 100_000, n_bins),
    }


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args()
    print(f"backend: {kernels.backend()}, n = {a.n}")
    for name, args in cases(a.n).items():
        py = getattr(kernels, name + "_py")
        jit = getattr(kernels, name + "_jit")
        t_py = _best(lambda: py(*args), a.repeat)
        line = f"{name:20s} numpy/python {t_py * 1e3:9.1f} ms"
        if jit is not None:
            jit(*args)
            t_jit = _best(lambda: jit(*args), a.repeat)
            line += f"   numba {t_jit * 1e3:8.2f} ms   x{t_py / t_jit:6.1f}"
        print(line)


if __name__ == "__main__":
    main()
