"""Compare the compiled and the numpy pair-binning kernels.

    python3 benchmarks/bench_kernels.py --cutoff 6 --repeat 3
"""

import argparse
import time

import numpy as np

from pcns import _kernels_py
from pcns.noise import bump_profile

try:
    from pcns import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def inputs(cutoff: int, epsilon: float):
    r = np.arange(-cutoff, cutoff + 1)
    modes = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3).astype(np.int64)
    modes = modes[np.any(modes != 0, axis=1)]
    w = bump_profile(epsilon * np.sqrt(np.sum(modes ** 2, axis=1)))
    keep = w > 0
    modes, w = np.ascontiguousarray(modes[keep]), np.ascontiguousarray(w[keep] ** 2)
    kmax = int(np.max(np.sum(modes ** 2, axis=1)))
    return modes, w, cutoff, 2 * kmax + 3 * cutoff ** 2, max(kmax, 3 * cutoff ** 2)


def timed(fn, args, repeat: int):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cutoff", type=int, default=6)
    ap.add_argument("--epsilon", type=float, default=0.125)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    args = inputs(a.cutoff, a.epsilon)
    print(f"modes: {len(args[0])}  pairs: {len(args[0]) ** 2}")
    t_py, ref = timed(_kernels_py.pair_bins, args, a.repeat)
    print(f"numpy   {t_py:9.4f} s")
    if _kernels is None:
        print("compiled kernel not built")
        return
    t_cy, out = timed(_kernels.pair_bins, args, a.repeat)
    err = max(float(np.max(np.abs(x - y))) for x, y in zip(out, ref))
    print(f"cython  {t_cy:9.4f} s   speedup {t_py / t_cy:6.1f}x   max abs diff {err:.2e}")


if __name__ == "__main__":
    main()
