"""Compare the numba kernels against the pure-numpy fallback.

Runs the convolution forward/backward and max-pool kernels on
training-sized shapes and prints per-kernel timings plus the speedup.
Numba warm-up (JIT compile) happens before timing.

Usage: python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from xcnn import kernels_numpy

try:
    from xcnn import kernels_numba
    HAVE_NUMBA = True
except ImportError:
    kernels_numba = None
    HAVE_NUMBA = False

# batch, cin, cout, height/width, kernel: the default model's three blocks
SHAPES = [
    (32, 3, 16, 64, 3),
    (32, 16, 32, 32, 3),
    (32, 32, 64, 16, 3),
]


def _args(n, cin, cout, s, k, rng):
    pad = k // 2
    xp = rng.standard_normal((n, cin, s + 2 * pad, s + 2 * pad)).astype(np.float32)
    w = rng.standard_normal((cout, cin, k, k)).astype(np.float32)
    b = rng.standard_normal(cout).astype(np.float32)
    g = rng.standard_normal((n, cout, s, s)).astype(np.float32)
    return xp, w, b, g, pad


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(mod, name, repeats, rng):
    rows = []
    for n, cin, cout, s, k in SHAPES:
        xp, w, b, g, pad = _args(n, cin, cout, s, k, rng)
        macs = n * cout * cin * s * s * k * k
        fwd = _time(lambda: mod.conv2d_forward(xp, w, b, 1), repeats)
        dx = _time(lambda: mod.conv2d_backward_input(g, w, 1, xp.shape[2], xp.shape[3]),
                   repeats)
        dw = _time(lambda: mod.conv2d_backward_weights(g, xp, k, k, 1), repeats)
        out, idx = mod.maxpool_forward(xp, 2, 2)
        pg = rng.standard_normal(out.shape).astype(np.float32)
        pool = _time(lambda: mod.maxpool_forward(xp, 2, 2), repeats)
        poolb = _time(lambda: mod.maxpool_backward(pg, idx, xp.shape[2], xp.shape[3]),
                      repeats)
        rows.append((f"{n}x{cin}->{cout}@{s}", macs, fwd, dx, dw, pool, poolb))
    print(f"\n[{name}] best of {repeats} (seconds; GMAC/s for conv forward)")
    print(f"{'shape':>16} {'fwd':>9} {'GMAC/s':>7} {'dx':>9} {'dw':>9} "
          f"{'pool':>9} {'poolbwd':>9}")
    for label, macs, fwd, dx, dw, pool, poolb in rows:
        print(f"{label:>16} {fwd:9.4f} {macs / fwd / 1e9:7.2f} {dx:9.4f} "
              f"{dw:9.4f} {pool:9.4f} {poolb:9.4f}")
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    np_rows = bench(kernels_numpy, "numpy", args.repeats, rng)
    if not HAVE_NUMBA:
        print("\nnumba not installed; fallback timings only")
        return
    # trigger JIT compilation outside the timed region
    bench(kernels_numba, "numba warm-up", 1, rng)
    nb_rows = bench(kernels_numba, "numba", args.repeats, rng)

    print("\nspeedup (numpy time / numba time)")
    for np_r, nb_r in zip(np_rows, nb_rows):
        ratios = [np_r[i] / nb_r[i] for i in range(2, 7)]
        print(f"{np_r[0]:>16} fwd {ratios[0]:5.1f}x  dx {ratios[1]:5.1f}x  "
              f"dw {ratios[2]:5.1f}x  pool {ratios[3]:5.1f}x  "
              f"poolbwd {ratios[4]:5.1f}x")


if __name__ == "__main__":
    main()
