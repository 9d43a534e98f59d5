"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--size 512x384] [--controls 128]

Runs each kernel on both backends, checks that the outputs agree, and prints
the best-of-N wall time and the speedup.
"""

import argparse
import time

import numpy as np

from garmentwarp import _backend, _pykernels
from garmentwarp.mls import ControlPairs, WarpParams, build_warp_grid, grid_to_map

try:
    from garmentwarp import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def make_case(width, height, n_controls, seed):
    rng = np.random.default_rng(seed)
    d = rng.uniform(0, [width - 1, height - 1], size=(n_controls, 2))
    b = d + rng.normal(scale=4.0, size=d.shape)
    src = rng.integers(0, 256, size=(height, width, 4), dtype=np.uint8)
    prev = _backend.use("python")
    try:
        grid = build_warp_grid(width, height, ControlPairs(d, b), WarpParams(grid_spacing=4.0))
    finally:
        _backend.use(prev)
    mapx, mapy = grid_to_map(grid)
    queries = np.stack(np.meshgrid(grid.xs, grid.ys), -1).reshape(-1, 2)
    return d, b, queries, src, mapx, mapy


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", default="512x384", help="WIDTHxHEIGHT")
    ap.add_argument("--controls", type=int, default=128)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    width, height = (int(v) for v in args.size.lower().split("x"))

    if _ckernels is None:
        print("compiled extension not built; only the numpy backend is available")
    d, b, queries, src, mapx, mapy = make_case(width, height, args.controls, args.seed)
    mask = (src[..., 0] > 127).astype(np.uint8)
    cases = [
        (f"mls_similarity ({len(queries)} nodes, {len(d)} controls)",
         lambda k: k.mls_similarity(queries, d, b, 1.0, 1e-6)),
        (f"remap_bilinear ({width}x{height} RGBA)", lambda k: k.remap_bilinear(src, mapx, mapy, 1e-6)),
        (f"remap_nearest ({width}x{height} mask)", lambda k: k.remap_nearest(mask, mapx, mapy)),
    ]

    print(f"{'kernel':<44} {'python ms':>10} {'native ms':>10} {'speedup':>8}")
    for label, run in cases:
        t_py, out_py = best_of(lambda: run(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{label:<44} {t_py * 1e3:>10.2f} {'-':>10} {'-':>8}")
            continue
        t_c, out_c = best_of(lambda: run(_ckernels), args.repeat)
        if not np.allclose(out_py, out_c, rtol=1e-11, atol=1e-9):
            raise SystemExit(f"{label}: backends disagree")
        print(f"{label:<44} {t_py * 1e3:>10.2f} {t_c * 1e3:>10.2f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
