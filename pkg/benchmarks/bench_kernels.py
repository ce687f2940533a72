"""Compare the compiled kernels with the numpy fallback (and the per-pixel reference).

    python benchmarks/bench_kernels.py [--size 128] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from crip import _fallback, descriptor

try:
    from crip import _ckernels
except ImportError:
    _ckernels = None


def bench(fn, arg, repeat):
    fn(arg)
    return min(timeit.repeat(lambda: fn(arg), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    img = rng.uniform(0, 255, (args.size, args.size))
    codes = descriptor.crip_map(img)

    rows = []
    for name, fb, ck, arg in [
        ("crip_map", _fallback.crip_map, getattr(_ckernels, "crip_map", None), img),
        ("lbp_map", _fallback.lbp_map, getattr(_ckernels, "lbp_map", None), img),
        ("block_histograms(B=16)", lambda c: _fallback.block_histograms(c, 16),
         (lambda c: _ckernels.block_histograms(c, 16)) if _ckernels else None, codes),
    ]:
        t_np = bench(fb, arg, args.repeat)
        t_cy = bench(ck, arg, args.repeat) if ck else float("nan")
        rows.append((name, t_cy, t_np))

    small = img[:32, :32]
    t_ref = bench(descriptor.crip_map_reference, small, 3) * (args.size / 32) ** 2

    print(f"image {args.size}x{args.size}, best of {args.repeat}  (active backend: {descriptor.BACKEND})")
    print(f"{'kernel':<24}{'cython ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, cy, npy in rows:
        print(f"{name:<24}{cy * 1e3:>12.3f}{npy * 1e3:>12.3f}{npy / cy:>10.1f}")
    print(f"{'crip reference (est.)':<24}{'':>12}{t_ref * 1e3:>12.1f}")


if __name__ == "__main__":
    main()
