"""Time the compiled kernel backend against the numpy reference.

Runs every hot kernel on a synthetic frame at a chosen resolution,
reports best-of-N wall time per backend, and cross-checks that the two
backends produce bit-identical outputs on the benchmark inputs.

    python3 benchmarks/bench_kernels.py --height 540 --width 960
"""

import argparse
import time

import numpy as np

from stereoweave.kernels import reference

try:
    from stereoweave.kernels import _native
except ImportError:
    _native = None


def _inputs(h, w, seed=0):
    rng = np.random.default_rng(seed)
    rgb = rng.uniform(size=(h, w, 3)).astype(np.float32)
    depth = rng.uniform(1.0, 10.0, size=(h, w)).astype(np.float32)
    disp = 512.0 * 0.08 / depth
    xs = np.arange(w, dtype=np.float64)[None, :] - disp
    tx = np.floor(xs + 0.5).astype(np.int32)
    ty = np.broadcast_to(np.arange(h, dtype=np.int32)[:, None],
                         (h, w)).copy()
    plane_idx = rng.integers(0, 4, size=(h, w)).astype(np.int32)
    mask = (rng.uniform(size=(h, w)) < 0.7).astype(np.uint8)
    field = rng.uniform(size=(h, w)).astype(np.float32)
    sx = rng.uniform(0, w - 1, size=(h, w)).astype(np.float32)
    sy = rng.uniform(0, h - 1, size=(h, w)).astype(np.float32)
    return {
        "forward_splat": (rgb, depth, tx, ty, plane_idx, 4),
        "box3_sum": (mask,),
        "gauss3_mask_sum": (mask,),
        "gauss3_masked_values": (rgb * mask[:, :, None], mask),
        "bilinear_sample": (field, sx, sy),
    }


def _best_of(fn, args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _flatten(out):
    return out if isinstance(out, tuple) else (out,)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--height", type=int, default=540)
    ap.add_argument("--width", type=int, default=960)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    inputs = _inputs(args.height, args.width)
    print(f"frame {args.height}x{args.width}, best of {args.repeat}")
    if _native is None:
        print("compiled backend not built; timing the reference only")
    header = f"{'kernel':<22}{'python ms':>12}{'native ms':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, arg in inputs.items():
        py_t, py_out = _best_of(getattr(reference, name), arg, args.repeat)
        if _native is None:
            print(f"{name:<22}{py_t * 1e3:>12.2f}{'-':>12}{'-':>10}")
            continue
        nat_t, nat_out = _best_of(getattr(_native, name), arg, args.repeat)
        for a, b in zip(_flatten(py_out), _flatten(nat_out)):
            if not np.array_equal(a, b):
                raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<22}{py_t * 1e3:>12.2f}{nat_t * 1e3:>12.2f}"
              f"{py_t / nat_t:>9.1f}x")


if __name__ == "__main__":
    main()
