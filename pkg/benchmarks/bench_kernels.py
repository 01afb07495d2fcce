"""Compare the numba kernels against their numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--n 512] [--repeat 20]

Both paths are called on the same arrays; results must agree to rounding.
"""
import argparse
import timeit

import numpy as np

from zkblowup import _kernels


def cases(n, rng):
    base = rng.standard_normal((n, n))
    eps = 1e-3 * rng.standard_normal((n, n))
    w = rng.random((n, n))
    return {
        "cube": (base,),
        "weighted_dot": (base, eps, w),
        "weighted_grad_sq": (base, eps, w),
        "quartic_remainder": (base, eps, w),
        "cubic_remainder": (base, eps),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not _kernels.USE_NUMBA:
        print("numba disabled (ZKBLOWUP_NO_NUMBA set or numba missing); timing numpy only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}{'rel diff':>12}")
    for name, argv in cases(args.n, rng).items():
        ref_fn = _kernels.numpy_impl[name]
        fast_fn = getattr(_kernels, name)
        ref = ref_fn(*argv)
        fast = fast_fn(*argv)  # also triggers compilation
        diff = float(np.max(np.abs(np.asarray(fast) - np.asarray(ref))) / max(np.max(np.abs(ref)), 1e-300))
        t_np = min(timeit.repeat(lambda: ref_fn(*argv), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: fast_fn(*argv), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<20}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>10.2f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
