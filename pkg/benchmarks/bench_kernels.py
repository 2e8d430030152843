"""Compare the compiled and numpy root-finding kernels.

    python benchmarks/bench_kernels.py [--batch 20000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from algebrodyn import kernels


def bench(coeffs, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        roots, conv = kernels.polyroots(coeffs)
        best = min(best, time.perf_counter() - t0)
    return best, roots, conv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--degrees", type=int, nargs="+", default=[2, 4, 8])
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    try:
        kernels.use_backend("cython")
    except ImportError:
        print("compiled extension not built; only the python backend is timed")
    print(f"{'degree':>6} {'backend':>8} {'seconds':>10} {'points/s':>12} {'converged':>10}")
    for deg in args.degrees:
        coeffs = rng.normal(size=(args.batch, deg + 1)) + 1j * rng.normal(size=(args.batch, deg + 1))
        ref = None
        for backend in ("cython", "python"):
            try:
                kernels.use_backend(backend)
            except ImportError:
                continue
            sec, roots, conv = bench(coeffs, args.repeat)
            if ref is None:
                ref = roots
            else:
                diff = np.abs(np.sort_complex(roots) - np.sort_complex(ref)).max()
                assert diff < 1e-8, f"backends disagree by {diff}"
            print(f"{deg:>6} {backend:>8} {sec:>10.4f} {args.batch / sec:>12.0f} {conv.mean():>10.4f}")
    kernels.use_backend("cython" if kernels.BACKEND == "cython" else "python")


if __name__ == "__main__":
    main()
