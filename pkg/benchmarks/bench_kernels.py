"""Time the symmetric eigensolver backends against LAPACK.

    python3 benchmarks/bench_kernels.py [--sizes 50,100,200,400] [--repeat 3]

Prints one row per matrix size with the best-of-``repeat`` wall time of the
compiled kernels, the pure-Python fallback and ``numpy.linalg.eigvalsh``,
plus the largest eigenvalue deviation of each backend from LAPACK.
"""

import argparse
import time

import numpy as np

from logdet import matkit


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="50,100,200,400")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--python-max", type=int, default=800, help="skip the fallback above this size")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.Generator(np.random.Philox(0))
    have_native = matkit._kernels_native is not None

    print(f"{'m':>6} {'native s':>10} {'python s':>10} {'lapack s':>10} {'py/native':>10} {'native err':>11} "
          f"{'python err':>11}")
    for m in sizes:
        X = rng.standard_normal((2 * m, m))
        A = X.T @ X / (2 * m)
        t_ref, ref = best_time(lambda: np.linalg.eigvalsh(A)[::-1], args.repeat)
        row = {"native": (float("nan"), float("nan")), "python": (float("nan"), float("nan"))}
        for backend in ("native", "python"):
            if backend == "native" and not have_native:
                continue
            if backend == "python" and m > args.python_max:
                continue
            t, spec = best_time(lambda: matkit.eigenvalues_sym(A, psd_tol=0.0, backend=backend), args.repeat)
            row[backend] = (t, float(np.max(np.abs(spec.eigenvalues - ref))))
        speedup = row["python"][0] / row["native"][0]
        print(f"{m:>6} {row['native'][0]:>10.4f} {row['python'][0]:>10.4f} {t_ref:>10.4f} {speedup:>10.1f} "
              f"{row['native'][1]:>11.2e} {row['python'][1]:>11.2e}")


if __name__ == "__main__":
    main()
