"""Compare the numba and numpy likelihood kernels on homodyne-sized problems.

    python3 benchmarks/bench_kernels.py [--n 10000] [--cutoff 6] [--repeat 20]
"""

import argparse
import time

import numpy as np

from qmle import _kernels
from qmle.linalg import num_params, params_to_factor
from qmle.povm import homodyne1_vectors


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=10000)
    ap.add_argument("--cutoff", type=int, nargs="+", default=[4, 6, 8])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    print(f"threads: {_kernels.configure_threads()}, records: {args.n}")
    print(f"{'M':>3} {'kernel':>12} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max diff':>10}")
    for M in args.cutoff:
        x = rng.normal(size=args.n)
        phi = rng.uniform(0, 2 * np.pi, args.n)
        V = homodyne1_vectors(x, phi, M, 0.8)
        T = params_to_factor(rng.normal(size=num_params(M)))
        w = rng.uniform(size=args.n)
        start = _kernels.leading_zeros(V)
        for name, fn in (("probs", lambda: _kernels.probabilities(T, V, start)),
                         ("gram", lambda: _kernels.weighted_gram(V, w, start))):
            res = {}
            for backend in ("numpy", "numba"):
                _kernels.set_backend(backend)
                res[backend] = (best_of(fn, args.repeat), fn())
            diff = np.max(np.abs(res["numpy"][1] - res["numba"][1]))
            tn, tb = res["numpy"][0], res["numba"][0]
            print(f"{M:>3} {name:>12} {1e3 * tn:>10.3f} {1e3 * tb:>10.3f} {tn / tb:>8.2f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
