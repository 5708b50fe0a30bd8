"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once to trigger compilation, then timed with the
best of ``--repeat`` runs.  Outputs of the two backends are compared too.
"""
import argparse
import time

import numpy as np

from coulthresh import _cg_kernels as ck
from coulthresh import _greens_kernels as gk
from coulthresh.greens import make_grid


def best_of(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def random_spd(rng, n, d=2):
    M = rng.normal(size=(n, d, d))
    return np.einsum("nij,nkj->nik", M, M) + 0.1 * np.eye(d)


def cases(rng):
    n = 400
    Ai = random_spd(rng, n)
    Aj = random_spd(rng, n)
    lam = np.array([[1.0, 0.0], [0.0, 0.75]])
    W = np.array([[1.0, 0.0], [0.5, -1.0], [0.5, 1.0]])
    g = np.array([-1.0, -1.0, 1.0])
    yield ("elements (400 pairs)",
           lambda: ck.elements(Ai, Aj, lam, W, g, impl=ck.numba_elements),
           lambda: ck.elements(Ai, Aj, lam, W, g, impl=ck.numpy_elements))

    B = random_spd(rng, 200)
    yield ("pair_moments (200 densities, n<=10)",
           lambda: ck.pair_moments(B, 10, npts=256, impl=ck.numba_pair_moments),
           lambda: ck.pair_moments(B, 10, npts=256, impl=ck.numpy_pair_moments))

    t, _ = make_grid(1.0, 0.1, 0)
    yield (f"riccati sweep ({t.size} nodes)",
           lambda: gk.sweep(t, 0.0, 1.0, 0.1, 0, True, impl=gk.numba_sweep),
           lambda: gk.sweep(t, 0.0, 1.0, 0.1, 0, True, impl=gk.numpy_sweep))


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s} {'max diff':>9s}")
    for name, fa, fb in cases(rng):
        ta, a = best_of(fa, args.repeat)
        tb, b = best_of(fb, args.repeat)
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        diff = max(float(np.max(np.abs(x - y) / (np.abs(y) + 1e-300))) for x, y in zip(a, b))
        print(f"{name:40s} {1e3 * ta:11.3f} {1e3 * tb:11.3f} {tb / ta:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
