"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --n 24 --repeat 5
"""

import argparse
import time

import numpy as np

from supround import _kernels
from supround.continuity import _quantize
from supround.coupling import _kernel_args
from supround.synthetic import random_smooth_coupling, unit_cube


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, pair_n):
    P3 = random_smooth_coupling(unit_cube(n, 3), 0)
    args = _kernel_args(P3.space, P3.values)
    yield f"marginals {n}^3", lambda k: k.compensated_marginals(*args)

    _, tables = _quantize(P3.space)
    slab = np.ascontiguousarray(P3.values.reshape(n, -1))
    q = np.ascontiguousarray(tables[0])
    yield f"axis bucket max {n}^3", lambda k: k.axis_bucket_max(slab, q, int(q.max()) + 1)

    P2 = random_smooth_coupling(unit_cube(pair_n, 2), 0)
    _, t2 = _quantize(P2.space)
    index = np.ascontiguousarray(np.indices(P2.shape).reshape(2, -1).T, dtype=np.int64)
    sizes = np.asarray(P2.shape, dtype=np.int64)
    offsets = np.array([0, pair_n * pair_n], dtype=np.int64)
    qtab = np.ascontiguousarray(np.concatenate([t.ravel() for t in t2]), dtype=np.int64)
    nb = int(sum(int(t.max()) for t in t2)) + 1
    vals = np.ascontiguousarray(P2.values.ravel())
    yield (f"all-pairs bucket max {pair_n}^2",
           lambda k: k.pair_bucket_max(vals, index, qtab, offsets, sizes, nb))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=40, help="points per axis for the 3-factor cases")
    ap.add_argument("--pair-n", type=int, default=40, help="points per axis for the all-pairs case")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        cy = _kernels.load_backend("cython")
    except ImportError:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    py = _kernels.load_backend("python")
    print(f"{'kernel':32s} {'cython':>10s} {'python':>10s} {'speedup':>8s}")
    for name, fn in cases(args.n, args.pair_n):
        tc = best_of(lambda: fn(cy), args.repeat)
        tp = best_of(lambda: fn(py), args.repeat)
        print(f"{name:32s} {tc * 1e3:9.2f}ms {tp * 1e3:9.2f}ms {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
