"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--n 20000] [--repeat 5]
"""
import argparse
import math
import timeit

import numpy as np

from ewdloss import _pykernels
from ewdloss.geom import OBox5, corners_array

try:
    from ewdloss import _ckernels
except ImportError:
    _ckernels = None


def batch_inputs(n, rng):
    P = np.column_stack([rng.uniform(-10, 10, (n, 2)), rng.uniform(0.1, 20, (n, 2)),
                         rng.uniform(-math.pi, math.pi, n)])
    T = np.column_stack([rng.uniform(-10, 10, (n, 2)), rng.uniform(0.1, 20, (n, 2)),
                         rng.uniform(-math.pi, math.pi, n)])
    C = np.tile([0.5, 0.5, 1.0, 1.0, 1.0], (n, 1))
    return P, T, C


def polygons(n, rng):
    out = []
    for _ in range(n):
        a, b = (OBox5(*rng.uniform(-2, 2, 2), *rng.uniform(1, 6, 2), rng.uniform(-math.pi, math.pi))
                for _ in range(2))
        out.append((corners_array(a), corners_array(b)))
    return out


def bench(mod, P, T, C, polys, repeat):
    n = len(P)
    W, K, G = np.empty(n), np.empty(n, dtype=np.int_), np.empty((n, 5))
    t_batch = min(timeit.repeat(lambda: mod.edwd_batch(P, T, C, W, K, G), number=1, repeat=repeat))
    t_iou = min(timeit.repeat(lambda: [mod.convex_overlap_area(a, b) for a, b in polys],
                              number=1, repeat=repeat))
    return t_batch, t_iou, W.copy()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    P, T, C = batch_inputs(args.n, rng)
    polys = polygons(args.n // 10, rng)
    py = bench(_pykernels, P, T, C, polys, args.repeat)
    print(f"{'kernel':<22}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    if _ckernels is None:
        print(f"{'edwd_batch':<22}{py[0]:>12.4f}{'n/a':>12}")
        print(f"{'convex_overlap_area':<22}{py[1]:>12.4f}{'n/a':>12}")
        print("compiled extension not built")
        return
    cy = bench(_ckernels, P, T, C, polys, args.repeat)
    assert np.allclose(py[2], cy[2], rtol=1e-12, atol=1e-12)
    for name, a, b in (("edwd_batch", py[0], cy[0]), ("convex_overlap_area", py[1], cy[1])):
        print(f"{name:<22}{a:>12.4f}{b:>12.4f}{a / b:>9.1f}x")


if __name__ == "__main__":
    main()
