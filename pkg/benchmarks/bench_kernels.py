"""Time the compiled kernels against the numpy fallback on representative inputs.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np
import scipy.sparse as sp

from lpstab import kernels
from lpstab.space import tree, zd_box


def _cases(rng):
    box = zd_box((60, 60))
    t = tree(3, 6)
    D = t.table
    M = rng.standard_normal((12, 16))
    A = (rng.random((400, t.n)) < 0.01).astype(float)
    S = sp.csr_matrix(A)
    sub = box.coords[rng.choice(box.n, 200, replace=False)]
    return {
        "sign_pattern_max (16 cols)": ("sign_pattern_max", (M,)),
        "greedy_net_lattice (60x60, L=3)": ("greedy_net_lattice", (box.coords, box.dims, 3.0)),
        "greedy_net_dense (tree n=%d, L=2)" % t.n: ("greedy_net_dense", (D, 2.0)),
        "dist_to_set_lattice (3600 x 200)": ("dist_to_set_lattice", (box.coords, sub)),
        "row_thickness_dense (400 rows)": ("row_thickness_dense", (S.indptr, S.indices, D)),
    }


def _time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    impls = kernels.backends()
    cases = _cases(np.random.default_rng(0))
    names = list(impls)
    print(f"{'kernel':40s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, (fname, fargs) in cases.items():
        times = [_time(getattr(impls[n], fname), fargs, args.repeat) for n in names]
        row = f"{label:40s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:11.1f}x"
        print(row)
    if len(names) == 1:
        print("compiled extension not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
