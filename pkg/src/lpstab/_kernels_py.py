"""Pure numpy versions of the hot loops in ``_kernels.pyx``.

Signatures match the compiled module and results agree exactly, except that
``sign_pattern_max`` sums in a different order and can differ by rounding.
``kernels.py`` picks one at import time.
"""
from __future__ import annotations

import numpy as np


def sign_pattern_max(M):
    """max over u in {-1,+1}^n (u[0] = +1) of max_i |(M u)_i|.

    Returns ``(value, pattern)``. Enumerates all 2^(n-1) patterns.
    """
    M = np.ascontiguousarray(M, dtype=np.float64)
    n = M.shape[1]
    if n == 0:
        return 0.0, np.zeros(0, dtype=np.int8)
    total = 1 << (n - 1)
    best = -1.0
    best_code = 0
    chunk = 1 << min(n - 1, 14)
    bits = np.arange(n - 1, dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        U = np.ones((codes.size, n))
        U[:, 1:] = 1.0 - 2.0 * ((codes[:, None] >> bits) & 1)
        vals = np.abs(U @ M.T).max(axis=1) if M.shape[0] else np.zeros(codes.size)
        k = int(np.argmax(vals))
        if vals[k] > best:
            best = float(vals[k])
            best_code = int(codes[k])
    pattern = np.ones(n, dtype=np.int8)
    for j in range(n - 1):
        if (best_code >> j) & 1:
            pattern[j + 1] = -1
    return best, pattern


def greedy_net_lattice(coords, dims, L):
    """Greedy maximal L-net (sup metric) visiting points in index order."""
    coords = np.asarray(coords, dtype=np.int64)
    dims = tuple(int(d) for d in dims)
    n = coords.shape[0]
    R = int(np.floor(L))
    covered = np.zeros(dims, dtype=bool)
    flat = covered.reshape(-1)
    centers = []
    for i in range(n):
        if flat[i]:
            continue
        centers.append(i)
        c = coords[i]
        sl = tuple(slice(max(0, int(c[k]) - R), min(dims[k], int(c[k]) + R + 1)) for k in range(len(dims)))
        covered[sl] = True
    return np.asarray(centers, dtype=np.int64)


def greedy_net_dense(D, L):
    """Greedy maximal L-net for an explicit distance table."""
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    covered = np.zeros(n, dtype=bool)
    centers = []
    for i in range(n):
        if covered[i]:
            continue
        centers.append(i)
        covered |= D[i] <= L
    return np.asarray(centers, dtype=np.int64)


def dist_to_set_lattice(coords, set_coords):
    """min over the set of the sup-distance, for every point."""
    coords = np.asarray(coords, dtype=np.int64)
    set_coords = np.asarray(set_coords, dtype=np.int64)
    n = coords.shape[0]
    out = np.full(n, np.inf)
    if set_coords.shape[0] == 0:
        return out
    step = max(1, 4_000_000 // max(1, n * coords.shape[1]))
    for s in range(0, set_coords.shape[0], step):
        blk = set_coords[s : s + step]
        d = np.abs(coords[:, None, :] - blk[None, :, :]).max(axis=2)
        np.minimum(out, d.min(axis=1), out=out)
    return out


def row_thickness_dense(indptr, indices, D):
    """Per row: min over centers x of max distance from x to the row support.

    Returns ``(radius, center)``; empty rows get radius 0 and center -1.
    """
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    D = np.asarray(D, dtype=np.float64)
    m = indptr.size - 1
    rad = np.zeros(m)
    cen = np.full(m, -1, dtype=np.int64)
    for y in range(m):
        S = indices[indptr[y] : indptr[y + 1]]
        if S.size == 0:
            continue
        far = D[:, S].max(axis=1)
        k = int(np.argmin(far))
        rad[y] = far[k]
        cen[y] = k
    return rad, cen
