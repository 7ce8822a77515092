# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Same contracts as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, floor, INFINITY

cnp.import_array()


def sign_pattern_max(M):
    cdef const double[:, ::1] A = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t m = A.shape[0], n = A.shape[1]
    if n == 0:
        return 0.0, np.zeros(0, dtype=np.int8)
    cdef double[::1] w = np.zeros(m)
    cdef signed char[::1] u = np.ones(n, dtype=np.int8)
    cdef signed char[::1] best_u = np.ones(n, dtype=np.int8)
    cdef Py_ssize_t i, j
    cdef long long k, total = (<long long>1) << (n - 1)
    cdef double cur, best, s
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += A[i, j]
        w[i] = s
    best = 0.0
    for i in range(m):
        if fabs(w[i]) > best:
            best = fabs(w[i])
    for k in range(1, total):
        # Gray code: flip the lowest set bit of k (positions 1..n-1)
        j = 1
        while not ((k >> (j - 1)) & 1):
            j += 1
        s = -2.0 * u[j]
        u[j] = -u[j]
        cur = 0.0
        for i in range(m):
            w[i] += s * A[i, j]
            if fabs(w[i]) > cur:
                cur = fabs(w[i])
        if cur > best:
            best = cur
            best_u[:] = u
    return best, np.asarray(best_u).copy()


def greedy_net_lattice(coords, dims, double L):
    cdef const long long[:, ::1] C = np.ascontiguousarray(coords, dtype=np.int64)
    cdef const long long[::1] Dm = np.ascontiguousarray(dims, dtype=np.int64)
    cdef Py_ssize_t n = C.shape[0], kdim = C.shape[1]
    cdef long long R = <long long>floor(L)
    cdef cnp.uint8_t[::1] covered = np.zeros(n, dtype=np.uint8)
    cdef long long[::1] stride = np.ones(kdim, dtype=np.int64)
    cdef long long[::1] lo = np.zeros(kdim, dtype=np.int64)
    cdef long long[::1] hi = np.zeros(kdim, dtype=np.int64)
    cdef long long[::1] cur = np.zeros(kdim, dtype=np.int64)
    cdef Py_ssize_t i, a
    cdef long long flat
    out = []
    for a in range(kdim - 2, -1, -1):
        stride[a] = stride[a + 1] * Dm[a + 1]
    for i in range(n):
        if covered[i]:
            continue
        out.append(i)
        for a in range(kdim):
            lo[a] = C[i, a] - R if C[i, a] - R > 0 else 0
            hi[a] = C[i, a] + R if C[i, a] + R < Dm[a] - 1 else Dm[a] - 1
            cur[a] = lo[a]
        # odometer over the box
        while True:
            flat = 0
            for a in range(kdim):
                flat += cur[a] * stride[a]
            covered[flat] = 1
            a = kdim - 1
            while a >= 0:
                cur[a] += 1
                if cur[a] <= hi[a]:
                    break
                cur[a] = lo[a]
                a -= 1
            if a < 0:
                break
    return np.asarray(out, dtype=np.int64)


def greedy_net_dense(D, double L):
    cdef const double[:, ::1] A = np.ascontiguousarray(D, dtype=np.float64)
    cdef Py_ssize_t n = A.shape[0], i, j
    cdef cnp.uint8_t[::1] covered = np.zeros(n, dtype=np.uint8)
    out = []
    for i in range(n):
        if covered[i]:
            continue
        out.append(i)
        for j in range(n):
            if A[i, j] <= L:
                covered[j] = 1
    return np.asarray(out, dtype=np.int64)


def dist_to_set_lattice(coords, set_coords):
    cdef const long long[:, ::1] C = np.ascontiguousarray(coords, dtype=np.int64)
    cdef const long long[:, ::1] S = np.ascontiguousarray(set_coords, dtype=np.int64)
    cdef Py_ssize_t n = C.shape[0], ns = S.shape[0], kdim = C.shape[1]
    cdef Py_ssize_t i, j, a
    cdef long long d, t, best
    out = np.full(n, np.inf)
    cdef double[::1] o = out
    if ns == 0:
        return out
    for i in range(n):
        best = -1
        for j in range(ns):
            d = 0
            for a in range(kdim):
                t = C[i, a] - S[j, a]
                if t < 0:
                    t = -t
                if t > d:
                    d = t
            if best < 0 or d < best:
                best = d
                if best == 0:
                    break
        o[i] = <double>best
    return out


def row_thickness_dense(indptr, indices, D):
    cdef const long long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long long[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[:, ::1] A = np.ascontiguousarray(D, dtype=np.float64)
    cdef Py_ssize_t m = ip.shape[0] - 1, n = A.shape[0]
    rad_arr = np.zeros(m)
    cen_arr = np.full(m, -1, dtype=np.int64)
    cdef double[::1] rad = rad_arr
    cdef long long[::1] cen = cen_arr
    cdef Py_ssize_t y, x, t
    cdef double far, best
    cdef long long bx
    for y in range(m):
        if ip[y + 1] == ip[y]:
            continue
        best = INFINITY
        bx = -1
        for x in range(n):
            far = 0.0
            for t in range(ip[y], ip[y + 1]):
                if A[x, ix[t]] > far:
                    far = A[x, ix[t]]
                    if far >= best:
                        break
            if far < best:
                best = far
                bx = x
        rad[y] = best
        cen[y] = bx
    return rad_arr, cen_arr
