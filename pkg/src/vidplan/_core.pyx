# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; ``_fallback.py`` holds the reference numpy versions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()


def causal_fir(const double[::1] x, const double[::1] steady, list warm):
    cdef Py_ssize_t n = x.shape[0], w = steady.shape[0], t, i
    cdef double acc
    cdef const double[::1] wt
    out = np.empty(n)
    cdef double[::1] o = out
    for t in range(min(n, w - 1)):
        wt = warm[t]
        acc = 0.0
        for i in range(t + 1):
            acc += wt[i] * x[i]
        o[t] = acc
    for t in range(w - 1, n):
        acc = 0.0
        for i in range(w):
            acc += steady[i] * x[t - w + 1 + i]
        o[t] = acc
    return out


def block_match(prev, nxt, int block, int radius):
    cdef const double[:, ::1] a = np.ascontiguousarray(prev, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(nxt, dtype=np.float64)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef Py_ssize_t by = 0, bx = 0, iy, ix, y, x, dy, dx, u, v
    cdef double sad, best, r2, best_r2
    cdef int best_dy, best_dx
    if h - block - radius + 1 > radius:
        by = (h - block - 2 * radius) // block + 1
    if w - block - radius + 1 > radius:
        bx = (w - block - 2 * radius) // block + 1
    if by <= 0 or bx <= 0:
        raise ValueError("frame too small for the block size and search radius")
    disp = np.zeros((by, bx, 2))
    cdef double[:, :, ::1] d = disp
    for iy in range(by):
        y = radius + iy * block
        for ix in range(bx):
            x = radius + ix * block
            best = INFINITY
            best_r2 = INFINITY
            best_dy = 0
            best_dx = 0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    sad = 0.0
                    for u in range(block):
                        for v in range(block):
                            sad += fabs(a[y + u, x + v] - b[y + dy + u, x + dx + v])
                        if sad > best:
                            break
                    r2 = dy * dy + dx * dx
                    if sad < best or (sad == best and r2 < best_r2):
                        best = sad
                        best_r2 = r2
                        best_dy = dy
                        best_dx = dx
            d[iy, ix, 0] = best_dy
            d[iy, ix, 1] = best_dx
    return disp
