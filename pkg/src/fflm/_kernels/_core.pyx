# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; semantics mirror ``_fallback.py`` exactly."""

import numpy as np

from libc.stdint cimport uint64_t, int64_t

cdef uint64_t FNV_OFFSET = 0xCBF29CE484222325ULL
cdef uint64_t FNV_PRIME = 0x100000001B3ULL


def fnv1a64(const unsigned char[:] data):
    cdef uint64_t h = FNV_OFFSET
    cdef Py_ssize_t i
    for i in range(data.shape[0]):
        h ^= data[i]
        h *= FNV_PRIME
    return h


def sweep_threshold(scores, labels):
    order = np.argsort(scores, kind="stable")
    cdef double[::1] s = np.ascontiguousarray(np.asarray(scores, dtype=np.float64)[order])
    cdef int64_t[::1] y = np.ascontiguousarray(np.asarray(labels, dtype=np.int64)[order])
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t i
    cdef int64_t n_pos = 0
    for i in range(n):
        n_pos += y[i]
    cdef int64_t n_neg = n - n_pos
    cdef int64_t tp = n_pos, tn = 0
    cdef double best_ba = (tp / <double>n_pos + tn / <double>n_neg) / 2
    cdef double best_t = -np.inf
    cdef double ba, t
    for i in range(n):
        if y[i]:
            tp -= 1
        else:
            tn += 1
        if i + 1 < n and s[i + 1] == s[i]:
            continue
        ba = (tp / <double>n_pos + tn / <double>n_neg) / 2
        if ba > best_ba:
            best_ba = ba
            if i + 1 < n:
                best_t = (s[i] + s[i + 1]) / 2
            else:
                best_t = np.inf
    return best_t, best_ba


def kendall_counts(x, y):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t i, j
    cdef int64_t s = 0, tx = 0, ty = 0
    cdef double dx, dy
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = xv[j] - xv[i]
            dy = yv[j] - yv[i]
            if dx == 0:
                tx += 1
            if dy == 0:
                ty += 1
            if (dx > 0 and dy > 0) or (dx < 0 and dy < 0):
                s += 1
            elif (dx > 0 and dy < 0) or (dx < 0 and dy > 0):
                s -= 1
    return s, tx, ty, n * (n - 1) // 2
