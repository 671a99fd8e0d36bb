# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see _fallback.py for the reference semantics."""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, fabs, floor, isfinite, sqrt

cnp.import_array()


def fwht_inplace(double[:, ::1] a):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t h = 1, i, j, k
    cdef double x, y, scale
    if n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    while h < n:
        for i in range(m):
            j = 0
            while j < n:
                for k in range(j, j + h):
                    x = a[i, k]
                    y = a[i, k + h]
                    a[i, k] = x + y
                    a[i, k + h] = x - y
                j += 2 * h
        h *= 2
    scale = 1.0 / sqrt(<double> n)
    for i in range(m):
        for k in range(n):
            a[i, k] *= scale


def round_nearest(object t):
    cdef cnp.ndarray flat = np.ascontiguousarray(t, dtype=np.float64).ravel()
    cdef double[::1] tv = flat
    cdef cnp.ndarray out = np.empty(flat.shape[0], dtype=np.int64)
    cdef long long[::1] ov = out
    cdef Py_ssize_t i
    for i in range(tv.shape[0]):
        ov[i] = <long long> ceil(tv[i] - 0.5)
    return out.reshape(np.shape(t))


def round_stochastic(object t, object u):
    cdef cnp.ndarray tf = np.ascontiguousarray(t, dtype=np.float64).ravel()
    cdef cnp.ndarray uf = np.ascontiguousarray(u, dtype=np.float64).ravel()
    cdef double[::1] tv = tf
    cdef double[::1] uv = uf
    cdef cnp.ndarray out = np.empty(tf.shape[0], dtype=np.int64)
    cdef long long[::1] ov = out
    cdef Py_ssize_t i
    cdef double base
    if uf.shape[0] != tf.shape[0]:
        raise ValueError("t and u must have the same size")
    for i in range(tv.shape[0]):
        base = floor(tv[i])
        ov[i] = <long long> base + (1 if uv[i] < tv[i] - base else 0)
    return out.reshape(np.shape(t))


def round_to_residue(object t, object residues, long long q):
    cdef cnp.ndarray tf = np.ascontiguousarray(t, dtype=np.float64).ravel()
    cdef cnp.ndarray rf = np.ascontiguousarray(residues, dtype=np.int64).ravel()
    cdef double[::1] tv = tf
    cdef long long[::1] rv = rf
    cdef cnp.ndarray out = np.empty(tf.shape[0], dtype=np.int64)
    cdef long long[::1] ov = out
    cdef Py_ssize_t i
    cdef long long k
    if rf.shape[0] != tf.shape[0]:
        raise ValueError("t and residues must have the same size")
    for i in range(tv.shape[0]):
        k = <long long> ceil((tv[i] - rv[i]) / q - 0.5)
        ov[i] = rv[i] + q * k
    return out.reshape(np.shape(t))


def voronoi_candidates(object t, double radius):
    cdef cnp.ndarray tf = np.ascontiguousarray(t, dtype=np.float64)
    cdef double[::1] tv = tf
    cdef Py_ssize_t d = tv.shape[0], i, j, level
    cdef double r2 = radius * radius
    cdef double dv, p
    if d == 0:
        raise ValueError("t must be non-empty")
    for i in range(d):
        if not isfinite(tv[i]):
            raise ValueError("t must be finite")
    if radius < 0:
        return np.empty((0, d), dtype=np.int64)

    cdef cnp.ndarray lo_a = np.empty(d, dtype=np.int64)
    cdef cnp.ndarray wid_a = np.empty(d, dtype=np.int64)
    cdef long long[::1] lo = lo_a
    cdef long long[::1] wid = wid_a
    cdef Py_ssize_t max_w = 0
    for i in range(d):
        lo[i] = <long long> ceil(tv[i] - 0.5 - radius)
        wid[i] = <long long> floor(tv[i] + 0.5 + radius) - lo[i] + 1
        if wid[i] <= 0:
            return np.empty((0, d), dtype=np.int64)
        if wid[i] > max_w:
            max_w = wid[i]

    # per-coordinate penalties, row i holds wid[i] entries
    cdef cnp.ndarray pen_a = np.zeros((d, max_w), dtype=np.float64)
    cdef double[:, ::1] pen = pen_a
    for i in range(d):
        for j in range(wid[i]):
            dv = fabs(tv[i] - <double> (lo[i] + j)) - 0.5
            if dv < 0:
                dv = 0
            pen[i, j] = dv * dv

    cdef cnp.ndarray idx_a = np.zeros(d, dtype=np.int64)
    cdef cnp.ndarray part_a = np.zeros(d + 1, dtype=np.float64)
    cdef long long[::1] idx = idx_a
    cdef double[::1] part = part_a

    cdef Py_ssize_t cap = 256, count = 0
    cdef cnp.ndarray out_a = np.empty((cap, d), dtype=np.int64)
    cdef long long[:, ::1] out = out_a

    level = 0
    idx[0] = 0
    while level >= 0:
        if idx[level] >= wid[level]:
            level -= 1
            if level >= 0:
                idx[level] += 1
            continue
        p = part[level] + pen[level, idx[level]]
        if p > r2:
            idx[level] += 1
            continue
        if level == d - 1:
            if count == cap:
                cap *= 2
                out_a = np.concatenate([out_a, np.empty((cap - count, d), dtype=np.int64)])
                out = out_a
            for j in range(d):
                out[count, j] = lo[j] + idx[j]
            count += 1
            idx[level] += 1
        else:
            part[level + 1] = p
            level += 1
            idx[level] = 0
    return out_a[:count].copy()
