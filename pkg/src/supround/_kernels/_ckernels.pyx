# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Semantics must match ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def pair_bucket_max(const double[::1] values,
                    const cnp.int64_t[:, ::1] index,
                    const cnp.int64_t[::1] qtab,
                    const cnp.int64_t[::1] offsets,
                    const cnp.int64_t[::1] sizes,
                    Py_ssize_t nbuckets):
    """Largest |v[a] - v[c]| per distance bucket over all cell pairs.

    Empty buckets are reported as -1.
    """
    cdef Py_ssize_t m = values.shape[0]
    cdef Py_ssize_t nf = index.shape[1]
    cdef Py_ssize_t a, c, k, b
    cdef double va, d
    out = np.full(nbuckets, -1.0)
    cdef double[::1] o = out
    cdef cnp.int64_t[::1] rowbase = np.empty(nf, dtype=np.int64)
    if m > 0:
        o[0] = 0.0
    for a in range(m):
        va = values[a]
        for k in range(nf):
            rowbase[k] = offsets[k] + index[a, k] * sizes[k]
        for c in range(a + 1, m):
            b = 0
            for k in range(nf):
                b += qtab[rowbase[k] + index[c, k]]
            d = fabs(va - values[c])
            if d > o[b]:
                o[b] = d
    return out


def axis_bucket_max(const double[:, ::1] slab,
                    const cnp.int64_t[:, ::1] q,
                    Py_ssize_t nbuckets):
    """Largest change along one axis per bucket; ``slab`` is (n_axis, rest)."""
    cdef Py_ssize_t n = slab.shape[0]
    cdef Py_ssize_t rest = slab.shape[1]
    cdef Py_ssize_t a, c, r, b
    cdef double d, best
    out = np.full(nbuckets, -1.0)
    cdef double[::1] o = out
    if n > 0:
        o[0] = 0.0
    for a in range(n):
        for c in range(a + 1, n):
            best = 0.0
            for r in range(rest):
                d = fabs(slab[a, r] - slab[c, r])
                if d > best:
                    best = d
            b = q[a, c]
            if best > o[b]:
                o[b] = best
    return out


def compensated_marginals(const double[::1] values,
                          const cnp.int64_t[::1] shape,
                          const double[::1] weights,
                          const cnp.int64_t[::1] woff):
    """All one-coordinate marginals with Neumaier-compensated accumulation."""
    cdef Py_ssize_t nf = shape.shape[0]
    cdef Py_ssize_t m = values.shape[0]
    cdef Py_ssize_t total = 0
    cdef Py_ssize_t j, k, cell, slot
    cdef double term, s, t, wprod
    cdef cnp.int64_t[::1] idx = np.zeros(nf, dtype=np.int64)
    cdef cnp.int64_t[::1] aoff = np.zeros(nf, dtype=np.int64)
    for j in range(nf):
        aoff[j] = total
        total += shape[j]
    acc_arr = np.zeros(total)
    comp_arr = np.zeros(total)
    cdef double[::1] acc = acc_arr
    cdef double[::1] comp = comp_arr
    for cell in range(m):
        for j in range(nf):
            wprod = values[cell]
            for k in range(nf):
                if k != j:
                    wprod = wprod * weights[woff[k] + idx[k]]
            slot = aoff[j] + idx[j]
            s = acc[slot]
            t = s + wprod
            if fabs(s) >= fabs(wprod):
                comp[slot] += (s - t) + wprod
            else:
                comp[slot] += (wprod - t) + s
            acc[slot] = t
        # advance the row-major multi-index
        k = nf - 1
        while k >= 0:
            idx[k] += 1
            if idx[k] < shape[k]:
                break
            idx[k] = 0
            k -= 1
    res = acc_arr + comp_arr
    return [res[aoff[j]:aoff[j] + shape[j]].copy() for j in range(nf)]
