# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled split-search and routing kernels.

Must return bit-identical results to ``_fallback``: the split score uses
exact integer class-count sums with the same fixed order of float64
operations, and the strict-improvement test is pure int64 arithmetic.
Compile without -ffast-math.
"""

from libc.stdlib cimport free, malloc
from libc.stdint cimport int32_t, int64_t
from libc.math cimport INFINITY

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline void _swap(double* v, int64_t* lab, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef double tv = v[a]
    cdef int64_t tl = lab[a]
    v[a] = v[b]
    lab[a] = lab[b]
    v[b] = tv
    lab[b] = tl


cdef void _sort_pairs(double* v, int64_t* lab, Py_ssize_t n) noexcept nogil:
    # Quicksort (Hoare partition, median-of-three, smaller side first) down
    # to 16-element runs, then one insertion-sort pass.  Equal-value runs
    # may end up in any label order; split scores do not depend on it.
    cdef Py_ssize_t stack_lo[128]
    cdef Py_ssize_t stack_hi[128]
    cdef int top = 1
    cdef Py_ssize_t lo, hi, i, j, mid
    cdef double pivot, tv
    cdef int64_t tl
    if n < 2:
        return
    stack_lo[0] = 0
    stack_hi[0] = n - 1
    while top > 0:
        top -= 1
        lo = stack_lo[top]
        hi = stack_hi[top]
        while hi - lo > 16:
            mid = lo + (hi - lo) // 2
            if v[mid] < v[lo]:
                _swap(v, lab, lo, mid)
            if v[hi] < v[lo]:
                _swap(v, lab, lo, hi)
            if v[hi] < v[mid]:
                _swap(v, lab, mid, hi)
            pivot = v[mid]
            i = lo
            j = hi
            while i <= j:
                while v[i] < pivot:
                    i += 1
                while v[j] > pivot:
                    j -= 1
                if i <= j:
                    _swap(v, lab, i, j)
                    i += 1
                    j -= 1
            if j - lo < hi - i:
                if i < hi:
                    stack_lo[top] = i
                    stack_hi[top] = hi
                    top += 1
                hi = j
            else:
                if lo < j:
                    stack_lo[top] = lo
                    stack_hi[top] = j
                    top += 1
                lo = i
    for i in range(1, n):
        tv = v[i]
        tl = lab[i]
        j = i - 1
        while j >= 0 and v[j] > tv:
            v[j + 1] = v[j]
            lab[j + 1] = lab[j]
            j -= 1
        v[j + 1] = tv
        lab[j + 1] = tl


def best_split(double[:, ::1] X, int64_t[::1] rows, int64_t[::1] y,
               int64_t[::1] candidates, int64_t n_classes):
    """See ``_fallback.best_split``; same contract, same results."""
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t ncand = candidates.shape[0]
    cdef Py_ssize_t k, ci, c
    cdef int64_t f, nl, nr, sl, sr, st, rc
    cdef double score, best_score, best_thr, decrease
    cdef int64_t best_feat = -1
    if n < 2 or ncand == 0:
        return None

    cdef double* v = <double*> malloc(n * sizeof(double))
    cdef int64_t* lab = <int64_t*> malloc(n * sizeof(int64_t))
    cdef int64_t* cum = <int64_t*> malloc(n_classes * sizeof(int64_t))
    cdef int64_t* tot = <int64_t*> malloc(n_classes * sizeof(int64_t))
    if v == NULL or lab == NULL or cum == NULL or tot == NULL:
        free(v); free(lab); free(cum); free(tot)
        raise MemoryError()

    best_score = -INFINITY
    best_thr = 0.0
    with nogil:
        for c in range(n_classes):
            tot[c] = 0
        for k in range(n):
            tot[y[rows[k]]] += 1
        st = 0
        for c in range(n_classes):
            st += tot[c] * tot[c]
        for ci in range(ncand):
            f = candidates[ci]
            for k in range(n):
                v[k] = X[rows[k], f]
                lab[k] = y[rows[k]]
            _sort_pairs(v, lab, n)
            for c in range(n_classes):
                cum[c] = 0
            sl = 0
            sr = st
            for k in range(n - 1):
                c = lab[k]
                rc = tot[c] - cum[c]
                sr += 1 - 2 * rc
                sl += 2 * cum[c] + 1
                cum[c] += 1
                if v[k + 1] > v[k]:
                    nl = k + 1
                    nr = n - nl
                    if (sl * nr + sr * nl) * n > st * (nl * nr):
                        score = (<double> sl) / (<double> nl) + (<double> sr) / (<double> nr)
                        if score > best_score:
                            best_score = score
                            best_feat = f
                            best_thr = (v[k] + v[k + 1]) / 2
    free(v); free(lab); free(cum); free(tot)
    if best_feat < 0:
        return None
    decrease = (best_score - (<double> st) / (<double> n)) / (<double> n)
    return int(best_feat), best_thr, decrease


def route_rows(double[:, ::1] X, int64_t[::1] rows,
               int32_t[::1] feature, double[::1] threshold,
               int32_t[::1] left, int32_t[::1] right, int root=0):
    """See ``_fallback.route_rows``."""
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t k
    cdef int32_t node
    cdef int64_t r
    out = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for k in range(m):
            r = rows[k]
            node = <int32_t> root
            while feature[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            o[k] = node
    return out


def route_rows_override(double[:, ::1] X, int64_t[::1] rows,
                        int32_t[::1] feature, double[::1] threshold,
                        int32_t[::1] left, int32_t[::1] right,
                        int64_t override_feature, double[::1] override_values,
                        int root=0):
    """See ``_fallback.route_rows_override``."""
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t k
    cdef int32_t node, f
    cdef int64_t r
    cdef double val
    out = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for k in range(m):
            r = rows[k]
            node = <int32_t> root
            while feature[node] >= 0:
                f = feature[node]
                if f == override_feature:
                    val = override_values[k]
                else:
                    val = X[r, f]
                if val <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            o[k] = node
    return out
