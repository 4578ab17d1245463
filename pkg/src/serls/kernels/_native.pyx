# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Same contracts as ``serls.kernels._numpy``: weighted_median and winsorize
agree exactly, the summation kernels agree up to accumulation order.
"""

import numpy as np

DEF MEDIAN_SLACK = 1e-12


cdef inline double _med3(double a, double b, double c) nogil:
    if a < b:
        if b < c:
            return b
        return a if a > c else c
    if a < c:
        return a
    return b if b > c else c


def weighted_median(values, weights):
    """Lower weighted median via iterative three-way quickselect, O(n)
    expected time and no index sort."""
    cdef double[::1] xv = np.array(values, dtype=np.float64, copy=True)
    cdef double[::1] wv = np.array(weights, dtype=np.float64, copy=True)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t lo = 0, hi = n - 1
    cdef Py_ssize_t i, lt, gt
    cdef double total = 0.0, w_left = 0.0, w_lt, w_eq
    cdef double pivot, threshold, tmpx, tmpw

    for i in range(n):
        total += wv[i]
    threshold = 0.5 * total - MEDIAN_SLACK * (1.0 if total < 1.0 else total)
    if threshold <= 0.0:
        return float(np.min(values))

    with nogil:
        while lo < hi:
            pivot = _med3(xv[lo], xv[lo + (hi - lo) // 2], xv[hi])
            # Three-way partition of [lo, hi]: < pivot | == pivot | > pivot.
            lt = lo
            gt = hi
            i = lo
            while i <= gt:
                if xv[i] < pivot:
                    tmpx = xv[i]; xv[i] = xv[lt]; xv[lt] = tmpx
                    tmpw = wv[i]; wv[i] = wv[lt]; wv[lt] = tmpw
                    lt += 1
                    i += 1
                elif xv[i] > pivot:
                    tmpx = xv[i]; xv[i] = xv[gt]; xv[gt] = tmpx
                    tmpw = wv[i]; wv[i] = wv[gt]; wv[gt] = tmpw
                    gt -= 1
                else:
                    i += 1
            w_lt = 0.0
            for i in range(lo, lt):
                w_lt += wv[i]
            w_eq = 0.0
            for i in range(lt, gt + 1):
                w_eq += wv[i]
            if w_left + w_lt >= threshold:
                hi = lt - 1
            elif w_left + w_lt + w_eq >= threshold:
                lo = hi = lt
            else:
                w_left += w_lt + w_eq
                lo = gt + 1
    return float(xv[lo])


def winsorize(e, k):
    """Clip residuals to [-k, k]."""
    cdef double[::1] ev = np.ascontiguousarray(e, dtype=np.float64)
    cdef double kk = k
    out = np.empty(ev.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(ev.shape[0]):
            if ev[i] > kk:
                ov[i] = kk
            elif ev[i] < -kk:
                ov[i] = -kk
            else:
                ov[i] = ev[i]
    return out


def huber_sum(e, w, k):
    """Weighted Huber loss total in a single fused pass."""
    cdef double[::1] ev = np.ascontiguousarray(e, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double kk = k
    cdef double acc = 0.0, ae
    cdef Py_ssize_t i
    with nogil:
        for i in range(ev.shape[0]):
            ae = ev[i] if ev[i] >= 0.0 else -ev[i]
            if ae <= kk:
                acc += wv[i] * (ev[i] * ev[i])
            else:
                acc += wv[i] * (2.0 * kk * ae - kk * kk)
    return float(acc)


def bspline_design(x, knots_full, degree):
    """Per-point basis evaluation: binary span search plus the standard
    triangular recurrence over the degree+1 active functions."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] t = np.ascontiguousarray(knots_full, dtype=np.float64)
    cdef int d = degree
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t q = t.shape[0] - d - 1
    out = np.zeros((n, q), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double[::1] work = np.zeros(3 * (d + 1), dtype=np.float64)
    cdef double *nbuf
    cdef double *left
    cdef double *right
    cdef Py_ssize_t i, span, lo, hi, mid
    cdef int r, dd
    cdef double v, saved, temp, den

    with nogil:
        nbuf = &work[0]
        left = &work[d + 1]
        right = &work[2 * (d + 1)]
        for i in range(n):
            v = xv[i]
            # First index with t[idx] > v, then step back one for the span.
            lo = 0
            hi = t.shape[0]
            while lo < hi:
                mid = (lo + hi) // 2
                if t[mid] <= v:
                    lo = mid + 1
                else:
                    hi = mid
            span = lo - 1
            if span < d:
                span = d
            if span > q - 1:
                span = q - 1
            nbuf[0] = 1.0
            for dd in range(1, d + 1):
                left[dd] = v - t[span + 1 - dd]
                right[dd] = t[span + dd] - v
                saved = 0.0
                for r in range(dd):
                    den = right[r + 1] + left[dd - r]
                    temp = nbuf[r] / den
                    nbuf[r] = saved + right[r + 1] * temp
                    saved = left[dd - r] * temp
                nbuf[dd] = saved
            for r in range(d + 1):
                ov[i, span - d + r] = nbuf[r]
    return out
