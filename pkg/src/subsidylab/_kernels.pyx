# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_fallback``."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


def forcing_transform(table, p, int mode=0):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.array(table, dtype=np.float64)
    cdef double[::1] t = out
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0]
    cdef Py_ssize_t size = t.shape[0]
    cdef Py_ssize_t i, base, j, bit
    cdef double pi, lo, hi
    with nogil:
        for i in range(n):
            bit = (<Py_ssize_t>1) << i
            pi = pv[i]
            base = 0
            while base < size:
                for j in range(base, base + bit):
                    lo = t[j]
                    hi = t[j + bit]
                    if mode == 0:
                        t[j] = pi * hi + (1.0 - pi) * lo
                    elif pi <= 0.0:
                        pass
                    elif pi >= 1.0:
                        t[j] = hi
                    elif hi < lo:
                        t[j] = hi
                base += 2 * bit
    return out


cdef inline void _mask_row(const double[::1] phi, const double* c, Py_ssize_t n,
                           double tol, cnp.uint8_t* out) noexcept nogil:
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    cdef Py_ssize_t w, i, bit
    cdef double gain
    cdef cnp.uint8_t ok
    for w in range(size):
        ok = 1
        for i in range(n):
            bit = (<Py_ssize_t>1) << i
            gain = phi[w] - phi[w ^ bit]
            if w & bit:
                if c[i] > gain + tol:
                    ok = 0
                    break
            elif c[i] < -gain - tol:
                ok = 0
                break
        out[w] = ok


def nash_mask(phi, c, double tol):
    cdef const double[::1] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t n = cv.shape[0]
    out = np.empty((<Py_ssize_t>1) << n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] o = out
    with nogil:
        _mask_row(ph, &cv[0] if n > 0 else NULL, n, tol, &o[0])
    return out.view(bool)


def nash_mask_batch(phi, cmat, double tol):
    cdef const double[::1] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef const double[:, ::1] cm = np.ascontiguousarray(cmat, dtype=np.float64)
    cdef Py_ssize_t rows = cm.shape[0]
    cdef Py_ssize_t n = cm.shape[1]
    out = np.empty((rows, (<Py_ssize_t>1) << n), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] o = out
    cdef Py_ssize_t r
    if rows == 0:
        return out.view(bool)
    with nogil:
        for r in range(rows):
            _mask_row(ph, &cm[r, 0] if n > 0 else NULL, n, tol, &o[r, 0])
    return out.view(bool)


def csg_nash_mask(profiles, net, options, double tol):
    cdef const int[:, ::1] prof = np.ascontiguousarray(profiles, dtype=np.int32)
    cdef const double[::1] nv = np.ascontiguousarray(net, dtype=np.float64)
    cdef const int[:, ::1] opt = np.ascontiguousarray(options, dtype=np.int32)
    cdef Py_ssize_t P = prof.shape[0]
    cdef Py_ssize_t N = prof.shape[1]
    cdef Py_ssize_t A = nv.shape[0]
    cdef Py_ssize_t W = opt.shape[1]
    out = np.empty(P, dtype=np.uint8)
    cdef cnp.uint8_t[::1] o = out
    cdef int* counts = <int*>malloc(max(A, 1) * sizeof(int))
    cdef Py_ssize_t r, i, q, a, own
    cdef double own_cost
    cdef int k
    cdef cnp.uint8_t ok
    if counts == NULL:
        raise MemoryError()
    try:
        with nogil:
            for r in range(P):
                for a in range(A):
                    counts[a] = 0
                for i in range(N):
                    counts[prof[r, i]] += 1
                ok = 1
                for i in range(N):
                    own = prof[r, i]
                    own_cost = nv[own] / counts[own]
                    for q in range(W):
                        a = opt[i, q]
                        if a < 0:
                            break
                        k = counts[a] + (1 if a != own else 0)
                        if own_cost > nv[a] / k + tol:
                            ok = 0
                            break
                    if not ok:
                        break
                o[r] = ok
    finally:
        free(counts)
    return out.view(bool)
