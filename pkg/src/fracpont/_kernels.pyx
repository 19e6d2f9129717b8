# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled product-trapezoidal history sums."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef void _column(const double* c, const double* a0, const double* g,
                  double* out, Py_ssize_t n1) noexcept nogil:
    # scatter form: out[j:] += g[j] * c[:n1-j], contiguous and vectorisable
    cdef Py_ssize_t i, j
    cdef double gj
    cdef double g0 = g[0]
    out[0] = 0.0
    for i in range(1, n1):
        out[i] = a0[i] * g0
    for j in range(1, n1):
        gj = g[j]
        if gj == 0.0:
            continue
        for i in range(j, n1):
            out[i] += c[i - j] * gj


def lower_apply(const double[::1] c, const double[::1] a0, const double[:, ::1] g):
    """out[i] = a0[i] * g[0] + sum_{j=1..i} c[i-j] * g[j]; out[0] = 0."""
    cdef Py_ssize_t n1 = g.shape[0]
    cdef Py_ssize_t dim = g.shape[1]
    cdef Py_ssize_t k
    if c.shape[0] < n1 or a0.shape[0] < n1:
        raise ValueError("weight arrays shorter than the path")
    # work column by column on contiguous copies
    cdef const double[:, ::1] gt = np.ascontiguousarray(np.asarray(g).T)
    out_t = np.empty((dim, n1), dtype=np.float64)
    cdef double[:, ::1] ot = out_t
    with nogil:
        for k in range(dim):
            _column(&c[0], &a0[0], &gt[k, 0], &ot[k, 0], n1)
    return np.ascontiguousarray(out_t.T)
