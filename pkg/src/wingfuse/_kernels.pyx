# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-sample loops. Semantics mirror :mod:`wingfuse._fallback` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def first_order_sections(x, coeffs):
    """Run ``x`` through a cascade of first-order IIR sections.

    ``coeffs`` has shape (n_sections, 3) holding ``b0, b1, a1`` of
    ``y[n] = b0*x[n] + b1*x[n-1] - a1*y[n-1]`` with zero initial state.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = np.array(x, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef Py_ssize_t n = buf.shape[0]
    cdef Py_ssize_t s, i
    cdef double b0, b1, a1, xp, yp, xi
    for s in range(c.shape[0]):
        b0 = c[s, 0]
        b1 = c[s, 1]
        a1 = c[s, 2]
        xp = 0.0
        yp = 0.0
        for i in range(n):
            xi = buf[i]
            yp = b0 * xi + b1 * xp - a1 * yp
            xp = xi
            buf[i] = yp
    return buf


def falling_crossings(beam, double threshold, Py_ssize_t refractory_samples):
    """Indices where ``beam`` drops below ``threshold`` after a sample at or above it.

    A crossing less than ``refractory_samples`` after the previous accepted one
    is ignored.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.ascontiguousarray(beam, dtype=np.float64)
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i
    cdef Py_ssize_t last = -1
    out = []
    for i in range(1, n):
        if b[i] < threshold and b[i - 1] >= threshold:
            if last < 0 or i - last >= refractory_samples:
                out.append(i)
                last = i
    return np.asarray(out, dtype=np.int64)
