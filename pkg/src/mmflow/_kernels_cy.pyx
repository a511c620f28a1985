# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise kernels: batched prox of the perspective kinetic term.

Same contract as mmflow._kernels_py.perspective_prox_batch; see there for
the derivation of the monotone stationarity equation.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef inline double _mval(double x, double c0, double c1, double c2) nogil:
    return c0 + x * (c1 + x * c2)


cdef inline double _F(double x, double rho, double w2s, double c0, double c1,
                      double c2, double two_sigma) nogil:
    cdef double m = _mval(x, c0, c1, c2)
    cdef double denom = m + two_sigma
    return (x - rho) - w2s * (c1 + 2.0 * c2 * x) / (denom * denom)


def perspective_prox_batch(w, rho, double sigma, double c0, double c1,
                           double c2, double lo, double hi):
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    w_arr = np.ascontiguousarray(w, dtype=np.float64)
    rho_arr = np.ascontiguousarray(rho, dtype=np.float64)
    shape = w_arr.shape
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wf = w_arr.ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rf = rho_arr.ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_w = np.empty_like(wf)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_r = np.empty_like(rf)
    cdef Py_ssize_t npts = wf.shape[0]
    cdef double width = hi - lo
    cdef double tol = 1e-13 * (width if width > 1.0 else 1.0)
    cdef double two_sigma = 2.0 * sigma
    cdef Py_ssize_t i
    cdef int it
    cdef double wi, ri, w2s, a, b, x, Fx, Fp, m, denom, mp, x_new

    with nogil:
        for i in range(npts):
            wi = wf[i]
            ri = rf[i]
            w2s = sigma * wi * wi
            if _F(lo, ri, w2s, c0, c1, c2, two_sigma) >= 0.0:
                x = lo
            elif _F(hi, ri, w2s, c0, c1, c2, two_sigma) <= 0.0:
                x = hi
            else:
                a = lo
                b = hi
                x = ri
                if x < lo:
                    x = lo
                elif x > hi:
                    x = hi
                for it in range(120):
                    m = _mval(x, c0, c1, c2)
                    denom = m + two_sigma
                    mp = c1 + 2.0 * c2 * x
                    Fx = (x - ri) - w2s * mp / (denom * denom)
                    if Fx > 0.0:
                        b = x
                    else:
                        a = x
                    if (Fx if Fx >= 0.0 else -Fx) < tol and (b - a) < tol:
                        break
                    if (b - a) < 1e-16 * width:
                        break
                    Fp = 1.0 - w2s * (2.0 * c2 * denom - 2.0 * mp * mp) / (denom * denom * denom)
                    x_new = x - Fx / Fp
                    if x_new <= a or x_new >= b or x_new != x_new:
                        x_new = 0.5 * (a + b)
                    x = x_new
            m = _mval(x, c0, c1, c2)
            if m < 0.0:
                m = 0.0
            out_r[i] = x
            out_w[i] = wi * m / (m + two_sigma)

    return out_w.reshape(shape), out_r.reshape(shape)
