# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Bessel kernels; element-for-element twin of ``_fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, log, log1p, lgamma, sin, fabs, M_PI

cnp.import_array()

cdef double TINY = 1e-17
cdef int MAX_TERMS = 1000


cdef inline double _switch(double nu) nogil:
    return 30.0 if nu * nu < 30.0 else nu * nu


cdef double _series_tail(double nu, double z) nogil:
    cdef double q = 0.25 * z * z
    cdef double r = 1.0, tail = 0.0
    cdef int k
    for k in range(MAX_TERMS):
        r = r * q / ((k + 1.0) * (nu + k + 1.0))
        tail += r
        if r < TINY * (1.0 + tail):
            break
    return tail


cdef void _series_pair(double nu, double z, double* t0, double* t1) nogil:
    """Tails of the normalised series for orders nu and nu+1 in one loop."""
    cdef double q = 0.25 * z * z
    cdef double r = 1.0, r1 = 1.0, a = 0.0, b = 0.0
    cdef int k
    for k in range(MAX_TERMS):
        r = r * q / ((k + 1.0) * (nu + k + 1.0))
        r1 = r1 * q / ((k + 1.0) * (nu + k + 2.0))
        a += r
        b += r1
        if r < TINY * (1.0 + a):
            break
    t0[0] = a
    t1[0] = b


cdef inline double _log_ive_series(double nu, double z) nogil:
    return nu * log(0.5 * z) - lgamma(nu + 1.0) - z + log1p(_series_tail(nu, z))


cdef void _asym(double nu, double z, double* S, double* N, double* D, double* N1) nogil:
    cdef double w = 0.5 / z
    cdef double c = 1.0, p = 1.0, prev = 1.0, sign = 1.0
    cdef double d_next, c_next, tS, tD, mag
    cdef double four_nu2 = 4.0 * nu * nu
    cdef int k
    S[0] = 1.0
    N[0] = 1.0
    D[0] = 0.0
    N1[0] = 1.0
    for k in range(MAX_TERMS):
        d_next = c * (2.0 * nu + 2.0 * k + 1.0)
        c_next = c * (four_nu2 - (2.0 * k + 1.0) * (2.0 * k + 1.0)) / (4.0 * (k + 1.0))
        p = p * w
        sign = -sign
        tS = sign * c_next * p
        tD = -sign * d_next * p
        mag = fabs(tS) if fabs(tS) > fabs(tD) else fabs(tD)
        if mag > prev:
            break
        S[0] += tS
        D[0] += tD
        N[0] += c_next * p
        N1[0] += (c_next + d_next) * p
        prev = mag
        if fabs(tS) <= TINY * fabs(S[0]) and fabs(tD) <= TINY * fabs(D[0]):
            break
        c = c_next
        if c == 0.0 and d_next == 0.0:
            break


cdef double _log_ive(double nu, double z) nogil:
    cdef double S, N, D, N1
    if z <= _switch(nu):
        return _log_ive_series(nu, z)
    _asym(nu, z, &S, &N, &D, &N1)
    return log(S - sin(M_PI * nu) * exp(-2.0 * z) * N) - 0.5 * log(2.0 * M_PI * z)


cdef double _ratio_defect(double nu, double z) nogil:
    cdef double S, N, D, N1, s, e
    if nu == -0.5:
        e = exp(-2.0 * z)
        return 2.0 * e / (1.0 + e)
    if z <= _switch(nu):
        return -expm1(_log_ive(nu + 1.0, z) - _log_ive_series(nu, z))
    _asym(nu, z, &S, &N, &D, &N1)
    s = sin(M_PI * nu)
    e = exp(-2.0 * z)
    return (D - s * e * (N + N1)) / (S - s * e * N)


cdef double _scaled_defect(double nu, double z) nogil:
    cdef double S, N, D, N1
    if nu == -0.5:
        return exp(-2.0 * z)
    if nu == 0.5:
        return -exp(-2.0 * z)
    if z <= _switch(nu):
        return expm1(_log_ive_series(nu, z) + 0.5 * log(2.0 * M_PI * z))
    _asym(nu, z, &S, &N, &D, &N1)
    return (S - 1.0) - sin(M_PI * nu) * exp(-2.0 * z) * N


cdef void _log_ive_and_defect(double nu, double z, double* li, double* q) nogil:
    """log(e^{-z} I_nu(z)) and 1 - I_{nu+1}/I_nu sharing one pass."""
    cdef double S, N, D, N1, s, e, t0, t1
    if z <= _switch(nu):
        if nu == -0.5:
            t0 = _series_tail(nu, z)
            e = exp(-2.0 * z)
            q[0] = 2.0 * e / (1.0 + e)
        else:
            _series_pair(nu, z, &t0, &t1)
            q[0] = -expm1(log(0.5 * z) - log(nu + 1.0) + log1p(t1) - log1p(t0))
        li[0] = nu * log(0.5 * z) - lgamma(nu + 1.0) - z + log1p(t0)
        return
    _asym(nu, z, &S, &N, &D, &N1)
    s = sin(M_PI * nu)
    e = exp(-2.0 * z)
    li[0] = log(S - s * e * N) - 0.5 * log(2.0 * M_PI * z)
    if nu == -0.5:
        q[0] = 2.0 * e / (1.0 + e)
    else:
        q[0] = (D - s * e * (N + N1)) / (S - s * e * N)


def series_sum(double nu, const double[::1] z):
    cdef Py_ssize_t i, n = z.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _series_tail(nu, z[i])
    return out


def log_ive(double nu, const double[::1] z):
    cdef Py_ssize_t i, n = z.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _log_ive(nu, z[i])
    return out


def ratio_defect(double nu, const double[::1] z):
    cdef Py_ssize_t i, n = z.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _ratio_defect(nu, z[i])
    return out


def scaled_defect(double nu, const double[::1] z):
    cdef Py_ssize_t i, n = z.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _scaled_defect(nu, z[i])
    return out


def kernel_parts(double lam, const double[::1] t, const double[::1] x, const double[::1] y):
    cdef Py_ssize_t i, n = t.shape[0]
    cdef double nu = lam - 0.5
    cdef double xy, z, d2, q, ti, li
    logw = np.empty(n)
    bt = np.empty(n)
    bx = np.empty(n)
    cdef double[::1] lw = logw
    cdef double[::1] bt_ = bt
    cdef double[::1] bx_ = bx
    with nogil:
        for i in range(n):
            ti = t[i]
            xy = x[i] * y[i]
            z = xy / (2.0 * ti)
            d2 = (x[i] - y[i]) * (x[i] - y[i])
            _log_ive_and_defect(nu, z, &li, &q)
            lw[i] = (0.5 - lam) * log(xy) - log(2.0 * ti) + li - d2 / (4.0 * ti)
            bt_[i] = d2 / (4.0 * ti * ti) - (lam + 0.5) / ti + (z / ti) * q
            bx_[i] = ((y[i] - x[i]) - y[i] * q) / (2.0 * ti)
    return logw, bt, bx
