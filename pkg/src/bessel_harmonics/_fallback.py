"""Pure numpy implementation of the hot Bessel kernels.

Mirrors ``_core.pyx`` element for element; used when the compiled
extension is unavailable or ``BESSEL_HARMONICS_BACKEND=python``.
All entry points take 1-d float64 arrays of equal length.
"""
import math

import numpy as np

TINY = 1e-17
MAX_TERMS = 1000


def z_switch(nu):
    return max(30.0, nu * nu)


def series_sum(nu, z):
    """Return ``s - 1`` where s = sum_k r_k, r_0 = 1, of the normalised series.

    r_k = (z/2)^{2k} Gamma(nu+1) / (k! Gamma(nu+k+1)).
    """
    q = 0.25 * z * z
    r = np.ones_like(z)
    tail = np.zeros_like(z)
    live = np.ones(z.shape, dtype=bool)
    for k in range(MAX_TERMS):
        if not live.any():
            break
        r = np.where(live, r * q / ((k + 1.0) * (nu + k + 1.0)), 0.0)
        tail += r
        live &= r >= TINY * (1.0 + tail)
    return tail


def _log_ive_series(nu, z):
    tail = series_sum(nu, z)
    return nu * np.log(0.5 * z) - math.lgamma(nu + 1.0) - z + np.log1p(tail)


def asymptotic_sums(nu, z):
    """Termwise sums of the large-argument expansion.

    Returns (S, N, D, N1): S = sum (-1)^k [nu,k] w^k, N = sum [nu,k] w^k,
    D = S_nu - S_{nu+1} via the bracket difference identity, and
    N1 = sum [nu+1,k] w^k, with w = 1/(2z).
    """
    w = 0.5 / z
    c = 1.0
    p = np.ones_like(z)
    S = np.ones_like(z)
    N = np.ones_like(z)
    D = np.zeros_like(z)
    N1 = np.ones_like(z)
    prev = np.ones_like(z)
    live = np.ones(z.shape, dtype=bool)
    four_nu2 = 4.0 * nu * nu
    sign = 1.0
    for k in range(MAX_TERMS):
        d_next = c * (2.0 * nu + 2.0 * k + 1.0)
        c_next = c * (four_nu2 - (2.0 * k + 1.0) ** 2) / (4.0 * (k + 1.0))
        p = p * w
        sign = -sign
        tS = sign * c_next * p
        tD = -sign * d_next * p
        mag = np.maximum(np.abs(tS), np.abs(tD))
        live &= mag <= prev
        if not live.any():
            break
        S = np.where(live, S + tS, S)
        D = np.where(live, D + tD, D)
        N = np.where(live, N + c_next * p, N)
        N1 = np.where(live, N1 + (c_next + d_next) * p, N1)
        prev = mag
        live &= (np.abs(tS) > TINY * np.abs(S)) | (np.abs(tD) > TINY * np.abs(D))
        c = c_next
        if c == 0.0 and d_next == 0.0:
            break
    return S, N, D, N1


def log_ive(nu, z):
    out = np.empty_like(z)
    small = z <= z_switch(nu)
    if small.any():
        out[small] = _log_ive_series(nu, z[small])
    big = ~small
    if big.any():
        zb = z[big]
        S, N, _, _ = asymptotic_sums(nu, zb)
        val = S - math.sin(math.pi * nu) * np.exp(-2.0 * zb) * N
        out[big] = np.log(val) - 0.5 * np.log(2.0 * math.pi * zb)
    return out


def ratio_defect(nu, z):
    """1 - I_{nu+1}(z)/I_nu(z) without cancellation at large z."""
    if nu == -0.5:
        e = np.exp(-2.0 * z)
        return 2.0 * e / (1.0 + e)
    out = np.empty_like(z)
    small = z <= z_switch(nu)
    if small.any():
        zs = z[small]
        out[small] = -np.expm1(log_ive(nu + 1.0, zs) - _log_ive_series(nu, zs))
    big = ~small
    if big.any():
        zb = z[big]
        S, N, D, N1 = asymptotic_sums(nu, zb)
        s = math.sin(math.pi * nu)
        e = np.exp(-2.0 * zb)
        out[big] = (D - s * e * (N + N1)) / (S - s * e * N)
    return out


def scaled_defect(nu, z):
    """sqrt(2 pi z) e^{-z} I_nu(z) - 1, termwise above the switch."""
    if nu == -0.5:
        return np.exp(-2.0 * z)
    if nu == 0.5:
        return -np.exp(-2.0 * z)
    out = np.empty_like(z)
    small = z <= z_switch(nu)
    if small.any():
        zs = z[small]
        out[small] = np.expm1(_log_ive_series(nu, zs) + 0.5 * np.log(2.0 * math.pi * zs))
    big = ~small
    if big.any():
        zb = z[big]
        S, N, _, _ = asymptotic_sums(nu, zb)
        out[big] = (S - 1.0) - math.sin(math.pi * nu) * np.exp(-2.0 * zb) * N
    return out


def kernel_parts(lam, t, x, y):
    """log W, and the factors bt, bx with dW/dt = W bt and dW/dx = W bx."""
    nu = lam - 0.5
    xy = x * y
    z = xy / (2.0 * t)
    d2 = (x - y) ** 2
    logw = (0.5 - lam) * np.log(xy) - np.log(2.0 * t) + log_ive(nu, z) - d2 / (4.0 * t)
    q = ratio_defect(nu, z)
    bt = d2 / (4.0 * t * t) - (lam + 0.5) / t + (z / t) * q
    bx = ((y - x) - y * q) / (2.0 * t)
    return logw, bt, bx
