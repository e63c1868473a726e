"""Gamma function, exponentially scaled modified Bessel function I_nu and the
coefficients of its large-argument expansion.

The scaled function ``e^{-z} I_nu(z)`` is summed from its power series for
``z <= z_switch(nu) = max(30, nu^2)`` and from the large-argument expansion
above, so it stays finite for every positive ``z``.
"""
import math

import numpy as np

from . import _backend, _fallback
from .errors import DomainError


def _check_order(nu):
    if not nu > -1.0:
        raise DomainError(f"Bessel order must satisfy nu > -1, got {nu}")


def _check_positive(z, name="z"):
    z = np.asarray(z, dtype=np.float64)
    if np.any(~(z > 0)):
        raise DomainError(f"{name} must be strictly positive")
    return z


def _scalar_or_array(a):
    a = np.asarray(a)
    return a.item() if a.ndim == 0 else a


def z_switch(nu):
    """Argument above which the large-argument expansion is used."""
    return _fallback.z_switch(nu)


def gamma_fn(x):
    """Gamma function for positive real ``x`` (scalar or array)."""
    x = _check_positive(x, "x")
    return _scalar_or_array(np.vectorize(math.gamma, otypes=[float])(x))


def log_bessel_i_scaled(nu, z):
    """log(e^{-z} I_nu(z))."""
    _check_order(nu)
    z = _check_positive(z)
    return _scalar_or_array(_backend.log_ive(nu, z))


def bessel_i_scaled(nu, z):
    """e^{-z} I_nu(z) for nu > -1 and z > 0."""
    _check_order(nu)
    z = _check_positive(z)
    return _scalar_or_array(np.exp(_backend.log_ive(nu, z)))


def bessel_i(nu, z):
    """Unscaled I_nu(z); overflows to inf beyond z ~ 700."""
    _check_order(nu)
    z = _check_positive(z)
    with np.errstate(over="ignore"):
        return _scalar_or_array(np.exp(_backend.log_ive(nu, z) + z))


def bessel_ratio_defect(nu, z):
    """1 - I_{nu+1}(z) / I_nu(z), free of cancellation for large z."""
    _check_order(nu)
    z = _check_positive(z)
    return _scalar_or_array(_backend.ratio_defect(nu, z))


def bessel_scaled_defect(nu, z):
    """sqrt(2 pi z) e^{-z} I_nu(z) - 1, summed termwise above the switch."""
    _check_order(nu)
    z = _check_positive(z)
    return _scalar_or_array(_backend.scaled_defect(nu, z))


def series_ratio_minus_one(nu, z):
    """Gamma(nu+1) (z/2)^{-nu} I_nu(z) - 1, from the power series.

    Accurate for small z; used to subtract the t -> infinity limit of the
    heat kernel without cancellation.
    """
    _check_order(nu)
    z = _check_positive(z)
    return _scalar_or_array(_backend.series_sum(nu, z))


def bessel_i_scaled_series(nu, z):
    """Power-series branch of e^{-z} I_nu(z), forced for any z."""
    _check_order(nu)
    z = _check_positive(z)
    return _scalar_or_array(np.exp(_fallback._log_ive_series(nu, np.atleast_1d(z)).reshape(z.shape)))


def bessel_i_scaled_asymptotic(nu, z):
    """Large-argument branch of e^{-z} I_nu(z), forced for any z."""
    _check_order(nu)
    z = np.atleast_1d(_check_positive(z))
    S, N, _, _ = _fallback.asymptotic_sums(nu, z)
    val = (S - math.sin(math.pi * nu) * np.exp(-2.0 * z) * N) / np.sqrt(2.0 * math.pi * z)
    return _scalar_or_array(val)


def bracket_coeff(nu, k):
    """[nu, k] = prod_{j=1}^k (4 nu^2 - (2j-1)^2) / (4^k k!), by recurrence."""
    if k < 0 or int(k) != k:
        raise DomainError(f"k must be a nonnegative integer, got {k}")
    c = 1.0
    four_nu2 = 4.0 * nu * nu
    for j in range(int(k)):
        c *= (four_nu2 - (2.0 * j + 1.0) ** 2) / (4.0 * (j + 1.0))
    return c


def bracket_coeffs(nu, kmax):
    """Array of [nu, k] for k = 0..kmax."""
    out = np.empty(kmax + 1)
    out[0] = 1.0
    four_nu2 = 4.0 * nu * nu
    for j in range(kmax):
        out[j + 1] = out[j] * (four_nu2 - (2.0 * j + 1.0) ** 2) / (4.0 * (j + 1.0))
    return out


def asymptotic_tail(nu, z, m):
    """Truncated large-argument sum and a bound on its truncation error.

    Returns ``(value, bound)`` with value = sum_{k=0}^m (-1)^k [nu,k] (2z)^{-k}
    and bound = C_{nu,m} / z^{m+1} + 2 |sin(pi nu)| e^{-2z}, where
    C_{nu,m} = 2 |[nu, m+1]| / 2^{m+1}.  The bound covers
    |sqrt(2 pi z) e^{-z} I_nu(z) - value|; it is empirical (twice the first
    omitted term plus the exponentially small companion, plus a rounding
    floor for the evaluated sum) and is checked
    against the power series on [z_switch, 10 z_switch].
    """
    _check_order(nu)
    if m < 0:
        raise DomainError("m must be nonnegative")
    z = float(z)
    if not z > 0:
        raise DomainError("z must be strictly positive")
    c = bracket_coeffs(nu, m + 1)
    k = np.arange(m + 1)
    terms = (-1.0) ** k * c[: m + 1] * (2.0 * z) ** (-k.astype(float))
    value = float(np.sum(terms))
    const = 2.0 * abs(c[m + 1]) / 2.0 ** (m + 1)
    bound = const / z ** (m + 1) + 2.0 * abs(math.sin(math.pi * nu)) * math.exp(-2.0 * z)
    bound += 8.0 * np.finfo(float).eps * float(np.sum(np.abs(terms)))
    return value, bound
