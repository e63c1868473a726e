"""One-dimensional Bessel heat kernel, its derivatives, the tensor-product
kernel on (0, inf)^n, the classical Gaussian kernel and their differences.

The 1-d kernel is

    W_t(x, y) = (xy)^{1/2-lam} / (2t) * I_{lam-1/2}(xy/2t) * exp(-(x^2+y^2)/4t)

and is always assembled as ``(xy)^{1/2-lam}/(2t) * [e^{-z} I_nu(z)] *
exp(-(x-y)^2/4t)`` with ``z = xy/2t``, so no ``e^{+z}`` is ever formed.
All functions broadcast over numpy arrays and return floats for scalar input.
"""
import math

import numpy as np

from . import _backend
from .errors import ContractError, DomainError


def check_lambda(lam):
    lam = float(lam)
    if not lam > -0.5:
        raise DomainError(f"Bessel index must satisfy lambda > -1/2, got {lam}")
    return lam


def check_lambdas(lams):
    lams = tuple(check_lambda(v) for v in np.atleast_1d(lams))
    if len(lams) < 1:
        raise ContractError("index vector must have at least one entry")
    return lams


def _positive(*arrays):
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=np.float64)
        if np.any(~(a > 0)):
            raise DomainError("t, x and y must be strictly positive")
        out.append(a)
    return out


def _ret(a):
    a = np.asarray(a)
    return a.item() if a.ndim == 0 else a


def heat_kernel_parts(lam, t, x, y):
    """Return (log W, bt, bx) with dW/dt = W*bt and dW/dx = W*bx."""
    lam = check_lambda(lam)
    t, x, y = _positive(t, x, y)
    return _backend.kernel_parts(lam, t, x, y)


def log_heat_kernel_1d(lam, t, x, y):
    return _ret(heat_kernel_parts(lam, t, x, y)[0])


def heat_kernel_1d(lam, t, x, y):
    """W_t^lam(x, y)."""
    return _ret(np.exp(heat_kernel_parts(lam, t, x, y)[0]))


def heat_kernel_dt(lam, t, x, y):
    """d/dt W_t^lam(x, y), from the product rule with I'_nu = I_{nu+1} + (nu/z) I_nu."""
    logw, bt, _ = heat_kernel_parts(lam, t, x, y)
    return _ret(np.exp(logw) * bt)


def heat_kernel_dx(lam, t, x, y):
    """d/dx W_t^lam(x, y) = (2t)^{-lam-1/2} [z^{1/2-lam} I_{lam+1/2}(z) y/2t
    - (x/2t) z^{1/2-lam} I_{lam-1/2}(z)] exp(-(x^2+y^2)/4t)."""
    logw, _, bx = heat_kernel_parts(lam, t, x, y)
    return _ret(np.exp(logw) * bx)


def _nd_args(lams, t, x, y):
    lams = check_lambdas(lams)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1:] != (len(lams),) or y.shape[-1:] != (len(lams),):
        raise ContractError(f"points must have trailing dimension {len(lams)}")
    t = np.asarray(t, dtype=np.float64)[..., None]
    return lams, t, x, y


def heat_kernel_nd_parts(lams, t, x, y):
    """Per-axis (log W_j, bt_j, bx_j), each with the trailing axis j."""
    lams, t, x, y = _nd_args(lams, t, x, y)
    t, x, y = _positive(t, x, y)
    t, x, y = np.broadcast_arrays(t, x, y)
    logw = np.empty(t.shape)
    bt = np.empty(t.shape)
    bx = np.empty(t.shape)
    for j, lam in enumerate(lams):
        logw[..., j], bt[..., j], bx[..., j] = _backend.kernel_parts(lam, t[..., j], x[..., j], y[..., j])
    return logw, bt, bx


def heat_kernel_nd(lams, t, x, y):
    """Product kernel prod_j W_t^{lam_j}(x_j, y_j); points carry a trailing axis of length n."""
    logw, _, _ = heat_kernel_nd_parts(lams, t, x, y)
    return _ret(np.exp(logw.sum(axis=-1)))


def heat_kernel_nd_dt(lams, t, x, y):
    logw, bt, _ = heat_kernel_nd_parts(lams, t, x, y)
    return _ret(np.exp(logw.sum(axis=-1)) * bt.sum(axis=-1))


def heat_kernel_nd_dx(lams, i, t, x, y):
    """d/dx_i of the product kernel."""
    logw, _, bx = heat_kernel_nd_parts(lams, t, x, y)
    return _ret(np.exp(logw.sum(axis=-1)) * bx[..., i])


def classical_kernel_1d(t, x, y):
    t = np.asarray(t, dtype=np.float64)
    if np.any(~(t > 0)):
        raise DomainError("t must be strictly positive")
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return _ret(np.exp(-d * d / (4.0 * t)) / (2.0 * np.sqrt(math.pi * t)))


def classical_kernel_1d_dt(t, x, y):
    t = np.asarray(t, dtype=np.float64)
    d2 = (np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)) ** 2
    return _ret(classical_kernel_1d(t, x, y) * (d2 / (4.0 * t * t) - 0.5 / t))


def classical_kernel_nd(t, x, y):
    """prod_j exp(-(x_j-y_j)^2/4t) / (2 sqrt(pi t))."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(~(t > 0)):
        raise DomainError("t must be strictly positive")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[-1]
    d2 = np.sum((x - y) ** 2, axis=-1)
    return _ret(np.exp(-d2 / (4.0 * t)) / (2.0 * np.sqrt(math.pi * t)) ** n)


def kernel_gaussian_gap(lam, t, x, y):
    """W_t^lam(x,y) - (xy)^{-lam} G_t(x,y), with G_t the classical kernel.

    Equals (xy)^{-lam} G_t(x,y) * (sqrt(2 pi z) e^{-z} I_nu(z) - 1); the
    bracket is summed termwise in the large-argument branch, so the small
    gap is not obtained by subtracting two nearly equal numbers there.
    """
    lam = check_lambda(lam)
    t, x, y = _positive(t, x, y)
    z = x * y / (2.0 * t)
    defect = _backend.scaled_defect(lam - 0.5, z)
    base = (x * y) ** (-lam) * np.exp(-(x - y) ** 2 / (4.0 * t)) / (2.0 * np.sqrt(math.pi * t))
    return _ret(base * defect)


def kernel_gaussian_gap_dt(lam, t, x, y):
    """d/dt [W_t^lam(x,y) - (xy)^{-lam} G_t(x,y)]."""
    lam = check_lambda(lam)
    t, x, y = _positive(t, x, y)
    z = x * y / (2.0 * t)
    nu = lam - 0.5
    defect = _backend.scaled_defect(nu, z)
    q = _backend.ratio_defect(nu, z)
    d2 = (x - y) ** 2
    bt = d2 / (4.0 * t * t) - (lam + 0.5) / t + (z / t) * q
    base = (x * y) ** (-lam) * np.exp(-d2 / (4.0 * t)) / (2.0 * np.sqrt(math.pi * t))
    return _ret(base * (defect * bt + (z * q - lam) / t))


def heat_kernel_limit(lam, t):
    """Large-time profile t^{-lam-1/2} / (2^{2 lam} Gamma(lam + 1/2))."""
    lam = check_lambda(lam)
    t = np.asarray(t, dtype=np.float64)
    return _ret(t ** (-lam - 0.5) / (2.0 ** (2.0 * lam) * math.gamma(lam + 0.5)))


def heat_kernel_limit_defect(lam, t, x, y):
    """W_t^lam(x,y) / limit(t) - 1, accurate when xy/t and (x^2+y^2)/t are small."""
    lam = check_lambda(lam)
    t, x, y = _positive(t, x, y)
    t, x, y = np.broadcast_arrays(t, x, y)
    nu = lam - 0.5
    z = x * y / (2.0 * t)
    s = (x * x + y * y) / (4.0 * t)
    out = np.empty(z.shape)
    small = z <= 30.0
    if np.any(small):
        tail = _backend.series_sum(nu, z[small])
        e = np.expm1(-s[small])
        out[small] = e * (1.0 + tail) + tail
    big = ~small
    if np.any(big):
        logw = _backend.kernel_parts(lam, t[big], x[big], y[big])[0]
        loglead = (-lam - 0.5) * np.log(t[big]) - 2.0 * lam * math.log(2.0) - math.lgamma(lam + 0.5)
        out[big] = np.expm1(logw - loglead)
    return _ret(out)
