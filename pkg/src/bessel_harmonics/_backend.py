"""Select the compiled core when available, else the numpy fallback.

Set ``BESSEL_HARMONICS_BACKEND=python`` to force the fallback.
``BESSEL_HARMONICS_THREADS`` caps the worker threads used for sample sweeps.
"""
import os

import numpy as np

from . import _fallback

if os.environ.get("BESSEL_HARMONICS_BACKEND", "").lower() == "python":
    _impl = _fallback
    NAME = "python"
else:
    try:
        from . import _core as _impl
        NAME = "compiled"
    except ImportError:
        _impl = _fallback
        NAME = "python"


def max_threads():
    try:
        n = int(os.environ.get("BESSEL_HARMONICS_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def _flat(a):
    return np.ascontiguousarray(a, dtype=np.float64).ravel()


def log_ive(nu, z):
    z = np.asarray(z, dtype=np.float64)
    return _impl.log_ive(float(nu), _flat(z)).reshape(z.shape)


def ratio_defect(nu, z):
    z = np.asarray(z, dtype=np.float64)
    return _impl.ratio_defect(float(nu), _flat(z)).reshape(z.shape)


def scaled_defect(nu, z):
    z = np.asarray(z, dtype=np.float64)
    return _impl.scaled_defect(float(nu), _flat(z)).reshape(z.shape)


def series_sum(nu, z):
    z = np.asarray(z, dtype=np.float64)
    return _impl.series_sum(float(nu), _flat(z)).reshape(z.shape)


def kernel_parts(lam, t, x, y, impl=None):
    """Broadcast (t, x, y) and return (log W, bt, bx) of the 1-d kernel."""
    t, x, y = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (t, x, y)))
    shape = t.shape
    impl = impl or _impl
    out = impl.kernel_parts(float(lam), _flat(t), _flat(x), _flat(y))
    return tuple(o.reshape(shape) for o in out)
