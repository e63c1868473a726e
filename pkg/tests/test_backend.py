import numpy as np
import pytest

from bessel_harmonics import _backend, _fallback

compiled = pytest.importorskip("bessel_harmonics._core")

rng = np.random.default_rng(7)
Z = np.geomspace(1e-8, 1e7, 400)


@pytest.mark.parametrize("nu", [-0.9, -0.5, 0.0, 0.4, 3.0, 25.0])
@pytest.mark.parametrize("name", ["log_ive", "ratio_defect", "scaled_defect", "series_sum"])
def test_compiled_matches_fallback(nu, name):
    z = Z if name != "series_sum" else Z[Z < 30]
    a = getattr(compiled, name)(nu, z)
    b = getattr(_fallback, name)(nu, z)
    # the series branch of the scaled defect cancels down from ~1, costing a few digits
    rtol = 1e-11 if name == "scaled_defect" else 1e-12
    assert np.allclose(a, b, rtol=rtol, atol=1e-300)


@pytest.mark.parametrize("lam", [-0.4, 0.0, 0.7, 3.0])
def test_kernel_parts_agree(lam):
    t = 10 ** rng.uniform(-3, 3, 5000)
    x = 10 ** rng.uniform(-2, 2, 5000)
    y = 10 ** rng.uniform(-2, 2, 5000)
    a = compiled.kernel_parts(lam, t, x, y)
    b = _fallback.kernel_parts(lam, t, x, y)
    assert np.allclose(a[0], b[0], rtol=1e-12, atol=1e-12)
    for u, v in zip(a[1:], b[1:]):
        assert np.allclose(u, v, rtol=1e-9, atol=1e-12 * np.max(np.abs(v)))


def test_backend_name():
    assert _backend.NAME in ("compiled", "python")


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("BESSEL_HARMONICS_THREADS", "3")
    assert _backend.max_threads() == 3
    monkeypatch.setenv("BESSEL_HARMONICS_THREADS", "junk")
    assert _backend.max_threads() == 1
