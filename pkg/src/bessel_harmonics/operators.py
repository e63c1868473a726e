"""Operators built on the tensor-product Bessel heat kernel: the semigroup,
its maximal function, the g-function, Riesz kernels and truncated Riesz
integrals, fractional-power kernels and region-restricted application.

Sources are either a :class:`GridFunction` (integrated with its own grid) or
a :class:`SourceFunction` (a vectorised callable plus a support box).  For
callables the spatial rule is rebuilt per evaluation point: panels are graded
geometrically around ``x`` down to the smallest heat scale in play, so the
kernel peak is always resolved.  The kernel factorises over axes, so every
evaluation reduces to per-axis kernel matrices contracted with one tensor.

Time integrals run in ``u = log t`` on composite Gauss-Legendre panels.
"""
import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import _backend
from .bessel_kernel import check_lambdas, heat_kernel_limit_defect
from .errors import ContractError, ConvergenceError, DomainError, SingularityError
from .measure_grid import GridFunction, gauss_legendre, integrate_weighted_1d, panel_rule

LOWER, LOCAL, UPPER = "Lower", "Local", "Upper"
REGION_TAGS = (LOWER, LOCAL, UPPER)
KERNEL_KINDS = ("heat", "heat_dt", "heat_dx", "riesz")
SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class QuadratureSpec:
    """Discretisation of t-integrals and t-suprema."""

    t_min: float = 1e-6
    t_max: float = 1e6
    points_per_decade: int = 13
    refine_tol: float = 1e-8
    max_refinements: int = 8
    space_order: int = 10

    def __post_init__(self):
        if not (self.t_min > 0 and self.t_max > self.t_min):
            raise DomainError("need 0 < t_min < t_max")
        if not self.refine_tol > 0:
            raise DomainError("refine tolerance must be positive")
        if self.points_per_decade < 1 or self.max_refinements < 0:
            raise DomainError("points per decade must be >= 1 and refinements >= 0")
        if not 2 <= self.space_order <= 16:
            raise DomainError("space order must lie in 2..16")


DEFAULT_SPEC = QuadratureSpec()


def region_selectors(n):
    """All 3^n per-axis region tuples."""
    return list(product(REGION_TAGS, repeat=n))


def check_regions(regions, n):
    regions = tuple(regions)
    if len(regions) != n:
        raise ContractError(f"region selector needs {n} tags, got {len(regions)}")
    for r in regions:
        if r not in REGION_TAGS:
            raise ContractError(f"unknown region tag {r!r}")
    return regions


@dataclass(frozen=True)
class FractionalOrder:
    beta: float
    form: str = "subtracted"

    def check(self, lams):
        total = sum(lam + 0.5 for lam in lams)
        if self.form not in ("subtracted", "plain"):
            raise ContractError(f"unknown fractional form {self.form!r}")
        if not self.beta > 0:
            raise DomainError("beta must be positive")
        if not self.beta < total + 1.0:
            raise DomainError(f"beta must be < {total + 1.0} for this index vector")
        if self.form == "plain" and not self.beta < total:
            raise DomainError(f"the plain form needs beta < {total}")
        return total


# ---------------------------------------------------------------- sources


@dataclass(frozen=True)
class SourceFunction:
    """Vectorised ``func(points[..., n])`` vanishing outside ``support``.

    ``resolution`` is the largest panel width used inside the support on
    each axis; it should resolve the variation of ``func``.  A separable
    source may pass ``factors``, one 1-D callable per axis whose product is
    ``func``; tensor rules then evaluate it axis by axis.
    """

    func: Callable
    support: np.ndarray
    resolution: Optional[tuple] = None
    factors: Optional[tuple] = None

    def __post_init__(self):
        box = np.array(self.support, dtype=np.float64).reshape(-1, 2)
        if np.any(box[:, 0] < 0) or np.any(~(box[:, 1] > box[:, 0])):
            raise DomainError("support must be a box with 0 <= a < b")
        object.__setattr__(self, "support", box)
        if self.resolution is None:
            width = box[:, 1] - box[:, 0]
            res = tuple(float(w / 4.0) if np.isfinite(w) else 1.0 for w in width)
        else:
            res = tuple(float(r) for r in np.broadcast_to(self.resolution, (len(box),)))
        object.__setattr__(self, "resolution", res)
        if self.factors is not None and len(self.factors) != len(box):
            raise ContractError("need one factor per axis")

    @property
    def n(self):
        return len(self.support)

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        inside = np.all((pts >= self.support[:, 0]) & (pts <= self.support[:, 1]), axis=-1)
        out = np.zeros(pts.shape[:-1])
        if np.any(inside):
            out[inside] = np.asarray(self.func(pts[inside]), dtype=np.float64)
        return out

    def distance(self, x):
        """Euclidean distance from ``x`` to the support box."""
        x = np.asarray(x, dtype=np.float64)
        d = np.maximum(self.support[:, 0] - x, 0.0) + np.maximum(x - self.support[:, 1], 0.0)
        return float(np.sqrt(np.sum(d * d)))


def _bump(s):
    out = np.zeros_like(s)
    m = np.abs(s) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - s[m] ** 2))
    return out


def bump_source(center, width, lambdas, normalize=True):
    """Smooth bump prod_j phi((y_j - c_j)/h), unit L^1(m_lambda) norm if ``normalize``."""
    lams = check_lambdas(lambdas)
    c = np.broadcast_to(np.asarray(center, dtype=np.float64), (len(lams),)).copy()
    h = float(width)
    if not h > 0:
        raise DomainError("bump width must be positive")
    lo = np.maximum(c - h, 0.0)
    hi = c + h
    scale = 1.0
    if normalize:
        for cj, lam, a, b in zip(c, lams, lo, hi):
            edges = np.linspace(a, b, 9)
            scale *= integrate_weighted_1d(lambda y, cj=cj: _bump((y - cj) / h), lam, edges, rtol=1e-13)
    inv = 1.0 / scale

    def func(pts):
        return inv * np.prod(_bump((pts - c) / h), axis=-1)

    factors = [lambda y, cj=cj: _bump((y - cj) / h) for cj in c]
    factors[0] = lambda y, c0=c[0]: inv * _bump((y - c0) / h)
    # the bump is flat to all orders at its edges; h/8 panels resolve it to ~1e-9 at order 10
    return SourceFunction(func, np.column_stack([lo, hi]), tuple(np.full(len(lams), h / 8.0)), tuple(factors))


def _as_source(f, n):
    if isinstance(f, GridFunction):
        if f.grid.n != n:
            raise ContractError("grid dimension differs from the index vector length")
        return f
    if isinstance(f, SourceFunction):
        if f.n != n:
            raise ContractError("source dimension differs from the index vector length")
        return f
    raise ContractError("f must be a GridFunction or a SourceFunction")


def _check_point(x, n):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape != (n,):
        raise ContractError(f"point must have {n} coordinates")
    if np.any(~(x > 0)):
        raise DomainError("points must lie in (0, inf)^n")
    return x


# ---------------------------------------------------------- spatial rules


def _axis_edges(xj, lo, hi, s_min, extent, res):
    a = max(lo, xj - extent)
    b = min(hi, xj + extent)
    if not b > a:
        return None
    edges = [a, b]
    d = s_min
    while xj - d > a or xj + d < b:
        edges.extend((xj - d, xj + d))
        d *= 2.0
    if a == 0.0:
        v = min(xj, b) / 2.0
        while v > s_min / 4.0:
            edges.append(v)
            v /= 2.0
    edges.extend((xj, xj / 2.0, 2.0 * xj))
    if res and np.isfinite(res):
        count = int(math.ceil((b - a) / res))
        if count > 20000:
            raise ContractError("source resolution too fine for the requested time range")
        edges.extend(np.linspace(a, b, count + 1))
    e = np.unique(np.clip(np.asarray(edges, dtype=np.float64), a, b))
    keep = np.concatenate([[True], np.diff(e) > 1e-13 * max(b, 1.0)])
    e = e[keep]
    e[-1] = b
    return e


class _Rule(NamedTuple):
    nodes: tuple
    amp: np.ndarray  # f * weights on the tensor of nodes


def _space_rule(lams, f, x, t_lo, t_hi, order):
    """Tensor rule for y adapted to x and heat times in [t_lo, t_hi]."""
    if isinstance(f, GridFunction):
        return _Rule(f.grid.nodes, f.values * f.grid.weight_tensor())
    s_min = 0.5 * math.sqrt(t_lo)
    extent = 40.0 * math.sqrt(t_hi)
    nodes, weights = [], []
    for j, lam in enumerate(lams):
        e = _axis_edges(x[j], f.support[j, 0], f.support[j, 1], s_min, extent, f.resolution[j])
        if e is None:
            return None
        y, w = panel_rule(e, order, lam)
        nodes.append(y)
        weights.append(w)
    return _space_rule_from(nodes, weights, f)


def _contract(amp, rows):
    """sum_y prod_j rows[j][t, y_j] amp[y] for every t."""
    v = np.tensordot(rows[-1], amp, axes=([1], [amp.ndim - 1]))
    v = np.moveaxis(v, 0, -1)  # (N_1..N_{n-1}, T)
    for j in range(len(rows) - 2, -1, -1):
        v = np.sum(v * rows[j].T.reshape((1,) * j + rows[j].T.shape), axis=j)
    return v


def _kernel_rows(lams, x, t, nodes):
    rows = []
    for lam, xj, yj in zip(lams, x, nodes):
        logw, bt, bx = _backend.kernel_parts(lam, t[:, None], xj, yj[None, :])
        rows.append((np.exp(logw), bt, bx))
    return rows


def _apply_rows(rows, amp, kind, i=0):
    k = [r[0] for r in rows]
    if kind == "heat":
        return _contract(amp, k)
    if kind == "heat_dt":
        total = 0.0
        for j, r in enumerate(rows):
            kk = list(k)
            kk[j] = r[0] * r[1]
            total = total + _contract(amp, kk)
        return total
    if kind == "heat_dx":
        kk = list(k)
        kk[i] = rows[i][0] * rows[i][2]
        return _contract(amp, kk)
    raise ContractError(f"unknown kernel kind {kind!r}")


def _mask_regions(rule, x, regions):
    amp = rule.amp
    for j, (yj, tag) in enumerate(zip(rule.nodes, regions)):
        if tag == LOWER:
            m = yj < x[j] / 2.0
        elif tag == LOCAL:
            m = (yj > x[j] / 2.0) & (yj < 2.0 * x[j])
        else:
            m = yj > 2.0 * x[j]
        shape = [1] * amp.ndim
        shape[j] = len(yj)
        amp = amp * m.reshape(shape)
    return _Rule(rule.nodes, amp)


def _time_values(lams, f, x, t, kind, i=0, order=10, regions=None):
    """kind-applied semigroup at every t, one spatial rule per decade of t."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros(t.shape)
    if t.size == 0:
        return out
    dec = np.floor(np.log10(t) + 1e-12)
    for d in np.unique(dec):
        sel = dec == d
        ts = t[sel]
        rule = _space_rule(lams, f, x, ts.min(), ts.max(), order)
        if rule is None:
            continue
        if regions is not None:
            rule = _mask_regions(rule, x, regions)
        rows = _kernel_rows(lams, x, ts, rule.nodes)
        out[sel] = _apply_rows(rows, rule.amp, kind, i)
    return out


# --------------------------------------------------------- time quadrature


def log_time_rule(u_lo, u_hi, width=0.5, order=10, breaks=()):
    """Composite Gauss-Legendre nodes/weights in u = log t on [u_lo, u_hi]."""
    cuts = sorted({u_lo, u_hi, *(b for b in breaks if u_lo < b < u_hi)})
    edges = [cuts[0]]
    for a, b in zip(cuts[:-1], cuts[1:]):
        m = max(1, int(math.ceil((b - a) / width)))
        edges.extend(np.linspace(a, b, m + 1)[1:])
    edges = np.asarray(edges)
    s, w = gauss_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    u = (0.5 * (lo + hi) + 0.5 * (hi - lo) * s).ravel()
    wu = (0.5 * (hi - lo) * w).ravel()
    return u, wu


def _refined_integral(integrand, u_lo, u_hi, kappa, breaks, m, rtol, max_ref, width=0.5, order=10):
    """Integrate integrand(t, idx) -> (T, len(idx)) over u, per column.

    Adds the tail beyond u_hi for an integrand decaying like e^{-kappa u}.
    Columns are refined by halving the panel width until two successive
    values agree to rtol relative to the integral of |integrand|.
    """
    result = np.full(m, np.nan)
    idx = np.arange(m)
    prev = None
    for level in range(max_ref + 1):
        u, wu = log_time_rule(u_lo, u_hi, width / 2.0**level, order, breaks)
        t = np.exp(u)
        vals = integrand(t, idx)
        est = wu @ vals
        scale = wu @ np.abs(vals)
        tail = integrand(np.array([math.exp(u_hi)]), idx)[0] / kappa if kappa else 0.0
        est = est + tail
        if prev is not None:
            ok = np.abs(est - prev) <= rtol * (scale + np.abs(est)) + 1e-300
            result[idx[ok]] = est[ok]
            idx, est = idx[~ok], est[~ok]
            if idx.size == 0:
                return result
        prev = est
    raise ConvergenceError("time integral did not stabilise", iterates=tuple(prev[:2]))


# ------------------------------------------------------- semigroup family


def apply_semigroup(lams, t, f, x, order=None):
    """W_t f(x) by tensor quadrature of the product kernel against f."""
    lams = check_lambdas(lams)
    f = _as_source(f, len(lams))
    x = _check_point(x, len(lams))
    if not t > 0:
        raise DomainError("t must be positive")
    order = order or DEFAULT_SPEC.space_order
    return float(_time_values(lams, f, x, np.array([float(t)]), "heat", order=order)[0])


def apply_semigroup_dt(lams, t, f, x, order=None):
    lams = check_lambdas(lams)
    f = _as_source(f, len(lams))
    x = _check_point(x, len(lams))
    order = order or DEFAULT_SPEC.space_order
    return float(_time_values(lams, f, x, np.array([float(t)]), "heat_dt", order=order)[0])


def apply_semigroup_dx(lams, i, t, f, x, order=None):
    lams = check_lambdas(lams)
    f = _as_source(f, len(lams))
    x = _check_point(x, len(lams))
    order = order or DEFAULT_SPEC.space_order
    return float(_time_values(lams, f, x, np.array([float(t)]), "heat_dx", i=i, order=order)[0])


class Supremum(NamedTuple):
    value: float
    t: float


def _golden(fun, a, b, rtol):
    """Maximise fun on [a, b] in log t; return (value, t)."""
    g = (math.sqrt(5.0) - 1.0) / 2.0
    la, lb = math.log(a), math.log(b)
    c, d = lb - g * (lb - la), la + g * (lb - la)
    fc, fd = fun(math.exp(c)), fun(math.exp(d))
    while lb - la > rtol:
        if fc >= fd:
            lb, d, fd = d, c, fc
            c = lb - g * (lb - la)
            fc = fun(math.exp(c))
        else:
            la, c, fc = c, d, fd
            d = la + g * (lb - la)
            fd = fun(math.exp(d))
    return (fc, math.exp(c)) if fc >= fd else (fd, math.exp(d))


def maximal_op(lams, f, x, tspec=DEFAULT_SPEC):
    """sup_t |W_t f(x)| over [t_min, t_max] with its maximiser.

    A log grid locates the best t; golden-section search then refines it
    to relative 1e-8 in t.
    """
    lams = check_lambdas(lams)
    f = _as_source(f, len(lams))
    x = _check_point(x, len(lams))
    decades = math.log10(tspec.t_max / tspec.t_min)
    count = max(3, int(round(decades * tspec.points_per_decade)) + 1)
    grid = np.geomspace(tspec.t_min, tspec.t_max, count)
    vals = np.abs(_time_values(lams, f, x, grid, "heat", order=tspec.space_order))
    k = int(np.argmax(vals))
    if vals[k] == 0.0:
        return Supremum(0.0, float(grid[k]))

    def fun(t):
        return abs(float(_time_values(lams, f, x, np.array([t]), "heat", order=tspec.space_order)[0]))

    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, count - 1)]
    best, tb = _golden(fun, a, b, 1e-8)
    if vals[k] > best:
        best, tb = float(vals[k]), float(grid[k])
    if k == 0 and isinstance(f, SourceFunction):
        # the sup sits below the grid; W_t f(x) -> f(x) as t -> 0
        fx = abs(float(f(x[None, :])[0]))
        if fx > best:
            best, tb = fx, 0.0
    return Supremum(float(best), float(tb))


def g_function(lams, f, x, tspec=DEFAULT_SPEC):
    """(int_0^inf |t d/dt W_t f(x)|^2 dt/t)^{1/2} on a log-t rule.

    Eight-point panels, ceil(points_per_decade/8) per decade, with a t^2
    tail below t_min and the t^{-2 kappa} tail of an integrable source above
    t_max.
    """
    lams = check_lambdas(lams)
    f = _as_source(f, len(lams))
    x = _check_point(x, len(lams))
    u_lo, u_hi = math.log(tspec.t_min), math.log(tspec.t_max)
    per_decade = max(1, int(math.ceil(tspec.points_per_decade / 8.0)))
    width = math.log(10.0) / per_decade
    u, wu = log_time_rule(u_lo, u_hi, width, 8)
    t = np.exp(u)
    ends = np.array([tspec.t_min, tspec.t_max])
    d = _time_values(lams, f, x, np.concatenate([t, ends]), "heat_dt", order=tspec.space_order)
    h = (t * d[:-2]) ** 2
    kappa = sum(lam + 0.5 for lam in lams)
    total = float(wu @ h)
    total += (tspec.t_min * d[-2]) ** 2 / 2.0 + (tspec.t_max * d[-1]) ** 2 / (2.0 * kappa)
    return math.sqrt(total)


# ----------------------------------------------------------------- Riesz


def _riesz_integrand(lams, i, x, Y):
    def integrand(t, idx):
        y = Y[idx]
        out = np.full((t.size, idx.size), 1.0 / SQRT_PI) * np.sqrt(t)[:, None]
        for j, lam in enumerate(lams):
            logw, _, bx = _backend.kernel_parts(lam, t[:, None], x[j], y[None, :, j])
            out *= np.exp(logw)
            if j == i:
                out *= bx
        return out

    return integrand


def _riesz_batch(lams, i, x, Y, rtol=1e-12, max_ref=6, width=0.5):
    Y = np.asarray(Y, dtype=np.float64).reshape(-1, len(lams))
    if Y.shape[0] == 0:
        return np.zeros(0)
    a = np.sum((Y - x) ** 2, axis=1) / 4.0
    if np.any(a == 0.0):
        raise SingularityError("Riesz kernel evaluated on the diagonal")
    kappa = sum(lam + 0.5 for lam in lams) + 0.5
    top = max(float(a.max()), float(np.max(x * x)), float(np.max(Y * Y)))
    u_lo = math.log(a.min()) - 7.5
    u_hi = math.log(top) + 40.0 / kappa
    anchors = [math.log(a.min()), math.log(float(np.min(x * Y.min(axis=0))) / 2.0)]
    return _refined_integral(
        _riesz_integrand(lams, i, x, Y), u_lo, u_hi, kappa, anchors, Y.shape[0], rtol, max_ref, width=width
    )


def riesz_kernel(lams, i, x, y):
    """R_i(x, y) = pi^{-1/2} int_0^inf d/dx_i W_t(x, y) t^{-1/2} dt.

    ``y`` may hold many points (trailing axis n); the time integral is
    refined per point until successive levels agree to ~1e-12 relative.
    """
    lams = check_lambdas(lams)
    n = len(lams)
    if not 0 <= i < n:
        raise ContractError(f"axis {i} out of range for n = {n}")
    x = _check_point(x, n)
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1:] != (n,):
        raise ContractError(f"points must have trailing dimension {n}")
    if np.any(~(y > 0)):
        raise DomainError("points must lie in (0, inf)^n")
    out = _riesz_batch(lams, i, x, y.reshape(-1, n)).reshape(y.shape[:-1])
    return out.item() if out.ndim == 0 else out


def classical_riesz_comparison(lams, i, x, y):
    """Closed-form comparison kernel c_n d/dx_i [Gamma((n-1)/2) a^{-(n-1)/2} prod (x_j y_j)^{-lam_j}]
    with a = |x - y|^2/4 and c_n = 2^{-n} pi^{-(n+1)/2}."""
    lams = check_lambdas(lams)
    n = len(lams)
    if n < 2:
        raise ContractError("the comparison kernel is defined for n >= 2")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lam = np.asarray(lams)
    a = np.sum((x - y) ** 2, axis=-1) / 4.0
    if np.any(a == 0.0):
        raise SingularityError("comparison kernel evaluated on the diagonal")
    p = np.prod((x * y) ** (-lam), axis=-1)
    g = math.gamma((n - 1) / 2.0)
    xi, yi = x[..., i], y[..., i]
    d = g * p * (-(n - 1) / 4.0 * (xi - yi) * a ** (-(n + 1) / 2.0) - lam[i] / xi * a ** (-(n - 1) / 2.0))
    out = d / (2.0**n * math.pi ** ((n + 1) / 2.0))
    return out.item() if np.ndim(out) == 0 else out


def _split(edges, hmax):
    out = [edges[:1]]
    for a, b in zip(edges[:-1], edges[1:]):
        m = max(1, int(math.ceil((b - a) / hmax))) if np.isfinite(hmax) else 1
        out.append(np.linspace(a, b, m + 1)[1:])
    return np.concatenate(out)


def _radial_rule(r_in, r_out, order, hmax=np.inf, levels=8):
    if r_in == 0.0:
        edges = np.concatenate([[0.0], r_out * 2.0 ** -np.arange(levels, -1, -1.0)])
    else:
        m = max(1, int(math.ceil(math.log2(r_out / r_in))))
        edges = np.geomspace(r_in, r_out, m + 1)
    return panel_rule(_split(edges, hmax), order)


def _polar_nodes(x, r_in, r_out, n_theta, order, hmax=np.inf):
    """Points and Lebesgue weights for {r_in < |y - x| < r_out} in the open quadrant (n = 2).

    The part of the annulus clear of the axes uses an equispaced angle rule,
    which contains antipodal node pairs, so the odd singular part of a pv
    integrand cancels node by node.  The part cut by the axes uses angle
    panels split where the cut changes shape.  No panel, radial or along an
    arc, is longer than ``hmax``.
    """
    pts, wts = [], []
    d0 = float(min(x))
    r1 = min(r_out, d0)
    if r1 > r_in:
        r, wr = _radial_rule(r_in, r1, order, hmax)
        if np.isfinite(hmax):
            n_theta = max(n_theta, 2 * int(math.ceil(math.pi * r1 / hmax)))
        n_theta += n_theta % 2
        th = 2.0 * math.pi * np.arange(n_theta) / n_theta
        dirs = np.column_stack([np.cos(th), np.sin(th)])
        pts.append((x + r[:, None, None] * dirs[None, :, :]).reshape(-1, 2))
        wts.append((wr[:, None] * r[:, None] * (2.0 * math.pi / n_theta) * np.ones(n_theta)).ravel())
    r2 = max(r_in, d0)
    if r_out > r2:
        brk = {0.0, 2.0 * math.pi, math.atan2(-x[1], -x[0]) % (2.0 * math.pi)}
        for rho in (r2, r_out):
            if x[0] < rho:
                c = math.acos(-x[0] / rho)
                brk.update((c, 2.0 * math.pi - c))
            if x[1] < rho:
                s = math.asin(x[1] / rho)
                brk.update((math.pi + s, 2.0 * math.pi - s))
        brk = np.array(sorted(brk))
        brk = brk[np.concatenate([[True], np.diff(brk) > 1e-14])]
        th, wth = panel_rule(_split(brk, min(hmax / r_out, 2.0 * math.pi / n_theta * 4)), order)
        c, s = np.cos(th), np.sin(th)
        with np.errstate(divide="ignore"):
            hit = np.minimum(np.where(c < 0, x[0] / -c, np.inf), np.where(s < 0, x[1] / -s, np.inf))
        top = np.minimum(hit, r_out)
        for k in np.nonzero(top > r2)[0]:
            r, wr = panel_rule(_split(np.array([r2, top[k]]), hmax), order)
            pts.append(x + r[:, None] * np.array([c[k], s[k]]))
            wts.append(wr * r * wth[k])
    if not pts:
        return np.zeros((0, 2)), np.zeros(0)
    return np.concatenate(pts), np.concatenate(wts)


def _shell_nodes_1d(x, r_in, r_out, order, hmax=np.inf):
    pts, wts = [], []
    x0 = float(x[0])
    r1 = min(r_out, x0)
    if r1 > r_in:
        # without an r dr factor the paired kernel keeps a log singularity at r = 0: grade deep
        r, wr = _radial_rule(r_in, r1, order, hmax, levels=40)
        # snap offsets so x0 +- r are exact mirrors; rounding would break the pair cancellation
        r = (x0 + r) - x0
        pts.extend((x0 + r, x0 - r))
        wts.extend((wr, wr))
    r2 = max(r_in, x0)
    if r_out > r2:
        r, wr = _radial_rule(r2, r_out, order, hmax)
        pts.append(x0 + r)
        wts.append(wr)
    if not pts:
        return np.zeros((0, 1)), np.zeros(0)
    return np.concatenate(pts)[:, None], np.concatenate(wts)


@dataclass(frozen=True)
class ShellRule:
    """Accuracy knobs for near-field Riesz integrals.

    ``hmax`` is the longest panel as a fraction of the source resolution;
    ``rtol`` and ``width`` go to the per-point time integral.
    """

    n_theta: int = 32
    order: int = 8
    hmax: float = 0.5
    rtol: float = 1e-11
    width: float = 0.5


FINE_SHELLS = ShellRule()
COARSE_SHELLS = ShellRule(n_theta=16, order=4, hmax=2.0, rtol=1e-6, width=1.0)


def _check_shell_dim(lams):
    if len(lams) > 2:
        raise ContractError("truncated Riesz integrals of callables support n <= 2; pass a GridFunction")


def _shell_integral(lams, i, f, x, r_in, r_out, rule=FINE_SHELLS):
    """int over r_in < |y - x| < r_out of R_i(x, y) f(y) dm(y), pv when r_in = 0."""
    n_theta, order, rtol = rule.n_theta, rule.order, rule.rtol
    if r_out <= r_in:
        return 0.0
    n = len(lams)
    if isinstance(f, GridFunction):
        mesh = f.grid.mesh().reshape(-1, n)
        amp = (f.values * f.grid.weight_tensor()).ravel()
        dist = np.sqrt(np.sum((mesh - x) ** 2, axis=1))
        sel = (dist > r_in) & (dist < r_out) & (amp != 0.0)
        if not np.any(sel):
            return 0.0
        return float(_riesz_batch(lams, i, x, mesh[sel], rtol, width=rule.width) @ amp[sel])
    if f.distance(x) >= r_out:
        return 0.0
    corner = np.maximum(np.abs(f.support[:, 0] - x), np.abs(f.support[:, 1] - x))
    r_out = min(r_out, float(np.sqrt(np.sum(corner * corner))) * (1.0 + 1e-12))
    if r_out <= r_in:
        return 0.0
    hmax = rule.hmax * min(f.resolution)
    if n == 1:
        Y, w = _shell_nodes_1d(x, r_in, r_out, order, hmax)
    elif n == 2:
        Y, w = _polar_nodes(x, r_in, r_out, n_theta, order, hmax)
    else:
        raise ContractError("truncated Riesz integrals of callables support n <= 2; pass a GridFunction")
    w = w * f(Y) * np.prod(Y ** (2.0 * np.asarray(lams)), axis=1)
    sel = w != 0.0
    if not np.any(sel):
        return 0.0
    return float(_riesz_batch(lams, i, x, Y[sel], rtol, width=rule.width) @ w[sel])


def riesz_transform(lams, i, f, x, tspec=DEFAULT_SPEC, regions=None):
    """pv R_i f(x) computed time-first: pi^{-1/2} int d/dx_i W_t f(x) t^{-1/2} dt.

    Below t_min the integrand is taken constant, giving 2 sqrt(t_min) times
    its value there.
    """
    lams = check_lambdas(lams)
    f = _as_source(f, len(lams))
    x = _check_point(x, len(lams))
    u_lo, u_hi = math.log(tspec.t_min), math.log(tspec.t_max)
    per_decade = max(1, int(math.ceil(tspec.points_per_decade / 8.0)))
    u, wu = log_time_rule(u_lo, u_hi, math.log(10.0) / (2 * per_decade), 10)
    t = np.concatenate([np.exp(u), [tspec.t_min, tspec.t_max]])
    d = _time_values(lams, f, x, t, "heat_dx", i=i, order=tspec.space_order, regions=regions)
    h = np.sqrt(t) * d
    kappa = sum(lam + 0.5 for lam in lams) + 0.5
    total = float(wu @ h[:-2]) + 2.0 * h[-2] + h[-1] / kappa
    return total / SQRT_PI


def riesz_truncated(lams, i, f, x, eps, tspec=DEFAULT_SPEC):
    """int_{|x-y| > eps} R_i(x, y) f(y) dm(y)."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    lams = check_lambdas(lams)
    f = _as_source(f, len(lams))
    x = _check_point(x, len(lams))
    if isinstance(f, GridFunction):
        return _shell_integral(lams, i, f, x, eps, np.inf)
    _check_shell_dim(lams)
    return riesz_transform(lams, i, f, x, tspec) - _shell_integral(lams, i, f, x, 0.0, eps)


def riesz_truncated_many(lams, i, f, x, eps_list, tspec=DEFAULT_SPEC, shells=FINE_SHELLS):
    """Truncated integrals for several eps sharing the full transform and nested shells."""
    lams = check_lambdas(lams)
    f = _as_source(f, len(lams))
    x = _check_point(x, len(lams))
    eps = np.asarray(eps_list, dtype=np.float64)
    if eps.size == 0 or np.any(~(eps > 0)):
        raise DomainError("eps values must be positive")
    order = np.argsort(eps)
    out = np.empty(eps.size)
    if isinstance(f, GridFunction):
        for k in order:
            out[k] = _shell_integral(lams, i, f, x, eps[k], np.inf, shells)
        return out
    _check_shell_dim(lams)
    full = riesz_transform(lams, i, f, x, tspec)
    near, r = 0.0, 0.0
    for k in order:
        near += _shell_integral(lams, i, f, x, r, eps[k], shells)
        r = eps[k]
        out[k] = full - near
    return out


def riesz_maximal(lams, i, f, x, eps_list, tspec=DEFAULT_SPEC, shells=FINE_SHELLS):
    """max over the listed eps of |truncated Riesz integral|."""
    return float(np.max(np.abs(riesz_truncated_many(lams, i, f, x, eps_list, tspec, shells))))


def riesz_pv(lams, i, f, x, eps0=None, tol=1e-7, max_steps=40, tspec=DEFAULT_SPEC):
    """Limit of truncated integrals along eps_k = eps0 2^{-k}.

    Stops when successive values differ by < tol (1 + |value|) and returns
    the linear extrapolation 2 T_k - T_{k-1}.
    """
    lams = check_lambdas(lams)
    f = _as_source(f, len(lams))
    x = _check_point(x, len(lams))
    eps = float(eps0) if eps0 is not None else float(min(x)) / 4.0
    prev = riesz_truncated(lams, i, f, x, eps, tspec)
    for _ in range(max_steps):
        if isinstance(f, GridFunction):
            cur = riesz_truncated(lams, i, f, x, eps / 2.0)
        else:
            cur = prev + _shell_integral(lams, i, f, x, eps / 2.0, eps)
        eps /= 2.0
        if abs(cur - prev) < tol * (1.0 + abs(cur)):
            return 2.0 * cur - prev
        prev_prev, prev = prev, cur
    raise ConvergenceError("truncated Riesz integrals did not stabilise", iterates=(prev_prev, prev))


# ------------------------------------------------------------ fractional


def fractional_constant_shift(lams, beta):
    """Subtracted minus plain kernel: -(1/Gamma(beta)) int_1^inf prod lead_j t^{beta-1} dt."""
    lams = check_lambdas(lams)
    total = FractionalOrder(beta, "plain").check(lams)
    c = math.prod(2.0 ** (2.0 * lam) * math.gamma(lam + 0.5) for lam in lams)
    return -1.0 / (math.gamma(beta) * (total - beta) * c)


def classical_fractional_coefficient(n, beta):
    """Gamma(n/2 - beta) / (pi^{n/2} 4^beta Gamma(beta)), the Euclidean |x-y|^{2beta-n} coefficient."""
    if not 0 < beta < n / 2.0:
        raise DomainError("need 0 < beta < n/2")
    return math.gamma(n / 2.0 - beta) / (math.pi ** (n / 2.0) * 4.0**beta * math.gamma(beta))


def _pairs(x, y, n):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1:] != (n,) or y.shape[-1:] != (n,):
        raise ContractError(f"points must have trailing dimension {n}")
    x, y = np.broadcast_arrays(x, y)
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise DomainError("points must lie in (0, inf)^n")
    return x.reshape(-1, n), y.reshape(-1, n), x.shape[:-1]


def fractional_kernel(lams, beta, x, y, form="subtracted", rtol=1e-12):
    """K_beta(x, y) = (1/Gamma(beta)) int_0^inf (prod W_t - chi_{t>1} prod lead) t^{beta-1} dt.

    ``form="plain"`` drops the large-t subtraction (needs beta < sum(lam+1/2)).
    Above t = 1 the subtracted integrand is prod lead * expm1(sum log1p(defect)).
    """
    lams = check_lambdas(lams)
    n = len(lams)
    spec = beta if isinstance(beta, FractionalOrder) else FractionalOrder(float(beta), form)
    total = spec.check(lams)
    b = spec.beta
    X, Y, shape = _pairs(x, y, n)
    a = np.sum((X - Y) ** 2, axis=1) / 4.0
    if np.any(a == 0.0):
        raise SingularityError("fractional kernel evaluated on the diagonal")
    lead_log = [(-lam - 0.5, -2.0 * lam * math.log(2.0) - math.lgamma(lam + 0.5)) for lam in lams]
    sub = spec.form == "subtracted"
    kappa = total + (1.0 if sub else 0.0) - b
    g = math.gamma(b)

    def integrand(t, idx):
        tt = t[:, None]
        out = np.empty((t.size, idx.size))
        low = t <= 1.0 if sub else np.ones(t.size, dtype=bool)
        if np.any(low):
            lw = 0.0
            for j, lam in enumerate(lams):
                lw = lw + _backend.kernel_parts(lam, tt[low], X[idx, j][None, :], Y[idx, j][None, :])[0]
            out[low] = np.exp(lw) * tt[low] ** b
        high = ~low
        if np.any(high):
            s, lead = 0.0, 0.0
            for j, lam in enumerate(lams):
                dj = heat_kernel_limit_defect(lam, *np.broadcast_arrays(tt[high], X[idx, j][None, :], Y[idx, j][None, :]))
                s = s + np.log1p(dj)
                lead = lead + lead_log[j][0] * np.log(tt[high]) + lead_log[j][1]
            out[high] = np.exp(lead) * np.expm1(s) * tt[high] ** b
        return out / g

    top = max(float(a.max()), float(np.max(X * X)), float(np.max(Y * Y)), 1.0)
    u_lo = math.log(a.min()) - 7.5
    if sub:
        u_lo = min(u_lo, -1.0)
    u_hi = math.log(top) + 40.0 / kappa
    out = _refined_integral(integrand, u_lo, u_hi, kappa, [0.0, math.log(a.min())], len(a), rtol, 8)
    out = out.reshape(shape)
    return out.item() if out.ndim == 0 else out


def fractional_kernel_classical(n, beta, x, y, rtol=1e-12):
    """(1/Gamma(beta)) int_0^inf (4 pi t)^{-n/2} e^{-|x-y|^2/4t} t^{beta-1} dt by the same log-t rule."""
    X, Y, shape = _pairs(x, y, n)
    a = np.sum((X - Y) ** 2, axis=1) / 4.0
    if not 0 < beta < n / 2.0:
        raise DomainError("need 0 < beta < n/2")

    def integrand(t, idx):
        tt = t[:, None]
        return (4.0 * math.pi * tt) ** (-n / 2.0) * np.exp(-a[idx][None, :] / tt) * tt**beta / math.gamma(beta)

    kappa = n / 2.0 - beta
    u_lo = math.log(a.min()) - 7.5
    u_hi = math.log(a.max()) + 40.0 / kappa
    out = _refined_integral(integrand, u_lo, u_hi, kappa, [], len(a), rtol, 8).reshape(shape)
    return out.item() if out.ndim == 0 else out


# -------------------------------------------------------- region split


def region_apply(lams, regions, kind, f, x, t=None, tspec=DEFAULT_SPEC, i=0):
    """Operator of ``kind`` with y_j restricted per axis to Lower (0, x_j/2),
    Local (x_j/2, 2x_j) or Upper (2x_j, inf).

    The spatial rule always breaks at x_j/2 and 2x_j, so the 3^n restricted
    pieces partition the unrestricted quadrature exactly.
    """
    lams = check_lambdas(lams)
    n = len(lams)
    regions = check_regions(regions, n)
    f = _as_source(f, n)
    x = _check_point(x, n)
    if kind not in KERNEL_KINDS:
        raise ContractError(f"kernel kind must be one of {KERNEL_KINDS}")
    if kind == "riesz":
        return riesz_transform(lams, i, f, x, tspec, regions=regions)
    if t is None or not t > 0:
        raise DomainError("heat kinds need t > 0")
    return float(_time_values(lams, f, x, np.array([float(t)]), kind, i=i, order=tspec.space_order, regions=regions)[0])


# ------------------------------------------------ tensor-grid evaluation


def _support_rule(lams, f, order):
    nodes, weights = [], []
    for j, lam in enumerate(lams):
        lo, hi = f.support[j]
        if not np.isfinite(hi):
            raise ContractError("grid evaluation needs a compactly supported source")
        m = max(1, int(math.ceil((hi - lo) / f.resolution[j])))
        y, w = panel_rule(np.linspace(lo, hi, m + 1), order, lam)
        nodes.append(y)
        weights.append(w)
    rule = _space_rule_from(nodes, weights, f)
    return rule


def _space_rule_from(nodes, weights, f):
    if f.factors is not None:
        amp = np.ones(())
        for g, y, w in zip(f.factors, nodes, weights):
            amp = np.multiply.outer(amp, np.asarray(g(y), dtype=np.float64) * w)
        return _Rule(tuple(nodes), amp)
    mesh = np.stack(np.meshgrid(*nodes, indexing="ij"), axis=-1)
    amp = f(mesh)
    for j, w in enumerate(weights):
        shape = [1] * len(nodes)
        shape[j] = len(w)
        amp = amp * w.reshape(shape)
    return _Rule(tuple(nodes), amp)


def _batch_values(lams, rule, axes, t, kind, i=0):
    """kind-applied semigroup on the tensor of ``axes`` for every t: shape (T, *Nx)."""
    mats = []
    for lam, xa, ya in zip(lams, axes, rule.nodes):
        logw, bt, bx = _backend.kernel_parts(lam, t[:, None, None], xa[None, :, None], ya[None, None, :])
        k = np.exp(logw)
        mats.append((k, k * bt, k * bx))

    def contract(ks):
        v = rule.amp  # (Ny_1..Ny_n)
        v = np.einsum("tap,p...->ta...", ks[0], v)
        for j in range(1, len(ks)):
            # v: (T, Nx_1..Nx_j, Ny_{j+1}..Ny_n); contract the first remaining y axis
            v = np.moveaxis(v, j + 1, -1)
            v = np.einsum("t...p,tbp->t...b", v, ks[j])
            v = np.moveaxis(v, -1, j + 1)
        return v

    plain = [m[0] for m in mats]
    if kind == "heat":
        return contract(plain)
    if kind == "heat_dt":
        out = 0.0
        for j in range(len(mats)):
            ks = list(plain)
            ks[j] = mats[j][1]
            out = out + contract(ks)
        return out
    if kind == "heat_dx":
        ks = list(plain)
        ks[i] = mats[i][2]
        return contract(ks)
    raise ContractError(f"unknown kernel kind {kind!r}")


def _grid_times(tspec, t_floor, per_decade):
    lo = max(tspec.t_min, t_floor)
    count = max(3, int(round(math.log10(tspec.t_max / lo) * per_decade)) + 1)
    return np.geomspace(lo, tspec.t_max, count)


GRID_OPERATORS = ("maximal", "g_function", "riesz", "riesz_maximal")


def evaluate_on_grid(name, lams, f, axes, tspec=DEFAULT_SPEC, i=0, eps_list=(), shells=COARSE_SHELLS,
                     near=None, batch_order=6):
    """Evaluate one operator on the tensor product of per-axis points.

    Points farther than ``near`` (default 8 resolutions) from the support are
    handled together with one fixed rule over the support; the rest go
    through the pointwise operators.  For far points the maximal function is
    the largest value on a 26-per-decade t grid refined by a parabola in
    log t, and truncations below the distance to the support equal the
    full transform.
    """
    lams = check_lambdas(lams)
    n = len(lams)
    f = _as_source(f, n)
    if not isinstance(f, SourceFunction):
        raise ContractError("grid evaluation needs a SourceFunction")
    if name not in GRID_OPERATORS:
        raise ContractError(f"operator must be one of {GRID_OPERATORS}")
    axes = [np.asarray(a, dtype=np.float64) for a in axes]
    if len(axes) != n:
        raise ContractError("need one point array per axis")
    near = 8.0 * max(f.resolution) if near is None else float(near)
    eps = np.asarray(eps_list, dtype=np.float64)
    if name == "riesz_maximal" and (eps.size == 0 or eps.max() >= near):
        raise ContractError("riesz_maximal needs eps values below the near distance")
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    dist = np.sqrt(np.sum(
        (np.maximum(f.support[:, 0] - mesh, 0.0) + np.maximum(mesh - f.support[:, 1], 0.0)) ** 2, axis=-1))
    far = dist >= near
    out = np.empty(mesh.shape[:-1])
    if np.any(far):
        rule = _support_rule(lams, f, batch_order)
        t_floor = float(dist[far].min()) ** 2 / 2000.0
        out[far] = _far_values(name, lams, rule, axes, tspec, t_floor, i)[far]
    for idx in zip(*np.nonzero(~far)):
        x = mesh[idx]
        if name == "maximal":
            out[idx] = maximal_op(lams, f, x, tspec).value
        elif name == "g_function":
            out[idx] = g_function(lams, f, x, tspec)
        elif name == "riesz":
            out[idx] = riesz_transform(lams, i, f, x, tspec)
        else:
            out[idx] = riesz_maximal(lams, i, f, x, eps, tspec, shells)
    return out


def _far_values(name, lams, rule, axes, tspec, t_floor, i):
    kappa = sum(lam + 0.5 for lam in lams)
    if name == "maximal":
        t = _grid_times(tspec, t_floor, 26)
        v = np.abs(_batch_values(lams, rule, axes, t, "heat"))
        k = np.argmax(v, axis=0)
        best = np.take_along_axis(v, k[None], 0)[0]
        inner = (k > 0) & (k < len(t) - 1)
        km, kp = np.clip(k - 1, 0, len(t) - 1), np.clip(k + 1, 0, len(t) - 1)
        a = np.take_along_axis(v, km[None], 0)[0]
        c = np.take_along_axis(v, kp[None], 0)[0]
        den = a - 2.0 * best + c
        with np.errstate(divide="ignore", invalid="ignore"):
            peak = best - (c - a) ** 2 / (8.0 * den)
        ok = inner & (den < 0)
        return np.where(ok, np.maximum(peak, best), best)
    per_decade = max(1, int(math.ceil(tspec.points_per_decade / 8.0)))
    lo = math.log(max(tspec.t_min, t_floor))
    u_hi = math.log(tspec.t_max)
    if name == "g_function":
        u, wu = log_time_rule(lo, u_hi, math.log(10.0) / per_decade, 8)
        t = np.concatenate([np.exp(u), [tspec.t_max]])
        d = _batch_values(lams, rule, axes, t, "heat_dt")
        h = (t.reshape((-1,) + (1,) * len(axes)) * d) ** 2
        return np.sqrt(np.tensordot(wu, h[:-1], axes=1) + h[-1] / (2.0 * kappa))
    u, wu = log_time_rule(lo, u_hi, math.log(10.0) / (2 * per_decade), 10)
    t = np.concatenate([np.exp(u), [tspec.t_max]])
    d = _batch_values(lams, rule, axes, t, "heat_dx", i)
    h = np.sqrt(t).reshape((-1,) + (1,) * len(axes)) * d
    total = np.tensordot(wu, h[:-1], axes=1) + h[-1] / (kappa + 0.5)
    v = total / SQRT_PI
    return np.abs(v) if name == "riesz_maximal" else v
