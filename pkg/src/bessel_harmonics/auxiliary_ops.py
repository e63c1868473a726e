"""Hardy-type and local auxiliary operators on (0, inf)^k.

Every operator integrates ``g`` over a box whose edges depend on ``x``.  For
a :class:`SourceFunction` the box is covered by composite Gauss-Legendre
panels that break at the box edges, the support edges and the source
resolution, so piecewise-smooth sources are integrated to rounding error.
A :class:`GridFunction` is integrated on its own nodes with the box imposed
by masking.
"""
import math

import numpy as np

from .errors import ContractError, DomainError
from .measure_grid import GridFunction, panel_rule
from .operators import DEFAULT_SPEC, SourceFunction, _axis_edges, _golden

ORDER = 12


def _alphas(alpha, k, strict=True):
    a = tuple(float(v) for v in np.atleast_1d(alpha))
    if len(a) == 1 and k > 1:
        a = a * k
    if len(a) != k:
        raise ContractError(f"need {k} alpha values, got {len(a)}")
    if strict and any(not v > -0.5 for v in a):
        raise DomainError("alpha values must satisfy alpha > -1/2")
    return a


def _dim(g):
    if isinstance(g, GridFunction):
        return g.grid.n
    if isinstance(g, SourceFunction):
        return g.n
    raise ContractError("g must be a GridFunction or a SourceFunction")


def _point(x, k):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape != (k,):
        raise ContractError(f"point must have {k} coordinates")
    if np.any(~(x > 0)):
        raise DomainError("points must lie in (0, inf)^k")
    return x


def _interval(a, b, g, j, power, extra=()):
    """Nodes and weights of y^power dy on [a, b] intersected with the support of g on axis j."""
    lo, hi = g.support[j]
    a, b = max(a, lo), min(b, hi)
    if not b > a:
        return np.zeros(0), np.zeros(0)
    if not np.isfinite(b):
        raise ContractError("integration to infinity needs a compactly supported source")
    edges = [a, b, *(e for e in extra if a < e < b)]
    res = g.resolution[j] / 4.0
    edges.extend(np.linspace(a, b, int(math.ceil((b - a) / res)) + 1))
    if a > 0:
        edges.extend(np.geomspace(a, b, int(math.ceil(math.log2(b / a))) + 1))
    e = np.unique(np.asarray(edges))
    e = e[np.concatenate([[True], np.diff(e) > 1e-14 * b])]
    e[-1] = b
    return panel_rule(e, ORDER, power / 2.0)


def _box_integral(g, boxes, powers, factor=None):
    """int over prod_j boxes[j] of g(y) factor(y) prod_j y_j^{powers[j]} dy."""
    if isinstance(g, GridFunction):
        mesh = g.grid.mesh()
        w = np.ones(g.grid.shape)
        for j, ((a, b), p) in enumerate(zip(boxes, powers)):
            y = g.grid.nodes[j]
            wj = g.grid.weights[j] * y ** (p - 2.0 * g.grid.lambdas[j])
            wj = np.where((y > a) & (y < b), wj, 0.0)
            shape = [1] * g.grid.n
            shape[j] = len(y)
            w = w * wj.reshape(shape)
        vals = g.values * w
        if factor is not None:
            vals = vals * factor(mesh)
        return float(np.sum(vals))
    nodes, weights = [], []
    for j, ((a, b), p) in enumerate(zip(boxes, powers)):
        y, w = _interval(a, b, g, j, p)
        if y.size == 0:
            return 0.0
        nodes.append(y)
        weights.append(w)
    mesh = np.stack(np.meshgrid(*nodes, indexing="ij"), axis=-1)
    vals = g(mesh)
    if factor is not None:
        vals = vals * factor(mesh)
    for w in reversed(weights):
        vals = np.sum(vals * w, axis=-1)
    return float(vals)


def hardy_infinity(alpha, g, x):
    """int_{x_1}^inf ... int_{x_k}^inf g(y) / (y_1 ... y_k) dy."""
    k = _dim(g)
    _alphas(alpha, k)
    x = _point(x, k)
    return _box_integral(g, [(xj, np.inf) for xj in x], [-1.0] * k)


def l_operator(alpha, g, x):
    """(sum x_j)^{-2 sum(alpha_j + 1/2)} int_0^{x_1} ... int_0^{x_k} g(y) prod y_j^{2 alpha_j} dy."""
    k = _dim(g)
    a = _alphas(alpha, k)
    x = _point(x, k)
    expo = 2.0 * sum(v + 0.5 for v in a)
    inner = _box_integral(g, [(0.0, xj) for xj in x], [2.0 * v for v in a])
    return inner / float(np.sum(x)) ** expo


def hardy_local(alpha, g, x):
    """prod x_j^{-2 alpha_j - 1} int_{x_j/2}^{2 x_j} g(y) prod y_j^{2 alpha_j} dy; any real alpha."""
    k = _dim(g)
    a = _alphas(alpha, k, strict=False)
    x = _point(x, k)
    inner = _box_integral(g, [(xj / 2.0, 2.0 * xj) for xj in x], [2.0 * v for v in a])
    return inner / float(np.prod(x ** (2.0 * np.asarray(a) + 1.0)))


def _gauss_rows(t, xj, y):
    d = xj - y[None, :]
    return np.exp(-d * d / (4.0 * t[:, None])) / (2.0 * np.sqrt(math.pi * t[:, None]))


def local_gaussian_maximal(alpha, g, x, tspec=DEFAULT_SPEC):
    """sup_t |int over prod (x_j/2, 2x_j) of prod (x_j y_j)^{-alpha_j} G_t(x_j, y_j) g(y) prod y_j^{2 alpha_j} dy|.

    G_t is the 1-d Gaussian kernel; the sup runs over a log grid in t with
    golden-section refinement, as for the semigroup maximal operator.
    """
    k = _dim(g)
    if not isinstance(g, SourceFunction):
        raise ContractError("local_gaussian_maximal needs a SourceFunction")
    a = np.asarray(_alphas(alpha, k))
    x = _point(x, k)

    def values(t):
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.zeros(t.size)
        dec = np.floor(np.log10(t) + 1e-12)
        for d in np.unique(dec):
            sel = dec == d
            ts = t[sel]
            s_min, extent = 0.5 * math.sqrt(ts.min()), 40.0 * math.sqrt(ts.max())
            nodes, weights = [], []
            for j in range(k):
                lo = max(x[j] / 2.0, g.support[j, 0])
                hi = min(2.0 * x[j], g.support[j, 1])
                e = _axis_edges(x[j], lo, hi, s_min, extent, g.resolution[j]) if hi > lo else None
                if e is None:
                    break
                y, w = panel_rule(e, ORDER, a[j])
                nodes.append(y)
                weights.append(w * (x[j] * y) ** (-a[j]))
            else:
                mesh = np.stack(np.meshgrid(*nodes, indexing="ij"), axis=-1)
                amp = g(mesh)
                for j, w in enumerate(weights):
                    shape = [1] * k
                    shape[j] = len(w)
                    amp = amp * w.reshape(shape)
                rows = [_gauss_rows(ts, x[j], nodes[j]) for j in range(k)]
                v = np.tensordot(rows[-1], amp, axes=([1], [k - 1]))
                v = np.moveaxis(v, 0, -1)
                for j in range(k - 2, -1, -1):
                    v = np.sum(v * rows[j].T.reshape((1,) * j + rows[j].T.shape), axis=j)
                out[sel] = v
        return out

    decades = math.log10(tspec.t_max / tspec.t_min)
    count = max(3, int(round(decades * tspec.points_per_decade)) + 1)
    grid = np.geomspace(tspec.t_min, tspec.t_max, count)
    vals = np.abs(values(grid))
    i = int(np.argmax(vals))
    if vals[i] == 0.0:
        return 0.0
    best, _ = _golden(lambda t: abs(float(values(t)[0])), grid[max(i - 1, 0)], grid[min(i + 1, count - 1)], 1e-8)
    return float(max(best, vals[i]))


def h_lk(alpha, l, k, g, x, variant="display"):
    """Mixed Lower/Local operator with inverse power eps = sum_{j<=l}(alpha_j + 1/2) + (k - l)/2.

    y_j runs over (0, x_j/2) for j <= l and (x_j/2, 2x_j) for j > l; the
    Local axes carry (x_j y_j)^{-alpha_j}.  ``variant="display"`` divides by
    (sum_j (x_j - y_j)^2)^eps; ``variant="lower_sq"`` replaces the Lower
    terms (x_j - y_j)^2 by x_j^2.
    """
    if not (isinstance(l, int) and isinstance(k, int) and 1 <= l <= k):
        raise ContractError("need integers 1 <= l <= k")
    if _dim(g) != k:
        raise ContractError("g must live on (0, inf)^k")
    if variant not in ("display", "lower_sq"):
        raise ContractError("variant must be 'display' or 'lower_sq'")
    a = np.asarray(_alphas(alpha, k))
    x = _point(x, k)
    eps = float(np.sum(a[:l] + 0.5)) + (k - l) / 2.0
    boxes = [(0.0, x[j] / 2.0) if j < l else (x[j] / 2.0, 2.0 * x[j]) for j in range(k)]

    def factor(y):
        d = (x - y) ** 2
        if variant == "lower_sq":
            d[..., :l] = x[:l] ** 2
        local = np.prod((x[l:] * y[..., l:]) ** (-a[l:]), axis=-1)
        return local / np.sum(d, axis=-1) ** eps

    return _box_integral(g, boxes, list(2.0 * a), factor)
