"""Tensor quadrature grids for the weighted measure prod_j x_j^{2 lam_j} dx on
(0, inf)^n, grid functions, L^p norms and distribution functions.

Each axis is a union of composite Gauss-Legendre panels whose weights absorb
the factor x^{2 lam}.  A panel that starts at 0 uses a Gauss-Jacobi rule so
that the singular weight is integrated exactly.
"""
import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import ContractError, DomainError


@lru_cache(maxsize=None)
def gauss_legendre(order):
    return np.polynomial.legendre.leggauss(order)


@lru_cache(maxsize=None)
def gauss_jacobi(order, beta):
    """Nodes/weights on [-1, 1] for the weight (1 + s)^beta."""
    s, w = roots_jacobi(order, 0.0, beta)
    return s, w


def panel_rule(edges, order, lam=0.0):
    """Composite rule on consecutive ``edges`` for the measure x^{2 lam} dx."""
    edges = np.asarray(edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise DomainError("panel edges must be strictly increasing")
    if edges[0] < 0:
        raise DomainError("panel edges must be nonnegative")
    s, w = gauss_legendre(order)
    a = edges[:-1, None]
    b = edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * s
    weights = 0.5 * (b - a) * w * nodes ** (2.0 * lam)
    if edges[0] == 0.0:
        sj, wj = gauss_jacobi(order, 2.0 * lam)
        h = edges[1]
        nodes[0] = 0.5 * h * (1.0 + sj)
        weights[0] = wj * (0.5 * h) ** (2.0 * lam + 1.0)
    return nodes.ravel(), weights.ravel()


def geometric_edges(a, b, panels):
    return np.geomspace(a, b, panels + 1)


@dataclass(frozen=True)
class TensorGrid:
    """Per-axis nodes and weights; weights include x_j^{2 lam_j}."""

    nodes: tuple
    weights: tuple
    lambdas: tuple

    @property
    def n(self):
        return len(self.nodes)

    @property
    def shape(self):
        return tuple(len(x) for x in self.nodes)

    def mesh(self):
        """Array of shape (*shape, n) with the coordinates of every node."""
        return np.stack(np.meshgrid(*self.nodes, indexing="ij"), axis=-1)

    def weight_tensor(self):
        w = np.ones(())
        for wj in self.weights:
            w = np.multiply.outer(w, wj)
        return w

    def sample(self, func):
        """GridFunction from a vectorised callable on points of shape (..., n)."""
        return GridFunction(self, np.asarray(func(self.mesh()), dtype=np.float64))


def _axis_spans(n, span):
    span = np.asarray(span, dtype=np.float64)
    if span.ndim == 1:
        span = np.tile(span, (n, 1))
    if span.shape != (n, 2):
        raise ContractError("span must be (a, b) or one (a, b) per axis")
    return span


def make_grid(n, span, panels, order, lambdas, origin=False, edges=None):
    """Geometrically graded composite Gauss-Legendre grid on prod_j [a_j, b_j].

    With ``origin=True`` an extra Gauss-Jacobi panel covers [0, a_j].  Explicit
    per-axis ``edges`` override ``span`` and ``panels``.
    """
    lams = tuple(float(v) for v in np.atleast_1d(lambdas))
    if len(lams) == 1 and n > 1:
        lams = lams * n
    if len(lams) != n:
        raise ContractError("lambda vector length must equal the dimension")
    if not 4 <= order <= 16:
        raise DomainError("rule order must lie in 4..16")
    nodes, weights = [], []
    if edges is None:
        span = _axis_spans(n, span)
        if panels < 1:
            raise DomainError("need at least one panel")
        if np.any(span[:, 0] <= 0) or np.any(span[:, 1] <= span[:, 0]):
            raise DomainError("span must satisfy 0 < a < b")
        edges = [geometric_edges(a, b, panels) for a, b in span]
        if origin:
            edges = [np.concatenate([[0.0], e]) for e in edges]
    for e, lam in zip(edges, lams):
        x, w = panel_rule(e, order, lam)
        nodes.append(x)
        weights.append(w)
    return TensorGrid(tuple(nodes), tuple(weights), lams)


@dataclass(frozen=True)
class GridFunction:
    grid: TensorGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ContractError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ContractError("grid function values must be finite")

    def to_csv(self, path):
        write_grid_csv(path, self.grid.nodes, self.values)


@dataclass(frozen=True)
class DistributionProfile:
    gammas: np.ndarray
    measures: np.ndarray

    def rows(self):
        return [(float(g), float(m), float(g * m)) for g, m in zip(self.gammas, self.measures)]


def _check_lambdas(f, lambdas):
    if lambdas is None:
        return
    lams = tuple(float(v) for v in np.atleast_1d(lambdas))
    if len(lams) == 1 and f.grid.n > 1:
        lams = lams * f.grid.n
    if not np.allclose(lams, f.grid.lambdas, rtol=0, atol=1e-15):
        raise ContractError("grid was built for a different lambda vector")


def _contract(values, grid):
    v = values
    for wj in reversed(grid.weights):
        v = np.sum(v * wj, axis=-1)
    return float(v)


def weighted_integral(f, lambdas=None):
    """Tensor quadrature of f against prod y_j^{2 lam_j} dy."""
    _check_lambdas(f, lambdas)
    return _contract(f.values, f.grid)


def lp_norm(f, p, lambdas=None):
    if not p >= 1:
        raise DomainError("p must be >= 1")
    _check_lambdas(f, lambdas)
    return _contract(np.abs(f.values) ** p, f.grid) ** (1.0 / p)


def distribution_measure(f, gamma, lambdas=None):
    """m_lambda{|f| > gamma} from the weights at the sampled indicator."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    _check_lambdas(f, lambdas)
    return _contract((np.abs(f.values) > gamma).astype(np.float64), f.grid)


def distribution_profile(values, weights, gammas):
    """Profile of |values| against flat ``weights`` on a decreasing gamma grid."""
    a = np.abs(np.ravel(values))
    w = np.ravel(weights)
    order = np.argsort(a, kind="stable")
    a, w = a[order], w[order]
    tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    idx = np.searchsorted(a, gammas, side="right")
    return tail[idx]


def weak_quasinorm(values, weights):
    """Exact sup_gamma gamma * m{|f| > gamma} for a sampled step function."""
    a = np.abs(np.ravel(values))
    w = np.ravel(weights)
    order = np.argsort(a, kind="stable")
    a, w = a[order], w[order]
    tail = np.cumsum(w[::-1])[::-1]
    # for gamma just below a[k], the set {|f| > gamma} holds every node with |f| >= a[k]
    first = np.searchsorted(a, a, side="left")
    return float(np.max(a * tail[first])) if a.size else 0.0


def default_gammas(values, count=64):
    a = np.abs(np.ravel(values))
    a = a[a > 0]
    if a.size == 0:
        return np.array([1.0])
    # levels far below the peak contribute nothing visible to gamma * m
    return np.geomspace(a.max(), max(a.min(), 1e-16 * a.max()), count)


def weak_l1(f, lambdas=None, gammas=None):
    """Distribution profile of f and sup_gamma gamma * m{|f| > gamma}.

    Without a gamma grid the supremum is exact for the sampled function;
    with one it is the maximum over that grid.
    """
    _check_lambdas(f, lambdas)
    w = f.grid.weight_tensor()
    if gammas is None:
        sup = weak_quasinorm(f.values, w)
        gammas = default_gammas(f.values)
    else:
        gammas = np.sort(np.asarray(gammas, dtype=np.float64))[::-1]
        if np.any(gammas <= 0):
            raise DomainError("gamma values must be positive")
        sup = None
    measures = distribution_profile(f.values, w, gammas)
    if sup is None:
        sup = float(np.max(gammas * measures))
    return DistributionProfile(gammas, measures), sup


def write_grid_csv(path, nodes, values):
    n = len(nodes)
    mesh = np.stack(np.meshgrid(*nodes, indexing="ij"), axis=-1).reshape(-1, n)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"axis{j}" for j in range(n)] + ["value"])
        for pt, v in zip(mesh, np.ravel(values)):
            w.writerow([repr(float(c)) for c in pt] + [repr(float(v))])


def read_grid_csv(path):
    """Return (per-axis nodes, values tensor) from a GridFunction CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=np.float64)
    n = len(header) - 1
    nodes = tuple(np.unique(body[:, j]) for j in range(n))
    values = body[:, n].reshape(tuple(len(x) for x in nodes))
    return nodes, values


def integrate_weighted_1d(func, lam, edges, rtol=1e-12, atol=0.0, order=12, max_panels=200000):
    """Adaptive integral of func(y) y^{2 lam} dy over [edges[0], edges[-1]].

    Panels are bisected until one rule on the panel and the same rule on its
    two halves agree; the halves' sum is kept.  ``edges`` act as breakpoints.
    """
    panels = np.column_stack([edges[:-1], edges[1:]]).astype(np.float64)
    done = []
    total_scale = 0.0

    def rule(p):
        a, b = p[:, 0], p[:, 1]
        out_x = np.empty((len(p), order))
        out_w = np.empty((len(p), order))
        s, w = gauss_legendre(order)
        out_x[:] = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * s
        out_w[:] = 0.5 * (b - a)[:, None] * w * out_x ** (2.0 * lam)
        zero = a == 0.0
        if np.any(zero):
            sj, wj = gauss_jacobi(order, 2.0 * lam)
            h = b[zero][:, None]
            out_x[zero] = 0.5 * h * (1.0 + sj)
            out_w[zero] = wj * (0.5 * h) ** (2.0 * lam + 1.0)
        return out_x, out_w

    while len(panels):
        if len(panels) + len(done) > max_panels:
            raise RuntimeError("adaptive quadrature exceeded the panel budget")
        mid = 0.5 * (panels[:, 0] + panels[:, 1])
        halves = np.concatenate([np.column_stack([panels[:, 0], mid]), np.column_stack([mid, panels[:, 1]])])
        x0, w0 = rule(panels)
        x1, w1 = rule(halves)
        f0 = func(x0)
        f1 = func(x1)
        coarse = np.sum(f0 * w0, axis=1)
        fine_h = np.sum(f1 * w1, axis=1)
        m = len(panels)
        fine = fine_h[:m] + fine_h[m:]
        absval = np.sum(np.abs(f1 * w1), axis=1)
        total_scale = max(total_scale, float(np.sum(absval[:m] + absval[m:])) + sum(s for _, _, s in done))
        err = np.abs(fine - coarse)
        width = panels[:, 1] - panels[:, 0]
        span = edges[-1] - edges[0]
        tol = np.maximum(rtol * total_scale, atol) * np.maximum(width / span, 1e-3)
        ok = (err <= tol) | (width <= 1e-14 * np.maximum(1.0, np.abs(panels[:, 1])))
        for p, v, s in zip(panels[ok], fine[ok], (absval[:m] + absval[m:])[ok]):
            done.append((p[0], v, s))
        bad = ~ok
        panels = np.concatenate([halves[:m][bad], halves[m:][bad]])
    done.sort(key=lambda r: r[0])
    return math.fsum(v for _, v, _ in done)
