"""Catalogue of pointwise kernel inequalities with empirical constants, and
weak-type, strong-type and pointwise-convergence experiments.

Every inequality is homogeneous: both sides scale the same way under
(t, x, y) -> (c^2 t, c x, c y).  The ratio LHS/RHS therefore depends only on
X = x/sqrt(t) and Y = y/sqrt(t), and a log lattice over a (t, x, y) box maps
onto a log lattice in (X, Y) at t = 1.  Sampling that image is equivalent to
sampling the box itself, at a fraction of the cost.  Bounds that integrate
over t depend only on y/x.
"""
import json
from concurrent.futures import ThreadPoolExecutor
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import _backend
from .auxiliary_ops import h_lk, l_operator
from .bessel_kernel import check_lambda, check_lambdas, kernel_gaussian_gap_dt
from .errors import ContractError, DomainError
from .measure_grid import DistributionProfile, default_gammas, distribution_profile, weak_quasinorm
from .operators import (COARSE_SHELLS, DEFAULT_SPEC, QuadratureSpec, SourceFunction, _bump,
                        _refined_integral, apply_semigroup, bump_source, evaluate_on_grid)

ESTIMATE_IDS = ("A0", "A1", "A2", "A3", "A4", "A5", "A6", "B3_5", "B8", "B9", "B10", "B11", "B12", "B13",
                "B14", "B15", "Z", "X1", "X2", "C14", "C15", "LEMMA5_LOWER", "LEMMA5_UPPER")


# ------------------------------------------------ log-space sides at t = 1


def _parts(lam, x, y):
    return _backend.kernel_parts(lam, np.ones_like(x), x, y)


def _log_abs(a):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(a))


def _lhs_w(lam, x, y):
    return _parts(lam, x, y)[0]


def _lhs_wt(lam, x, y):
    logw, bt, _ = _parts(lam, x, y)
    return logw + _log_abs(bt)


def _lhs_wx(lam, x, y):
    logw, _, bx = _parts(lam, x, y)
    return logw + _log_abs(bx)


def _log_gap_base(lam, x, y):
    # log of (xy)^{-lam} e^{-(x-y)^2/4} / (2 sqrt pi), kept in log space so far-off-diagonal
    # samples do not underflow
    return -lam * np.log(x * y) - (x - y) ** 2 / 4.0 - math.log(2.0 * math.sqrt(math.pi))


def _lhs_gap(lam, x, y):
    defect = _backend.scaled_defect(lam - 0.5, x * y / 2.0)
    return _log_gap_base(lam, x, y) + _log_abs(defect)


def _lhs_gap_t(lam, x, y):
    z = x * y / 2.0
    defect = _backend.scaled_defect(lam - 0.5, z)
    q = _backend.ratio_defect(lam - 0.5, z)
    bt = (x - y) ** 2 / 4.0 - (lam + 0.5) + z * q
    return _log_gap_base(lam, x, y) + _log_abs(defect * bt + (z * q - lam))


def _lhs_gauss_t(lam, x, y):
    # d/dt (e^{-d^2/4t} / sqrt t) at t = 1
    d2 = (x - y) ** 2
    return -d2 / 4.0 + _log_abs(d2 / 4.0 - 0.5)


def _lhs_lead_gap(lam, x, y):
    from .bessel_kernel import heat_kernel_limit_defect

    lead = -2.0 * lam * math.log(2.0) - math.lgamma(lam + 0.5)
    return lead + _log_abs(heat_kernel_limit_defect(lam, np.ones_like(x), x, y))


def _logsum(a, b):
    return np.logaddexp(a, b)


_RHS = {
    "A0": lambda lam, x, y: (-2 * lam - 1) * np.log(y),
    "A1": lambda lam, x, y: -x * x / 20.0,
    "A2": lambda lam, x, y: -x * x / 4.0,
    "A3": lambda lam, x, y: -x * x / 20.0,
    "A4": lambda lam, x, y: -lam * np.log(x * y) - (x - y) ** 2 / 4.0,
    "A5": lambda lam, x, y: (-2 * lam - 1) * np.log(x),
    "A6": lambda lam, x, y: _logsum(-lam * np.log(x * y) - (x - y) ** 2 / 4.0, (-2 * lam - 1) * np.log(x)),
    "B3_5": lambda lam, x, y: -(x - y) ** 2 / 8.0,
    "B8": lambda lam, x, y: -lam * np.log(x * y) + 2.0 * np.log(x) - x * x / 16.0,
    "B9": lambda lam, x, y: -(x * x + y * y) / 8.0,
    "B10": lambda lam, x, y: -x * x / 20.0,
    "B11": lambda lam, x, y: (-lam - 1) * np.log(x * y) - (x - y) ** 2 / 8.0,
    "B12": lambda lam, x, y: -(x - y) ** 2 / 8.0,
    "B14": lambda lam, x, y: _logsum(np.zeros_like(x), -lam * np.log(x * y)) - (x * x + y * y) / 4.0,
    "B15": lambda lam, x, y: (-lam - 1) * np.log(x * y) - (x - y) ** 2 / 4.0,
    "Z": lambda lam, x, y: np.log(x * x + y * y) + np.log1p(x * y),
    "X1": lambda lam, x, y: np.log(x + y) - (x * x + y * y) / 4.0,
    "X2": lambda lam, x, y: -lam * np.log(x * y) - (x - y) ** 2 / 8.0,
    "C14": lambda lam, x, y: -x * x / 40.0,
    "C15": lambda lam, x, y: -y * y / 40.0,
}

_LHS = {
    "A0": _lhs_w, "A1": _lhs_w, "A2": _lhs_w, "A3": _lhs_w, "A4": _lhs_w, "A5": _lhs_w, "A6": _lhs_w,
    "B3_5": _lhs_gauss_t, "B8": _lhs_wt, "B9": _lhs_wt, "B10": _lhs_wt, "B11": _lhs_gap_t, "B12": _lhs_wt,
    "B14": _lhs_gap, "B15": _lhs_gap, "Z": _lhs_lead_gap,
    "X1": _lhs_wx, "X2": _lhs_wx, "C14": _lhs_wx, "C15": _lhs_wx,
}

# domains at t = 1
_DOMAIN = {
    "A0": lambda x, y: 2 * x < y,
    "A1": lambda x, y: (y < x / 2) & (x * y >= 1),
    "A2": lambda x, y: x * y <= 1,
    "A3": lambda x, y: y < x / 2,
    "A4": lambda x, y: x * y >= 1,
    "A5": lambda x, y: x * y <= 1,
    "A6": lambda x, y: np.ones(np.shape(x), dtype=bool),
    "B3_5": lambda x, y: np.ones(np.shape(x), dtype=bool),
    "B8": lambda x, y: (y < x / 2) & (x * y > 1),
    "B9": lambda x, y: (y < x / 2) & (x * y <= 1),
    "B10": lambda x, y: y < x / 2,
    "B11": lambda x, y: x * y >= 1,
    "B12": lambda x, y: x * y < 1,
    "B14": lambda x, y: x * y <= 1,
    "B15": lambda x, y: x * y > 1,
    "Z": lambda x, y: np.ones(np.shape(x), dtype=bool),
    "X1": lambda x, y: x * y <= 1,
    "X2": lambda x, y: x * y >= 1,
    "C14": lambda x, y: y < x / 2,
    "C15": lambda x, y: 2 * x < y,
}

# bounds integrated over t: domain in r = y/x, and log RHS at x = 1
_RATIO_DOMAIN = {
    "B13": lambda r: (r > 0.5) & (r < 2.0),
    "LEMMA5_LOWER": lambda r: r < 0.5,
    "LEMMA5_UPPER": lambda r: r > 2.0,
}
_RATIO_RHS = {
    "B13": lambda lam, r: np.zeros_like(r),
    "LEMMA5_LOWER": lambda lam, r: np.zeros_like(r),
    "LEMMA5_UPPER": lambda lam, r: (-2 * lam - 2) * np.log(r),
}


def domain_mask(eid, t, x, y):
    """True where (t, x, y) lies in the validity domain of ``eid``."""
    t, x, y = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (t, x, y)))
    if eid in _DOMAIN:
        s = np.sqrt(t)
        return _DOMAIN[eid](x / s, y / s)
    if eid in _RATIO_DOMAIN:
        return _RATIO_DOMAIN[eid](y / x)
    raise ContractError(f"unknown estimate id {eid!r}")


def log_ratio(eid, lam, t, x, y):
    """log(LHS/RHS) at the given samples (no domain check)."""
    lam = check_lambda(lam)
    t, x, y = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (t, x, y)))
    if eid in _LHS:
        s = np.sqrt(t)
        X, Y = x / s, y / s
        return _LHS[eid](lam, X, Y) - _RHS[eid](lam, X, Y)
    if eid in _RATIO_DOMAIN:
        r = y / x
        return _integrated_lhs(eid, lam, r) - _RATIO_RHS[eid](lam, r)
    raise ContractError(f"unknown estimate id {eid!r}")


def _integrated_lhs(eid, lam, r, rtol=1e-7):
    """log of the t-integrated left side at x = 1, y = r."""
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    if eid == "B13":
        def integrand(t, idx):
            tt, yy = np.broadcast_arrays(t[:, None], r[idx][None, :])
            g = kernel_gaussian_gap_dt(lam, tt, np.ones_like(tt), yy)
            return tt * tt * g * g  # t |.|^2 dt = t^2 |.|^2 du

        kappa = min(1.0, 2.0 * lam + 1.0)
    else:
        return np.log([_lemma5_column(lam, rj, rtol) for rj in r])
    d2 = float(np.min((1.0 - r) ** 2)) / 4.0
    top = max(1.0, float(np.max(r * r)))
    u_lo = math.log(min(d2, 1.0) if d2 > 0 else 1.0) - 12.0
    u_hi = math.log(top) + 40.0 / min(kappa, 1.0)
    val = _refined_integral(integrand, u_lo, u_hi, kappa, [0.0, math.log(top)], r.size, rtol, 10)
    return 0.5 * np.log(val)


def _lemma5_column(lam, r, rtol):
    """int_0^inf |dW/dx(t, 1, r)| t^{-1/2} dt, with the rule broken at the sign changes of dW/dx."""
    kappa = lam + 1.0
    d2 = (1.0 - r) ** 2 / 4.0
    top = max(1.0, r * r)
    u_lo = math.log(min(d2, 1.0)) - 12.0
    u_hi = math.log(top) + 40.0 / kappa

    def bx(u):
        t = np.exp(np.atleast_1d(u))
        return _backend.kernel_parts(lam, t, np.ones_like(t), np.full_like(t, r))[2]

    u = np.linspace(u_lo, u_hi, int((u_hi - u_lo) / 0.02) + 2)
    b = bx(u)
    roots = [brentq(lambda v: float(bx(v)[0]), u[k], u[k + 1], xtol=1e-13)
             for k in np.nonzero(np.sign(b[:-1]) * np.sign(b[1:]) < 0)[0]]

    def integrand(t, idx):
        logw, _, g = _backend.kernel_parts(lam, t, np.ones_like(t), np.full_like(t, r))
        return (np.sqrt(t) * np.exp(logw) * np.abs(g))[:, None]

    return float(_refined_integral(integrand, u_lo, u_hi, kappa, [0.0, math.log(top), *roots], 1, rtol, 10)[0])


# ------------------------------------------------------------- reports


@dataclass(frozen=True)
class SampleSpec:
    """Log lattice with ``points_per_decade`` per variable over [lo, hi]^3 in (t, x, y)."""

    points_per_decade: int = 64
    lo: float = 1e-3
    hi: float = 1e3

    def __post_init__(self):
        if self.points_per_decade < 2 or not (0 < self.lo < self.hi):
            raise DomainError("need points_per_decade >= 2 and 0 < lo < hi")


@dataclass
class EstimateReport:
    id: str
    lam: float
    samples: int
    sup_ratio: float
    argmax: tuple
    drift: float
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return math.isfinite(self.sup_ratio) and not self.failures

    def to_dict(self):
        return {"id": self.id, "lambda": self.lam, "samples": self.samples, "sup_ratio": self.sup_ratio,
                "argmax": list(self.argmax), "drift": self.drift}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _lattice(spec, ppd):
    """Reduced points X = x/sqrt(t) reachable from the (t, x, y) box, and the sqrt(t) range."""
    a, b = math.log10(spec.lo), math.log10(spec.hi)
    step = 1.0 / (2 * ppd)
    k = np.arange(int(round((1.5 * (b - a)) / step)) + 1)
    logs = (a - b / 2.0) + k * step  # log10 X from lo/sqrt(hi) to hi/sqrt(lo)
    return logs


def _feasible(lx, ly, spec):
    """Some t in [lo, hi] puts both x and y in [lo, hi]."""
    a, b = math.log10(spec.lo), math.log10(spec.hi)
    s_lo = np.maximum(a / 2.0, a - np.minimum(lx, ly))
    s_hi = np.minimum(b / 2.0, b - np.maximum(lx, ly))
    return s_lo <= s_hi + 1e-12, s_lo, s_hi


def _chunk_sup(eid, lam, spec, logs, rows):
    lx, ly = np.meshgrid(rows, logs, indexing="ij")
    ok, s_lo, s_hi = _feasible(lx, ly, spec)
    X, Y = 10.0 ** lx, 10.0 ** ly
    ok &= _DOMAIN[eid](X, Y)
    if not np.any(ok):
        return -np.inf, None, 0, []
    X, Y, s_lo, s_hi = X[ok], Y[ok], s_lo[ok], s_hi[ok]
    with np.errstate(over="ignore", invalid="ignore"):
        lr = _LHS[eid](lam, X, Y) - _RHS[eid](lam, X, Y)
    bad = np.isnan(lr) | (lr == np.inf)
    failures = [(1.0, float(X[k]), float(Y[k])) for k in np.nonzero(bad)[0][:10]]
    lr = np.where(bad, -np.inf, lr)
    j = int(np.argmax(lr))
    # map back into the box with log10 sqrt(t) as close to 0 as allowed
    s = 10.0 ** min(max(0.0, s_lo[j]), s_hi[j])
    return float(lr[j]), (s * s, float(X[j]) * s, float(Y[j]) * s), lr.size, failures


def _sup_pointwise(eid, lam, spec, ppd, chunk=128):
    logs = _lattice(spec, ppd)
    pieces = [logs[i:i + chunk] for i in range(0, logs.size, chunk)]
    work = lambda rows: _chunk_sup(eid, lam, spec, logs, rows)  # noqa: E731
    threads = _backend.max_threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, pieces))
    else:
        results = [work(p) for p in pieces]
    best, arg, count, failures = -np.inf, None, 0, []
    for b, a, c, f in results:  # fixed order keeps ties deterministic
        count += c
        failures.extend(f)
        if b > best:
            best, arg = b, a
    return best, arg, count, failures


def _sup_integrated(eid, lam, spec, ppd):
    a, b = math.log10(spec.lo), math.log10(spec.hi)
    span = b - a
    lr_ = np.arange(-span * ppd, span * ppd + 1) / ppd
    r = 10.0 ** lr_
    r = r[_RATIO_DOMAIN[eid](r)]
    vals = _integrated_lhs(eid, lam, r) - _RATIO_RHS[eid](lam, r)
    j = int(np.argmax(vals))
    bad = ~np.isfinite(vals)
    failures = [(1.0, float(v)) for v in r[bad]]
    return float(vals[j]), (1.0, 1.0, float(r[j])), r.size, failures


def verify_estimate(eid, lam, spec=SampleSpec(), samples=None):
    """Empirical constant sup LHS/RHS over the estimate's domain.

    The sup is taken at ``spec.points_per_decade`` and again at double the
    density; ``drift`` is their relative difference.  Explicit ``samples``
    (t, x, y) are checked against the domain and evaluated as given.
    """
    if eid not in ESTIMATE_IDS:
        raise ContractError(f"unknown estimate id {eid!r}; expected one of {ESTIMATE_IDS}")
    lam = check_lambda(lam)
    if samples is not None:
        t, x, y = (np.asarray(a, dtype=np.float64).ravel() for a in samples)
        if not np.all(domain_mask(eid, t, x, y)):
            raise ContractError(f"samples lie outside the domain of {eid}")
        lr = log_ratio(eid, lam, t, x, y)
        bad = ~np.isfinite(lr) & ~(lr == -np.inf)
        j = int(np.argmax(np.where(bad, np.inf, lr)))
        return EstimateReport(eid, lam, int(t.size), float(np.exp(lr[j])) if not bad.any() else math.inf,
                              (float(t[j]), float(x[j]), float(y[j])), 0.0,
                              [(float(t[k]), float(x[k]), float(y[k])) for k in np.nonzero(bad)[0]])
    runner = _sup_integrated if eid in _RATIO_DOMAIN else _sup_pointwise
    b1, a1, n1, f1 = runner(eid, lam, spec, spec.points_per_decade)
    b2, a2, n2, f2 = runner(eid, lam, spec, 2 * spec.points_per_decade)
    s1, s2 = math.exp(b1), math.exp(b2)
    drift = abs(s2 - s1) / s2 if s2 > 0 else 0.0
    return EstimateReport(eid, lam, n2, s2, a2, drift, f1 + f2)


# ------------------------------------------------------------ experiments


def _axis_cells(c, h, x_max, x_min, inner=0):
    """Cell edges graded geometrically around c from h/2, toward 0 and out to x_max.

    ``inner`` > 0 also splits [c - h, c + h] into that many equal cells.
    """
    e = {0.0, x_max}
    if inner:
        e.update(v for v in np.linspace(c - h, c + h, inner + 1) if v > 0)
    d = h / 2.0
    while c - d > 0 or c + d < x_max:
        if c - d > 0:
            e.add(c - d)
        if c + d < x_max:
            e.add(c + d)
        d *= 2.0
    low = min(v for v in e if v > 0)
    while low > x_min:
        low /= 2.0
        e.add(low)
    e.add(c)
    return np.array(sorted(e))


def _cells(edges, lam):
    a, b = edges[:-1], edges[1:]
    w = (b ** (2 * lam + 1) - a ** (2 * lam + 1)) / (2 * lam + 1)
    return 0.5 * (a + b), w


@dataclass(frozen=True)
class SpikeFamily:
    """Unit-L^1 bumps of width h centred at c = (1,..,1) ("interior") or (h,1,..,1) ("axis")."""

    widths: tuple = (1e-1, 1e-2, 1e-3)
    centers: tuple = ("interior", "axis")

    def center(self, kind, h, n):
        c = np.ones(n)
        if kind == "axis":
            c[0] = h
        elif kind != "interior":
            raise ContractError(f"unknown spike center {kind!r}")
        return c


WEAK_OPERATORS = ("maximal", "g_function", "riesz_maximal", "l_operator", "h_lk")


@dataclass
class WeakTypeReport:
    operator: str
    lam: tuple
    rows: list  # (center, h, quasinorm)
    profiles: list  # (center, h, DistributionProfile)
    ratios: dict  # center -> max/min quasinorm across h

    @property
    def max_ratio(self):
        return max(self.ratios.values())

    def csv_rows(self):
        out = []
        for _, h, prof in self.profiles:
            for g, m, gm in prof.rows():
                out.append((h, g, m, gm))
        return out


def _x_axes(lams, c, h, x_max=100.0, inner=0):
    axes, weights = [], []
    for lam, cj in zip(lams, c):
        e = _axis_cells(cj, h, x_max * max(1.0, cj), min(h, cj) * 1e-3, inner)
        x, w = _cells(e, lam)
        axes.append(x)
        weights.append(w)
    return axes, weights


def _tensor(weights):
    w = np.ones(())
    for wj in weights:
        w = np.multiply.outer(w, wj)
    return w


def _apply_on_cells(name, lams, f, axes, tspec, i, h, shells):
    if name in ("maximal", "g_function"):
        return evaluate_on_grid(name, lams, f, axes, tspec)
    if name == "riesz_maximal":
        return evaluate_on_grid(name, lams, f, axes, tspec, i=i, eps_list=[h / 8.0, h / 4.0, h / 2.0], shells=shells)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    out = np.empty(mesh.shape[:-1])
    for idx in np.ndindex(out.shape):
        if name == "l_operator":
            out[idx] = l_operator(lams, f, mesh[idx])
        else:
            out[idx] = h_lk(lams, 1, len(lams), f, mesh[idx])
    return out


def weak_type_experiment(name, lams, family=SpikeFamily(), gammas=None, tspec=None, i=0, shells=COARSE_SHELLS):
    """sup_gamma gamma m{|T f_h| > gamma} for every spike f_h, and its spread across h.

    T f_h is sampled at the centres of cells graded around the spike; the
    level-set measures use the exact m_lambda mass of each cell.  Far from
    the spike the cells double in size, so a tail decaying like 1/x has its
    quasinorm overstated by up to 4/3; the bias is the same for every h.
    """
    lams = check_lambdas(lams)
    if name not in WEAK_OPERATORS:
        raise ContractError(f"operator must be one of {WEAK_OPERATORS}")
    n = len(lams)
    rows, profiles, ratios = [], [], {}
    for kind in family.centers:
        qs = []
        for h in family.widths:
            c = family.center(kind, h, n)
            f = bump_source(c, h, lams)
            spec = tspec or QuadratureSpec(t_min=min(1e-6, (h / 50.0) ** 2), t_max=1e6)
            axes, weights = _x_axes(lams, c, h)
            vals = _apply_on_cells(name, lams, f, axes, spec, i, h, shells)
            w = _tensor(weights)
            q = weak_quasinorm(vals, w)
            g = default_gammas(vals) if gammas is None else np.sort(np.asarray(gammas, dtype=float))[::-1]
            profiles.append((kind, h, DistributionProfile(g, distribution_profile(vals, w, g))))
            rows.append((kind, h, q))
            qs.append(q)
        ratios[kind] = max(qs) / min(qs)
    return WeakTypeReport(name, lams, rows, profiles, ratios)


STRONG_OPERATORS = ("maximal", "g_function", "riesz_maximal", "semigroup")


@dataclass
class StrongTypeReport:
    operator: str
    p: float
    lam: tuple
    rows: list  # (h, ||Tf||_p / ||f||_p)
    growth: float

    @property
    def flagged(self):
        return self.growth > 0.10


def _bump_lp(f_center, h, lams, p):
    from .measure_grid import integrate_weighted_1d

    total = 1.0
    for cj, lam in zip(f_center, lams):
        a, b = max(cj - h, 0.0), cj + h
        total *= integrate_weighted_1d(lambda y, cj=cj: _bump((y - cj) / h) ** p, lam, np.linspace(a, b, 9), rtol=1e-12)
    return total


def strong_type_experiment(name, p, lams, widths=(0.4, 0.2, 0.1), center=None, tspec=None, i=0, cells=16):
    """||T f_h||_p / ||f_h||_p for bumps of width h, and the relative spread of the ratios.

    Norms use midpoint cells, ``cells`` per axis across the support of f_h.
    """
    lams = check_lambdas(lams)
    if not 1 < p < math.inf:
        raise DomainError("p must lie in (1, inf)")
    if name not in STRONG_OPERATORS:
        raise ContractError(f"operator must be one of {STRONG_OPERATORS}")
    n = len(lams)
    c = np.ones(n) if center is None else np.asarray(center, dtype=float)
    rows = []
    for h in widths:
        f = bump_source(c, h, lams, normalize=False)
        spec = tspec or QuadratureSpec(t_min=(h / 100.0) ** 2)
        axes, weights = _x_axes(lams, c, h, x_max=30.0, inner=cells)
        if name == "semigroup":
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
            vals = np.array([apply_semigroup(lams, spec.t_min, f, x) for x in mesh.reshape(-1, n)]).reshape(mesh.shape[:-1])
        else:
            vals = _apply_on_cells(name, lams, f, axes, spec, i, h, COARSE_SHELLS)
        num = float(np.sum(np.abs(vals) ** p * _tensor(weights))) ** (1.0 / p)
        den = _bump_lp(c, h, lams, p) ** (1.0 / p)
        rows.append((h, num / den))
    r = np.array([v for _, v in rows])
    return StrongTypeReport(name, p, lams, rows, float(r.max() / r.min() - 1.0))


@dataclass
class ConvergenceReport:
    ts: np.ndarray
    errors: np.ndarray  # (len(ts), len(xs))
    rate: float  # fitted exponent of error ~ t^rate over the tail
    decreasing: bool


def pointwise_convergence_experiment(lams, f, xs, ts):
    """|W_t f(x) - f(x)| along a decreasing t sequence, with a fitted power rate."""
    lams = check_lambdas(lams)
    if not isinstance(f, SourceFunction):
        raise ContractError("need a SourceFunction to compare against f(x)")
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ts = np.asarray(ts, dtype=float)
    if np.any(np.diff(ts) >= 0):
        raise DomainError("t sequence must be strictly decreasing")
    fx = f(xs)
    err = np.array([[abs(apply_semigroup(lams, t, f, x) - v) for x, v in zip(xs, fx)] for t in ts])
    tail = err[-3:] if len(ts) >= 3 else err
    tot = tail.max(axis=1)
    ok = tot > 0
    rate = float(np.polyfit(np.log(ts[-len(tot):][ok]), np.log(tot[ok]), 1)[0]) if ok.sum() >= 2 else math.nan
    dec = bool(np.all(np.diff(err.max(axis=1)[-3:]) <= 0))
    return ConvergenceReport(ts, err, rate, dec)
