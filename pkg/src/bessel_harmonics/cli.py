"""Command-line driver: kernels, operators, estimate checks and experiments.

Every run echoes its merged configuration into the output (JSON) or into a
``<out>.config.json`` sidecar (CSV), so a result file is reproducible from
what sits next to it.  Output formatting is fixed, so identical
configurations give byte-identical files.
"""
import argparse
import csv
import io
import json
import sys

import numpy as np

from . import estimates, operators
from .bessel_kernel import check_lambdas, heat_kernel_nd
from .errors import ContractError, ConvergenceError, DomainError
from .measure_grid import DistributionProfile

EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGENCE, EXIT_USAGE, EXIT_IO = 0, 2, 3, 64, 74

COMMANDS = {
    "kernel": "Heat kernel W_t(x, y) of the product Bessel operator, pointwise.",
    "apply": "Semigroup W_t f(x) for a bump source f.",
    "maximal": "Heat maximal function sup_t |W_t f(x)| for a bump source, with the attaining t.",
    "gfun": "Littlewood-Paley g-function (int_0^inf t |d/dt W_t f(x)|^2 dt)^{1/2} for a bump source.",
    "riesz": "Riesz transform R_i f(x): principal value, or truncated at each --eps.",
    "frac": "Kernel of the fractional power L^{-beta}, plain or constant-subtracted form.",
    "verify": "Empirical constant sup LHS/RHS for a catalogued kernel inequality.",
    "weaktype": "sup_gamma gamma m{|T f_h| > gamma} over a family of shrinking bumps.",
    "strongtype": "||T f_h||_p / ||f_h||_p over a family of bumps.",
    "converge": "|W_t f(x) - f(x)| along a decreasing t sequence, with fitted rate.",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ContractError(message)


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ContractError(f"expected comma-separated numbers, got {text!r}")


def _add_common(p, points=True, source=False):
    p.add_argument("--config", help="JSON file of parameters; flags override its entries")
    p.add_argument("--lambda", dest="lambda_", metavar="LAMBDA", help="Bessel indices lambda_j > -1/2, comma-separated")
    p.add_argument("--dim", type=int, help="dimension n; a single --lambda value is repeated n times")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    if points:
        p.add_argument("--x", help="evaluation point(s), n coordinates each, comma-separated")
    if source:
        p.add_argument("--center", help="bump centre, n coordinates (default all ones)")
        p.add_argument("--width", type=float, help="bump half-width h (default 0.5)")
        p.add_argument("--t-min", dest="t_min", type=float, help="smallest t in time sweeps")
        p.add_argument("--t-max", dest="t_max", type=float, help="largest t in time sweeps")


def build_parser():
    root = _Parser(prog="bessel-harmonics", description="Bessel heat semigroup and its harmonic-analysis operators.")
    sub = root.add_subparsers(dest="command", metavar="command")
    for name, text in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text)
        if name == "kernel":
            _add_common(p)
            p.add_argument("--t", type=float, help="time t > 0")
            p.add_argument("--y", help="second point(s), n coordinates each")
        elif name == "apply":
            _add_common(p, source=True)
            p.add_argument("--t", type=float, help="time t > 0")
        elif name in ("maximal", "gfun"):
            _add_common(p, source=True)
        elif name == "riesz":
            _add_common(p, source=True)
            p.add_argument("--axis", type=int, help="coordinate index i (0-based, default 0)")
            p.add_argument("--eps", help="truncation radii; omit for the principal value")
        elif name == "frac":
            _add_common(p)
            p.add_argument("--y", help="second point(s), n coordinates each")
            p.add_argument("--beta", type=float, help="order beta in (0, sum(lambda_j + 1/2))")
            p.add_argument("--form", choices=("plain", "subtracted"), help="kernel form (default subtracted)")
        elif name == "verify":
            _add_common(p, points=False)
            p.add_argument("--id", choices=estimates.ESTIMATE_IDS, help="estimate id (default: all)")
            p.add_argument("--ppd", type=int, help="sample points per decade (default 64)")
        elif name in ("weaktype", "strongtype"):
            _add_common(p, points=False)
            ops = estimates.WEAK_OPERATORS if name == "weaktype" else estimates.STRONG_OPERATORS
            p.add_argument("--operator", choices=ops, help="operator T")
            p.add_argument("--h", help="bump widths, comma-separated")
            if name == "weaktype":
                p.add_argument("--centers", help="spike centres: interior, axis (comma-separated)")
                p.add_argument("--eps", help="unused; radii are h/4, h/2, h for riesz_maximal")
            else:
                p.add_argument("--p", type=float, help="exponent p in (1, inf)")
        elif name == "converge":
            _add_common(p, source=True)
            p.add_argument("--t", dest="ts", help="decreasing t sequence, comma-separated")
    return root


_DEFAULTS = {"format": "csv", "width": 0.5, "axis": 0, "form": "subtracted", "ppd": 64, "operator": "maximal",
             "p": 2.0, "centers": "interior,axis"}


def _merge(args):
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ContractError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ContractError("config must be a JSON object")
        if "lambda" in cfg:
            cfg["lambda_"] = cfg.pop("lambda")
    merged = {k: v for k, v in _DEFAULTS.items() if k in vars(args)}
    merged.update(cfg)
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command"):
            merged[k] = v
    merged["command"] = args.command
    return merged


def _csv_or_list(v):
    if v is None:
        return None
    if isinstance(v, (list, tuple)):
        return [float(a) for a in v]
    if isinstance(v, (int, float)):
        return [float(v)]
    return _floats(v)


def _lams(cfg):
    raw = _csv_or_list(cfg.get("lambda_"))
    if not raw:
        raise ContractError("--lambda is required")
    dim = cfg.get("dim")
    if dim is not None:
        if len(raw) == 1:
            raw = raw * int(dim)
        elif len(raw) != int(dim):
            raise ContractError(f"--lambda has {len(raw)} entries but --dim is {dim}")
    return check_lambdas(raw)


def _points(cfg, key, n):
    raw = _csv_or_list(cfg.get(key))
    if not raw:
        raise ContractError(f"--{key} is required")
    if len(raw) % n:
        raise ContractError(f"--{key} needs a multiple of {n} coordinates")
    return np.asarray(raw).reshape(-1, n)


def _source(cfg, lams):
    n = len(lams)
    c = _csv_or_list(cfg.get("center")) or [1.0] * n
    if len(c) != n:
        raise ContractError(f"--center needs {n} coordinates")
    return operators.bump_source(c, float(cfg["width"]), lams, normalize=False)


def _tspec(cfg):
    kw = {}
    if cfg.get("t_min") is not None:
        kw["t_min"] = float(cfg["t_min"])
    if cfg.get("t_max") is not None:
        kw["t_max"] = float(cfg["t_max"])
    return operators.QuadratureSpec(**kw)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _table(header, rows):
    return {"header": list(header), "rows": [[float(v) if isinstance(v, (float, np.floating)) else v for v in r]
                                            for r in rows]}


def _coords(prefix, n):
    return [f"{prefix}{j + 1}" for j in range(n)]


# -------------------------------------------------------------- commands


def _cmd_kernel(cfg):
    lams = _lams(cfg)
    n = len(lams)
    if cfg.get("t") is None:
        raise ContractError("--t is required")
    t = float(cfg["t"])
    x, y = np.broadcast_arrays(_points(cfg, "x", n), _points(cfg, "y", n))
    vals = heat_kernel_nd(lams, t, x, y)
    rows = [[t, *xi, *yi, v] for xi, yi, v in zip(x, y, np.atleast_1d(vals))]
    return _table(["t", *_coords("x", n), *_coords("y", n), "value"], rows)


def _cmd_apply(cfg):
    lams = _lams(cfg)
    f = _source(cfg, lams)
    if cfg.get("t") is None:
        raise ContractError("--t is required")
    t = float(cfg["t"])
    x = _points(cfg, "x", len(lams))
    rows = [[t, *xi, operators.apply_semigroup(lams, t, f, xi)] for xi in x]
    return _table(["t", *_coords("x", len(lams)), "value"], rows)


def _cmd_maximal(cfg):
    lams = _lams(cfg)
    f, spec = _source(cfg, lams), _tspec(cfg)
    x = _points(cfg, "x", len(lams))
    rows = []
    for xi in x:
        s = operators.maximal_op(lams, f, xi, spec)
        rows.append([*xi, s.value, s.t])
    return _table([*_coords("x", len(lams)), "value", "t_star"], rows)


def _cmd_gfun(cfg):
    lams = _lams(cfg)
    f, spec = _source(cfg, lams), _tspec(cfg)
    x = _points(cfg, "x", len(lams))
    return _table([*_coords("x", len(lams)), "value"],
                  [[*xi, operators.g_function(lams, f, xi, spec)] for xi in x])


def _cmd_riesz(cfg):
    lams = _lams(cfg)
    n = len(lams)
    f, spec = _source(cfg, lams), _tspec(cfg)
    i = int(cfg["axis"])
    if not 0 <= i < n:
        raise ContractError(f"--axis must lie in [0, {n})")
    x = _points(cfg, "x", n)
    eps = _csv_or_list(cfg.get("eps"))
    rows = []
    for xi in x:
        if eps:
            vals = operators.riesz_truncated_many(lams, i, f, xi, eps, spec)
            rows.extend([*xi, e, v] for e, v in zip(eps, vals))
        else:
            rows.append([*xi, 0.0, operators.riesz_transform(lams, i, f, xi, spec)])
    return _table([*_coords("x", n), "eps", "value"], rows)


def _cmd_frac(cfg):
    lams = _lams(cfg)
    n = len(lams)
    if cfg.get("beta") is None:
        raise ContractError("--beta is required")
    beta = float(cfg["beta"])
    x, y = np.broadcast_arrays(_points(cfg, "x", n), _points(cfg, "y", n))
    vals = operators.fractional_kernel(lams, beta, x, y, form=cfg["form"])
    rows = [[*xi, *yi, v] for xi, yi, v in zip(x, y, np.atleast_1d(vals))]
    return _table([*_coords("x", n), *_coords("y", n), "value"], rows)


def _cmd_verify(cfg):
    lams = _lams(cfg)
    ids = [cfg["id"]] if cfg.get("id") else list(estimates.ESTIMATE_IDS)
    spec = estimates.SampleSpec(points_per_decade=int(cfg["ppd"]))
    reports = [estimates.verify_estimate(e, lam, spec).to_dict() for lam in lams for e in ids]
    return {"reports": reports}


def _family(cfg):
    hs = _csv_or_list(cfg.get("h"))
    centers = tuple(c.strip() for c in str(cfg["centers"]).split(",") if c.strip())
    kw = {"centers": centers}
    if hs:
        kw["widths"] = tuple(hs)
    return estimates.SpikeFamily(**kw)


def _cmd_weaktype(cfg):
    lams = _lams(cfg)
    rep = estimates.weak_type_experiment(cfg["operator"], lams, _family(cfg))
    rows = [[h, g, m, gm] for _, h, prof in rep.profiles for g, m, gm in prof.rows()]
    out = _table(["h", "gamma", "measure", "gamma_times_measure"], rows)
    out["summary"] = {"quasinorms": [[c, h, q] for c, h, q in rep.rows], "ratios": rep.ratios}
    return out


def _cmd_strongtype(cfg):
    lams = _lams(cfg)
    hs = _csv_or_list(cfg.get("h"))
    kw = {"widths": tuple(hs)} if hs else {}
    rep = estimates.strong_type_experiment(cfg["operator"], float(cfg["p"]), lams, **kw)
    out = _table(["h", "ratio"], rep.rows)
    out["summary"] = {"growth": rep.growth, "flagged": rep.flagged}
    return out


def _cmd_converge(cfg):
    lams = _lams(cfg)
    f = _source(cfg, lams)
    x = _points(cfg, "x", len(lams))
    ts = _csv_or_list(cfg.get("ts"))
    if not ts:
        raise ContractError("--t sequence is required")
    rep = estimates.pointwise_convergence_experiment(lams, f, x, ts)
    rows = [[t, *xi, e] for t, errs in zip(rep.ts, rep.errors) for xi, e in zip(x, errs)]
    out = _table(["t", *_coords("x", len(lams)), "error"], rows)
    out["summary"] = {"rate": rep.rate, "decreasing": rep.decreasing}
    return out


_HANDLERS = {"kernel": _cmd_kernel, "apply": _cmd_apply, "maximal": _cmd_maximal, "gfun": _cmd_gfun,
             "riesz": _cmd_riesz, "frac": _cmd_frac, "verify": _cmd_verify, "weaktype": _cmd_weaktype,
             "strongtype": _cmd_strongtype, "converge": _cmd_converge}


# ---------------------------------------------------------------- output


def _echo(cfg):
    out = {("lambda" if k == "lambda_" else k): v for k, v in cfg.items() if v is not None}
    return dict(sorted(out.items()))


def _render(result, cfg):
    if cfg["format"] == "json":
        body = {"command": cfg["command"], "config": _echo(cfg)}
        if "reports" in result:
            body["reports"] = result["reports"]
        else:
            body["records"] = [dict(zip(result["header"], r)) for r in result["rows"]]
            if "summary" in result:
                body["summary"] = result["summary"]
        return json.dumps(body, sort_keys=True, indent=2) + "\n"
    if "reports" in result:
        header = ["id", "lambda", "samples", "sup_ratio", "drift", "argmax_t", "argmax_x", "argmax_y"]
        rows = [[r["id"], r["lambda"], r["samples"], r["sup_ratio"], r["drift"], *r["argmax"]] for r in result["reports"]]
    else:
        header, rows = result["header"], result["rows"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _write(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def emit_profile(profile, path, fmt="csv"):
    """Write a distribution profile as CSV (gamma,measure,gamma_times_measure) or a JSON array."""
    rows = profile.rows() if isinstance(profile, DistributionProfile) else list(profile)
    if not rows:
        raise ContractError("distribution profile is empty")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gamma", "measure", "gamma_times_measure"])
        for r in rows:
            w.writerow([_fmt(float(v)) for v in r])
        text = buf.getvalue()
    elif fmt == "json":
        keys = ("gamma", "measure", "gamma_times_measure")
        text = json.dumps([dict(zip(keys, map(float, r))) for r in rows], indent=2) + "\n"
    else:
        raise ContractError("format must be csv or json")
    _write(text, path)


def run(argv=None):
    """Parse ``argv``, execute the command and return the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and not argv[0].startswith("-") and argv[0] not in COMMANDS:
        print(f"error: unknown command {argv[0]!r}; expected one of {', '.join(COMMANDS)}", file=sys.stderr)
        return EXIT_USAGE
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _merge(args)
        result = _HANDLERS[cfg["command"]](cfg)
        text = _render(result, cfg)
        _write(text, cfg.get("out"))
        if cfg.get("out") and cfg["format"] == "csv":
            _write(json.dumps(_echo(cfg), sort_keys=True, indent=2) + "\n", cfg["out"] + ".config.json")
    except (DomainError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"error: {exc}; last iterates {list(exc.iterates)}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
