"""Plot CSV tables written by the bessel-harmonics CLI.

    python3 docs/plot_profile.py weak.csv [-o weak.png]

Understands two layouts:
  weaktype  (h, gamma, measure, gamma_times_measure): gamma * m{|T f_h| > gamma}
            against gamma, one curve per spike width h
  converge  (t, x1, error): |W_t f(x) - f(x)| against t, one curve per point

Needs matplotlib, which the package itself does not depend on.
"""
import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SystemExit(f"{path}: no rows")
    return rows


def curves(rows, key, xcol, ycol):
    out = defaultdict(lambda: ([], []))
    for r in rows:
        xs, ys = out[r[key]]
        xs.append(float(r[xcol]))
        ys.append(float(r[ycol]))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("-o", "--out", default=None, help="image path (default: <csv>.png)")
    args = ap.parse_args(argv)
    rows = read(args.csv)
    cols = set(rows[0])
    fig, ax = plt.subplots(figsize=(6, 4))
    if {"gamma", "gamma_times_measure"} <= cols:
        for h, (g, gm) in curves(rows, "h", "gamma", "gamma_times_measure").items():
            ax.semilogx(g, gm, marker=".", label=f"h = {h}")
        ax.set_xlabel("gamma")
        ax.set_ylabel("gamma * m{|T f_h| > gamma}")
    elif {"t", "error"} <= cols:
        for x, (t, e) in curves(rows, "x1", "t", "error").items():
            ax.loglog(t, e, marker="o", label=f"x = {x}")
        ax.set_xlabel("t")
        ax.set_ylabel("|W_t f(x) - f(x)|")
    else:
        raise SystemExit(f"{args.csv}: unrecognised columns {sorted(cols)}")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out or args.csv + ".png", dpi=120)


if __name__ == "__main__":
    main()
