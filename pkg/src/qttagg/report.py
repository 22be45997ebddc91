"""Figure rendering for run and bench outputs.

Opt-in: the CLI only calls into this module when plotting is requested, so
batch runs stay headless by default.  Figures land next to the CSV files
they visualize.
"""

from __future__ import annotations

import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

plt.rcParams["figure.figsize"] = (5.0, 3.2)
plt.rcParams["figure.dpi"] = 150
plt.rcParams["savefig.bbox"] = "tight"
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3


def _save(fig, path: str) -> str:
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_curve(xs, ys, path: str, xlabel: str, ylabel: str,
               title: str = "", logy: bool = False) -> str:
    fig, ax = plt.subplots()
    ax.plot(xs, ys, lw=1.0)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_run_outputs(out_dir: str) -> list[str]:
    """Render cdf.png / density.png next to the delimited run outputs."""
    written = []
    for name, ylabel in (("cdf", "F(x)"), ("density", "f(x)")):
        csv_path = os.path.join(out_dir, f"{name}.csv")
        if not os.path.exists(csv_path):
            continue
        xs, ys = [], []
        with open(csv_path, newline="") as fh:
            for row in csv.DictReader(fh):
                xs.append(float(row["x"]))
                ys.append(float(row[next(k for k in row if k != "x")]))
        png = os.path.join(out_dir, f"{name}.png")
        written.append(plot_curve(xs, ys, png, "x", ylabel))
    return written


def plot_bench_csv(csv_path: str) -> list[str]:
    """Render a log-log error/resource overview per benchmark CSV.

    Rows are grouped by (method, filter); the x axis is the mode count 2^n
    (or the sample count for Monte Carlo rows).
    """
    groups_err = defaultdict(list)
    groups_bond = defaultdict(list)
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row.get("status") != "ok":
                continue
            label = f'{row["method"]}/{row["filter"]}' if row.get("filter") \
                else row["method"]
            if row["method"] == "mc" and row.get("samples"):
                x = float(row["samples"])
            elif row.get("n"):
                x = 2.0 ** float(row["n"])
            else:
                continue
            if row.get("l1"):
                groups_err[label].append((x, float(row["l1"])))
            if row.get("peak_bond"):
                groups_bond[f'{label} D={row["D"]}'].append(
                    (float(row["D"]), float(row["peak_bond"])))
    written = []
    base = os.path.splitext(csv_path)[0]
    if groups_err:
        fig, ax = plt.subplots()
        for label, pts in sorted(groups_err.items()):
            pts.sort()
            ax.loglog([p[0] for p in pts], [p[1] for p in pts],
                      marker="o", ms=3, lw=1.0, label=label)
        ax.set_xlabel("modes / samples")
        ax.set_ylabel("L1 error")
        ax.legend(fontsize=7)
        written.append(_save(fig, base + "_error.png"))
    if groups_bond:
        fig, ax = plt.subplots()
        pts = sorted(p for v in groups_bond.values() for p in v)
        ax.semilogx([p[0] for p in pts], [p[1] for p in pts],
                    marker="o", ms=3, lw=0.8)
        ax.set_xlabel("D")
        ax.set_ylabel("peak bond dimension")
        written.append(_save(fig, base + "_bonds.png"))
    return written
