"""Figure rendering for run artifacts.

Every function takes data already written (or about to be written) as CSV
and renders a PNG next to it with a headless matplotlib backend.  Nothing
here feeds back into training; plots are a view of the delimited output.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _column(rows, key):
    xs, ys = [], []
    for row in rows:
        val = row.get(key)
        if val is None or val == "":
            continue
        xs.append(float(row["iteration"]))
        ys.append(float(val))
    return np.asarray(xs), np.asarray(ys)


def render_training_curves(rows, path, validation=None, sigma_trajectory=None):
    """Loss components over iterations, plus the penalty path if given.

    rows are the per-iteration dicts of a training report; stage-2 rows
    (one per penalty level) appear as markers on the same axis.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for key, style in (("total", "-"), ("interior", "--"), ("dirichlet", ":"),
                       ("neumann", "-.")):
        xs, ys = _column(rows, key)
        if len(xs) and np.any(ys != 0.0):
            ax.plot(xs, np.maximum(ys, 1e-300), style, label=key, lw=1.2)
    stage2 = [row for row in rows if row.get("stage") == 2]
    if stage2:
        xs = [float(r["iteration"]) for r in stage2]
        ys = [max(float(r["total"]), 1e-300) for r in stage2]
        ax.plot(xs, ys, "o", ms=4, label="penalty level end")
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("empirical loss")
    ax.legend(fontsize=8)
    if validation:
        # validation errors are per penalty level, not per iteration; a
        # title line avoids a misleading x alignment
        text = "  ".join(f"{v:.2e}" for v in validation)
        ax.set_title(f"validation error per level: {text}", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return str(path)


def render_gamma_trajectory(gamma_rows, path, references=None):
    """Trainable coefficient paths over stage-1 iterations."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    its = [it for it, _ in gamma_rows]
    gams = np.asarray([np.atleast_1d(g) for _, g in gamma_rows])
    show = min(gams.shape[1], 6)
    for j in range(show):
        ax.plot(its, gams[:, j], label=f"gamma_{j}" if gams.shape[1] > 1 else "gamma")
    if references:
        for val in references:
            ax.axhline(val, color="k", lw=0.6, ls="--")
    ax.set_xlabel("iteration")
    ax.set_ylabel("coefficient")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return str(path)


def render_field_csv(csv_path, path, value_col="value"):
    """Scatter plot of an exported (coordinates, value) grid file."""
    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{csv_path}: empty grid file")
    x = np.asarray([float(r["x"]) for r in rows])
    y = np.asarray([float(r["y"]) for r in rows])
    v = np.asarray([float(r[value_col]) for r in rows])
    fig, ax = plt.subplots(figsize=(5.4, 4.6))
    im = ax.scatter(x, y, c=v, s=6, marker="s", cmap="viridis")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    title = "field"
    if "z" in rows[0]:
        title += f" at z = {rows[0]['z']}"
    ax.set_title(title, fontsize=9)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return str(path)


def render_truncation(rows, path):
    """Relative errors against the truncation level, log scale."""
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    levels = [row["N"] for row in rows]
    for key, marker in (("e", "o"), ("e_u", "s"), ("e_S", "^")):
        vals = [row.get(key) for row in rows]
        if all(v is not None for v in vals) and any(v > 0 for v in vals):
            ax.semilogy(levels, vals, marker + "-", label=key)
    ax.set_xlabel("truncation level N")
    ax.set_ylabel("relative L2 error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return str(path)


def render_comparison(rows_a, rows_b, labels, path):
    """Two loss trajectories on one axis (enriched run vs baseline)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for rows, label, style in ((rows_a, labels[0], "-"), (rows_b, labels[1], "--")):
        xs, ys = _column(rows, "total")
        ax.plot(xs, np.maximum(ys, 1e-300), style, label=f"{label} loss", lw=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("empirical loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return str(path)
