"""Figure rendering from finished output directories.

Reads the delimited outputs a compute subcommand wrote (trajectory.csv,
diagnostics.csv, summary.json) and saves PNG figures alongside them. Kept
strictly out of the compute path so runs stay byte-reproducible whether or
not figures are rendered afterwards.
"""

from __future__ import annotations

import json
import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _read_csv(path):
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if not ln.startswith("#")]
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        if not ln:
            continue
        rows.append([float(x) if x else math.nan for x in ln.split(",")])
    data = np.array(rows) if rows else np.zeros((0, len(header)))
    return header, data


def _plot_trajectory(path, out_png):
    header, data = _read_csv(path)
    if data.shape[0] < 2:
        return None
    col = {name: i for i, name in enumerate(header)}
    t = data[:, col["t"]]
    x, y, z = (data[:, col[k]] for k in ("rx", "ry", "rz"))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(x, y, lw=0.8)
    ax1.set_xlabel("x")
    ax1.set_ylabel("y")
    ax1.set_title("position, xy projection")
    ax1.set_aspect("equal", adjustable="datalim")
    ax2.plot(t, z, lw=0.8)
    ax2.set_xlabel("t")
    ax2.set_ylabel("z")
    ax2.set_title("position, z vs t")
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def _plot_diagnostics(path, out_png, summary):
    header, data = _read_csv(path)
    if data.shape[0] == 0:
        return None
    if header[:2] == ["eps", "metric"] and data.shape[0] >= 3:
        eps, metric = data[:, 0], data[:, 1]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(eps, metric, "o", label="measured")
        slope = summary.get("loglog_slope")
        if slope is not None:
            ref = metric[0] * (eps / eps[0]) ** slope
            ax.loglog(eps, ref, "--", label=f"slope {slope:.2f}")
        ax.set_xlabel("eps")
        ax.set_ylabel(summary.get("metric", "metric"))
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_png, dpi=150)
        plt.close(fig)
        return out_png
    if "t" not in header:
        return None
    t_idx = header.index("t")
    t = data[:, t_idx]
    names = [h for i, h in enumerate(header) if i != t_idx]
    fig, axes = plt.subplots(len(names), 1, figsize=(6, 2.2 * len(names)),
                             sharex=True, squeeze=False)
    for ax, name in zip(axes[:, 0], names):
        ax.plot(t, data[:, header.index(name)], lw=0.8)
        ax.set_ylabel(name)
    axes[-1, 0].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def render_output_dir(out_dir: str):
    """Render PNG figures for whatever outputs exist in out_dir."""
    summary = {}
    summary_path = os.path.join(out_dir, "summary.json")
    if os.path.exists(summary_path):
        with open(summary_path) as f:
            summary = json.load(f)
    written = []
    traj = os.path.join(out_dir, "trajectory.csv")
    if os.path.exists(traj):
        p = _plot_trajectory(traj, os.path.join(out_dir, "trajectory.png"))
        if p:
            written.append(p)
    diag = os.path.join(out_dir, "diagnostics.csv")
    if os.path.exists(diag):
        p = _plot_diagnostics(diag, os.path.join(out_dir, "diagnostics.png"),
                              summary)
        if p:
            written.append(p)
    return written
