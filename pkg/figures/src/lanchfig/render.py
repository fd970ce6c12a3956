"""Renderers for the paper-style figure families.

Each builder returns a matplotlib Figure; render() dispatches on the
recipe and writes the image deterministically (fixed size, fixed dpi,
no timestamps).
"""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import TwoSlopeNorm

from .recipes import (
    BLUE,
    ENGAGE_GREEN,
    RED,
    SWEEP_PANELS,
    FigureRecipe,
    SchemaError,
    read_csv_columns,
    read_summary,
    read_topology,
    read_trajectory,
)

DPI = 150


def build_timeseries(recipe: FigureRecipe):
    times, blue, red = read_trajectory(recipe.inputs["trajectory"])
    support_blue = set(recipe.style.get("support_blue", []))
    support_red = set(recipe.style.get("support_red", []))
    if "summary" in recipe.inputs:
        summary = read_summary(recipe.inputs["summary"])
        degrees = summary.get("engagement_degree")
        if degrees:
            support_blue = {i for i, d in enumerate(degrees["blue"]) if d == 0}
            support_red = {m for m, d in enumerate(degrees["red"]) if d == 0}

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i in range(blue.shape[1]):
        style = "--" if i in support_blue else "-"
        ax.plot(times, blue[:, i], style, color=BLUE, lw=1.2)
    for m in range(red.shape[1]):
        style = "--" if m in support_red else "-"
        ax.plot(times, red[:, m], style, color=RED, lw=1.2)
    ax.plot(times, blue.mean(axis=1), color="black", lw=2.0, label="Blue mean")
    ax.plot(times, red.mean(axis=1), color="dimgray", lw=2.0, label="Red mean")
    ax.set_xlabel(recipe.style.get("xlabel", "time"))
    ax.set_ylabel(recipe.style.get("ylabel", "force level"))
    ax.legend(loc="upper right", frameon=False)
    fig.tight_layout()
    return fig


def build_critical_curve(recipe: FigureRecipe):
    curves = {
        role: path for role, path in recipe.inputs.items() if role.startswith("curve")
    }
    if not curves:
        raise SchemaError("critical_curve needs at least one 'curve*' input")
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for role in sorted(curves):
        cols = read_csv_columns(curves[role], ("f_R", "kappa_R_star"))
        label = role.split(":", 1)[1] if ":" in role else role
        ax.plot(cols["f_R"], cols["kappa_R_star"], marker="o", label=label)
    # region where Red wins with weaker fire and weaker combat units
    ax.fill_between([0, 1], 0, 1, color="0.85", zorder=0)
    ax.set_xlabel("Red reserve fraction f_R")
    ax.set_ylabel("critical kill-rate")
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def build_heatmap(recipe: FigureRecipe):
    x_param = recipe.style.get("x_param")
    y_param = recipe.style.get("y_param")
    path = recipe.inputs["heatmap"]
    if x_param is None or y_param is None:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        if len(header) != 3 or header[2] != "red_minus_blue":
            raise SchemaError(
                f"{path}: missing columns: <x>, <y>, red_minus_blue"
            )
        x_param, y_param = header[0], header[1]
    cols = read_csv_columns(path, (x_param, y_param, "red_minus_blue"))
    xs = np.unique(cols[x_param])
    ys = np.unique(cols[y_param])
    grid = np.full((ys.shape[0], xs.shape[0]), np.nan)
    xi = np.searchsorted(xs, cols[x_param])
    yi = np.searchsorted(ys, cols[y_param])
    grid[yi, xi] = cols["red_minus_blue"]

    fig, ax = plt.subplots(figsize=(6, 5))
    span = np.nanmax(np.abs(grid)) or 1.0
    norm = TwoSlopeNorm(vmin=-span, vcenter=0.0, vmax=span)
    mesh = ax.pcolormesh(xs, ys, grid, cmap="RdBu_r", norm=norm, shading="nearest")
    fig.colorbar(mesh, ax=ax, label="Red minus Blue surviving force")
    ax.set_xlabel(recipe.style.get("xlabel", x_param))
    ax.set_ylabel(recipe.style.get("ylabel", y_param))
    fig.tight_layout()
    return fig


def build_lambda_sweep(recipe: FigureRecipe):
    key = recipe.style.get("key", "lam")
    cols = read_csv_columns(
        recipe.inputs["sweep"], (key,) + tuple(name for name, _ in SWEEP_PANELS)
    )
    xs = cols[key]
    fig, axes = plt.subplots(3, 3, figsize=(10, 8), sharex=True)
    for (name, label), ax in zip(SWEEP_PANELS, axes.ravel()):
        ys = cols[name]
        if name == "blue_mean":
            ax.plot(xs, cols["blue_mean"], marker="o", color=BLUE, label="Blue")
            ax.plot(xs, cols["red_mean"], marker="o", color=RED, label="Red")
            ax.legend(frameon=False, fontsize=8)
        else:
            ax.plot(xs, ys, marker="o", color="black")
        ax.set_title(label, fontsize=9)
    for ax in axes[-1]:
        ax.set_xlabel(key)
    fig.tight_layout()
    return fig


def _ring_positions(n: int, start: float, stop: float, radius: float = 1.0):
    angles = np.linspace(start, stop, n, endpoint=True)
    return np.c_[radius * np.cos(angles), radius * np.sin(angles)]


def build_network(recipe: FigureRecipe):
    topo = read_topology(recipe.inputs["topology"])
    nb, nr = topo["n_blue"], topo["n_red"]
    blue_force = np.ones(nb)
    red_force = np.ones(nr)
    if "summary" in recipe.inputs:
        summary = read_summary(recipe.inputs["summary"])
        per_node = summary.get("terminal_per_node")
        if per_node:
            blue_force = np.asarray(per_node["blue"], dtype=float)
            red_force = np.asarray(per_node["red"], dtype=float)
            if blue_force.shape[0] != nb or red_force.shape[0] != nr:
                raise SchemaError(
                    "summary terminal_per_node does not match topology size"
                )

    # blue on the left arc, red on the right arc
    pos_blue = _ring_positions(nb, math.pi / 2 + 0.15, 3 * math.pi / 2 - 0.15)
    pos_red = _ring_positions(nr, math.pi / 2 - 0.15, -math.pi / 2 + 0.15)

    blue_man_deg = np.zeros(nb, dtype=int)
    red_man_deg = np.zeros(nr, dtype=int)
    blue_eng_deg = np.zeros(nb, dtype=int)
    red_eng_deg = np.zeros(nr, dtype=int)
    for i, j in topo["blue_edges"]:
        blue_man_deg[i] += 1
        blue_man_deg[j] += 1
    for i, j in topo["red_edges"]:
        red_man_deg[i] += 1
        red_man_deg[j] += 1
    for i, m in topo["engagement_edges"]:
        blue_eng_deg[i] += 1
        red_eng_deg[m] += 1

    sac_threshold = int(recipe.style.get("sacrificial_threshold", 10))
    hub_threshold = int(recipe.style.get("hub_threshold", 10))

    fig, ax = plt.subplots(figsize=(7, 7))
    for i, j in topo["blue_edges"]:
        ax.plot(*zip(pos_blue[i], pos_blue[j]), color=BLUE, lw=0.7, alpha=0.6,
                zorder=1)
    for i, j in topo["red_edges"]:
        ax.plot(*zip(pos_red[i], pos_red[j]), color=RED, lw=0.7, alpha=0.6,
                zorder=1)
    for i, m in topo["engagement_edges"]:
        ax.plot(*zip(pos_blue[i], pos_red[m]), color=ENGAGE_GREEN, lw=1.0,
                alpha=0.8, zorder=2)

    # node area scales linearly with terminal force
    def sizes(force):
        return 40 + 260 * np.clip(force, 0.0, None)

    ax.scatter(pos_blue[:, 0], pos_blue[:, 1], s=sizes(blue_force), color=BLUE,
               zorder=3)
    ax.scatter(pos_red[:, 0], pos_red[:, 1], s=sizes(red_force), color=RED,
               zorder=3)

    sacrificial = (red_man_deg == 0) & (red_eng_deg > sac_threshold)
    if sacrificial.any():
        ax.scatter(pos_red[sacrificial, 0], pos_red[sacrificial, 1],
                   s=sizes(red_force[sacrificial]) * 2.2, facecolors="none",
                   edgecolors="black", lw=1.5, zorder=4, label="sacrificial")
    hubs = red_man_deg >= hub_threshold
    if hubs.any():
        ax.scatter(pos_red[hubs, 0], pos_red[hubs, 1], s=220, marker="D",
                   facecolors="none", edgecolors="black", lw=1.5, zorder=4,
                   label="manoeuvre hub")
    focused = blue_eng_deg > sac_threshold
    if focused.any():
        ax.scatter(pos_blue[focused, 0], pos_blue[focused, 1], s=220, marker="^",
                   facecolors="none", edgecolors="black", lw=1.5, zorder=4,
                   label="focused Blue")
    if sacrificial.any() or hubs.any() or focused.any():
        ax.legend(loc="lower center", frameon=False, fontsize=8, ncol=3)

    ax.set_aspect("equal")
    ax.axis("off")
    fig.tight_layout()
    return fig


_BUILDERS = {
    "timeseries": build_timeseries,
    "critical_curve": build_critical_curve,
    "heatmap": build_heatmap,
    "lambda_sweep": build_lambda_sweep,
    "network": build_network,
}


def build(recipe: FigureRecipe):
    recipe.validate()
    return _BUILDERS[recipe.figure](recipe)


def render(recipe: FigureRecipe) -> str:
    """Render the recipe to its output path; returns the path."""
    fig = build(recipe)
    try:
        fig.savefig(recipe.output, dpi=DPI, metadata={"Software": None})
    finally:
        plt.close(fig)
    return recipe.output
