"""Figure rendering for the solver CLI's CSV outputs.

Pure consumers: every number plotted is read from a CSV (or a maze
file for geometry); nothing is recomputed here. Each renderer validates
the header it needs and raises SchemaError naming the first missing
column.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

ARROW_DELTAS = {0: (-1, 0), 1: (0, -1), 2: (1, 0), 3: (0, 1)}  # dx, dy per action


class SchemaError(ValueError):
    """A CSV is missing a column the figure needs."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: figure kind, input CSVs, output image path."""

    kind: str
    inputs: list
    output: str
    maze: str | None = None
    title: str | None = None
    log_x: bool = False
    log_y: bool = False
    target: float | None = None
    extras: dict = field(default_factory=dict)


def load_csv(path: str, required: tuple) -> dict:
    """Columns as float arrays; raises SchemaError on a missing column."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        headers = reader.fieldnames or []
        for column in required:
            if column not in headers:
                raise SchemaError(f"column {column!r} missing from {path}")
        rows = list(reader)
    return {h: np.array([float(r[h]) for r in rows]) for h in headers}


def load_maze_grid(path: str) -> list:
    with open(path) as fh:
        return [line for line in fh.read().splitlines() if line.strip()]


def _cell_values(data: dict) -> tuple:
    """Aggregate a pair-indexed CSV into per-cell sums on the grid."""
    rows = data["row"].astype(int)
    cols = data["col"].astype(int)
    if (rows < 0).any():
        raise SchemaError("CSV has no grid coordinates (row/col are -1); "
                          "this figure needs a maze-based run")
    height, width = rows.max() + 1, cols.max() + 1
    grid = np.zeros((height, width))
    for r, c, p in zip(rows, cols, data["probability"]):
        grid[r, c] += p
    return grid, height, width


def _mask_walls(ax, grid_shape, maze_path):
    if maze_path is None:
        return
    maze = load_maze_grid(maze_path)
    wall = np.zeros(grid_shape)
    for r, line in enumerate(maze):
        for c, ch in enumerate(line):
            if ch == "#":
                wall[r, c] = 1.0
    ax.imshow(np.where(wall > 0, 1.0, np.nan), cmap="binary", vmin=0, vmax=1,
              interpolation="nearest")
    for r, line in enumerate(maze):
        for c, ch in enumerate(line):
            if ch in "SG":
                ax.text(c, r, ch, ha="center", va="center", fontsize=9,
                        color="tab:orange", fontweight="bold")


def draw_occupation(spec: FigureSpec, ax) -> None:
    data = load_csv(spec.inputs[0],
                    ("state", "row", "col", "action", "probability"))
    grid, height, width = _cell_values(data)
    im = ax.imshow(grid, cmap="viridis", interpolation="nearest")
    _mask_walls(ax, (height, width), spec.maze)
    plt.colorbar(im, ax=ax, shrink=0.8, label="occupation")
    ax.set_xticks([])
    ax.set_yticks([])


def draw_policy(spec: FigureSpec, ax) -> None:
    data = load_csv(spec.inputs[0],
                    ("state", "row", "col", "action", "probability"))
    rows = data["row"].astype(int)
    cols = data["col"].astype(int)
    if (rows < 0).any():
        raise SchemaError("policy figure needs grid coordinates")
    actions = data["action"].astype(int)
    height, width = rows.max() + 1, cols.max() + 1
    ax.imshow(np.zeros((height, width)), cmap="Greys", vmin=0, vmax=1)
    _mask_walls(ax, (height, width), spec.maze)
    scale = 0.42
    for r, c, a, p in zip(rows, cols, actions, data["probability"]):
        dx, dy = ARROW_DELTAS[a]
        if p < 1e-3:
            continue
        ax.arrow(c, r, scale * p * dx, -scale * p * dy, head_width=0.07,
                 head_length=0.05, fc="tab:blue", ec="tab:blue",
                 length_includes_head=True)
    ax.set_xlim(-0.5, width - 0.5)
    ax.set_ylim(height - 0.5, -0.5)
    ax.set_xticks([])
    ax.set_yticks([])


def draw_sweep(spec: FigureSpec, ax) -> None:
    data = load_csv(spec.inputs[0], ("beta", "energy_rate", "kl_rate",
                                     "theta"))
    ax.plot(data["beta"], data["theta"], "o-", label="free-energy rate")
    ax.plot(data["beta"], data["energy_rate"], "s-", label="energy rate")
    ax.plot(data["beta"], data["kl_rate"], "^-", label="KL rate")
    ax.set_xscale("log")
    ax.set_xlabel("inverse temperature")
    ax.set_ylabel("value per step")
    ax.legend()


def draw_kl_curve(spec: FigureSpec, ax) -> None:
    data = load_csv(spec.inputs[0], ("t", "kl"))
    ax.plot(data["t"], data["kl"], lw=1.2)
    ax.set_xlabel("time step")
    ax.set_ylabel("KL from bulk distribution")
    if spec.log_y:
        ax.set_yscale("log")


def draw_value_scatter(spec: FigureSpec, ax) -> None:
    if len(spec.inputs) < 2:
        raise SchemaError("value scatter needs two inputs: values.csv and "
                          "dp_values.csv")
    spectral = load_csv(spec.inputs[0], ("state", "action", "q"))
    dp = load_csv(spec.inputs[1], ("step", "state", "action", "q"))
    last = dp["step"] == dp["step"].max()
    key = lambda d, m: {(int(s), int(a)): q for s, a, q in
                        zip(d["state"][m], d["action"][m], d["q"][m])}
    spec_q = key(spectral, np.ones(len(spectral["q"]), dtype=bool))
    dp_q = key(dp, last)
    shared = sorted(set(spec_q) & set(dp_q))
    if not shared:
        raise SchemaError("no common (state, action) pairs between inputs")
    xs = np.array([dp_q[k] for k in shared])
    ys = np.array([spec_q[k] for k in shared])
    ax.plot(xs, ys, ".", ms=4, alpha=0.7)
    lo, hi = min(xs.min(), ys.min()), max(xs.max(), ys.max())
    ax.plot([lo, hi], [lo, hi], "k--", lw=0.8)
    ax.set_xlabel("dynamic-programming Q")
    ax.set_ylabel("spectral Q")


def draw_rmsd_curve(spec: FigureSpec, ax) -> None:
    data = load_csv(spec.inputs[0], ("horizon", "rmsd"))
    ax.plot(data["horizon"], data["rmsd"], "o-")
    ax.set_yscale("log")
    ax.set_xlabel("trajectory length")
    ax.set_ylabel("Q-value RMSD")


def draw_theta_convergence(spec: FigureSpec, ax) -> None:
    data = load_csv(spec.inputs[0], ("replica", "step", "theta_est"))
    steps = np.unique(data["step"])
    mean = np.empty(steps.size)
    std = np.empty(steps.size)
    for i, s in enumerate(steps):
        vals = data["theta_est"][data["step"] == s]
        mean[i] = vals.mean()
        std[i] = vals.std()
    ax.plot(steps, mean, lw=1.4, label="replica mean")
    ax.fill_between(steps, mean - std, mean + std, alpha=0.3,
                    label="replica std")
    if spec.target is not None:
        ax.axhline(spec.target, color="k", ls="--", lw=0.8,
                   label="model-based value")
    ax.set_xlabel("training step")
    ax.set_ylabel("free-energy rate estimate")
    ax.legend()
    if spec.log_x:
        ax.set_xscale("log")


RENDERERS = {
    "occupation": draw_occupation,
    "policy": draw_policy,
    "sweep": draw_sweep,
    "kl_curve": draw_kl_curve,
    "value_scatter": draw_value_scatter,
    "rmsd_curve": draw_rmsd_curve,
    "theta_convergence": draw_theta_convergence,
}


def render(spec: FigureSpec) -> str:
    """Draw the figure the spec describes and write it to spec.output."""
    if spec.kind not in RENDERERS:
        raise SchemaError(f"unknown figure kind {spec.kind!r}; "
                          f"choose from {sorted(RENDERERS)}")
    if not spec.inputs:
        raise SchemaError("figure spec lists no input CSVs")
    fig, ax = plt.subplots(figsize=(5.2, 4.2), constrained_layout=True)
    try:
        RENDERERS[spec.kind](spec, ax)
        if spec.title:
            ax.set_title(spec.title)
        fig.savefig(spec.output, dpi=150)
    finally:
        plt.close(fig)
    return spec.output
