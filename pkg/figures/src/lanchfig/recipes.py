"""Figure recipes and schema checks for the battle-engine CSV/JSON artifacts.

The renderers are a pure view layer: they read only the documented
artifact files and never recompute battle quantities.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FIGURES = ("timeseries", "critical_curve", "heatmap", "lambda_sweep", "network")

BLUE = "#1f5fbf"
RED = "#c43d3d"
ENGAGE_GREEN = "#2ca02c"

SWEEP_PANELS = (
    ("utility", "utility"),
    ("blue_mean", "surviving Blue mean"),
    ("red_mean", "surviving Red mean"),
    ("n_sacrificial", "sacrificial nodes"),
    ("l_rb_per_node", "engagement links / node"),
    ("frac_attacked_blue", "fraction of Blue attacked"),
    ("avg_attacks_on_attacked", "attacks per attacked Blue"),
    ("max_red_manoeuvre_degree", "max Red manoeuvre degree"),
    ("avg_manoeuvre_degree_attacking_red", "manoeuvre degree of attackers"),
)


class SchemaError(ValueError):
    """An input artifact does not match its documented schema."""


@dataclass(frozen=True)
class FigureRecipe:
    """What to draw, from which artifacts, with which style options."""

    figure: str
    inputs: dict[str, str]
    output: str
    style: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.figure not in FIGURES:
            raise SchemaError(
                f"unknown figure {self.figure!r}; supported: {', '.join(FIGURES)}"
            )
        for role, path in self.inputs.items():
            if not Path(path).exists():
                raise SchemaError(f"input {role!r} does not exist: {path}")


def read_csv_columns(path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Read a CSV into named float columns, checking the header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(
                f"{path}: empty file; missing columns: {', '.join(required)}"
            ) from None
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns: {', '.join(missing)}")
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = np.array(rows, dtype=object)
    out = {}
    for idx, name in enumerate(header):
        col = data[:, idx]
        try:
            out[name] = col.astype(float)
        except ValueError:
            out[name] = col
    return out


def read_trajectory(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (times, blue matrix, red matrix) from a trajectory CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(
                f"{path}: empty file; missing columns: time, B_1.., R_1.."
            ) from None
        rows = [row for row in reader if row]
    if header[:1] != ["time"]:
        raise SchemaError(f"{path}: missing columns: time")
    blue_cols = [i for i, c in enumerate(header) if c.startswith("B_")]
    red_cols = [i for i, c in enumerate(header) if c.startswith("R_")]
    if not blue_cols or not red_cols:
        raise SchemaError(f"{path}: missing columns: B_*, R_*")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    return data[:, 0], data[:, blue_cols], data[:, red_cols]


def read_topology(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    missing = [
        k
        for k in ("n_blue", "n_red", "blue_edges", "red_edges", "engagement_edges")
        if k not in data
    ]
    if missing:
        raise SchemaError(f"{path}: missing fields: {', '.join(missing)}")
    return data


def read_summary(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
