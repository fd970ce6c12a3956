"""Degree-based structural statistics of optimised battle topologies.

All quantities are simple functions of a topology and the terminal
force state. Averages over empty node sets are reported as NaN rather
than zero so that downstream sweep tables show gaps instead of
fabricated values.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .model import ConfigError, ForceState, Side, Topology, total_force
from .optimizer import UtilityParams, utility

#: Engagement-degree threshold above which an unsupported Red node counts
#: as sacrificial.
SACRIFICIAL_DEGREE = 10


@dataclass(frozen=True)
class StructuralMetrics:
    utility: float
    blue_mean: float
    red_mean: float
    n_sacrificial: int
    l_rb_per_node: float
    frac_attacked_blue: float
    avg_attacks_on_attacked: float
    max_red_manoeuvre_degree: int
    avg_manoeuvre_degree_attacked_blue: float
    avg_manoeuvre_degree_attacking_red: float

    def to_row(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def count_sacrificial(topo: Topology, k_threshold: int = SACRIFICIAL_DEGREE) -> int:
    """Red nodes with no manoeuvre links and engagement degree > k_threshold."""
    if k_threshold < 1:
        raise ConfigError(f"k_threshold must be >= 1, got {k_threshold}")
    red_man_deg = topo.red_manoeuvre.sum(axis=1)
    eng_deg = topo.engagement.sum(axis=0)
    return int(np.count_nonzero((red_man_deg == 0) & (eng_deg > k_threshold)))


def compute_metrics(
    topo: Topology,
    terminal: ForceState,
    params: UtilityParams,
    k_threshold: int = SACRIFICIAL_DEGREE,
) -> StructuralMetrics:
    if terminal.n_blue != topo.n_blue or terminal.n_red != topo.n_red:
        raise ConfigError("terminal state dimensions do not match topology")

    eng_deg_blue = topo.engagement.sum(axis=1)
    eng_deg_red = topo.engagement.sum(axis=0)
    blue_man_deg = topo.blue_manoeuvre.sum(axis=1)
    red_man_deg = topo.red_manoeuvre.sum(axis=1)

    attacked = eng_deg_blue > 0
    attacking = eng_deg_red > 0
    n_attacked = int(np.count_nonzero(attacked))

    _, blue_mean = total_force(terminal, Side.BLUE)
    _, red_mean = total_force(terminal, Side.RED)

    return StructuralMetrics(
        utility=utility(terminal, params),
        blue_mean=blue_mean,
        red_mean=red_mean,
        n_sacrificial=count_sacrificial(topo, k_threshold),
        l_rb_per_node=topo.engagement_count / topo.n_red,
        frac_attacked_blue=n_attacked / topo.n_blue,
        avg_attacks_on_attacked=(
            float(eng_deg_blue[attacked].mean()) if n_attacked else float("nan")
        ),
        max_red_manoeuvre_degree=int(red_man_deg.max()),
        avg_manoeuvre_degree_attacked_blue=(
            float(blue_man_deg[attacked].mean()) if n_attacked else float("nan")
        ),
        avg_manoeuvre_degree_attacking_red=(
            float(red_man_deg[attacking].mean()) if attacking.any() else float("nan")
        ),
    )
