"""Stochastic hill-climbing over Red's manoeuvre and engagement networks.

Each iteration proposes a single-link modification of Red's structure
(Blue is never touched), integrates the battle to termination, and
accepts the move only on a strict improvement of Red's utility. On
rejection the previous structure is restored.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .integrator import final_state
from .model import (
    ConfigError,
    ForceState,
    NumericalAbort,
    ScenarioSpec,
    Side,
    Topology,
    total_force,
)

TRACE_DTYPE = np.dtype(
    [
        ("utility", np.float64),
        ("blue_mean", np.float64),
        ("red_mean", np.float64),
        ("accepted", np.bool_),
        ("l_rb", np.int64),
    ]
)


@dataclass(frozen=True)
class UtilityParams:
    """Offence-defence trade-off for Red's utility.

    lam weights preservation of Red's own force; (1 - lam) weights
    destruction inflicted on Blue, measured against Blue's initial
    per-node mean.
    """

    lam: float
    initial_blue_mean: float = 1.0

    def validate(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"trade-off lam must be in [0, 1], got {self.lam}")


def utility(terminal: ForceState, params: UtilityParams) -> float:
    """Red's utility lam * mean(R) + (1 - lam) * (B0 - mean(B))."""
    _, red_mean = total_force(terminal, Side.RED)
    _, blue_mean = total_force(terminal, Side.BLUE)
    return params.lam * red_mean + (1.0 - params.lam) * (
        params.initial_blue_mean - blue_mean
    )


@dataclass(frozen=True)
class MoveSet:
    """Move-class probabilities for the structural random walk.

    Manoeuvre rewires and engagement rewires conserve link counts;
    engagement add/remove change the number of engagements by one and
    are only attempted when allow_link_count_change is set.
    """

    p_manoeuvre: float = 0.5
    p_engage_rewire: float = 0.25
    p_engage_add: float = 0.125
    p_engage_remove: float = 0.125
    allow_link_count_change: bool = True

    def validate(self) -> None:
        probs = (
            self.p_manoeuvre,
            self.p_engage_rewire,
            self.p_engage_add,
            self.p_engage_remove,
        )
        if any(p < 0 for p in probs):
            raise ConfigError("move probabilities must be non-negative")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ConfigError(f"move probabilities must sum to 1, got {sum(probs)}")


@dataclass(frozen=True)
class OptimizationRun:
    """Result of one hill-climbing run."""

    seed: int
    iterations: int
    best_topology: Topology
    trace: np.ndarray
    best_utility: float
    best_terminal: ForceState
    seed_utility: float


def seed_topology(
    n: int,
    l_manoeuvre: int,
    l_engage: int,
    rng: np.random.Generator,
    n_red: int | None = None,
) -> Topology:
    """Random topology with exact link counts on every network.

    Both manoeuvre networks are uniform random simple graphs with
    exactly l_manoeuvre links; engagement pairs are sampled uniformly
    without replacement from the n x n_red bipartite slots.
    """
    n_red = n if n_red is None else n_red
    max_pairs_b = n * (n - 1) // 2
    max_pairs_r = n_red * (n_red - 1) // 2
    if not 0 <= l_manoeuvre <= min(max_pairs_b, max_pairs_r):
        raise ConfigError(
            f"cannot place {l_manoeuvre} manoeuvre links on {n}/{n_red} nodes"
        )
    if not 0 <= l_engage <= n * n_red:
        raise ConfigError(f"cannot place {l_engage} engagement links on {n}x{n_red}")

    def random_simple_graph(nodes: int, links: int) -> np.ndarray:
        iu, ju = np.triu_indices(nodes, k=1)
        chosen = rng.choice(iu.shape[0], size=links, replace=False)
        adj = np.zeros((nodes, nodes), dtype=np.int8)
        adj[iu[chosen], ju[chosen]] = 1
        return adj | adj.T

    blue = random_simple_graph(n, l_manoeuvre)
    red = random_simple_graph(n_red, l_manoeuvre)
    eng = np.zeros((n, n_red), dtype=np.int8)
    slots = rng.choice(n * n_red, size=l_engage, replace=False)
    eng[np.unravel_index(slots, eng.shape)] = 1
    return Topology(blue, red, eng)


_MOVE_CLASSES = ("manoeuvre_rewire", "engage_rewire", "engage_add", "engage_remove")


def _feasible(topo: Topology, move: str, moves: MoveSet) -> bool:
    n_red = topo.n_red
    l_red = int(topo.red_manoeuvre.sum()) // 2
    l_eng = topo.engagement_count
    eng_slots = topo.n_blue * topo.n_red
    if move == "manoeuvre_rewire":
        return 0 < l_red < n_red * (n_red - 1) // 2
    if move == "engage_rewire":
        return 0 < l_eng < eng_slots
    if move == "engage_add":
        return moves.allow_link_count_change and l_eng < eng_slots
    return moves.allow_link_count_change and l_eng > 0


def propose_move(
    topo: Topology, moves: MoveSet, rng: np.random.Generator
) -> Topology:
    """A copy of the topology differing by exactly one link operation.

    Degenerate move classes (no link or no vacancy of the required
    kind) are resampled; Blue's networks are never modified.
    """
    moves.validate()
    probs = np.array(
        [
            moves.p_manoeuvre,
            moves.p_engage_rewire,
            moves.p_engage_add,
            moves.p_engage_remove,
        ]
    )
    cumulative = np.cumsum(probs)
    for _ in range(10_000):
        u = rng.random()
        idx = min(int(np.searchsorted(cumulative, u, side="right")), 3)
        move = _MOVE_CLASSES[idx]
        if _feasible(topo, move, moves):
            break
    else:
        raise ConfigError("no feasible move class for this topology")

    new = topo.copy()
    if move == "manoeuvre_rewire":
        adj = new.red_manoeuvre
        links = np.argwhere(np.triu(adj))
        i, j = links[rng.integers(links.shape[0])]
        adj[i, j] = adj[j, i] = 0
        vac = np.argwhere(np.triu(1 - adj, k=1))
        # the freed slot is not a legal target, so the move always changes
        # the graph
        vac = vac[~((vac[:, 0] == i) & (vac[:, 1] == j))]
        a, b = vac[rng.integers(vac.shape[0])]
        adj[a, b] = adj[b, a] = 1
        return new

    eng = new.engagement
    if move == "engage_rewire":
        links = np.argwhere(eng == 1)
        i, m = links[rng.integers(links.shape[0])]
        eng[i, m] = 0
        vac = np.argwhere(eng == 0)
        vac = vac[~((vac[:, 0] == i) & (vac[:, 1] == m))]
        a, b = vac[rng.integers(vac.shape[0])]
        eng[a, b] = 1
    elif move == "engage_add":
        vac = np.argwhere(eng == 0)
        a, b = vac[rng.integers(vac.shape[0])]
        eng[a, b] = 1
    else:
        links = np.argwhere(eng == 1)
        i, m = links[rng.integers(links.shape[0])]
        eng[i, m] = 0
    return new


def optimize(
    spec: ScenarioSpec,
    params: UtilityParams,
    moves: MoveSet,
    iterations: int,
    seed: int,
) -> OptimizationRun:
    """Hill-climb Red's structure to maximise utility at the terminal state.

    Deterministic given the seed. Moves whose battle integration blows
    up are rejected and recorded with NaN utility.
    """
    spec.validate()
    params.validate()
    moves.validate()
    rng = np.random.default_rng(seed)

    current = spec.topology.copy()
    terminal, _ = final_state(
        ScenarioSpec(current, spec.config, spec.initial)
    )
    current_utility = utility(terminal, params)
    seed_utility = current_utility
    current_terminal = terminal

    trace = np.zeros(iterations, dtype=TRACE_DTYPE)
    for it in range(iterations):
        candidate = propose_move(current, moves, rng)
        try:
            terminal, _ = final_state(
                ScenarioSpec(candidate, spec.config, spec.initial)
            )
        except NumericalAbort:
            trace[it] = (np.nan, np.nan, np.nan, False, candidate.engagement_count)
            continue
        u = utility(terminal, params)
        _, blue_mean = total_force(terminal, Side.BLUE)
        _, red_mean = total_force(terminal, Side.RED)
        accepted = u > current_utility
        if accepted:
            current = candidate
            current_utility = u
            current_terminal = terminal
        trace[it] = (u, blue_mean, red_mean, accepted, candidate.engagement_count)

    return OptimizationRun(
        seed=seed,
        iterations=iterations,
        best_topology=current,
        trace=trace,
        best_utility=current_utility,
        best_terminal=current_terminal,
        seed_utility=seed_utility,
    )


def write_trace_csv(run: OptimizationRun, path) -> None:
    """Optimisation trace as CSV (iteration, utility, means, accepted, l_rb)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "utility", "blue_mean", "red_mean", "accepted", "l_rb"]
        )
        for it, row in enumerate(run.trace):
            writer.writerow(
                [
                    it,
                    f"{row['utility']:.12g}",
                    f"{row['blue_mean']:.12g}",
                    f"{row['red_mean']:.12g}",
                    int(row["accepted"]),
                    int(row["l_rb"]),
                ]
            )
