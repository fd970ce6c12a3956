"""Core types and dynamics of the networked two-force battle model.

Two forces, Blue and Red, each hold a non-negative resource level per
node. Three networks couple the nodes: a symmetric manoeuvre network
inside each force, over which resource diffuses from weakly engaged
nodes toward heavily engaged ones, and a bipartite engagement network
defining which pairs fire at each other. Fire from a node is split
evenly over its targets, and both fire and transfer are gated by a
smoothed step function so that nodes drop out of the dynamics once
their resource reaches zero.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class ConfigError(ValueError):
    """A scenario, topology, or parameter set is structurally invalid."""


class NumericalAbort(RuntimeError):
    """Integration produced non-finite values (blown-up configuration)."""


class Side(str, Enum):
    BLUE = "blue"
    RED = "red"


def smoothed_step(x, eps: float):
    """Smooth 0/1 gate: (1 + tanh(x/eps)) / 2.

    Strictly increasing, 0.5 at x=0, saturating to 0/1 within a few
    widths eps. Accepts scalars or arrays.
    """
    if eps <= 0:
        raise ConfigError(f"smoothing width must be positive, got {eps}")
    return 0.5 * (1.0 + np.tanh(np.asarray(x, dtype=float) / eps))


@dataclass(frozen=True)
class ForceState:
    """Per-node resource levels of both sides at one time instant."""

    blue: np.ndarray
    red: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        blue = np.atleast_1d(np.asarray(self.blue, dtype=float))
        red = np.atleast_1d(np.asarray(self.red, dtype=float))
        if not (np.all(np.isfinite(blue)) and np.all(np.isfinite(red))):
            raise ConfigError("force levels must be finite")
        object.__setattr__(self, "blue", blue)
        object.__setattr__(self, "red", red)

    @property
    def n_blue(self) -> int:
        return self.blue.shape[0]

    @property
    def n_red(self) -> int:
        return self.red.shape[0]

    def side(self, side: Side) -> np.ndarray:
        return self.blue if side == Side.BLUE else self.red


def total_force(state: ForceState, side: Side) -> tuple[float, float]:
    """Total and per-node mean resource of one side."""
    values = state.side(side)
    total = float(values.sum())
    return total, total / values.shape[0]


def _check_symmetric_01(a: np.ndarray, name: str, errors: list[str]) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        errors.append(f"{name} must be a square matrix, got shape {a.shape}")
        return
    bad = np.argwhere(a != a.T)
    if bad.size:
        i, j = bad[0]
        errors.append(f"{name} is not symmetric at pair ({i}, {j})")
    if np.any(np.diag(a) != 0):
        i = int(np.flatnonzero(np.diag(a))[0])
        errors.append(f"{name} has a self-loop at node {i}")
    if not np.isin(a, (0, 1)).all():
        errors.append(f"{name} must contain only 0/1 entries")


@dataclass(frozen=True)
class Topology:
    """The three battle networks.

    blue_manoeuvre, red_manoeuvre: symmetric 0/1 adjacency matrices with
    zero diagonal. engagement: 0/1 biadjacency matrix of shape
    (n_blue, n_red); entry [i, m] = 1 means Blue i and Red m fire at
    each other (engagement is mutual by convention).
    """

    blue_manoeuvre: np.ndarray
    red_manoeuvre: np.ndarray
    engagement: np.ndarray

    def __post_init__(self):
        for name in ("blue_manoeuvre", "red_manoeuvre", "engagement"):
            a = np.atleast_2d(np.asarray(getattr(self, name)))
            object.__setattr__(self, name, a.astype(np.int8))

    @property
    def n_blue(self) -> int:
        return self.blue_manoeuvre.shape[0]

    @property
    def n_red(self) -> int:
        return self.red_manoeuvre.shape[0]

    @property
    def engagement_count(self) -> int:
        return int(self.engagement.sum())

    def validate(self) -> None:
        errors: list[str] = []
        _check_symmetric_01(self.blue_manoeuvre, "blue manoeuvre network", errors)
        _check_symmetric_01(self.red_manoeuvre, "red manoeuvre network", errors)
        e = self.engagement
        if e.ndim != 2 or e.shape != (self.n_blue, self.n_red):
            errors.append(
                f"engagement matrix shape {e.shape} does not match "
                f"({self.n_blue}, {self.n_red})"
            )
        elif not np.isin(e, (0, 1)).all():
            errors.append("engagement matrix must contain only 0/1 entries")
        if errors:
            raise ConfigError("; ".join(errors))

    def copy(self) -> "Topology":
        return Topology(
            self.blue_manoeuvre.copy(),
            self.red_manoeuvre.copy(),
            self.engagement.copy(),
        )

    def blue_edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(np.triu(self.blue_manoeuvre))]

    def red_edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(np.triu(self.red_manoeuvre))]

    def engagement_edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(m)) for i, m in np.argwhere(self.engagement)]

    def to_dict(self) -> dict:
        return {
            "n_blue": self.n_blue,
            "n_red": self.n_red,
            "blue_edges": [list(e) for e in self.blue_edges()],
            "red_edges": [list(e) for e in self.red_edges()],
            "engagement_edges": [list(e) for e in self.engagement_edges()],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @staticmethod
    def from_dict(data: dict) -> "Topology":
        try:
            nb, nr = int(data["n_blue"]), int(data["n_red"])
            blue = np.zeros((nb, nb), dtype=np.int8)
            red = np.zeros((nr, nr), dtype=np.int8)
            eng = np.zeros((nb, nr), dtype=np.int8)
            for i, j in data.get("blue_edges", []):
                blue[i, j] = blue[j, i] = 1
            for i, j in data.get("red_edges", []):
                red[i, j] = red[j, i] = 1
            for i, m in data.get("engagement_edges", []):
                eng[i, m] = 1
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed topology data: {exc}") from exc
        topo = Topology(blue, red, eng)
        topo.validate()
        return topo

    @staticmethod
    def from_json(text: str) -> "Topology":
        return Topology.from_dict(json.loads(text))


@dataclass(frozen=True)
class BattleConfig:
    """Rates, regularisers, and integration parameters.

    kappa_*: kill-rates; gamma_*: manoeuvre (transfer) rates.
    eps_theta: width of the smoothed drop-out gate. eps_delta:
    regulariser in the transfer weight 1/(engaged adversary strength +
    eps_delta); doubles as the standing force a non-engaged node
    retains. theta_floor: shift of the transfer gate (transfers stop
    once a node falls to this level). term_tol: convergence threshold
    on the max-norm of the vector field; 0 disables the convergence
    exit.
    """

    kappa_B: float = 1.0
    kappa_R: float = 1.0
    gamma_B: float = 1.0
    gamma_R: float = 1.0
    eps_theta: float = 1e-3
    eps_delta: float = 1.0
    theta_floor: float = 0.0
    dt: float = 0.01
    t_max: float = 200.0
    term_tol: float = 1e-6

    def validate(self) -> None:
        errors = []
        for name in ("kappa_B", "kappa_R", "gamma_B", "gamma_R"):
            if getattr(self, name) < 0:
                errors.append(f"{name} must be >= 0")
        for name in ("eps_theta", "eps_delta", "dt"):
            if getattr(self, name) <= 0:
                errors.append(f"{name} must be > 0")
        if self.t_max <= 0:
            errors.append("t_max must be > 0")
        if self.term_tol < 0:
            errors.append("term_tol must be >= 0")
        if errors:
            raise ConfigError("; ".join(errors))

    def with_overrides(self, **kwargs) -> "BattleConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ScenarioSpec:
    """A complete battle setup: networks, rates, and initial forces."""

    topology: Topology
    config: BattleConfig
    initial: ForceState

    def validate(self) -> None:
        self.topology.validate()
        self.config.validate()
        if self.initial.n_blue != self.topology.n_blue:
            raise ConfigError(
                f"initial blue force has {self.initial.n_blue} entries for "
                f"{self.topology.n_blue} blue nodes"
            )
        if self.initial.n_red != self.topology.n_red:
            raise ConfigError(
                f"initial red force has {self.initial.n_red} entries for "
                f"{self.topology.n_red} red nodes"
            )


def manoeuvre_weight(
    node: int, side: Side, state: ForceState, topo: Topology, config: BattleConfig
) -> float:
    """Transfer weight of one node: 1 / (engaged adversary strength + eps).

    The strength sum is floored at zero so that adversaries resting
    slightly below zero (at the smoothed cutoff) cannot flip the sign
    of the weight.
    """
    if side == Side.BLUE:
        if not 0 <= node < topo.n_blue:
            raise ConfigError(f"blue node {node} out of range")
        s = float(topo.engagement[node, :].astype(float) @ state.red)
    else:
        if not 0 <= node < topo.n_red:
            raise ConfigError(f"red node {node} out of range")
        s = float(topo.engagement[:, node].astype(float) @ state.blue)
    return 1.0 / (max(s, 0.0) + config.eps_delta)


def rhs(
    state: ForceState, topo: Topology, config: BattleConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Time derivative (dB, dR) of the full networked battle model.

    Each side's derivative is a manoeuvre term, moving resource along
    its own network from high to low weighted strength, plus an
    attrition term in which every attacker spreads its fire evenly
    over its engagement targets. Pure function of its inputs.
    """
    from . import _kernels

    if state.n_blue != topo.n_blue or state.n_red != topo.n_red:
        raise ConfigError(
            f"state dimensions ({state.n_blue}, {state.n_red}) do not match "
            f"topology ({topo.n_blue}, {topo.n_red})"
        )
    ws = _kernels.Workspace.build(topo)
    dB, dR, _, _ = ws.rhs(state.blue, state.red, config)
    return dB, dR
