"""Two-group mean-field reduction and its closed-form battle predictions.

Red splits its force of n nodes into groups of sizes n1 and n2 whose
members attack k1 and k2 Blue targets each; every Blue node returns
fire at its attackers. Treating each group by a representative node
yields a three-variable system with an exact quadratic invariant, a
closed-form optimal split, and victory conditions. These serve as the
analytic oracle for the full network engine.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BattleConfig, ConfigError, ForceState, ScenarioSpec, Topology


@dataclass(frozen=True)
class MeanFieldSpec:
    n: int
    n1: int
    k1: float
    k2: float
    kappa_R: float = 1.0
    kappa_B: float = 1.0
    R0: float = 1.0
    B0: float = 1.0

    @property
    def n2(self) -> int:
        return self.n - self.n1

    @property
    def total_attacks(self) -> float:
        return self.n1 * self.k1 + self.n2 * self.k2

    def validate(self) -> None:
        if self.n < 1 or not 0 <= self.n1 <= self.n:
            raise ConfigError(f"invalid group sizes n={self.n}, n1={self.n1}")
        if not (1 <= self.k1 <= self.n and 1 <= self.k2 <= self.n):
            raise ConfigError("attack counts must lie in [1, n]")
        if min(self.kappa_R, self.kappa_B) < 0 or min(self.R0, self.B0) < 0:
            raise ConfigError("rates and initial forces must be non-negative")
        if self.total_attacks <= 0:
            raise ConfigError("total attack count must be positive")


def meanfield_rhs(
    R1: float, R2: float, B: float, spec: MeanFieldSpec
) -> tuple[float, float, float]:
    """Derivatives (dR1, dR2, dB) of the two-group system."""
    spec.validate()
    n = spec.n
    L = spec.total_attacks
    L1 = spec.n1 * spec.k1
    L2 = spec.n2 * spec.k2
    dR1 = -spec.kappa_B * spec.k1 * B * n / L
    dR2 = -spec.kappa_B * spec.k2 * B * n / L
    dB = (
        -spec.kappa_R * (L1 / n) * R1 / spec.k1
        - spec.kappa_R * (L2 / n) * R2 / spec.k2
    )
    return dR1, dR2, dB


def meanfield_invariant(R1: float, R2: float, B: float, spec: MeanFieldSpec) -> float:
    """Conserved quadratic: -kR (L/n^2)(n1/k1 R1^2 + n2/k2 R2^2) + kB B^2."""
    L = spec.total_attacks
    return (
        -spec.kappa_R
        * (L / spec.n**2)
        * (spec.n1 / spec.k1 * R1**2 + spec.n2 / spec.k2 * R2**2)
        + spec.kappa_B * B**2
    )


def split_objective(k1: float, k2: float, n1: float, n: int) -> float:
    """Red's payoff surface f = (L/n^2)(n1/k1 + n2/k2) over split choices."""
    n2 = n - n1
    L = n1 * k1 + n2 * k2
    return (L / n**2) * (n1 / k1 + n2 / k2)


@dataclass(frozen=True)
class OptimalSplit:
    n1: int
    k1: int
    k2: int
    exact: bool  # False when n is odd and the even split was floored


def optimal_split(n: int) -> OptimalSplit:
    """The payoff-maximising split: half the force attacking one target
    each, the other half attacking everything."""
    if n < 2:
        raise ConfigError(f"need at least 2 nodes, got {n}")
    return OptimalSplit(n1=n // 2, k1=1, k2=n, exact=n % 2 == 0)


def victory_factor(n: int) -> float:
    """Force multiplier of the optimal split: 1/2 + n/4 + 1/(4n)."""
    return 0.5 + n / 4.0 + 1.0 / (4.0 * n)


def victory_margin(
    n: int,
    kappa_R: float,
    kappa_B: float,
    R0: float,
    B0: float,
    optimized: bool,
) -> float:
    """Signed margin of Red's victory condition; positive predicts Red wins.

    With the optimal split the effective Red strength is multiplied by
    victory_factor(n); with a uniform (non-optimised) engagement the
    condition reduces to the plain square law.
    """
    if n < 1:
        raise ConfigError(f"need at least 1 node, got {n}")
    factor = victory_factor(n) if optimized else 1.0
    return kappa_R * R0**2 * factor - kappa_B * B0**2


def integrate_meanfield(
    spec: MeanFieldSpec,
    dt: float = 0.01,
    t_max: float = 50.0,
    stop_level: float = 1e-3,
) -> np.ndarray:
    """RK4 trajectory of the raw mean-field system.

    The reduced equations carry no drop-out gates, so integration stops
    once any level falls to stop_level (beyond that the model is
    meaningless). Returns rows (t, R1, R2, B).
    """
    spec.validate()

    def f(y):
        return np.array(meanfield_rhs(y[0], y[1], y[2], spec))

    y = np.array([spec.R0, spec.R0, spec.B0], dtype=float)
    rows = [(0.0, *y)]
    t = 0.0
    n_steps = int(round(t_max / dt))
    for _ in range(n_steps):
        if y.min() <= stop_level:
            break
        k1 = f(y)
        k2 = f(y + dt / 2 * k1)
        k3 = f(y + dt / 2 * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
        rows.append((t, *y))
    return np.array(rows)


def balanced_engagement(n: int, n1: int, k1: int, k2: int) -> np.ndarray:
    """Bipartite 0/1 engagement matrix realising the two-group pattern.

    Red nodes 0..n1-1 attack k1 Blue targets each, the rest k2 each;
    targets are assigned to the currently least-attacked Blue nodes so
    per-Blue attacker counts stay within one of each other (exactly
    equal per group whenever n divides the group's link count).
    """
    if not (0 <= n1 <= n and 1 <= k1 <= n and 1 <= k2 <= n):
        raise ConfigError("infeasible two-group engagement request")
    eng = np.zeros((n, n), dtype=np.int8)  # [blue, red]
    load = np.zeros(n, dtype=np.int64)
    for m in range(n):
        k = k1 if m < n1 else k2
        order = np.lexsort((np.arange(n), load))
        targets = order[:k]
        eng[targets, m] = 1
        load[targets] += 1
    return eng


def build_engine_scenario(
    spec: MeanFieldSpec,
    eps_theta: float = 1e-3,
    dt: float = 0.01,
    t_max: float = 200.0,
) -> ScenarioSpec:
    """Full-network scenario equivalent to the mean-field setup.

    No manoeuvre links on either side; the engagement realises the
    two-group attack pattern with balanced per-Blue attacker counts.
    """
    spec.validate()
    n = spec.n
    eng = balanced_engagement(n, spec.n1, int(spec.k1), int(spec.k2))
    topo = Topology(
        np.zeros((n, n), dtype=np.int8), np.zeros((n, n), dtype=np.int8), eng
    )
    config = BattleConfig(
        kappa_B=spec.kappa_B,
        kappa_R=spec.kappa_R,
        eps_theta=eps_theta,
        dt=dt,
        t_max=t_max,
    )
    initial = ForceState(
        blue=np.full(n, spec.B0), red=np.full(n, spec.R0)
    )
    return ScenarioSpec(topo, config, initial)
