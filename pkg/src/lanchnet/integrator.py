"""Fixed-step RK4 integration of battle scenarios with termination logic.

A battle ends in one of three ways: the vector field converges below
``term_tol`` with no combat decision, the time horizon ``t_max`` is
reached, or one side's combat force (its engaged nodes) is destroyed.
After a combat decision the integrator keeps running until the
survivors' manoeuvre flows have equalised, so terminal states reflect
the settled post-battle distribution of resource.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .model import (
    BattleConfig,
    ConfigError,
    ForceState,
    NumericalAbort,
    ScenarioSpec,
    Topology,
)

#: Default cap on recorded samples per trajectory.
MAX_SAMPLES = 2000

ANNIHILATION_TOL = _kernels.ANNIHILATION_TOL
EQUIL_TOL = _kernels.EQUIL_TOL
POST_ANNIHILATION_WINDOW = _kernels.POST_ANNIHILATION_WINDOW


class TerminationReason(str, Enum):
    CONVERGED = "converged"
    HORIZON = "horizon"
    ANNIHILATION_BLUE = "annihilation_blue"
    ANNIHILATION_RED = "annihilation_red"


_STATUS_TO_REASON = {
    _kernels.STATUS_CONVERGED: TerminationReason.CONVERGED,
    _kernels.STATUS_HORIZON: TerminationReason.HORIZON,
    _kernels.STATUS_BLUE_DEAD: TerminationReason.ANNIHILATION_BLUE,
    _kernels.STATUS_RED_DEAD: TerminationReason.ANNIHILATION_RED,
    # combat over with living non-combat survivors on both sides: no side
    # annihilated, the system simply settles
    _kernels.STATUS_MIXED_DEAD: TerminationReason.CONVERGED,
}


@dataclass(frozen=True)
class Trajectory:
    """Recorded battle time-series plus its terminal state."""

    sample_times: np.ndarray
    states: tuple[ForceState, ...]
    terminal: ForceState
    termination_reason: TerminationReason

    def blue_matrix(self) -> np.ndarray:
        return np.stack([s.blue for s in self.states])

    def red_matrix(self) -> np.ndarray:
        return np.stack([s.red for s in self.states])


def rk4_step(
    state: ForceState, topo: Topology, config: BattleConfig, dt: float | None = None
) -> ForceState:
    """One classical RK4 update of the battle state."""
    dt = config.dt if dt is None else dt
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    ws = _kernels.Workspace.build(topo)
    step_config = config.with_overrides(dt=dt)
    status, _, _, rec_B, rec_R, _ = ws.integrate(
        state.blue, state.red, step_config,
        n_steps=1, term_tol=0.0, equil_tol=0.0,
        annihilation_tol=-1e300, stride=1,
    )
    if status == _kernels.STATUS_NAN:
        raise NumericalAbort("RK4 step produced non-finite forces")
    return ForceState(blue=rec_B[-1], red=rec_R[-1], time=state.time + dt)


def integrate(
    spec: ScenarioSpec,
    record_every: int | None = None,
    annihilation_tol: float = ANNIHILATION_TOL,
    equil_tol: float | None = None,
    post_annihilation_window: float | None = None,
) -> Trajectory:
    """Integrate a scenario to termination.

    record_every: sampling stride in steps; None picks a stride keeping
    at most MAX_SAMPLES samples, 0 records only the initial and terminal
    states. The terminal state is always the last sample.
    post_annihilation_window: cap in time units on the settling phase
    after a combat decision (default POST_ANNIHILATION_WINDOW).
    """
    spec.validate()
    config = spec.config
    n_steps = max(1, int(np.ceil(config.t_max / config.dt - 1e-12)))
    if record_every is None:
        stride = max(1, int(np.ceil(n_steps / MAX_SAMPLES)))
    elif record_every == 0:
        stride = n_steps + 1
    else:
        stride = int(record_every)
        if stride < 1:
            raise ConfigError(f"record_every must be >= 0, got {record_every}")

    ws = _kernels.Workspace.build(spec.topology)
    effective_equil = max(config.term_tol, EQUIL_TOL) if equil_tol is None else equil_tol
    window_steps = None
    if post_annihilation_window is not None:
        window_steps = max(1, int(round(post_annihilation_window / config.dt)))
    status, steps, times, blues, reds, _ = ws.integrate(
        spec.initial.blue, spec.initial.red, config,
        n_steps=n_steps, term_tol=config.term_tol,
        equil_tol=effective_equil, annihilation_tol=annihilation_tol,
        stride=stride, post_window_steps=window_steps,
    )
    if status == _kernels.STATUS_NAN:
        raise NumericalAbort(
            f"integration blew up after {steps} steps "
            f"(t={steps * config.dt:.3f}); non-finite or unbounded forces"
        )

    t0 = spec.initial.time
    states = tuple(
        ForceState(blue=blues[k], red=reds[k], time=t0 + times[k])
        for k in range(times.shape[0])
    )
    return Trajectory(
        sample_times=t0 + times,
        states=states,
        terminal=states[-1],
        termination_reason=_STATUS_TO_REASON[status],
    )


def final_state(spec: ScenarioSpec, **kwargs) -> tuple[ForceState, TerminationReason]:
    """Terminal state and termination reason without storing the path."""
    traj = integrate(spec, record_every=0, **kwargs)
    return traj.terminal, traj.termination_reason


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Trajectory as CSV: time, B_1..B_N, R_1..R_M, one row per sample."""
    n_blue = traj.terminal.n_blue
    n_red = traj.terminal.n_red
    header = (
        ["time"]
        + [f"B_{i + 1}" for i in range(n_blue)]
        + [f"R_{m + 1}" for m in range(n_red)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for state in traj.states:
            writer.writerow(
                [f"{state.time:.10g}"]
                + [f"{v:.12g}" for v in state.blue]
                + [f"{v:.12g}" for v in state.red]
            )
