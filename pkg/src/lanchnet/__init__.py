"""Networked Lanchester battle dynamics and topology optimisation."""

__version__ = "0.1.0"

from .model import (
    BattleConfig,
    ConfigError,
    ForceState,
    NumericalAbort,
    ScenarioSpec,
    Side,
    Topology,
    manoeuvre_weight,
    rhs,
    smoothed_step,
    total_force,
)
from .integrator import (
    TerminationReason,
    Trajectory,
    final_state,
    integrate,
    rk4_step,
    write_trajectory_csv,
)
from .optimizer import (
    MoveSet,
    OptimizationRun,
    UtilityParams,
    optimize,
    propose_move,
    seed_topology,
    utility,
)
from .metrics import StructuralMetrics, compute_metrics, count_sacrificial

__all__ = [
    "BattleConfig",
    "ConfigError",
    "ForceState",
    "NumericalAbort",
    "ScenarioSpec",
    "Side",
    "Topology",
    "MoveSet",
    "OptimizationRun",
    "StructuralMetrics",
    "TerminationReason",
    "Trajectory",
    "UtilityParams",
    "compute_metrics",
    "count_sacrificial",
    "final_state",
    "integrate",
    "manoeuvre_weight",
    "optimize",
    "propose_move",
    "rhs",
    "rk4_step",
    "seed_topology",
    "smoothed_step",
    "total_force",
    "utility",
    "write_trajectory_csv",
    "__version__",
]
