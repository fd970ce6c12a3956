"""Experiment drivers: case studies, critical fire-power, sweeps, heatmaps.

Everything here is deterministic given the seeds in the call; grid
cells and optimisation replicas are independent jobs that may be
distributed over worker processes and are merged by key, so the worker
count never changes results.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from .integrator import TerminationReason, final_state
from .metrics import SACRIFICIAL_DEGREE, StructuralMetrics, compute_metrics
from .model import (
    BattleConfig,
    ConfigError,
    ForceState,
    ScenarioSpec,
    Side,
    Topology,
    total_force,
)
from .optimizer import MoveSet, UtilityParams, optimize

_CONFIG_PARAMS = ("kappa_R", "kappa_B", "gamma_R", "gamma_B")


class CaseStudy(IntEnum):
    """Reserve postures of the two-against-four engagement."""

    EQUAL_PLUS_RESERVES = 1  # combat units matched, Red holds extra reserves
    EQUAL_TOTAL = 2          # equal totals, Red trades combat strength for reserves
    EXTRA_RESERVES = 3       # Red combat units weaker but fully backed by reserves


@dataclass(frozen=True)
class CaseStudySpec:
    case_id: CaseStudy
    f_R: float
    kappa_R: float

    def validate(self) -> None:
        if self.f_R <= 0:
            raise ConfigError(f"f_R must be positive, got {self.f_R}")
        if self.kappa_R < 0:
            raise ConfigError(f"kappa_R must be >= 0, got {self.kappa_R}")


#: Reserve wiring: reserves 2 and 3 back combat units 0 and 1, and share
#: a link with each other.
CASE_STUDY_RED_EDGES = ((0, 2), (1, 3), (2, 3))


def build_case_study(
    spec: CaseStudySpec,
    red_edges: tuple[tuple[int, int], ...] = CASE_STUDY_RED_EDGES,
    config_overrides: dict | None = None,
) -> ScenarioSpec:
    """Two Blue vs four Red: combat pairs 0-0 and 1-1, reserves 2 and 3."""
    spec.validate()
    blue_adj = np.zeros((2, 2), dtype=np.int8)
    red_adj = np.zeros((4, 4), dtype=np.int8)
    for i, j in red_edges:
        red_adj[i, j] = red_adj[j, i] = 1
    engagement = np.zeros((2, 4), dtype=np.int8)
    engagement[0, 0] = 1
    engagement[1, 1] = 1
    topo = Topology(blue_adj, red_adj, engagement)

    half = spec.f_R / 2.0
    if spec.case_id == CaseStudy.EQUAL_PLUS_RESERVES:
        red0 = [0.5, 0.5, half, half]
    elif spec.case_id == CaseStudy.EQUAL_TOTAL:
        reserve = max((1.0 - spec.f_R) / 2.0, 0.0)
        red0 = [half, half, reserve, reserve]
    elif spec.case_id == CaseStudy.EXTRA_RESERVES:
        red0 = [half, half, half, half]
    else:
        raise ConfigError(f"unknown case id {spec.case_id}")

    config = BattleConfig(kappa_B=1.0, kappa_R=spec.kappa_R)
    if config_overrides:
        config = config.with_overrides(**config_overrides)
    initial = ForceState(blue=np.full(2, 0.5), red=np.array(red0))
    return ScenarioSpec(topo, config, initial)


class Winner(str, Enum):
    BLUE = "Blue"
    RED = "Red"
    STALEMATE = "stalemate"


def winner(spec: ScenarioSpec) -> Winner:
    """Which side destroyed the other's combat force; stalemate if neither."""
    _, reason = final_state(spec)
    if reason == TerminationReason.ANNIHILATION_BLUE:
        return Winner.RED
    if reason == TerminationReason.ANNIHILATION_RED:
        return Winner.BLUE
    return Winner.STALEMATE


def critical_kappa(
    case_id: CaseStudy,
    f_R: float,
    bracket: tuple[float, float] = (0.05, 8.0),
    tol: float = 1e-3,
    config_overrides: dict | None = None,
) -> float:
    """Bisect the Red kill-rate at which the case-study outcome flips."""
    lo, hi = bracket
    if not lo < hi:
        raise ConfigError(f"degenerate bracket {bracket}")

    def outcome(kappa_R: float) -> Winner:
        spec = build_case_study(
            CaseStudySpec(case_id, f_R, kappa_R), config_overrides=config_overrides
        )
        return winner(spec)

    w_lo = outcome(lo)
    w_hi = outcome(hi)
    if w_lo == w_hi:
        raise ConfigError(
            f"bracket {bracket} does not straddle the flip: both ends give {w_lo.value}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if outcome(mid) == w_hi:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def critical_curve(
    case_id: CaseStudy,
    f_R_values,
    bracket: tuple[float, float] = (0.05, 8.0),
    tol: float = 1e-3,
) -> list[tuple[float, float]]:
    """(f_R, critical kappa_R) pairs over a grid of reserve fractions."""
    return [
        (float(f), critical_kappa(case_id, float(f), bracket=bracket, tol=tol))
        for f in f_R_values
    ]


@dataclass(frozen=True)
class HeatmapSpec:
    """Axes and grid of a battle-outcome scan over two rate parameters."""

    x_param: str
    y_param: str
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    x_resolution: int = 21
    y_resolution: int = 21
    overrides: dict = field(default_factory=dict)

    def validate(self) -> None:
        for p in (self.x_param, self.y_param):
            if p not in _CONFIG_PARAMS:
                raise ConfigError(
                    f"unknown heatmap parameter {p!r}; choose from {_CONFIG_PARAMS}"
                )
        if self.x_param == self.y_param:
            raise ConfigError("heatmap axes must differ")
        if self.x_resolution < 2 or self.y_resolution < 2:
            raise ConfigError("grid resolutions must be >= 2")
        for key in self.overrides:
            if key not in BattleConfig.__dataclass_fields__:
                raise ConfigError(f"unknown config override {key!r}")

    def x_values(self) -> np.ndarray:
        return np.linspace(*self.x_range, self.x_resolution)

    def y_values(self) -> np.ndarray:
        return np.linspace(*self.y_range, self.y_resolution)


@dataclass(frozen=True)
class HeatmapResult:
    spec: HeatmapSpec
    x_values: np.ndarray
    y_values: np.ndarray
    values: np.ndarray  # shape (y_resolution, x_resolution)


def _heatmap_cell(args) -> tuple[tuple[int, int], float]:
    key, topo, config, initial = args
    terminal, _ = final_state(ScenarioSpec(topo, config, initial))
    _, red_mean = total_force(terminal, Side.RED)
    _, blue_mean = total_force(terminal, Side.BLUE)
    return key, red_mean - blue_mean


def heatmap(
    spec: HeatmapSpec,
    topo: Topology,
    base_config: BattleConfig | None = None,
    initial: ForceState | None = None,
    workers: int = 1,
) -> HeatmapResult:
    """Terminal red-minus-blue mean force over the parameter grid."""
    spec.validate()
    base_config = base_config or BattleConfig()
    if initial is None:
        initial = ForceState(blue=np.ones(topo.n_blue), red=np.ones(topo.n_red))

    xs = spec.x_values()
    ys = spec.y_values()
    jobs = []
    for iy, yv in enumerate(ys):
        for ix, xv in enumerate(xs):
            config = base_config.with_overrides(**spec.overrides).with_overrides(
                **{spec.x_param: float(xv), spec.y_param: float(yv)}
            )
            jobs.append(((iy, ix), topo, config, initial))

    values = np.empty((ys.shape[0], xs.shape[0]))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, value in pool.map(_heatmap_cell, jobs, chunksize=8):
                values[key] = value
    else:
        for job in jobs:
            key, value = _heatmap_cell(job)
            values[key] = value
    return HeatmapResult(spec=spec, x_values=xs, y_values=ys, values=values)


def _replica_seed(base_seed: int, group_index: int, replica: int) -> int:
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(group_index, replica))
    return int(ss.generate_state(1)[0])


def _sweep_job(args) -> tuple[tuple[int, int], dict, float]:
    (key, spec, params, moves, iterations, seed, k_threshold) = args
    run = optimize(spec, params, moves, iterations, seed)
    metrics = compute_metrics(
        run.best_topology, run.best_terminal, params, k_threshold=k_threshold
    )
    row = metrics.to_row()
    row["seed"] = seed
    return key, row, run.best_utility


def _run_replica_groups(
    groups: list[tuple[dict, ScenarioSpec, UtilityParams]],
    moves: MoveSet,
    iterations: int,
    replicas: int,
    top_k: int,
    base_seed: int,
    workers: int,
    k_threshold: int,
) -> tuple[list[dict], list[dict]]:
    """Optimise `replicas` runs per group; returns (top-k averages, per-run rows)."""
    if replicas < top_k:
        raise ConfigError(f"replicas ({replicas}) must be >= top_k ({top_k})")
    jobs = []
    for gi, (label, spec, params) in enumerate(groups):
        for r in range(replicas):
            seed = _replica_seed(base_seed, gi, r)
            jobs.append(((gi, r), spec, params, moves, iterations, seed, k_threshold))

    results: dict[tuple[int, int], tuple[dict, float]] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, row, best_u in pool.map(_sweep_job, jobs):
                results[key] = (row, best_u)
    else:
        for job in jobs:
            key, row, best_u = _sweep_job(job)
            results[key] = (row, best_u)

    numeric_fields = [f for f in StructuralMetrics.__dataclass_fields__]
    rows_avg = []
    rows_replicas = []
    for gi, (label, _, _) in enumerate(groups):
        replica_rows = [results[(gi, r)] for r in range(replicas)]
        for row, _ in replica_rows:
            rows_replicas.append({**label, **row})
        # rank by utility, ties broken by replica order
        order = sorted(range(replicas), key=lambda r: (-replica_rows[r][1], r))
        top = [replica_rows[r][0] for r in order[:top_k]]
        out = dict(label)
        for name in numeric_fields:
            vals = np.array([t[name] for t in top], dtype=float)
            out[name] = float(np.nanmean(vals)) if not np.all(np.isnan(vals)) else float("nan")
        out["n_runs"] = replicas
        out["top_k"] = top_k
        rows_avg.append(out)
    return rows_avg, rows_replicas


def lambda_sweep(
    base: ScenarioSpec,
    lambdas,
    replicas: int,
    iterations: int,
    moves: MoveSet | None = None,
    top_k: int = 5,
    base_seed: int = 0,
    workers: int = 1,
    k_threshold: int = SACRIFICIAL_DEGREE,
    include_replicas: bool = False,
):
    """Optimised-structure statistics across the offence-defence trade-off.

    Returns the top-k averaged rows per lambda, or the pair
    (averages, per-replica rows) when include_replicas is set.
    """
    moves = moves or MoveSet()
    _, blue_mean0 = total_force(base.initial, Side.BLUE)
    groups = [
        ({"lam": float(lam)}, base, UtilityParams(lam=float(lam), initial_blue_mean=blue_mean0))
        for lam in lambdas
    ]
    avg, reps = _run_replica_groups(
        groups, moves, iterations, replicas, top_k, base_seed, workers, k_threshold
    )
    return (avg, reps) if include_replicas else avg


def kappa_sweep(
    base: ScenarioSpec,
    kappa_R_values,
    lam: float,
    replicas: int,
    iterations: int,
    moves: MoveSet | None = None,
    top_k: int = 5,
    base_seed: int = 0,
    workers: int = 1,
    k_threshold: int = SACRIFICIAL_DEGREE,
    include_replicas: bool = False,
):
    """Optimised-structure statistics across Red's fire-power."""
    moves = moves or MoveSet()
    _, blue_mean0 = total_force(base.initial, Side.BLUE)
    params = UtilityParams(lam=lam, initial_blue_mean=blue_mean0)
    groups = []
    for kr in kappa_R_values:
        spec = ScenarioSpec(
            base.topology,
            base.config.with_overrides(kappa_R=float(kr)),
            base.initial,
        )
        groups.append(({"kappa_R": float(kr), "lam": lam}, spec, params))
    avg, reps = _run_replica_groups(
        groups, moves, iterations, replicas, top_k, base_seed, workers, k_threshold
    )
    return (avg, reps) if include_replicas else avg


def write_heatmap_csv(result: HeatmapResult, path) -> None:
    """Heatmap as long-form CSV (x, y, value)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([result.spec.x_param, result.spec.y_param, "red_minus_blue"])
        for iy, yv in enumerate(result.y_values):
            for ix, xv in enumerate(result.x_values):
                writer.writerow(
                    [f"{xv:.10g}", f"{yv:.10g}", f"{result.values[iy, ix]:.12g}"]
                )


def write_critical_curve_csv(rows: list[tuple[float, float]], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["f_R", "kappa_R_star"])
        for f_R, kappa in rows:
            writer.writerow([f"{f_R:.10g}", f"{kappa:.10g}"])


def write_sweep_csv(rows: list[dict], path) -> None:
    """Sweep rows as CSV; columns are the union of row keys, key columns first."""
    if not rows:
        raise ConfigError("no sweep rows to write")
    lead = [k for k in ("lam", "kappa_R", "seed") if k in rows[0]]
    rest = [k for k in rows[0] if k not in lead]
    header = lead + rest
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([row.get(k, "") for k in header])
