"""End-to-end acceptance checks, one per release criterion.

Each test prints a single PASS/FAIL line (visible with pytest -s or in
captured output on failure) and asserts the criterion at its stated
tolerance. The optimiser-based checks run at desk scale and are the
slow part of the suite; they share session-scoped run batches.
"""
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from lanchnet import (
    BattleConfig,
    ForceState,
    MoveSet,
    ScenarioSpec,
    TerminationReason,
    UtilityParams,
    integrate,
    optimize,
    seed_topology,
)
from lanchnet.meanfield import (
    MeanFieldSpec,
    build_engine_scenario,
    integrate_meanfield,
    meanfield_invariant,
    optimal_split,
    split_objective,
    victory_factor,
)
from lanchnet.metrics import compute_metrics
from lanchnet.scenarios import (
    CaseStudy,
    CaseStudySpec,
    HeatmapSpec,
    Winner,
    build_case_study,
    critical_kappa,
    heatmap,
    winner,
)

WORKERS = 2


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {name}: {status}  {detail}")
    assert ok, f"{name}: {detail}"


# --- manoeuvre conservation -------------------------------------------------

def test_manoeuvre_conservation():
    """Manoeuvre-only networks conserve total force to <1e-9 over t=100."""
    worst = 0.0
    for seed, n in [(0, 10), (1, 30), (2, 50)]:
        rng = np.random.default_rng(seed)
        links = 2 * n
        topo_full = seed_topology(n, links, 0, rng)
        initial = ForceState(blue=rng.random(n), red=rng.random(n))
        config = BattleConfig(t_max=100.0, term_tol=0.0)
        traj = integrate(ScenarioSpec(topo_full, config, initial))
        drift = max(
            abs(traj.terminal.blue.sum() - initial.blue.sum()),
            abs(traj.terminal.red.sum() - initial.red.sum()),
        )
        worst = max(worst, drift)
    report("manoeuvre-conservation", worst < 1e-9, f"max |drift| = {worst:.2e}")


# --- square-law oracle --------------------------------------------------------

def test_square_law_oracle():
    """1v1 battles match the closed-form survivor within 2e-3, right winner."""
    topo = seed_topology(1, 0, 1, np.random.default_rng(0))
    worst = 0.0
    all_correct = True
    for kappa_R in (0.5, 0.75, 1.25, 1.5, 2.0):
        for R0 in (0.5, 0.7, 0.9, 1.1, 1.3):
            invariant = kappa_R * R0**2 - 1.0  # kappa_B = B0 = 1
            expect_red = invariant > 0
            kappa_w = kappa_R if expect_red else 1.0
            survivor = math.sqrt(abs(invariant) / kappa_w)
            spec = ScenarioSpec(
                topo,
                BattleConfig(kappa_B=1.0, kappa_R=kappa_R),
                ForceState(blue=[1.0], red=[R0]),
            )
            traj = integrate(spec, record_every=0)
            if expect_red:
                correct = traj.termination_reason == TerminationReason.ANNIHILATION_BLUE
                got = traj.terminal.red.mean()
            else:
                correct = traj.termination_reason == TerminationReason.ANNIHILATION_RED
                got = traj.terminal.blue.mean()
            all_correct &= correct
            worst = max(worst, abs(got - survivor))
    report(
        "square-law-oracle",
        all_correct and worst < 2e-3,
        f"winners correct = {all_correct}, max survivor error = {worst:.2e}",
    )


# --- case-study flip ----------------------------------------------------------

def test_case_study_flip():
    """Blue wins at kappa_R=0.91, Red at 0.92; bisection inside [0.90, 0.93]."""
    w91 = winner(build_case_study(CaseStudySpec(CaseStudy.EXTRA_RESERVES, 0.8, 0.91)))
    w92 = winner(build_case_study(CaseStudySpec(CaseStudy.EXTRA_RESERVES, 0.8, 0.92)))
    kappa_star = critical_kappa(
        CaseStudy.EXTRA_RESERVES, 0.8, bracket=(0.8, 1.0), tol=1e-3
    )
    ok = w91 == Winner.BLUE and w92 == Winner.RED and 0.90 <= kappa_star <= 0.93
    report(
        "case-study-flip",
        ok,
        f"w(0.91)={w91.value}, w(0.92)={w92.value}, kappa* = {kappa_star:.4f}",
    )


# --- critical-curve shape -----------------------------------------------------

def test_critical_curve_shape():
    """Equal-total case needs f_R>1 for advantage; reserve cases cross into
    the weaker-fire, weaker-units region."""
    threshold_crossings = {}
    curve2 = {}
    for f_R in (0.8, 0.9, 1.0, 1.1, 1.2):
        curve2[f_R] = critical_kappa(
            CaseStudy.EQUAL_TOTAL, f_R, bracket=(0.2, 6.0), tol=5e-3
        )
    crossing = next((f for f in sorted(curve2) if curve2[f] < 1.0), None)
    case2_ok = curve2[1.0] > 1.0 and crossing is not None and crossing > 1.0

    case1_star = critical_kappa(
        CaseStudy.EQUAL_PLUS_RESERVES, 0.8, bracket=(0.2, 6.0), tol=5e-3
    )
    case3_star = critical_kappa(
        CaseStudy.EXTRA_RESERVES, 0.8, bracket=(0.2, 6.0), tol=5e-3
    )
    grey_ok = case1_star < 1.0 and case3_star < 1.0
    report(
        "critical-curve-shape",
        case2_ok and grey_ok,
        f"case2 kappa*(1.0)={curve2[1.0]:.3f}, first f with kappa*<1: {crossing}; "
        f"case1*(0.8)={case1_star:.3f}, case3*(0.8)={case3_star:.3f}",
    )


# --- desk-scale optimiser -----------------------------------------------------

DESK_N = 20
DESK_LINKS = 40
DESK_L_RB = 4
DESK_ITERATIONS = 10_000
DESK_SEEDS = (0, 1, 2, 3, 4)


def _desk_spec(seed: int, l_rb: int = DESK_L_RB) -> ScenarioSpec:
    rng = np.random.default_rng(seed)
    topo = seed_topology(DESK_N, DESK_LINKS, l_rb, rng)
    return ScenarioSpec(
        topo,
        BattleConfig(kappa_B=1.0, kappa_R=0.5, t_max=100.0),
        ForceState(blue=np.ones(DESK_N), red=np.ones(DESK_N)),
    )


def _desk_job(args):
    seed, lam, moves, iterations, l_rb = args
    run = optimize(
        _desk_spec(seed, l_rb), UtilityParams(lam=lam), moves, iterations, seed=seed
    )
    metrics = compute_metrics(
        run.best_topology, run.best_terminal, UtilityParams(lam=lam), k_threshold=5
    )
    accepted = run.trace["utility"][run.trace["accepted"]]
    strictly_increasing = bool(np.all(np.diff(accepted) > 0)) if accepted.size else True
    return seed, run.best_utility, metrics.to_row(), strictly_increasing


@pytest.fixture(scope="session")
def desk_runs():
    jobs = [(s, 0.5, MoveSet(), DESK_ITERATIONS, DESK_L_RB) for s in DESK_SEEDS]
    with ProcessPoolExecutor(max_workers=WORKERS) as pool:
        return list(pool.map(_desk_job, jobs))


def test_optimizer_improvement_desk_scale(desk_runs):
    """Strictly increasing accepted utilities; Red out-survives Blue in at
    least 4/5 seeds; Blue driven below 0.2 in the majority."""
    increasing = all(r[3] for r in desk_runs)
    red_beats_blue = sum(
        1 for r in desk_runs if r[2]["red_mean"] > r[2]["blue_mean"]
    )
    blue_low = sum(1 for r in desk_runs if r[2]["blue_mean"] < 0.2)
    ok = increasing and red_beats_blue >= 4 and blue_low >= 3
    detail = (
        f"monotone={increasing}, red>blue in {red_beats_blue}/5, "
        f"blue<0.2 in {blue_low}/5 "
        f"(blue means: {[round(r[2]['blue_mean'], 3) for r in desk_runs]})"
    )
    report("optimizer-desk-scale", ok, detail)


# --- lambda-transition --------------------------------------------------------

SWEEP_SEEDS = (0, 1, 2, 3, 4, 5)
SWEEP_ITERATIONS = 20_000
SWEEP_L_RB = 10
SWEEP_TOP_K = 3
SWEEP_MOVES = MoveSet(0.5, 0.5, 0.0, 0.0, allow_link_count_change=False)


@pytest.fixture(scope="session")
def sweep_runs():
    jobs = [
        (s, lam, SWEEP_MOVES, SWEEP_ITERATIONS, SWEEP_L_RB)
        for lam in (0.5, 0.9)
        for s in SWEEP_SEEDS
    ]
    with ProcessPoolExecutor(max_workers=WORKERS) as pool:
        results = list(pool.map(_desk_job, jobs))
    half = len(SWEEP_SEEDS)
    return {0.5: results[:half], 0.9: results[half:]}


def _top_k_mean(rows, field, k=SWEEP_TOP_K):
    ranked = sorted(rows, key=lambda r: -r[1])[:k]
    return float(np.mean([r[2][field] for r in ranked]))


def test_lambda_transition(sweep_runs):
    """Sacrificial attackers fade and manoeuvre hubs grow as the trade-off
    moves from offence to defence (ordinal, top-k averaged)."""
    n_sac_05 = _top_k_mean(sweep_runs[0.5], "n_sacrificial")
    n_sac_09 = _top_k_mean(sweep_runs[0.9], "n_sacrificial")
    maxdeg_05 = _top_k_mean(sweep_runs[0.5], "max_red_manoeuvre_degree")
    maxdeg_09 = _top_k_mean(sweep_runs[0.9], "max_red_manoeuvre_degree")
    ok = n_sac_05 > n_sac_09 and maxdeg_09 > maxdeg_05
    report(
        "lambda-transition",
        ok,
        f"n_sac(0.5)={n_sac_05:.2f} vs n_sac(0.9)={n_sac_09:.2f}; "
        f"maxdeg(0.9)={maxdeg_09:.2f} vs maxdeg(0.5)={maxdeg_05:.2f}",
    )


# --- random-network heatmap diagonal -------------------------------------------

def test_heatmap_diagonal():
    """Terminal advantage follows the larger kill-rate away from the diagonal."""
    spec = HeatmapSpec("kappa_R", "kappa_B", (0.0, 2.0), (0.0, 2.0), 11, 11)
    grids = []
    for seed in range(3):
        rng = np.random.default_rng(100 + seed)
        topo = seed_topology(50, 100, 10, rng)
        result = heatmap(spec, topo, BattleConfig(t_max=100.0), workers=WORKERS)
        grids.append(result.values)
    mean_grid = np.mean(grids, axis=0)
    xs, ys = result.x_values, result.y_values
    violations = [
        (float(kr), float(kb))
        for iy, kb in enumerate(ys)
        for ix, kr in enumerate(xs)
        if abs(kr - kb) > 0.1 and np.sign(mean_grid[iy, ix]) != np.sign(kr - kb)
    ]
    report(
        "heatmap-diagonal",
        not violations,
        f"{len(violations)} sign violations on the 11x11 grid",
    )


# --- mean-field suite -----------------------------------------------------------

def test_mean_field_suite():
    """Invariant conservation, exhaustive split check, exact victory factor,
    and engine agreement with the margin prediction on a kappa grid."""
    # invariant drift along reduced trajectories
    drift = 0.0
    for spec in (
        MeanFieldSpec(n=10, n1=5, k1=2, k2=4, kappa_R=0.5, kappa_B=1.0),
        MeanFieldSpec(n=50, n1=25, k1=1, k2=50, kappa_R=0.5, kappa_B=1.0),
    ):
        rows = integrate_meanfield(spec, t_max=40.0)
        inv0 = meanfield_invariant(rows[0, 1], rows[0, 2], rows[0, 3], spec)
        drift = max(
            drift,
            max(
                abs(meanfield_invariant(r1, r2, b, spec) - inv0)
                for _, r1, r2, b in rows
            ),
        )
    invariant_ok = drift < 1e-8

    # exhaustive enumeration agreement for even n <= 12
    split_ok = True
    for n in (4, 6, 8, 10, 12):
        best = max(
            split_objective(k1, k2, n1, n)
            for n1 in range(n + 1)
            for k1 in range(1, n + 1)
            for k2 in range(1, n + 1)
        )
        s = optimal_split(n)
        split_ok &= math.isclose(
            split_objective(s.k1, s.k2, s.n1, n), best, rel_tol=1e-12
        )

    factor_ok = victory_factor(50) == 13.005

    # engine winner vs margin sign at the integer-feasible sacrificial split
    n, n1, k1, k2 = 10, 5, 2, 10
    f = split_objective(k1, k2, n1, n)
    grid_ok = True
    for kappa_R in (0.1, 0.3, 0.5, 0.7, 0.9):
        for kappa_B in (0.25, 0.5, 1.0, 2.0, 4.0):
            margin = kappa_R * f - kappa_B
            spec = MeanFieldSpec(
                n=n, n1=n1, k1=k1, k2=k2, kappa_R=kappa_R, kappa_B=kappa_B
            )
            traj = integrate(build_engine_scenario(spec), record_every=0)
            if margin > 0:
                grid_ok &= (
                    traj.termination_reason == TerminationReason.ANNIHILATION_BLUE
                )
            else:
                grid_ok &= (
                    traj.termination_reason == TerminationReason.ANNIHILATION_RED
                )

    ok = invariant_ok and split_ok and factor_ok and grid_ok
    report(
        "mean-field-suite",
        ok,
        f"drift={drift:.2e}, splits={split_ok}, factor={victory_factor(50)}, "
        f"kappa-grid={grid_ok}",
    )
