"""Command-line entry point: simulate, optimize, sweep, casestudy, meanfield.

Every run reads a JSON config (plus a few flag overrides), writes its
data files into an output directory, and drops a run-summary JSON next
to them containing the fully resolved configuration, seeds, timings,
and termination information, so any artifact can be regenerated from
its summary alone.

Exit codes: 0 success, 2 invalid config, 3 numerical abort, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .integrator import integrate, write_trajectory_csv
from .meanfield import (
    MeanFieldSpec,
    integrate_meanfield,
    meanfield_invariant,
    optimal_split,
    split_objective,
    victory_factor,
    victory_margin,
)
from .metrics import SACRIFICIAL_DEGREE, compute_metrics
from .model import (
    BattleConfig,
    ConfigError,
    ForceState,
    NumericalAbort,
    ScenarioSpec,
    Side,
    Topology,
    total_force,
)
from .optimizer import (
    MoveSet,
    UtilityParams,
    optimize,
    seed_topology,
    write_trace_csv,
)
from .scenarios import (
    CaseStudy,
    CaseStudySpec,
    HeatmapSpec,
    build_case_study,
    critical_curve,
    critical_kappa,
    heatmap,
    kappa_sweep,
    lambda_sweep,
    winner,
    write_critical_curve_csv,
    write_heatmap_csv,
    write_sweep_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    config_path: str | None
    output_dir: str
    seed: int
    workers: int
    fmt: str = "csv"


def _collect(errors: list[str], condition: bool, message: str) -> None:
    if not condition:
        errors.append(message)


def _parse_battle_config(raw: dict, errors: list[str]) -> BattleConfig:
    known = BattleConfig.__dataclass_fields__
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            errors.append(f"config: unknown parameter {key!r}")
            continue
        if not isinstance(value, (int, float)):
            errors.append(f"config: parameter {key!r} must be a number")
            continue
        kwargs[key] = float(value)
    config = BattleConfig(**kwargs)
    try:
        config.validate()
    except ConfigError as exc:
        errors.append(f"config: {exc}")
    return config


def _parse_topology(raw: dict, seed: int, errors: list[str]) -> Topology | None:
    if "random" in raw:
        params = raw["random"]
        try:
            n = int(params["n"])
            lm = int(params["l_manoeuvre"])
            le = int(params["l_engage"])
        except (KeyError, TypeError, ValueError):
            errors.append(
                "topology.random needs integer fields n, l_manoeuvre, l_engage"
            )
            return None
        rng = np.random.default_rng(params.get("seed", seed))
        try:
            return seed_topology(n, lm, le, rng, n_red=params.get("n_red"))
        except ConfigError as exc:
            errors.append(f"topology.random: {exc}")
            return None
    try:
        return Topology.from_dict(raw)
    except ConfigError as exc:
        errors.append(f"topology: {exc}")
        return None


def _parse_initial(raw, topo: Topology | None, errors: list[str]) -> ForceState | None:
    if topo is None:
        return None
    if raw is None or raw == "ones":
        return ForceState(blue=np.ones(topo.n_blue), red=np.ones(topo.n_red))
    try:
        state = ForceState(
            blue=np.asarray(raw["blue"], dtype=float),
            red=np.asarray(raw["red"], dtype=float),
        )
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        errors.append(f"initial: {exc}")
        return None
    return state


def validate_config(raw_text: str, seed: int = 0) -> tuple[ScenarioSpec | None, list[str]]:
    """Parse and fully validate a scenario config, aggregating all errors."""
    errors: list[str] = []
    try:
        raw = json.loads(raw_text)
    except json.JSONDecodeError as exc:
        return None, [f"invalid JSON: {exc}"]
    if not isinstance(raw, dict) or not raw:
        return None, ["config must be a non-empty JSON object"]

    topo = _parse_topology(raw.get("topology", {}), seed, errors)
    config = _parse_battle_config(raw.get("config", {}), errors)
    initial = _parse_initial(raw.get("initial"), topo, errors)

    if "lam" in raw:
        lam = raw["lam"]
        _collect(
            errors,
            isinstance(lam, (int, float)) and 0.0 <= lam <= 1.0,
            f"lam must be a number in [0, 1], got {lam!r}",
        )
    if "moves" in raw:
        try:
            MoveSet(**raw["moves"]).validate()
        except (TypeError, ConfigError) as exc:
            errors.append(f"moves: {exc}")

    if topo is None or initial is None:
        return None, errors
    spec = ScenarioSpec(topo, config, initial)
    try:
        spec.validate()
    except ConfigError as exc:
        errors.append(str(exc))
    if errors:
        return None, errors
    return spec, errors


def resolved_config_dict(spec: ScenarioSpec) -> dict:
    """Round-trippable form of a scenario: parse(dump(spec)) == spec."""
    return {
        "topology": spec.topology.to_dict(),
        "config": asdict(spec.config),
        "initial": {
            "blue": spec.initial.blue.tolist(),
            "red": spec.initial.red.tolist(),
        },
    }


def _write_summary(out_dir: str, payload: dict) -> str:
    path = os.path.join(out_dir, "run_summary.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=str)
        fh.write("\n")
    return path


def _base_summary(manifest: RunManifest, started: float) -> dict:
    return {
        "subcommand": manifest.subcommand,
        "version": __version__,
        "seed": manifest.seed,
        "workers": manifest.workers,
        "elapsed_seconds": round(time.time() - started, 3),
    }


def _load_config_text(manifest: RunManifest) -> str:
    if manifest.config_path is None:
        raise ConfigError("this subcommand requires --config")
    with open(manifest.config_path) as fh:
        return fh.read()


def _load_config_json(manifest: RunManifest) -> dict:
    try:
        raw = json.loads(_load_config_text(manifest))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw


def _cmd_simulate(manifest: RunManifest, args) -> dict:
    spec, errors = validate_config(_load_config_text(manifest), seed=manifest.seed)
    if errors:
        raise ConfigError("; ".join(errors))
    traj = integrate(spec)
    out_csv = os.path.join(manifest.output_dir, "trajectory.csv")
    write_trajectory_csv(traj, out_csv)
    _, blue_mean = total_force(traj.terminal, Side.BLUE)
    _, red_mean = total_force(traj.terminal, Side.RED)
    return {
        "resolved_config": resolved_config_dict(spec),
        "artifacts": {"trajectory": out_csv},
        "termination_reason": traj.termination_reason.value,
        "terminal_time": traj.terminal.time,
        "terminal_blue_mean": blue_mean,
        "terminal_red_mean": red_mean,
    }


def _cmd_optimize(manifest: RunManifest, args) -> dict:
    raw = _load_config_json(manifest)
    spec, errors = validate_config(json.dumps(raw), seed=manifest.seed)
    if errors:
        raise ConfigError("; ".join(errors))
    lam = raw.get("lam", 0.5)
    iterations = int(raw.get("iterations", 10_000))
    moves = MoveSet(**raw.get("moves", {}))
    _, blue_mean0 = total_force(spec.initial, Side.BLUE)
    params = UtilityParams(lam=float(lam), initial_blue_mean=blue_mean0)
    run = optimize(spec, params, moves, iterations, seed=manifest.seed)

    trace_csv = os.path.join(manifest.output_dir, "trace.csv")
    write_trace_csv(run, trace_csv)
    topo_json = os.path.join(manifest.output_dir, "best_topology.json")
    run.best_topology.to_json(topo_json)
    metrics = compute_metrics(run.best_topology, run.best_terminal, params)
    return {
        "resolved_config": {
            **resolved_config_dict(spec),
            "lam": float(lam),
            "iterations": iterations,
            "moves": asdict(moves),
        },
        "artifacts": {"trace": trace_csv, "best_topology": topo_json},
        "seed_utility": run.seed_utility,
        "best_utility": run.best_utility,
        "accepted_moves": int(run.trace["accepted"].sum()),
        "metrics": metrics.to_row(),
        "terminal_per_node": {
            "blue": run.best_terminal.blue.tolist(),
            "red": run.best_terminal.red.tolist(),
        },
    }


def _cmd_sweep(manifest: RunManifest, args) -> dict:
    raw = _load_config_json(manifest)
    sweep_type = raw.get("type")
    if sweep_type not in ("lambda", "kappa_r", "heatmap"):
        raise ConfigError(
            f"sweep type must be one of lambda, kappa_r, heatmap; got {sweep_type!r}"
        )
    spec, errors = validate_config(json.dumps(raw), seed=manifest.seed)
    if errors:
        raise ConfigError("; ".join(errors))

    if sweep_type == "heatmap":
        hm_raw = raw.get("heatmap", {})
        try:
            hm_spec = HeatmapSpec(
                x_param=hm_raw["x_param"],
                y_param=hm_raw["y_param"],
                x_range=tuple(hm_raw["x_range"]),
                y_range=tuple(hm_raw["y_range"]),
                x_resolution=int(hm_raw.get("x_resolution", 21)),
                y_resolution=int(hm_raw.get("y_resolution", 21)),
                overrides=hm_raw.get("overrides", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"heatmap: {exc}") from exc
        result = heatmap(
            hm_spec, spec.topology, base_config=spec.config,
            initial=spec.initial, workers=manifest.workers,
        )
        out = os.path.join(manifest.output_dir, "heatmap.csv")
        write_heatmap_csv(result, out)
        return {
            "resolved_config": {**resolved_config_dict(spec), "heatmap": hm_raw},
            "artifacts": {"heatmap": out},
        }

    replicas = int(raw.get("replicas", 5))
    iterations = int(raw.get("iterations", 10_000))
    top_k = int(raw.get("top_k", min(5, replicas)))
    moves = MoveSet(**raw.get("moves", {}))
    k_threshold = int(raw.get("k_threshold", SACRIFICIAL_DEGREE))
    if sweep_type == "lambda":
        lambdas = raw.get("lambdas", [0.1, 0.3, 0.5, 0.7, 0.9])
        rows, replica_rows = lambda_sweep(
            spec, lambdas, replicas, iterations, moves=moves, top_k=top_k,
            base_seed=manifest.seed, workers=manifest.workers,
            k_threshold=k_threshold, include_replicas=True,
        )
        out = os.path.join(manifest.output_dir, "lambda_sweep.csv")
    else:
        kappas = raw.get("kappa_R_values", [0.1, 0.3, 0.5, 0.7, 1.0])
        rows, replica_rows = kappa_sweep(
            spec, kappas, float(raw.get("lam", 0.5)), replicas, iterations,
            moves=moves, top_k=top_k, base_seed=manifest.seed,
            workers=manifest.workers, k_threshold=k_threshold,
            include_replicas=True,
        )
        out = os.path.join(manifest.output_dir, "kappa_sweep.csv")
    write_sweep_csv(rows, out)
    out_replicas = os.path.join(manifest.output_dir, "sweep_replicas.csv")
    write_sweep_csv(replica_rows, out_replicas)
    return {
        "resolved_config": {
            **resolved_config_dict(spec),
            "type": sweep_type,
            "replicas": replicas,
            "iterations": iterations,
            "top_k": top_k,
            "moves": asdict(moves),
        },
        "artifacts": {"sweep": out, "replicas": out_replicas},
        "rows": rows,
    }


def _cmd_casestudy(manifest: RunManifest, args) -> dict:
    case = CaseStudy(args.case)
    if args.critical_curve:
        f_values = args.critical_curve
        rows = critical_curve(case, f_values, tol=args.tol)
        out = os.path.join(manifest.output_dir, "critical_curve.csv")
        write_critical_curve_csv(rows, out)
        return {
            "resolved_config": {"case": int(case), "f_R_values": f_values, "tol": args.tol},
            "artifacts": {"critical_curve": out},
            "curve": [{"f_R": f, "kappa_R_star": k} for f, k in rows],
        }
    if args.critical:
        kappa_star = critical_kappa(
            case, args.f_r, bracket=tuple(args.bracket), tol=args.tol
        )
        return {
            "resolved_config": {
                "case": int(case), "f_R": args.f_r,
                "bracket": list(args.bracket), "tol": args.tol,
            },
            "artifacts": {},
            "kappa_R_star": kappa_star,
        }

    spec = build_case_study(CaseStudySpec(case, args.f_r, args.kappa_r))
    traj = integrate(spec)
    out_csv = os.path.join(manifest.output_dir, "trajectory.csv")
    write_trajectory_csv(traj, out_csv)
    eng_deg_blue = spec.topology.engagement.sum(axis=1)
    eng_deg_red = spec.topology.engagement.sum(axis=0)
    return {
        "resolved_config": {
            **resolved_config_dict(spec),
            "case": int(case), "f_R": args.f_r, "kappa_R": args.kappa_r,
        },
        "artifacts": {"trajectory": out_csv},
        "winner": winner(spec).value,
        "termination_reason": traj.termination_reason.value,
        "engagement_degree": {
            "blue": eng_deg_blue.tolist(),
            "red": eng_deg_red.tolist(),
        },
    }


def _cmd_meanfield(manifest: RunManifest, args) -> dict:
    n = args.n
    split = optimal_split(n)
    rows = []
    for optimized in (False, True):
        margin = victory_margin(
            n, args.kappa_r, args.kappa_b, args.r0, args.b0, optimized
        )
        rows.append(
            {
                "optimized": optimized,
                "margin": margin,
                "predicted_winner": "Red" if margin > 0 else "Blue",
            }
        )
    payload = {
        "resolved_config": {
            "n": n, "kappa_R": args.kappa_r, "kappa_B": args.kappa_b,
            "R0": args.r0, "B0": args.b0,
        },
        "artifacts": {},
        "optimal_split": {"n1": split.n1, "k1": split.k1, "k2": split.k2,
                          "exact": split.exact},
        "victory_factor": victory_factor(n),
        "victory_conditions": rows,
    }
    if args.surface:
        out = os.path.join(manifest.output_dir, "split_surface.csv")
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n1", "k1", "k2", "payoff"])
            for n1 in range(0, n + 1):
                for k1 in range(1, n + 1):
                    for k2 in range(1, n + 1):
                        writer.writerow(
                            [n1, k1, k2, f"{split_objective(k1, k2, n1, n):.10g}"]
                        )
        payload["artifacts"]["split_surface"] = out
    if args.trajectory:
        mf = MeanFieldSpec(
            n=n, n1=split.n1, k1=split.k1, k2=split.k2,
            kappa_R=args.kappa_r, kappa_B=args.kappa_b, R0=args.r0, B0=args.b0,
        )
        path = os.path.join(manifest.output_dir, "meanfield_trajectory.csv")
        rows_arr = integrate_meanfield(mf)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "R1", "R2", "B", "invariant"])
            for t, r1, r2, b in rows_arr:
                writer.writerow(
                    [f"{t:.6g}", f"{r1:.10g}", f"{r2:.10g}", f"{b:.10g}",
                     f"{meanfield_invariant(r1, r2, b, mf):.10g}"]
                )
        payload["artifacts"]["meanfield_trajectory"] = path
    return payload


_COMMANDS = {
    "simulate": _cmd_simulate,
    "optimize": _cmd_optimize,
    "sweep": _cmd_sweep,
    "casestudy": _cmd_casestudy,
    "meanfield": _cmd_meanfield,
}


def run(manifest: RunManifest, args) -> int:
    """Dispatch a manifest; returns the process exit code."""
    started = time.time()
    try:
        os.makedirs(manifest.output_dir, exist_ok=True)
        payload = _COMMANDS[manifest.subcommand](manifest, args)
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"error [numerical]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_IO
    payload.update(_base_summary(manifest, started))
    try:
        summary_path = _write_summary(manifest.output_dir, payload)
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_IO
    print(summary_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lanchnet",
        description="Networked battle dynamics: simulation, optimisation, sweeps.",
    )
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=None)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_sim = sub.add_parser("simulate", help="integrate one scenario")
    p_sim.add_argument("--config", required=True)

    p_opt = sub.add_parser("optimize", help="hill-climb Red's networks")
    p_opt.add_argument("--config", required=True)

    p_sweep = sub.add_parser("sweep", help="lambda/kappa sweeps and heatmaps")
    p_sweep.add_argument("--config", required=True)

    p_case = sub.add_parser("casestudy", help="two-vs-four reserve case study")
    p_case.add_argument("--case", type=int, choices=[1, 2, 3], required=True)
    p_case.add_argument("--f-r", type=float, default=0.8, dest="f_r")
    p_case.add_argument("--kappa-r", type=float, default=0.92, dest="kappa_r")
    p_case.add_argument("--critical", action="store_true",
                        help="bisect the critical kappa_R instead of simulating")
    p_case.add_argument("--bracket", type=float, nargs=2, default=(0.05, 8.0))
    p_case.add_argument("--tol", type=float, default=1e-3)
    p_case.add_argument("--critical-curve", type=float, nargs="+", default=None,
                        help="f_R grid; writes the critical curve CSV")

    p_mf = sub.add_parser("meanfield", help="two-group analytic predictions")
    p_mf.add_argument("--n", type=int, required=True)
    p_mf.add_argument("--kappa-r", type=float, default=1.0, dest="kappa_r")
    p_mf.add_argument("--kappa-b", type=float, default=1.0, dest="kappa_b")
    p_mf.add_argument("--r0", type=float, default=1.0)
    p_mf.add_argument("--b0", type=float, default=1.0)
    p_mf.add_argument("--surface", action="store_true",
                      help="write the full split payoff surface CSV")
    p_mf.add_argument("--trajectory", action="store_true",
                      help="integrate the reduced system at the optimal split")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = args.out or os.environ.get("LANCHNET_OUT") or "runs"
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("LANCHNET_WORKERS", "1"))
    manifest = RunManifest(
        subcommand=args.subcommand,
        config_path=getattr(args, "config", None),
        output_dir=out_dir,
        seed=args.seed,
        workers=workers,
    )
    return run(manifest, args)


if __name__ == "__main__":
    sys.exit(main())
