"""Command line interface.

Subcommands::

    nfisac solve       --config scenario.json --scheme srocr --seed 1 --out DIR
    nfisac sweep       --config experiment.json --out DIR [--timing]
    nfisac verify      --config scenario.json --solution solution.json --seed 1
    nfisac beampattern --config scenario.json --solution solution.json
                       --r-grid LO:HI:N --theta-grid LO:HI:N --out FILE

Exit codes: 0 success, 1 verification failed, 2 infeasible scenario,
3 relaxation stalled or hit its iteration limit, 4 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import baselines, experiments, verifier
from .config import ConfigError, parse_config, parse_scenario_config
from .metrics import BeamformingSolution
from .srocr import (
    InfeasibleScenario,
    SrocrError,
    SrocrIterationLimit,
    SrocrSettings,
    SrocrStalled,
    trace_csv,
)
from .sdp.solver import SolverSettings

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INFEASIBLE = 2
EXIT_STALLED = 3
EXIT_CONFIG = 4


def _mat_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m)
    return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}


def _mat_from_json(obj) -> np.ndarray:
    return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)


def solution_to_json(sol: BeamformingSolution) -> str:
    payload = {
        "objective_w": sol.objective,
        "comm_covariances": [_mat_to_json(w) for w in sol.comm_covariances],
        "sensing_covariance": _mat_to_json(sol.sensing_covariance),
        "slacks": sol.slacks.tolist(),
        "comm_vectors": (
            None
            if sol.comm_vectors is None
            else [_mat_to_json(v) for v in sol.comm_vectors]
        ),
    }
    return json.dumps(payload, indent=1)


def solution_from_json(text: str) -> BeamformingSolution:
    obj = json.loads(text)
    vectors = obj.get("comm_vectors")
    return BeamformingSolution(
        comm_covariances=[_mat_from_json(w) for w in obj["comm_covariances"]],
        sensing_covariance=_mat_from_json(obj["sensing_covariance"]),
        objective=float(obj["objective_w"]),
        slacks=np.asarray(obj["slacks"], dtype=float),
        comm_vectors=None if vectors is None else [
            _mat_from_json(v).reshape(-1) for v in vectors
        ],
    )


def _scenario_with_csi(cfg, scenario):
    """Scenario config dict with the materialized estimates pinned."""
    from . import config as config_mod
    import dataclasses

    out = dataclasses.replace(cfg)
    out.cus = [dataclasses.replace(c) for c in cfg.cus]
    out.eves = [dataclasses.replace(e) for e in cfg.eves]
    out.targets = [dataclasses.replace(t) for t in cfg.targets]
    for conf, ent in zip(
        (*out.cus, *out.eves, *out.targets),
        (*scenario.cus, *scenario.eves, *scenario.targets),
    ):
        conf.range_m = ent.position.range_m
        conf.angle_rad = ent.position.angle_rad
        conf.csi = config_mod.CsiConfig(
            np.real(ent.csi.vector).tolist(),
            np.imag(ent.csi.vector).tolist(),
            ent.csi.error_bound,
        )
    return config_mod.scenario_config_to_dict(out)


def _solver_settings(args) -> SolverSettings | None:
    if args.solver_tol is None:
        return None
    return SolverSettings(feas_tol=args.solver_tol, gap_tol=args.solver_tol)


def _grid(spec: str) -> np.ndarray:
    try:
        lo, hi, count = spec.split(":")
        return np.linspace(float(lo), float(hi), int(count))
    except ValueError as exc:
        raise ConfigError(f"bad grid spec '{spec}' (expected LO:HI:COUNT)") from exc


def cmd_solve(args) -> int:
    cfg = parse_scenario_config(Path(args.config).read_text())
    scenario = experiments.build_scenario(cfg, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kw = dict(solver_settings=_solver_settings(args))

    verify_against = scenario
    if args.scheme == "srocr":
        outcome = baselines.run(scenario, **kw)
        sol, trace, iterations = outcome.solution, outcome.trace, outcome.state.iteration
    elif args.scheme == "sdr":
        sol, _rank_report = baselines.sdr_solve(scenario, **kw)
        trace, iterations = None, 1
    elif args.scheme == "info_only":
        outcome = baselines.info_only_solve(scenario, **kw)
        sol, trace, iterations = outcome.solution, outcome.trace, outcome.state.iteration
    elif args.scheme == "perfect_csi":
        outcome = baselines.perfect_csi_solve(scenario, **kw)
        sol, trace, iterations = outcome.solution, outcome.trace, outcome.state.iteration
        verify_against = baselines.perfect_csi_scenario(scenario)
    elif args.scheme == "far_field":
        ff = baselines.far_field_solve(scenario, **kw)
        sol = ff.design.solution
        sol.objective = ff.evaluated_objective
        trace, iterations = ff.design.trace, ff.design.state.iteration
    else:
        raise ConfigError(f"unknown scheme '{args.scheme}'")
    report = verifier.validate(
        sol, verify_against, mc_samples=args.mc_samples, seed=args.seed
    )

    (out_dir / "solution.json").write_text(solution_to_json(sol))
    (out_dir / "scenario_used.json").write_text(
        json.dumps(_scenario_with_csi(cfg, scenario), indent=1)
    )
    if trace is not None:
        (out_dir / "trace.csv").write_text(trace_csv(trace))
    (out_dir / "report.txt").write_text(report.to_text())
    print(
        f"{args.scheme}: objective {sol.objective:.6e} W, iterations {iterations}, "
        f"verifier {'pass' if report.passed else 'FAIL'}"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = parse_config(Path(args.config).read_text())
    if args.mc_samples is not None:
        config.mc_samples = args.mc_samples
    if args.timing:
        config.record_walltime = True
    if args.solver_tol is not None:
        config.solver_overrides.setdefault("feas_tol", args.solver_tol)
        config.solver_overrides.setdefault("gap_tol", args.solver_tol)
    rows = experiments.run_sweep(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "results.csv"
    experiments.emit_csv(rows, path)
    failed = sum(1 for r in rows if r.status != "ok")
    print(f"wrote {path} ({len(rows)} rows, {failed} failed points)")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = parse_scenario_config(Path(args.config).read_text())
    scenario = experiments.build_scenario(cfg, args.seed)
    sol = solution_from_json(Path(args.solution).read_text())
    report = verifier.validate(sol, scenario, mc_samples=args.mc_samples, seed=args.seed)
    print(report.to_text(), end="")
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def cmd_beampattern(args) -> int:
    cfg = parse_scenario_config(Path(args.config).read_text())
    scenario = experiments.build_scenario(cfg, args.seed)
    sol = solution_from_json(Path(args.solution).read_text())
    peak = experiments.emit_beampattern(
        sol, scenario.geometry, _grid(args.r_grid), _grid(args.theta_grid), args.out
    )
    print(
        "wrote %s; peak %.6e W at r=%.4g m, theta=%.4g rad"
        % (args.out, peak[2], peak[0], peak[1])
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nfisac",
        description="Robust max-min beampattern beamforming for near-field "
        "secure ISAC systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one scenario with one scheme")
    p.add_argument("--config", required=True, help="scenario config (JSON)")
    p.add_argument(
        "--scheme",
        default="srocr",
        choices=[k.value for k in baselines.BaselineKind],
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mc-samples", type=int, default=10_000)
    p.add_argument("--solver-tol", type=float, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run a config-driven sweep")
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mc-samples", type=int, default=None)
    p.add_argument("--solver-tol", type=float, default=None)
    p.add_argument(
        "--timing",
        action="store_true",
        help="record wall-clock times (breaks byte-for-byte determinism)",
    )
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="certify a solution against a scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mc-samples", type=int, default=10_000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("beampattern", help="export a beampattern grid")
    p.add_argument("--config", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r-grid", required=True, help="LO:HI:COUNT in meters")
    p.add_argument("--theta-grid", required=True, help="LO:HI:COUNT in radians")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_beampattern)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleScenario as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SrocrStalled, SrocrIterationLimit) as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_STALLED
    except SrocrError as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_STALLED


if __name__ == "__main__":
    sys.exit(main())
