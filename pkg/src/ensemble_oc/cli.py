"""Command-line entry point.

Exit codes: 0 success; 1 a check failed or a sweep did not converge;
2 malformed input or an unsupported request; 3 the solver stopped without
meeting its tolerance; 4 a checker-gated run was refused.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .costs import total_costs_batch
from .exceptions import AssumptionCheckFailed, InputError, NumericError, UnsupportedError
from .gamma import run_gamma_sweep
from .io import atomic_write_text, control_csv, dumps_json, read_control_csv, trajectory_csv
from .config import RunConfig
from .solvers import TOLERANCE_MET, solve
from .systems import rollout
from .verify import PASS, FAIL, run_checks

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_REFUSED = 0, 1, 2, 3, 4


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("ENSEMBLE_OC_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"ENSEMBLE_OC_THREADS must be an integer, got {env!r}") from None
    return 1


def _load(args) -> RunConfig:
    if not args.config:
        raise InputError("--config is required")
    cfg = RunConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _out_dir(args, cfg) -> str:
    return args.out or cfg.output_dir or "."


def _print(obj):
    sys.stdout.write(dumps_json(obj))


def cmd_rollout(args) -> int:
    cfg = _load(args)
    problem = cfg.problem
    if args.theta is not None:
        try:
            theta = np.array([float(v) for v in args.theta.split(",")])
        except ValueError:
            raise InputError(f"--theta must be comma-separated numbers, got {args.theta!r}") from None
    elif cfg.theta is not None and cfg.theta.kind == "finite" and len(cfg.theta.atoms) == 1:
        theta = cfg.theta.atoms[0]
    else:
        raise InputError("--theta is required unless the config has a single-atom theta")
    if not args.u:
        raise InputError("--u <csv-file> is required")
    u = read_control_csv(args.u, problem.system.input_space.dimension)
    if u.shape[0] != problem.horizon:
        raise InputError(f"{args.u}: {u.shape[0]} control rows, horizon is {problem.horizon}")
    states = rollout(problem.system, problem.x0_map, u, theta)
    J, J0 = total_costs_batch(problem, u, theta[None, :])
    atomic_write_text(os.path.join(_out_dir(args, cfg), "trajectory.csv"), trajectory_csv(states))
    _print({"J_N": float(J[0]), "J_N0": float(J0[0])})
    return EXIT_OK


def _gate(cfg, args):
    box = cfg.check_box()
    if box is None:
        raise InputError("require_checks is set but the config has no 'check' section")
    n = int(cfg.check.get("n_samples", 10_000))
    reports = run_checks(cfg.problem, box, n, cfg.check.get("M"), seed=cfg.seed or 0)
    failing = [r for r in reports if r.status == FAIL]
    if failing:
        raise AssumptionCheckFailed(failing)


def cmd_solve(args) -> int:
    cfg = _load(args)
    if cfg.require_checks:
        _gate(cfg, args)
    mu = cfg.build_measure()
    report = solve(cfg.problem, mu, cfg.solver_kind, **cfg.solver_options())
    out = _out_dir(args, cfg)
    atomic_write_text(os.path.join(out, "report.json"), dumps_json(report.to_dict()))
    atomic_write_text(os.path.join(out, "u_star.csv"), control_csv(report.minimiser))
    _print({"value": report.value, "termination": report.termination,
            "minimiser": report.minimiser.tolist()})
    return EXIT_OK if report.termination == TOLERANCE_MET else EXIT_NOT_CONVERGED


def cmd_check(args) -> int:
    cfg = _load(args)
    box = cfg.check_box()
    if box is None:
        raise InputError("config has no 'check' section with a sampling box")
    n = int(cfg.check.get("n_samples", 10_000))
    reports = [r.to_dict() for r in run_checks(cfg.problem, box, n, cfg.check.get("M"),
                                               seed=cfg.seed or 0)]
    if args.out or cfg.output_dir:
        atomic_write_text(os.path.join(_out_dir(args, cfg), "checks.json"), dumps_json(reports))
    _print(reports)
    return EXIT_OK if all(r["status"] == PASS for r in reports) else EXIT_FAIL


def cmd_gamma_sweep(args) -> int:
    cfg = _load(args)
    k_grid = None
    if args.k_grid:
        try:
            k_grid = [int(k) for k in args.k_grid.split(",")]
        except ValueError:
            raise InputError(f"--k-grid must be comma-separated integers, got {args.k_grid!r}") from None
    sweep = cfg.sweep_config(threads=_threads(args), k_grid=k_grid)
    result = run_gamma_sweep(sweep)
    result.write(_out_dir(args, cfg))
    verdicts = result.summary["verdicts"]
    _print({"verdicts": verdicts, "median_value_gap": result.summary["median_value_gap"],
            "reference_value": result.reference_value})
    ok = (verdicts["value_converged"] and verdicts["minimiser_converged"] in (True, None)
          and verdicts["surrogate_consistent"])
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config (JSON)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, help="worker threads, 0 = auto "
                        "(fallback: ENSEMBLE_OC_THREADS)")
    parser = argparse.ArgumentParser(prog="ensemble-oc",
                                     description="Optimal control of ensembles of discrete-time systems")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("rollout", parents=[common], help="roll out one ensemble member")
    p.add_argument("--theta", help="ensemble index, comma-separated")
    p.add_argument("--u", help="control sequence CSV (N rows x input-dim columns)")
    p.set_defaults(func=cmd_rollout)
    p = sub.add_parser("solve", parents=[common], help="minimise the averaged cost")
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("check-assumptions", parents=[common], help="run the sampling checkers")
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("gamma-sweep", parents=[common], help="empirical-measure convergence sweep")
    p.add_argument("--k-grid", help="override sweep k values, comma-separated")
    p.set_defaults(func=cmd_gamma_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INPUT
    try:
        return args.func(args)
    except AssumptionCheckFailed as exc:
        _print([r.to_dict() for r in exc.reports])
        sys.stderr.write(f"refused: {exc}\n")
        return EXIT_REFUSED
    except (InputError, UnsupportedError, NumericError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
