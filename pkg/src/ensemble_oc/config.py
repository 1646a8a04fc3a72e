"""Run configuration: JSON parsing, validation and normalised round-trip."""

from __future__ import annotations

import inspect
import json
from dataclasses import dataclass, field

from .exceptions import InputError
from .gamma import GammaSweepConfig
from .measures import DiscreteMeasure, ThetaDistribution, empirical_measure, quadrature_measure
from .problem import EnsembleProblem
from .solvers import SOLVERS
from .verify import SamplingBox

SCHEMA_VERSION = 1

SWEEP_DEFAULTS = {"k_grid": [16, 64, 256, 1024], "n_seeds": 20, "reference_nodes": 64,
                  "value_tol": 0.02, "minimiser_tol": 0.05}


def _solver_options(solver: dict) -> dict:
    kind = solver.get("kind", "nelder_mead")
    if kind not in SOLVERS:
        raise InputError(f"unknown solver kind {kind!r}; known: {sorted(SOLVERS)}")
    options = {k: v for k, v in solver.items() if k != "kind"}
    accepted = set(inspect.signature(SOLVERS[kind]).parameters) - {"problem", "mu"}
    unknown = set(options) - accepted
    if unknown:
        raise InputError(f"solver {kind!r} does not take option(s) {sorted(unknown)}")
    return options


@dataclass
class RunConfig:
    problem: EnsembleProblem
    theta: ThetaDistribution | None = None
    measure: dict | None = None
    solver: dict = field(default_factory=lambda: {"kind": "nelder_mead"})
    sweep: dict = field(default_factory=lambda: dict(SWEEP_DEFAULTS))
    check: dict | None = None
    seed: int | None = None
    require_checks: bool = False
    output_dir: str | None = None
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, cfg: dict) -> "RunConfig":
        if not isinstance(cfg, dict):
            raise InputError("config must be a JSON object")
        version = cfg.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise InputError(f"unsupported schema_version {version!r} (supported: {SCHEMA_VERSION})")
        problem = EnsembleProblem.from_config(cfg)
        theta = cfg.get("theta")
        theta = None if theta is None else ThetaDistribution.from_dict(theta)
        if theta is not None and theta.dimension != problem.system.theta_space.dimension:
            raise InputError(f"theta distribution has dimension {theta.dimension}, "
                             f"system expects {problem.system.theta_space.dimension}")
        solver = dict(cfg.get("solver") or {"kind": "nelder_mead"})
        solver.setdefault("kind", "nelder_mead")
        _solver_options(solver)
        sweep = dict(SWEEP_DEFAULTS)
        sweep.update(cfg.get("sweep") or {})
        unknown = set(sweep) - set(SWEEP_DEFAULTS)
        if unknown:
            raise InputError(f"unknown sweep option(s) {sorted(unknown)}")
        check = cfg.get("check")
        if check is not None:
            check = dict(check)
            if "box" not in check:
                raise InputError("'check' section needs a 'box'")
            SamplingBox.from_dict(check["box"])
        measure = cfg.get("measure")
        if measure is not None and measure.get("kind") not in ("empirical", "quadrature", "distribution"):
            raise InputError(f"unknown measure kind {measure.get('kind')!r}")
        seed = cfg.get("seed")
        if (measure or {}).get("kind") == "empirical" and seed is None:
            raise InputError("'seed' is required when the run draws random samples")
        return cls(problem, theta, measure, solver, sweep, check,
                   None if seed is None else int(seed), bool(cfg.get("require_checks", False)),
                   cfg.get("output_dir"), version)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read config {path!r}: {exc.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {"schema_version": self.schema_version}
        out.update(self.problem.to_config())
        if self.theta is not None:
            out["theta"] = self.theta.to_dict()
        if self.measure is not None:
            out["measure"] = dict(self.measure)
        out["solver"] = dict(self.solver)
        out["sweep"] = dict(self.sweep)
        if self.check is not None:
            out["check"] = dict(self.check)
        if self.seed is not None:
            out["seed"] = self.seed
        out["require_checks"] = self.require_checks
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        return out

    # ------------------------------------------------------------ builders

    @property
    def solver_kind(self) -> str:
        return self.solver.get("kind", "nelder_mead")

    def solver_options(self) -> dict:
        options = _solver_options(self.solver)
        if self.solver_kind == "nelder_mead" and "seed" not in options and self.seed is not None:
            options["seed"] = self.seed
        return options

    def build_measure(self) -> DiscreteMeasure:
        if self.theta is None:
            raise InputError("config has no 'theta' section")
        kind = (self.measure or {}).get("kind", "distribution")
        if kind == "distribution":
            if self.theta.kind != "finite":
                raise InputError("a continuous theta distribution needs a 'measure' section "
                                 "(empirical with k, or quadrature with nodes_per_dim)")
            return DiscreteMeasure(self.theta.atoms, self.theta.weights)
        if kind == "empirical":
            if "k" not in self.measure:
                raise InputError("empirical measure needs 'k'")
            return empirical_measure(self.theta, int(self.measure["k"]), self.seed, 0)
        return quadrature_measure(self.theta, int(self.measure.get("nodes_per_dim", 64)))

    def check_box(self) -> SamplingBox | None:
        return None if self.check is None else SamplingBox.from_dict(self.check["box"])

    def sweep_config(self, threads: int = 1, k_grid=None, gate: bool = True) -> GammaSweepConfig:
        if self.theta is None:
            raise InputError("gamma sweep needs a 'theta' section")
        if self.seed is None:
            raise InputError("'seed' is required for a gamma sweep")
        sw = self.sweep
        return GammaSweepConfig(
            problem=self.problem, dist=self.theta,
            k_grid=tuple(k_grid if k_grid is not None else sw["k_grid"]),
            n_seeds=sw["n_seeds"], reference_nodes=sw["reference_nodes"],
            solver=self.solver_kind, solver_options=self.solver_options(),
            value_tol=float(sw["value_tol"]), minimiser_tol=float(sw["minimiser_tol"]),
            seed=self.seed, threads=threads,
            check_box=self.check_box() if gate else None,
            check_samples=int((self.check or {}).get("n_samples", 10_000)),
        )
