"""Optimal control of parameter-dependent ensembles of discrete-time systems."""

from .comparison import (IDENTITY, Composition, InputScaling, PowerLaw, Sum, eval_k_infinity,
                         propagate_cost_moduli, propagate_state_moduli)
from .config import RunConfig
from .costs import (CoercivityWitness, CostSpec, averaged_cost, stage_cost, terminal_cost,
                    total_cost, total_cost_without_input_penalty)
from .estimator import EnsembleOptimalControl
from .exceptions import (AssumptionCheckFailed, EnsembleOCError, InputError, NumericError,
                         UnsupportedError)
from .gamma import GammaSweepConfig, liminf_probe, recovery_sequence_check, run_gamma_sweep
from .measures import (DiscreteMeasure, ThetaDistribution, empirical_measure, mixture,
                       quadrature_measure, tail_mass_diagnostic, wasserstein1_1d)
from .problem import EnsembleProblem
from .solvers import SolveReport, solve
from .spaces import SpaceDescriptor
from .systems import InitialStateMap, make_system, rollout
from .verify import CheckReport, SamplingBox, run_checks

__all__ = [
    "AssumptionCheckFailed",
    "averaged_cost",
    "CheckReport",
    "CoercivityWitness",
    "Composition",
    "CostSpec",
    "DiscreteMeasure",
    "empirical_measure",
    "EnsembleOCError",
    "EnsembleOptimalControl",
    "EnsembleProblem",
    "eval_k_infinity",
    "GammaSweepConfig",
    "IDENTITY",
    "InitialStateMap",
    "InputError",
    "InputScaling",
    "liminf_probe",
    "make_system",
    "mixture",
    "NumericError",
    "PowerLaw",
    "propagate_cost_moduli",
    "propagate_state_moduli",
    "quadrature_measure",
    "recovery_sequence_check",
    "rollout",
    "run_checks",
    "run_gamma_sweep",
    "RunConfig",
    "SamplingBox",
    "solve",
    "SolveReport",
    "SpaceDescriptor",
    "stage_cost",
    "Sum",
    "tail_mass_diagnostic",
    "terminal_cost",
    "ThetaDistribution",
    "total_cost",
    "total_cost_without_input_penalty",
    "UnsupportedError",
    "wasserstein1_1d",
]

__version__ = "0.1.0"
