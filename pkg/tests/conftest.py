import numpy as np
import pytest

from ensemble_oc.costs import CoercivityWitness, CostSpec, make_input_penalty, make_state_cost
from ensemble_oc.comparison import PowerLaw
from ensemble_oc.measures import DiscreteMeasure
from ensemble_oc.problem import EnsembleProblem
from ensemble_oc.systems import InitialStateMap, make_system


def scalar_problem(horizon=1, ell_u=None, ell0=None, terminal=None, x0=1.0, moduli=None,
                   coercivity=None):
    """Scalar-linear system x+ = theta * x + u with config-style cost sections."""
    ell_u = {"kind": "power", "lambda": 1.0, "q": 2, "p": 2} if ell_u is None else ell_u
    terminal = {"kind": "quadratic", "P": [[1.0]]} if terminal is None else terminal
    system = make_system("scalar_linear", moduli=moduli)
    cost = CostSpec(make_input_penalty(ell_u), make_state_cost(ell0),
                    make_state_cost(terminal, terminal=True))
    return EnsembleProblem(system, InitialStateMap.constant([x0]), cost, horizon, coercivity)


def random_lq_problem(rng):
    """Seeded random linear-quadratic ensemble inside the oracle-test envelope:
    state dim <= 3, input dim <= 2, horizon <= 5, at most 10 atoms."""
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, 3))
    p = int(rng.integers(1, 3))
    N = int(rng.integers(1, 6))
    n_atoms = int(rng.integers(1, 11))
    A0 = rng.normal(size=(n, n))
    A0 *= 0.9 / max(1e-9, np.abs(np.linalg.eigvals(A0)).max())
    params = {"A0": A0.tolist(), "B0": rng.normal(size=(n, m)).tolist(),
              "A": [(0.2 * rng.normal(size=(n, n))).tolist() for _ in range(p)],
              "B": [(0.2 * rng.normal(size=(n, m))).tolist() for _ in range(p)]}
    system = make_system("matrix_linear", params, dims={"theta": p})
    G = rng.normal(size=(n, n))
    H = rng.normal(size=(n, n))
    cost = CostSpec(
        make_input_penalty({"kind": "power", "lambda": float(rng.uniform(0.1, 2.0)), "q": 2, "p": 2}),
        make_state_cost({"kind": "quadratic_tracking", "Q": (G @ G.T / n).tolist(),
                         "xref": rng.normal(size=n).tolist()}),
        make_state_cost({"kind": "quadratic", "P": (H @ H.T / n).tolist()}, terminal=True),
    )
    x0 = InitialStateMap("affine", P=rng.normal(size=(n, p)), c=rng.normal(size=n))
    problem = EnsembleProblem(system, x0, cost, N)
    atoms = rng.uniform(-1.0, 1.0, size=(n_atoms, p))
    weights = rng.uniform(0.1, 1.0, size=n_atoms)
    weights /= weights.sum()
    return problem, DiscreteMeasure(atoms, weights)


@pytest.fixture
def lq_scalar():
    return scalar_problem(horizon=1)


@pytest.fixture
def two_atom():
    return DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])


@pytest.fixture
def square_witness():
    return CoercivityWitness(PowerLaw(1.0, 2.0))


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion.

    Usage: ``with criterion(3, "minimiser convergence"): ...``; the line is
    printed in the terminal summary and to stdout.
    """
    from contextlib import contextmanager

    @contextmanager
    def record(number, text):
        try:
            yield
        except BaseException:
            line = f"FAIL criterion {number}: {text}"
            ACCEPTANCE_LINES.append(line)
            print(line)
            raise
        line = f"PASS criterion {number}: {text}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
