"""Stage and terminal costs, per-system total cost and the measure average.

Stage costs split as ``l(x, u, theta) = l_u(u) + l0(x, u, theta)``. All
sums run in ascending step order and ascending atom order so results do not
depend on how per-atom work was scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .comparison import ComparisonFunction, from_json
from .exceptions import InputError, NumericError
from .spaces import SpaceDescriptor
from .systems import as_control_sequence, rollout_batch


# ---------------------------------------------------------------- input penalties

@dataclass(frozen=True, eq=False)
class PowerPenalty:
    """lam * ||u - v0||_p ** q."""

    lam: float = 1.0
    q: float = 2.0
    p: float = 2.0
    v0: np.ndarray | None = None

    kind = "power"
    continuous = True

    def __post_init__(self):
        if self.lam < 0 or self.q <= 0 or self.p < 1:
            raise InputError("power penalty needs lambda >= 0, q > 0, p >= 1")

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=float)
        d = u if self.v0 is None else u - self.v0
        return float(self.lam * np.linalg.norm(d, ord=self.p) ** self.q)

    def to_dict(self):
        out = {"kind": "power", "lambda": self.lam, "q": self.q, "p": self.p}
        if self.v0 is not None:
            out["v0"] = np.asarray(self.v0).tolist()
        return out


@dataclass(frozen=True, eq=False)
class ThresholdPenalty:
    """lam * 1{u != v0}; lower semicontinuous but not continuous."""

    lam: float = 1.0
    v0: np.ndarray | None = None

    kind = "threshold"
    continuous = False

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=float)
        anchor = np.zeros_like(u) if self.v0 is None else self.v0
        return float(self.lam) if np.any(u != anchor) else 0.0

    def to_dict(self):
        out = {"kind": "threshold", "lambda": self.lam}
        if self.v0 is not None:
            out["v0"] = np.asarray(self.v0).tolist()
        return out


@dataclass(frozen=True, eq=False)
class IndicatorAtAnchor:
    """lam * 1{u == v0}. Not lower semicontinuous; for checker tests only."""

    lam: float = 1.0
    v0: np.ndarray | None = None

    kind = "indicator_at_anchor"
    continuous = False

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=float)
        anchor = np.zeros_like(u) if self.v0 is None else self.v0
        return 0.0 if np.any(u != anchor) else float(self.lam)

    def to_dict(self):
        out = {"kind": "indicator_at_anchor", "lambda": self.lam}
        if self.v0 is not None:
            out["v0"] = np.asarray(self.v0).tolist()
        return out


@dataclass(frozen=True, eq=False)
class SumPenalty:
    terms: tuple

    kind = "sum"

    @property
    def continuous(self):
        return all(t.continuous for t in self.terms)

    def __call__(self, u) -> float:
        total = 0.0
        for t in self.terms:
            total += t(u)
        return total

    def to_dict(self):
        return {"kind": "sum", "terms": [t.to_dict() for t in self.terms]}


@dataclass(frozen=True, eq=False)
class ZeroPenalty:
    kind = "zero"
    continuous = True

    def __call__(self, u) -> float:
        return 0.0

    def to_dict(self):
        return {"kind": "zero"}


def make_input_penalty(cfg: dict | None):
    if not cfg or cfg.get("kind", "zero") == "zero":
        return ZeroPenalty()
    kind = cfg["kind"]
    v0 = cfg.get("v0")
    v0 = None if v0 is None else np.atleast_1d(np.asarray(v0, dtype=float))
    if kind == "power":
        return PowerPenalty(float(cfg.get("lambda", 1.0)), float(cfg.get("q", 2.0)),
                            float(cfg.get("p", 2.0)), v0)
    if kind == "threshold":
        return ThresholdPenalty(float(cfg.get("lambda", 1.0)), v0)
    if kind == "indicator_at_anchor":
        return IndicatorAtAnchor(float(cfg.get("lambda", 1.0)), v0)
    if kind == "sum":
        return SumPenalty(tuple(make_input_penalty(t) for t in cfg["terms"]))
    raise InputError(f"unknown ell_u kind {kind!r}")


# ---------------------------------------------------------------- state costs

@dataclass(frozen=True, eq=False)
class QuadraticTracking:
    """(x - xref(theta))^T Q (x - xref(theta)), xref(theta) = xref + R theta.

    Also used for the terminal cost ``x^T P x`` (``Q = P``, no reference).
    """

    Q: np.ndarray
    xref: np.ndarray | None = None
    R: np.ndarray | None = None
    kind: str = "quadratic_tracking"

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise InputError("quadratic weight must be square")
        if np.any(np.linalg.eigvalsh((Q + Q.T) / 2) < -1e-12):
            raise InputError("quadratic weight must be positive semidefinite")
        object.__setattr__(self, "Q", Q)
        if self.xref is not None:
            object.__setattr__(self, "xref", np.atleast_1d(np.asarray(self.xref, dtype=float)))
        if self.R is not None:
            object.__setattr__(self, "R", np.atleast_2d(np.asarray(self.R, dtype=float)))

    def reference(self, thetas) -> np.ndarray:
        n = self.Q.shape[0]
        ref = np.zeros((thetas.shape[0], n))
        if self.xref is not None:
            ref = ref + self.xref
        if self.R is not None:
            for j in range(self.R.shape[1]):
                ref = ref + self.R[:, j] * thetas[:, j, None]
        return ref

    def batch(self, x, thetas) -> np.ndarray:
        e = x - self.reference(thetas)
        Qe = np.zeros_like(e)
        for j in range(e.shape[1]):
            Qe = Qe + self.Q[:, j] * e[:, j, None]
        out = np.zeros(e.shape[0])
        for i in range(e.shape[1]):
            out = out + e[:, i] * Qe[:, i]
        return out

    def to_dict(self):
        key = "P" if self.kind == "quadratic" else "Q"
        out = {"kind": self.kind, key: self.Q.tolist()}
        if self.xref is not None:
            out["xref"] = self.xref.tolist()
        if self.R is not None:
            out["R"] = self.R.tolist()
        return out


@dataclass(frozen=True, eq=False)
class ZeroCost:
    kind: str = "zero"

    def batch(self, x, thetas) -> np.ndarray:
        return np.zeros(np.shape(x)[0])

    def to_dict(self):
        return {"kind": "zero"}


def make_state_cost(cfg: dict | None, terminal: bool = False):
    if not cfg or cfg.get("kind", "zero") == "zero":
        return ZeroCost()
    kind = cfg["kind"]
    if kind == "quadratic_tracking":
        return QuadraticTracking(cfg["Q"], cfg.get("xref"), cfg.get("R"))
    if kind == "quadratic":
        weight = cfg.get("P", cfg.get("Q"))
        if weight is None:
            raise InputError("quadratic cost needs 'P'")
        return QuadraticTracking(weight, cfg.get("xref"), cfg.get("R"), kind="quadratic")
    raise InputError(f"unknown {'terminal' if terminal else 'ell0'} kind {kind!r}")


# ---------------------------------------------------------------- specs

@dataclass(frozen=True, eq=False)
class CostSpec:
    ell_u: object = field(default_factory=ZeroPenalty)
    ell0: object = field(default_factory=ZeroCost)
    terminal: object = field(default_factory=ZeroCost)
    declared_moduli: tuple | None = None

    @classmethod
    def from_dict(cls, cfg: dict) -> "CostSpec":
        moduli = cfg.get("moduli")
        declared = None
        if moduli:
            declared = tuple(from_json(moduli[k]) for k in ("gamma_x", "gamma_u", "gamma_N"))
        return cls(make_input_penalty(cfg.get("ell_u")),
                   make_state_cost(cfg.get("ell0")),
                   make_state_cost(cfg.get("terminal"), terminal=True),
                   declared)

    def to_dict(self) -> dict:
        out = {"ell_u": self.ell_u.to_dict(), "ell0": self.ell0.to_dict(),
               "terminal": self.terminal.to_dict()}
        if self.declared_moduli is not None:
            out["moduli"] = {k: m.to_json() for k, m in
                             zip(("gamma_x", "gamma_u", "gamma_N"), self.declared_moduli)}
        return out


@dataclass(frozen=True, eq=False)
class CoercivityWitness:
    """Lower bound ``l(x, u, theta) >= r(d_U(u, v0))``."""

    r: ComparisonFunction
    v0: np.ndarray | None = None

    def __call__(self, u, space: SpaceDescriptor) -> float:
        u = space.check(u, "u")
        anchor = np.zeros(space.dimension) if self.v0 is None else self.v0
        return float(self.r(space.norm(u - anchor)))

    def anchor(self, dim: int) -> np.ndarray:
        return np.zeros(dim) if self.v0 is None else np.asarray(self.v0, dtype=float)

    def to_dict(self):
        out = {"r": self.r.to_json()}
        if self.v0 is not None:
            out["v0"] = np.asarray(self.v0).tolist()
        return out

    @classmethod
    def from_dict(cls, cfg: dict) -> "CoercivityWitness":
        v0 = cfg.get("v0")
        return cls(from_json(cfg["r"]), None if v0 is None else np.atleast_1d(np.asarray(v0, dtype=float)))


# ---------------------------------------------------------------- evaluation

def _finite(value, what):
    if not math.isfinite(value):
        raise NumericError(f"{what} is not finite ({value!r})")
    return value


def stage_cost_parts(spec: CostSpec, x, u, theta) -> tuple[float, float]:
    """``(l_u(u), l0(x, u, theta))`` for a single point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    lu = _finite(spec.ell_u(u), "l_u")
    l0 = _finite(float(spec.ell0.batch(x[None, :], theta[None, :])[0]), "l0")
    return lu, l0


def stage_cost(spec: CostSpec, x, u, theta) -> float:
    lu, l0 = stage_cost_parts(spec, x, u, theta)
    return lu + l0


def terminal_cost(spec: CostSpec, x, theta) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return _finite(float(spec.terminal.batch(x[None, :], theta[None, :])[0]), "F_N")


def input_penalty_sum(problem, u) -> float:
    u = as_control_sequence(u, problem.system.input_space, problem.horizon)
    total = 0.0
    for n in range(u.shape[0]):
        total += problem.cost.ell_u(u[n])
    return _finite(total, "sum of l_u")


def state_costs_batch(problem, u, thetas) -> np.ndarray:
    """``J_N^0`` (all terms except the input penalty) for every theta."""
    u = as_control_sequence(u, problem.system.input_space, problem.horizon)
    thetas = np.asarray(thetas, dtype=float).reshape(-1, problem.system.theta_space.dimension)
    states = rollout_batch(problem.system, problem.x0_map, u, thetas)
    total = np.zeros(thetas.shape[0])
    for n in range(u.shape[0]):
        total = total + problem.cost.ell0.batch(states[:, n], thetas)
    total = total + problem.cost.terminal.batch(states[:, -1], thetas)
    if not np.all(np.isfinite(total)):
        bad = int(np.argmin(np.isfinite(total)))
        raise NumericError(f"cost at atom {bad} (theta={thetas[bad].tolist()}) is not finite")
    return total


def total_costs_batch(problem, u, thetas) -> tuple[np.ndarray, np.ndarray]:
    """``(J_N, J_N^0)`` per theta; ``J_N = J_N^0 + sum_n l_u(u(n))`` exactly."""
    j0 = state_costs_batch(problem, u, thetas)
    return j0 + input_penalty_sum(problem, u), j0


def total_cost(problem, u, theta) -> float:
    """Per-system total cost ``J_N(x0(theta), u, theta)``."""
    return float(total_costs_batch(problem, u, np.atleast_1d(theta)[None, :])[0][0])


def total_cost_without_input_penalty(problem, u, theta) -> float:
    return float(state_costs_batch(problem, u, np.atleast_1d(theta)[None, :])[0])


def per_atom_costs(problem, u, mu) -> np.ndarray:
    """``J_N`` at each atom of ``mu``, in atom order."""
    return total_costs_batch(problem, u, mu.atoms)[0]


def ordered_weighted_sum(weights, values) -> float:
    """``sum_i w_i v_i`` for weights summing to one, accumulated in index order
    as ``v_0 + sum_i w_i (v_i - v_0)``.

    Anchoring at the first value makes a measure with repeated atoms (k
    empirical draws of a Dirac law) return that atom's value exactly,
    instead of the rounding residue of k products ``(1/k) * v``.
    """
    values = np.asarray(values, dtype=float).tolist()
    if not values:
        return 0.0
    base = values[0]
    total = 0.0
    for w, v in zip(np.asarray(weights, dtype=float).tolist(), values):
        total += w * (v - base)
    return base + total


def averaged_cost(problem, u, mu) -> float:
    """``sum_i w_i J_N(x0(theta_i), u, theta_i)`` accumulated in atom order."""
    mu.check_normalised()
    return _finite(ordered_weighted_sum(mu.weights, per_atom_costs(problem, u, mu)), "averaged cost")
