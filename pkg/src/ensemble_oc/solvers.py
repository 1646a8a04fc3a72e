"""Minimisers of the averaged cost over control sequences.

Three routes, meant to cross-check one another:

* ``solve_lq_exact`` assembles the exact quadratic of a linear-quadratic
  ensemble and solves its normal equations (the oracle and fast path).
* ``solve_nelder_mead`` is derivative-free and accepts the discontinuous
  (lower semicontinuous) threshold input penalty.
* ``solve_fd_gradient`` is steepest descent on central-difference gradients
  with an Armijo backtracking line search.

Every report's ``value`` is a fresh ``averaged_cost`` evaluation at the
returned minimiser.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import dataclass, field

import numpy as np

from .comparison import PowerLaw
from .costs import (CoercivityWitness, PowerPenalty, QuadraticTracking, SumPenalty,
                    ZeroCost, ZeroPenalty, averaged_cost)
from .exceptions import EnsembleOCError, InputError, NumericError, UnsupportedError
from .measures import DiscreteMeasure, rng_stream

TOLERANCE_MET = "tolerance-met"
MAX_ITER = "max-iter"
STAGNATION = "stagnation"

TIKHONOV = 1e-10


@dataclass
class SolveReport:
    minimiser: np.ndarray
    value: float
    iterations: int
    objective_evaluations: int
    termination: str
    trace: list = field(default_factory=list)
    solver: str = ""
    rejected_evaluations: int = 0
    iterates: list | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "value": self.value,
            "minimiser": self.minimiser.tolist(),
            "iterations": self.iterations,
            "objective_evaluations": self.objective_evaluations,
            "termination": self.termination,
            "rejected_evaluations": self.rejected_evaluations,
            "trace": list(self.trace),
            "notes": list(self.notes),
        }


class _Objective:
    """Stacked-vector objective with evaluation counting and iterate logging."""

    def __init__(self, problem, mu: DiscreteMeasure, record: bool = False, reject_errors: bool = False):
        self.problem = problem
        self.mu = mu
        self.shape = (problem.horizon, problem.system.input_space.dimension)
        self.evaluations = 0
        self.rejected = 0
        self.reject_errors = reject_errors
        self.iterates = [] if record else None

    def __call__(self, z) -> float:
        self.evaluations += 1
        try:
            return averaged_cost(self.problem, np.reshape(z, self.shape), self.mu)
        except (NumericError, OverflowError, FloatingPointError):
            if not self.reject_errors:
                raise
            self.rejected += 1
            return math.inf

    def accept(self, z, fz):
        if self.iterates is not None and math.isfinite(fz):
            self.iterates.append((np.array(z, dtype=float), float(fz)))


def _finish(obj: _Objective, z, solver, iterations, termination, trace, notes=()):
    u = np.reshape(np.array(z, dtype=float), obj.shape)
    value = averaged_cost(obj.problem, u, obj.mu)
    return SolveReport(u, value, iterations, obj.evaluations, termination, list(trace), solver,
                       obj.rejected, obj.iterates, list(notes))


def _initial_point(problem, u0) -> np.ndarray:
    if u0 is None:
        anchor = default_anchor(problem)
        return np.tile(anchor, problem.horizon)
    z = np.asarray(u0, dtype=float).ravel()
    if z.shape[0] != problem.n_controls:
        raise InputError(f"initial control has {z.shape[0]} entries, expected {problem.n_controls}")
    return z.copy()


def default_anchor(problem) -> np.ndarray:
    m = problem.system.input_space.dimension
    if problem.coercivity is not None:
        return problem.coercivity.anchor(m)
    return np.zeros(m)


# ---------------------------------------------------------------- LQ oracle

def _penalty_terms(pen):
    if isinstance(pen, ZeroPenalty):
        return []
    if isinstance(pen, SumPenalty):
        return [t for sub in pen.terms for t in _penalty_terms(sub)]
    if isinstance(pen, PowerPenalty) and pen.q == 2.0 and pen.p == 2.0:
        return [pen]
    raise UnsupportedError(f"input penalty {pen.to_dict()} is not of the form lam*||u - v0||_2^2")


def is_linear_quadratic(problem) -> bool:
    try:
        _check_lq(problem)
    except UnsupportedError:
        return False
    return True


def _check_lq(problem):
    if not problem.system.linear:
        raise UnsupportedError(f"family {problem.system.family_id!r} is not linear")
    for c in (problem.cost.ell0, problem.cost.terminal):
        if not isinstance(c, (QuadraticTracking, ZeroCost)):
            raise UnsupportedError("state costs must be quadratic or zero")
    return _penalty_terms(problem.cost.ell_u)


def lq_quadratic_form(problem, mu: DiscreteMeasure):
    """``(H, g, c)`` with ``averaged_cost(u) = z^T H z + 2 g^T z + c`` for ``z = u.ravel()``."""
    penalties = _check_lq(problem)
    N = problem.horizon
    n = problem.system.state_space.dimension
    m = problem.system.input_space.dimension
    d = N * m
    H = np.zeros((d, d))
    g = np.zeros(d)
    c = 0.0
    A_all, B_all = problem.system.matrices(mu.atoms)
    x0_all = problem.x0_map.batch(mu.atoms)

    def add_state_term(cost, a, S, theta, w):
        nonlocal c
        if isinstance(cost, ZeroCost):
            return
        e = a - cost.reference(theta[None, :])[0]
        Q = (cost.Q + cost.Q.T) / 2.0
        H[:] += w * S.T @ Q @ S
        g[:] += w * S.T @ Q @ e
        c += w * float(e @ Q @ e)

    for i, (theta, w) in enumerate(zip(mu.atoms, mu.weights)):
        A, B = A_all[i], B_all[i]
        a = x0_all[i].copy()
        S = np.zeros((n, d))
        for k in range(N):
            add_state_term(problem.cost.ell0, a, S, theta, w)
            a = A @ a
            S = A @ S
            S[:, k * m:(k + 1) * m] += B
        add_state_term(problem.cost.terminal, a, S, theta, w)
    for pen in penalties:
        v0 = np.zeros(m) if pen.v0 is None else np.asarray(pen.v0, dtype=float)
        for k in range(N):
            sl = slice(k * m, (k + 1) * m)
            H[sl, sl] += pen.lam * np.eye(m)
            g[sl] -= pen.lam * v0
            c += pen.lam * float(v0 @ v0)
    return H, g, c


def lq_gradient(problem, mu, u) -> np.ndarray:
    """Analytic gradient ``2 (H z + g)`` of the assembled LQ objective."""
    H, g, _ = lq_quadratic_form(problem, mu)
    return 2.0 * (H @ np.asarray(u, dtype=float).ravel() + g)


def solve_lq_exact(problem, mu: DiscreteMeasure) -> SolveReport:
    """Global minimiser of a linear-quadratic ensemble via its normal equations."""
    H, g, _ = lq_quadratic_form(problem, mu)
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
        raise NumericError("LQ assembly produced non-finite entries")
    notes = []
    d = H.shape[0]
    if np.linalg.matrix_rank(H) < d:
        H = H + TIKHONOV * np.eye(d)
        notes.append(f"singular Gram matrix; Tikhonov regularisation {TIKHONOV:g} applied")
    z = np.linalg.solve(H, -g)
    obj = _Objective(problem, mu)
    report = _finish(obj, z, "lq_exact", 1, TOLERANCE_MET, [], notes)
    report.trace = [report.value]
    report.objective_evaluations = 1
    return report


# ---------------------------------------------------------------- Nelder-Mead

def _nelder_mead_run(obj, x0, fx0, step, max_iter, f_tol, x_tol, trace):
    f = obj
    d = x0.shape[0]
    if d > 2:
        # dimension-adapted coefficients (Gao & Han)
        rho, chi, psi, sigma = 1.0, 1.0 + 2.0 / d, 0.75 - 1.0 / (2.0 * d), 1.0 - 1.0 / d
    else:
        rho, chi, psi, sigma = 1.0, 2.0, 0.5, 0.5
    sim = [x0]
    fs = [fx0]
    for i in range(d):
        v = x0.copy()
        v[i] += step
        sim.append(v)
        fv = f(v)
        obj.accept(v, fv)
        fs.append(fv)
    sim = np.array(sim)
    fs = np.array(fs)
    it = 0
    while True:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        trace.append(float(fs[0]))
        if (np.max(np.abs(fs[1:] - fs[0])) <= f_tol
                and np.max(np.abs(sim[1:] - sim[0])) <= x_tol):
            return sim[0], fs[0], it, TOLERANCE_MET
        if it >= max_iter:
            return sim[0], fs[0], it, MAX_ITER
        it += 1
        centroid = sim[:-1].mean(axis=0)
        xr = centroid + rho * (centroid - sim[-1])
        fr = f(xr)
        obj.accept(xr, fr)
        shrink = False
        if fr < fs[0]:
            xe = centroid + chi * (xr - centroid)
            fe = f(xe)
            obj.accept(xe, fe)
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
        elif fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
        elif fr < fs[-1]:
            xc = centroid + psi * (xr - centroid)
            fc = f(xc)
            obj.accept(xc, fc)
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
            else:
                shrink = True
        else:
            xc = centroid + psi * (sim[-1] - centroid)
            fc = f(xc)
            obj.accept(xc, fc)
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
            else:
                shrink = True
        if shrink:
            for j in range(1, d + 1):
                sim[j] = sim[0] + sigma * (sim[j] - sim[0])
                fs[j] = f(sim[j])
                obj.accept(sim[j], fs[j])


def solve_nelder_mead(problem, mu: DiscreteMeasure, max_iter: int = 5000, f_tol: float = 1e-10,
                      x_tol: float = 1e-10, restarts: int = 3, initial_step: float = 0.25,
                      seed_multistart: int = 0, seed: int = 0, u0=None,
                      record_iterates: bool = False) -> SolveReport:
    """Derivative-free minimisation with simplex restarts around the incumbent.

    ``max_iter`` bounds each simplex run. With ``seed_multistart > 0`` extra
    starting points are drawn uniformly from the coercivity ball of the
    initial objective value; ties keep the first-found minimiser. When ``u0``
    is given, a second run starts from the coercivity anchor.
    """
    obj = _Objective(problem, mu, record=record_iterates, reject_errors=True)
    starts = [_initial_point(problem, u0)]
    anchor = _initial_point(problem, None)
    if not np.array_equal(starts[0], anchor):
        # the input-penalty anchor is always tried: a penalty minimised only
        # at v0 (the threshold penalty) is invisible to a simplex elsewhere
        starts.append(anchor)
    if seed_multistart:
        starts += _multistart_points(problem, starts[0], obj, int(seed_multistart), seed)
    best_z, best_f, total_it, trace = None, math.inf, 0, []
    status = TOLERANCE_MET
    for z0 in starts:
        fz = obj(z0)
        obj.accept(z0, fz)
        run_trace = []
        z, fz, it, run_status = _nelder_mead_run(obj, z0, fz, initial_step, max_iter,
                                                 f_tol, x_tol, run_trace)
        total_it += it
        for _ in range(int(restarts)):
            z2, f2, it2, run_status = _nelder_mead_run(obj, z, fz, initial_step, max_iter,
                                                       f_tol, x_tol, run_trace)
            total_it += it2
            improved = fz - f2
            z, fz = z2, f2
            if improved <= f_tol:
                break
        if run_status == MAX_ITER:
            status = MAX_ITER
        if fz < best_f:
            best_z, best_f = z, fz
        for v in run_trace:
            trace.append(min(v, trace[-1]) if trace else v)
    if best_z is None:
        raise NumericError("every Nelder-Mead vertex evaluation failed")
    notes = [f"{obj.rejected} objective evaluation(s) failed and were treated as +inf"] if obj.rejected else []
    return _finish(obj, best_z, "nelder_mead", total_it, status, trace, notes)


def _multistart_points(problem, z0, obj, count, seed):
    witness = problem.coercivity or default_coercivity_witness(problem)
    if witness is None:
        raise UnsupportedError("multi-start needs a coercivity witness to bound the search ball")
    f0 = obj(z0)
    radius = search_region_from_coercivity(problem, witness, max(f0, 1e-12))
    m = problem.system.input_space.dimension
    anchor = witness.anchor(m)
    rng = rng_stream(seed, 7)
    pts = []
    for _ in range(count):
        direction = rng.standard_normal((problem.horizon, m))
        direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
        radii = radius * rng.random((problem.horizon, 1)) ** (1.0 / m)
        pts.append((anchor + radii * direction).ravel())
    return pts


# ---------------------------------------------------------------- FD gradient

def fd_gradient(f, z, rel_step: float = 1e-6) -> np.ndarray:
    """Central differences with step ``rel_step * max(1, |z_i|)``."""
    z = np.asarray(z, dtype=float)
    grad = np.empty_like(z)
    for i in range(z.shape[0]):
        h = rel_step * max(1.0, abs(z[i]))
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        grad[i] = (f(zp) - f(zm)) / (zp[i] - zm[i])
    return grad


def solve_fd_gradient(problem, mu: DiscreteMeasure, step: float = 1e-6, armijo: float = 1e-4,
                      backtrack: float = 0.5, max_iter: int = 2000, g_tol: float = 1e-8,
                      max_backtracks: int = 60, u0=None, record_iterates: bool = False,
                      f_tol: float = 1e-15) -> SolveReport:
    """Gradient descent with Armijo backtracking.

    The trial step is the Barzilai-Borwein length from the previous two
    iterates; backtracking keeps the trace monotone. Stops when
    ``||grad||_inf <= g_tol * max(1, |f|)``, or when an accepted step lowers
    the objective by at most ``f_tol * max(1, |f|)`` while the gradient is
    already below ``sqrt(g_tol) * max(1, |f|)``: near the minimum the
    predicted decrease ``|g|**2 / L`` falls below the rounding of ``f`` and
    a line search on ``f`` can no longer resolve the gradient tolerance.
    """
    if not problem.cost.ell_u.continuous:
        raise UnsupportedError("the FD-gradient solver needs continuous costs; "
                               "use nelder_mead for the threshold input penalty")
    obj = _Objective(problem, mu, record=record_iterates)
    z = _initial_point(problem, u0)
    fz = obj(z)
    obj.accept(z, fz)
    trace = [fz]
    notes = []
    prev_z = prev_g = None
    t = 1.0
    status = MAX_ITER
    it = 0
    while it < max_iter:
        g = fd_gradient(obj, z, step)
        if np.max(np.abs(g)) <= g_tol * max(1.0, abs(fz)):
            status = TOLERANCE_MET
            break
        if prev_g is not None:
            s, y = z - prev_z, g - prev_g
            sy = float(s @ y)
            t = float(s @ s) / sy if sy > 0 else 2.0 * t
        gg = float(g @ g)
        for _ in range(max_backtracks):
            z_new = z - t * g
            f_new = obj(z_new)
            if f_new <= fz - armijo * t * gg:
                break
            t *= backtrack
        else:
            status = STAGNATION
            break
        obj.accept(z_new, f_new)
        prev_z, prev_g = z, g
        decrease = fz - f_new
        z, fz = z_new, f_new
        it += 1
        trace.append(fz)
        scale = max(1.0, abs(fz))
        if decrease <= f_tol * scale and np.max(np.abs(g)) <= np.sqrt(g_tol) * scale:
            status = TOLERANCE_MET
            notes.append(f"stopped at working precision: decrease {decrease:.3g}, "
                         f"gradient {np.max(np.abs(g)):.3g}")
            break
    return _finish(obj, z, "fd_gradient", it, status, trace, notes)


# ---------------------------------------------------------------- coercivity

def default_coercivity_witness(problem) -> CoercivityWitness | None:
    """``r(s) = lam * s**q`` from a power input penalty whose norm matches ``d_U``."""
    pen = problem.cost.ell_u
    if isinstance(pen, PowerPenalty) and pen.lam > 0 and pen.p == problem.system.input_space.norm_order:
        return CoercivityWitness(PowerLaw(pen.lam, pen.q), pen.v0)
    return None


def search_region_from_coercivity(problem, witness: CoercivityWitness, t: float) -> float:
    """Radius ``r^{-1}(t)``: every ``u`` with averaged cost below ``t`` has
    ``d_U(u(n), v0) <= radius`` for every step ``n``."""
    if not t > 0:
        raise InputError("level t must be positive")
    try:
        return float(witness.r.inverse(float(t)))
    except UnsupportedError:
        raise UnsupportedError("coercivity witness r has no closed-form inverse") from None


SOLVERS = {
    "lq_exact": solve_lq_exact,
    "nelder_mead": solve_nelder_mead,
    "fd_gradient": solve_fd_gradient,
}


def solve(problem, mu, kind: str = "nelder_mead", **options) -> SolveReport:
    """Dispatch to a solver by name; ``options`` go to the solver."""
    if kind not in SOLVERS:
        raise InputError(f"unknown solver kind {kind!r}; known: {sorted(SOLVERS)}")
    accepted = set(inspect.signature(SOLVERS[kind]).parameters) - {"problem", "mu"}
    unknown = set(options) - accepted
    if unknown:
        raise InputError(f"solver {kind!r} does not take option(s) {sorted(unknown)}")
    return SOLVERS[kind](problem, mu, **options)


__all__ = [
    "SolveReport", "solve", "solve_lq_exact", "solve_nelder_mead", "solve_fd_gradient",
    "lq_quadratic_form", "lq_gradient", "fd_gradient", "search_region_from_coercivity",
    "default_coercivity_witness", "is_linear_quadratic", "EnsembleOCError",
]
