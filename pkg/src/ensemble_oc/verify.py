"""Sampling checkers for the standing continuity and coercivity assumptions.

A check draws seeded samples inside a box and tests one inequality per
sample. FAIL is conclusive and carries replayable witnesses; PASS only means
no violation was found among the evaluated samples inside the stated box.
Every ``*_sides`` function returns ``(lhs, rhs)`` arrays for a batch and is
what the corresponding check evaluates, so a stored witness can be replayed
through it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .comparison import propagate_cost_moduli, propagate_state_moduli
from .costs import CoercivityWitness, CostSpec
from .exceptions import InputError
from .measures import rng_stream
from .systems import SystemFamily

SLACK = 1e-12
LSC_SLACK = 1e-9
MIN_SAMPLES = 100

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class CheckReport:
    check_id: str
    samples_evaluated: int
    violations: list = field(default_factory=list)
    status: str = INCONCLUSIVE
    box: dict | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return {"check_id": self.check_id, "status": self.status,
                "samples_evaluated": self.samples_evaluated,
                "violations": self.violations, "box": self.box, "note": self.note}


def _status(n_evaluated, violations, min_samples):
    if violations:
        return FAIL
    return PASS if n_evaluated >= min_samples else INCONCLUSIVE


@dataclass(frozen=True)
class SamplingBox:
    """Axis-aligned boxes for states, inputs and ensemble indices."""

    x: np.ndarray
    u: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        for name in ("x", "u", "theta"):
            arr = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if arr.shape[1] != 2 or np.any(arr[:, 0] > arr[:, 1]):
                raise InputError(f"box.{name} must be a list of [low, high] pairs")
            object.__setattr__(self, name, arr)

    @classmethod
    def from_dict(cls, cfg: dict) -> "SamplingBox":
        try:
            return cls(cfg["x"], cfg["u"], cfg["theta"])
        except KeyError as exc:
            raise InputError(f"sampling box is missing {exc.args[0]!r}") from None

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "u": self.u.tolist(), "theta": self.theta.tolist()}


def _draw(rng, box, size):
    box = np.asarray(box)
    lo, hi = box[:, 0], box[:, 1]
    shape = (size, box.shape[0]) if isinstance(size, int) else tuple(size) + (box.shape[0],)
    return lo + (hi - lo) * rng.random(shape)


def _witnesses(lhs, rhs, bad, inputs, limit):
    out = []
    for i in np.flatnonzero(bad)[:limit]:
        out.append({"index": int(i),
                    "inputs": {k: np.asarray(v[i]).tolist() for k, v in inputs.items()},
                    "lhs": float(lhs[i]), "rhs": float(rhs[i])})
    return out


def _exceeds(lhs, rhs):
    """Violation of ``lhs <= rhs``; non-finite values count as violations."""
    return ~(np.isfinite(lhs) & np.isfinite(rhs)) | (lhs > rhs + SLACK)


# ---------------------------------------------------------------- one-step dynamics continuity

def _raw_step(sys, x, u, theta):
    with np.errstate(all="ignore"):
        return sys._step(x, u, theta)


def assumption1_sides(sys: SystemFamily, moduli, x, x2, u, u2, theta):
    """``d_X(f(x,u), f(x',u'))`` against ``alpha_x(d_X(x,x')) + alpha_u(d_U(u,u'))``."""
    alpha_x, alpha_u = moduli
    x, x2, u, u2, theta = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (x, x2, u, u2, theta))
    with np.errstate(all="ignore"):
        lhs = sys.state_space.norm(_raw_step(sys, x, u, theta) - _raw_step(sys, x2, u2, theta))
        rhs = alpha_x(sys.state_space.norm(x - x2)) + alpha_u(sys.input_space.norm(u - u2))
    return np.atleast_1d(lhs), np.atleast_1d(rhs)


def check_assumption1(sys: SystemFamily, moduli, box: SamplingBox, n_samples: int = 10_000,
                      seed: int = 0, min_samples: int = MIN_SAMPLES, max_witnesses: int = 10) -> CheckReport:
    rng = rng_stream(seed, 1)
    inputs = {"x": _draw(rng, box.x, n_samples), "x2": _draw(rng, box.x, n_samples),
              "u": _draw(rng, box.u, n_samples), "u2": _draw(rng, box.u, n_samples),
              "theta": _draw(rng, box.theta, n_samples)}
    lhs, rhs = assumption1_sides(sys, moduli, **inputs)
    bad = _exceeds(lhs, rhs)
    viol = _witnesses(lhs, rhs, bad, inputs, max_witnesses)
    return CheckReport("assumption1", n_samples, viol, _status(n_samples, viol, min_samples),
                       box.to_dict(), f"{int(bad.sum())} violating sample(s)" if viol
                       else f"no violation found in {n_samples} samples")


# ---------------------------------------------------------------- stage and terminal cost continuity

def assumption2_stage_sides(cost: CostSpec, moduli, x, x2, u, u2, theta, state_space, input_space):
    gamma_x, gamma_u, _ = moduli
    x, x2, u, u2, theta = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (x, x2, u, u2, theta))
    with np.errstate(all="ignore"):
        lhs = np.abs(cost.ell0.batch(x, theta) - cost.ell0.batch(x2, theta))
        rhs = gamma_x(state_space.norm(x - x2)) + gamma_u(input_space.norm(u - u2))
    return np.atleast_1d(lhs), np.atleast_1d(rhs)


def assumption2_terminal_sides(cost: CostSpec, moduli, x, x2, theta, state_space):
    gamma_N = moduli[2]
    x, x2, theta = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (x, x2, theta))
    with np.errstate(all="ignore"):
        lhs = np.abs(cost.terminal.batch(x, theta) - cost.terminal.batch(x2, theta))
        rhs = gamma_N(state_space.norm(x - x2))
    return np.atleast_1d(lhs), np.atleast_1d(rhs)


def check_assumption2(cost: CostSpec, moduli, box: SamplingBox, state_space, input_space,
                      n_samples: int = 10_000, seed: int = 0, min_samples: int = MIN_SAMPLES,
                      max_witnesses: int = 10) -> CheckReport:
    """Stage-cost and terminal-cost continuity inequalities, checked independently."""
    rng = rng_stream(seed, 2)
    inputs = {"x": _draw(rng, box.x, n_samples), "x2": _draw(rng, box.x, n_samples),
              "u": _draw(rng, box.u, n_samples), "u2": _draw(rng, box.u, n_samples),
              "theta": _draw(rng, box.theta, n_samples)}
    l1, r1 = assumption2_stage_sides(cost, moduli, **inputs, state_space=state_space,
                                     input_space=input_space)
    bad1 = _exceeds(l1, r1)
    term_inputs = {k: inputs[k] for k in ("x", "x2", "theta")}
    l2, r2 = assumption2_terminal_sides(cost, moduli, **term_inputs, state_space=state_space)
    bad2 = _exceeds(l2, r2)
    viol = [dict(w, inequality="stage") for w in _witnesses(l1, r1, bad1, inputs, max_witnesses)]
    viol += [dict(w, inequality="terminal") for w in _witnesses(l2, r2, bad2, term_inputs, max_witnesses)]
    note = (f"stage: {int(bad1.sum())}, terminal: {int(bad2.sum())} violating sample(s)" if viol
            else f"no violation found in {n_samples} samples")
    return CheckReport("assumption2", n_samples, viol, _status(n_samples, viol, min_samples),
                       box.to_dict(), note)


# ---------------------------------------------------------------- lsc

def check_lsc(ell_u, box: SamplingBox, n_sequences: int = 200, seq_len: int = 40, seed: int = 0,
              min_samples: int = 10, max_witnesses: int = 10) -> CheckReport:
    """Approach random limit points along ``u + 2**-j * d``; the anchor ``v0``
    is always the first limit point. The liminf is estimated by the minimum
    over the last eighth of each sequence (steps below ``2**-35`` for the
    default length), and the check is ``l_u(u) <= liminf + 1e-9 * max(1, |l_u(u)|)``."""
    rng = rng_stream(seed, 3)
    dim = box.u.shape[0]
    anchor = getattr(ell_u, "v0", None)
    anchor = np.zeros(dim) if anchor is None else np.asarray(anchor, dtype=float)
    limits = np.vstack([anchor[None, :], _draw(rng, box.u, max(n_sequences - 1, 0))])
    dirs = rng.standard_normal((limits.shape[0], dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rates = 2.0 ** -np.arange(1, seq_len + 1)
    viol = []
    n_bad = 0
    for i, (lim, d) in enumerate(zip(limits, dirs)):
        at_limit = ell_u(lim)
        seq = [ell_u(lim + r * d) for r in rates]
        tail = min(seq[-max(1, len(seq) // 8):])
        if not at_limit <= tail + LSC_SLACK * max(1.0, abs(at_limit)):
            n_bad += 1
            if len(viol) < max_witnesses:
                viol.append({"index": i, "inputs": {"limit": lim.tolist(), "direction": d.tolist(),
                                                    "rates": rates.tolist()},
                             "lhs": float(at_limit), "rhs": float(tail),
                             "sequence_values": [float(v) for v in seq]})
    return CheckReport("lsc", limits.shape[0], viol, _status(limits.shape[0], viol, min_samples),
                       box.to_dict(),
                       f"{n_bad} limit point(s) violate lower semicontinuity" if viol else
                       "no violation found; sampling cannot prove lower semicontinuity")


# ---------------------------------------------------------------- coercivity

def coercivity_sides(cost: CostSpec, witness: CoercivityWitness, x, u, theta, input_space):
    """``r(d_U(u, v0))`` (must not exceed) ``l(x, u, theta)``, returned as ``(lhs, rhs)`` of ``lhs <= rhs``."""
    x, u, theta = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (x, u, theta))
    anchor = witness.anchor(input_space.dimension)
    with np.errstate(all="ignore"):
        ell = np.array([cost.ell_u(ui) for ui in u]) + cost.ell0.batch(x, theta)
        lower = witness.r(input_space.norm(u - anchor))
    return np.atleast_1d(lower), np.atleast_1d(ell)


def check_coercivity(problem, witness: CoercivityWitness, box: SamplingBox, n_samples: int = 10_000,
                     seed: int = 0, min_samples: int = MIN_SAMPLES, max_witnesses: int = 10) -> CheckReport:
    rng = rng_stream(seed, 4)
    inputs = {"x": _draw(rng, box.x, n_samples), "u": _draw(rng, box.u, n_samples),
              "theta": _draw(rng, box.theta, n_samples)}
    lhs, rhs = coercivity_sides(problem.cost, witness, **inputs,
                                input_space=problem.system.input_space)
    bad = _exceeds(lhs, rhs)
    viol = _witnesses(lhs, rhs, bad, inputs, max_witnesses)
    return CheckReport("coercivity", n_samples, viol, _status(n_samples, viol, min_samples),
                       box.to_dict(), f"{int(bad.sum())} violating sample(s)" if viol
                       else f"no violation found in {n_samples} samples")


# ---------------------------------------------------------------- M-step trajectory and cost bounds

def _raw_rollout(sys, x0, U, theta):
    """States ``(B, M+1, n)`` with a separate input sequence per batch row."""
    states = [x0]
    x = x0
    for n in range(U.shape[1]):
        x = _raw_step(sys, x, U[:, n], theta)
        states.append(x)
    return np.stack(states, axis=1)


def _input_dists(space, U, U2):
    return np.stack([np.atleast_1d(space.norm(U[:, n] - U2[:, n])) for n in range(U.shape[1])], axis=1)


def _moduli_sum(moduli, dists):
    total = np.zeros(dists.shape[0])
    for m, phi in enumerate(moduli[:dists.shape[1]]):
        total = total + phi(dists[:, m])
    return total


def lemma2_sides(sys: SystemFamily, state_moduli, x0, theta, u, u2):
    """``d_X(s_u(M), s_u'(M))`` against ``sum_m a_m(d_U(u(m), u'(m)))``; ``u`` is ``(B, M, m)``."""
    x0, theta = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (x0, theta))
    U = np.asarray(u, dtype=float).reshape(x0.shape[0], -1, sys.input_space.dimension)
    U2 = np.asarray(u2, dtype=float).reshape(U.shape)
    with np.errstate(all="ignore"):
        s1 = _raw_rollout(sys, x0, U, theta)
        s2 = _raw_rollout(sys, x0, U2, theta)
        lhs = sys.state_space.norm(s1[:, -1] - s2[:, -1])
        rhs = _moduli_sum(state_moduli, _input_dists(sys.input_space, U, U2))
    return np.atleast_1d(lhs), np.atleast_1d(rhs)


def _paired_sequences(rng, box, n_samples, M):
    return {"x0": _draw(rng, box.x, n_samples), "theta": _draw(rng, box.theta, n_samples),
            "u": _draw(rng, box.u, (n_samples, M)), "u2": _draw(rng, box.u, (n_samples, M))}


def check_lemma2_bound(sys: SystemFamily, moduli, M: int, box: SamplingBox, n_samples: int = 10_000,
                       seed: int = 0, min_samples: int = MIN_SAMPLES, max_witnesses: int = 10) -> CheckReport:
    """Propagated state bound after ``M`` steps for paired input sequences."""
    state_moduli = propagate_state_moduli(moduli[0], moduli[1], M)
    inputs = _paired_sequences(rng_stream(seed, 5, M), box, n_samples, M)
    lhs, rhs = lemma2_sides(sys, state_moduli, **inputs)
    bad = _exceeds(lhs, rhs)
    viol = _witnesses(lhs, rhs, bad, inputs, max_witnesses)
    return CheckReport(f"lemma2_M{M}", n_samples, viol, _status(n_samples, viol, min_samples),
                       box.to_dict(), f"{int(bad.sum())} violating sample(s)" if viol
                       else f"no violation found in {n_samples} samples")


def lemma3_sides(problem, stage_moduli, terminal_moduli, x0, theta, u, u2):
    """Stage cost at step ``M-1`` and terminal cost at step ``M`` for paired inputs.

    Returns ``(stage_lhs, stage_rhs, terminal_lhs, terminal_rhs)``.
    """
    sys, cost = problem.system, problem.cost
    x0, theta = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (x0, theta))
    U = np.asarray(u, dtype=float).reshape(x0.shape[0], -1, sys.input_space.dimension)
    U2 = np.asarray(u2, dtype=float).reshape(U.shape)
    with np.errstate(all="ignore"):
        s1 = _raw_rollout(sys, x0, U, theta)
        s2 = _raw_rollout(sys, x0, U2, theta)
        dists = _input_dists(sys.input_space, U, U2)
        st_l = np.abs(cost.ell0.batch(s1[:, -2], theta) - cost.ell0.batch(s2[:, -2], theta))
        st_r = _moduli_sum(stage_moduli, dists)
        te_l = np.abs(cost.terminal.batch(s1[:, -1], theta) - cost.terminal.batch(s2[:, -1], theta))
        te_r = _moduli_sum(terminal_moduli, dists)
    return st_l, st_r, te_l, te_r


def check_lemma3_bound(problem, moduli, M: int, box: SamplingBox, n_samples: int = 10_000,
                       seed: int = 0, min_samples: int = MIN_SAMPLES, max_witnesses: int = 10) -> CheckReport:
    """``moduli`` is ``(alpha_x, alpha_u, gamma_x, gamma_u, gamma_N)``."""
    stage, terminal = propagate_cost_moduli(*moduli, M)
    inputs = _paired_sequences(rng_stream(seed, 6, M), box, n_samples, M)
    st_l, st_r, te_l, te_r = lemma3_sides(problem, stage, terminal, **inputs)
    bad1, bad2 = _exceeds(st_l, st_r), _exceeds(te_l, te_r)
    viol = [dict(w, inequality="stage") for w in _witnesses(st_l, st_r, bad1, inputs, max_witnesses)]
    viol += [dict(w, inequality="terminal") for w in _witnesses(te_l, te_r, bad2, inputs, max_witnesses)]
    note = (f"stage: {int(bad1.sum())}, terminal: {int(bad2.sum())} violating sample(s)" if viol
            else f"no violation found in {n_samples} samples")
    return CheckReport(f"lemma3_M{M}", n_samples, viol, _status(n_samples, viol, min_samples),
                       box.to_dict(), note)


# ---------------------------------------------------------------- batteries

def run_checks(problem, box: SamplingBox, n_samples: int = 10_000, M: int | None = None,
               seed: int = 0, witness: CoercivityWitness | None = None) -> list[CheckReport]:
    """All checks applicable to ``problem`` given its declared moduli and witness.

    Trajectory and cost bounds are checked for every horizon ``1..M`` (default: the
    problem horizon).
    """
    M = problem.horizon if M is None else int(M)
    reports = []
    sysm = problem.system.declared_moduli
    costm = problem.cost.declared_moduli
    if sysm is not None:
        reports.append(check_assumption1(problem.system, sysm, box, n_samples, seed))
        for h in range(1, M + 1):
            reports.append(check_lemma2_bound(problem.system, sysm, h, box, n_samples, seed))
    if costm is not None:
        reports.append(check_assumption2(problem.cost, costm, box, problem.system.state_space,
                                         problem.system.input_space, n_samples, seed))
        if sysm is not None:
            for h in range(1, M + 1):
                reports.append(check_lemma3_bound(problem, tuple(sysm) + tuple(costm), h, box,
                                                  n_samples, seed))
    reports.append(check_lsc(problem.cost.ell_u, box, seed=seed))
    witness = witness or problem.coercivity
    if witness is not None:
        reports.append(check_coercivity(problem, witness, box, n_samples, seed))
    return reports
