"""Class-K-infinity comparison functions as closed expression trees.

Every node is itself a K-infinity function: continuous, strictly increasing,
zero at zero and unbounded. The tree is closed under sums, composition and
input scaling, which is all the modulus-propagation constructions need, so
the propagated moduli stay exact objects instead of numeric tables.

JSON forms::

    {"pow": {"C": 2.0, "q": 1.0}}
    {"sum": [node, node, ...]}
    {"comp": [outer, inner]}
    {"scale": {"c": 2.0, "inner": node}}
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError, UnsupportedError


class ComparisonFunction:
    """Base class for the expression-tree nodes."""

    def __call__(self, s):
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def inverse(self, t):
        raise UnsupportedError(f"{type(self).__name__} has no closed-form inverse")

    def __add__(self, other: "ComparisonFunction") -> "Sum":
        return Sum((self, other))

    def __matmul__(self, inner: "ComparisonFunction") -> "Composition":
        """``outer @ inner`` is the composition s -> outer(inner(s))."""
        return Composition(self, inner)


def _positive(value, name):
    value = float(value)
    if not (value > 0.0 and math.isfinite(value)):
        raise InputError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True)
class PowerLaw(ComparisonFunction):
    """s -> C * s**q."""

    C: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "C", _positive(self.C, "C"))
        object.__setattr__(self, "q", _positive(self.q, "q"))

    def __call__(self, s):
        return self.C * np.power(s, self.q)

    def inverse(self, t):
        return np.power(np.asarray(t, dtype=float) / self.C, 1.0 / self.q)

    def to_json(self):
        return {"pow": {"C": self.C, "q": self.q}}


@dataclass(frozen=True)
class Sum(ComparisonFunction):
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise InputError("Sum needs at least one term")
        for t in terms:
            if not isinstance(t, ComparisonFunction):
                raise InputError(f"Sum term is not a comparison function: {t!r}")
        object.__setattr__(self, "terms", terms)

    def __call__(self, s):
        total = self.terms[0](s)
        for t in self.terms[1:]:
            total = total + t(s)
        return total

    def to_json(self):
        return {"sum": [t.to_json() for t in self.terms]}


@dataclass(frozen=True)
class Composition(ComparisonFunction):
    """s -> outer(inner(s))."""

    outer: ComparisonFunction
    inner: ComparisonFunction

    def __call__(self, s):
        return self.outer(self.inner(s))

    def inverse(self, t):
        return self.inner.inverse(self.outer.inverse(t))

    def to_json(self):
        return {"comp": [self.outer.to_json(), self.inner.to_json()]}


@dataclass(frozen=True)
class InputScaling(ComparisonFunction):
    """s -> inner(c * s)."""

    c: float
    inner: ComparisonFunction

    def __post_init__(self):
        object.__setattr__(self, "c", _positive(self.c, "c"))

    def __call__(self, s):
        return self.inner(self.c * np.asarray(s, dtype=float))

    def inverse(self, t):
        return self.inner.inverse(t) / self.c

    def to_json(self):
        return {"scale": {"c": self.c, "inner": self.inner.to_json()}}


IDENTITY = PowerLaw(1.0, 1.0)


def from_json(node) -> ComparisonFunction:
    """Rebuild a comparison function from its JSON expression tree."""
    if isinstance(node, ComparisonFunction):
        return node
    if not isinstance(node, dict) or len(node) != 1:
        raise InputError(f"malformed comparison-function node: {node!r}")
    (key, body), = node.items()
    if key == "pow":
        return PowerLaw(body["C"], body["q"])
    if key == "sum":
        return Sum(tuple(from_json(t) for t in body))
    if key == "comp":
        if len(body) != 2:
            raise InputError("'comp' takes exactly [outer, inner]")
        return Composition(from_json(body[0]), from_json(body[1]))
    if key == "scale":
        return InputScaling(body["c"], from_json(body["inner"]))
    raise InputError(f"unknown comparison-function node kind {key!r}")


def eval_k_infinity(phi: ComparisonFunction, s):
    """Evaluate ``phi`` at ``s >= 0`` (scalar or array)."""
    arr = np.asarray(s, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise InputError("comparison functions are defined on [0, inf) only")
    out = phi(arr)
    return float(out) if np.ndim(out) == 0 else out


def weak_triangle_split(phi: ComparisonFunction):
    """Return ``(s -> phi(2s), t -> phi(2t))``.

    For any K-infinity ``phi``, ``phi(s + t) <= phi(2s) + phi(2t)``.
    """
    doubled = InputScaling(2.0, phi)
    return doubled, doubled


def split_factors(n_terms: int) -> list[float]:
    """Input factors for bounding ``phi(a_0 + ... + a_{K-1})`` term by term.

    Peeling one summand at a time with the weak triangle inequality gives
    ``phi(sum a_m) <= sum_m phi(c_m * a_m)`` with ``c_m = 2**(m+1)`` for the
    peeled terms; the last remaining summand keeps the factor of the step
    that isolated it. A single summand still gets factor 2 (``phi(a) <=
    phi(2a)``), so the one-term case matches the general formula at m = 0.
    """
    if n_terms < 1:
        raise InputError("need at least one summand")
    return [2.0 ** max(1, min(m + 1, n_terms - 1)) for m in range(n_terms)]


def _scaled_after(outer: ComparisonFunction, factor: float, inner: ComparisonFunction):
    """s -> outer(factor * inner(s))."""
    return Composition(InputScaling(factor, outer), inner)


def propagate_state_moduli(alpha_x: ComparisonFunction, alpha_u: ComparisonFunction,
                           M: int) -> list[ComparisonFunction]:
    """Moduli bounding the state deviation after ``M`` steps.

    Returns ``[a_0, ..., a_{M-1}]`` with
    ``d_X(s_u(M), s_u'(M)) <= sum_m a_m(d_U(u(m), u'(m)))`` whenever the
    transition satisfies ``d_X(f(x,u), f(x',u')) <= alpha_x(d_X(x,x')) +
    alpha_u(d_U(u,u'))``. Built inductively: horizon 1 gives ``[alpha_u]``;
    horizon M feeds the horizon-(M-1) moduli through ``alpha_x`` with the
    weak-triangle factors and appends ``alpha_u``.
    """
    M = int(M)
    if M < 1:
        raise InputError(f"horizon M must be >= 1, got {M}")
    moduli = [alpha_u]
    for horizon in range(2, M + 1):
        factors = split_factors(horizon - 1)
        moduli = [_scaled_after(alpha_x, c, a) for c, a in zip(factors, moduli)]
        moduli.append(alpha_u)
    return moduli


def propagate_cost_moduli(alpha_x, alpha_u, gamma_x, gamma_u, gamma_N, M: int):
    """Moduli for the stage cost at step ``M-1`` and the terminal cost at ``M``.

    Returns ``(stage, terminal)``:

    * ``stage`` has ``M`` entries with
      ``|l0(s_u(M-1), u(M-1)) - l0(s_u'(M-1), u'(M-1))| <= sum_m stage[m](d_m)``;
      the last entry is ``gamma_u``.
    * ``terminal`` has ``M + 1`` entries with
      ``|F(s_u(M)) - F(s_u'(M))| <= sum_{m<M} terminal[m](d_m)``. The final
      entry pairs with ``u(M)``, which cannot influence ``s_u(M)``; it is set
      to ``gamma_N`` and never contributes to a bound over ``U^M``.
    """
    M = int(M)
    if M < 1:
        raise InputError(f"horizon M must be >= 1, got {M}")
    if M == 1:
        stage = [gamma_u]
    else:
        state = propagate_state_moduli(alpha_x, alpha_u, M - 1)
        stage = [_scaled_after(gamma_x, c, a)
                 for c, a in zip(split_factors(M - 1), state)]
        stage.append(gamma_u)
    state = propagate_state_moduli(alpha_x, alpha_u, M)
    terminal = [_scaled_after(gamma_N, c, a) for c, a in zip(split_factors(M), state)]
    terminal.append(gamma_N)
    return stage, terminal


def bound_sum(moduli, distances) -> float:
    """``sum_m moduli[m](distances[m])`` over the overlapping index range."""
    total = 0.0
    for phi, d in zip(moduli, distances):
        total += float(phi(float(d)))
    return total
