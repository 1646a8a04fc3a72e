import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from ensemble_oc.comparison import (IDENTITY, Composition, InputScaling, PowerLaw, Sum, bound_sum,
                                    eval_k_infinity, from_json, propagate_cost_moduli,
                                    propagate_state_moduli, split_factors, weak_triangle_split)
from ensemble_oc.exceptions import InputError

s = sp.Symbol("s", nonnegative=True)


def to_sympy(phi, arg):
    """Independent symbolic evaluation of an expression tree, via its JSON form."""
    node = phi.to_json()
    return _sym(node, arg)


def _sym(node, arg):
    if "pow" in node:
        return sp.Rational(str(node["pow"]["C"])) * arg ** sp.Rational(str(node["pow"]["q"]))
    if "sum" in node:
        return sum(_sym(t, arg) for t in node["sum"])
    if "comp" in node:
        outer, inner = node["comp"]
        return _sym(outer, _sym(inner, arg))
    if "scale" in node:
        return _sym(node["scale"]["inner"], sp.Rational(str(node["scale"]["c"])) * arg)
    raise AssertionError(node)


SAMPLE_FUNCTIONS = [
    PowerLaw(2.0, 1.0),
    PowerLaw(1.0, 3.0),
    PowerLaw(0.5, 0.5),
    Sum((PowerLaw(1.0, 1.0), PowerLaw(2.0, 2.0))),
    Composition(PowerLaw(1.0, 2.0), PowerLaw(3.0, 1.0)),
    InputScaling(2.0, PowerLaw(1.0, 2.0)),
    PowerLaw(1.0, 2.0) @ (PowerLaw(1.0, 1.0) + PowerLaw(1.0, 0.5)),
]


def test_eval_examples():
    assert eval_k_infinity(PowerLaw(2, 1), 3) == 6
    assert eval_k_infinity(Composition(PowerLaw(1, 2), PowerLaw(3, 1)), 2) == 36
    for phi in SAMPLE_FUNCTIONS:
        assert eval_k_infinity(phi, 0.0) == 0.0


def test_negative_argument_rejected():
    with pytest.raises(InputError):
        eval_k_infinity(IDENTITY, -1.0)


@pytest.mark.parametrize("bad", [dict(C=0.0, q=1.0), dict(C=1.0, q=-1.0), dict(C=np.inf, q=1.0)])
def test_power_law_parameters_validated(bad):
    with pytest.raises(InputError):
        PowerLaw(**bad)


@pytest.mark.parametrize("phi", SAMPLE_FUNCTIONS)
def test_strict_monotonicity_on_log_grid(phi):
    grid = np.logspace(-9, 9, 100)
    vals = np.array([phi(x) for x in grid])
    assert np.all(np.diff(vals) > 0)
    assert phi(0.0) == 0.0


@pytest.mark.parametrize("phi", SAMPLE_FUNCTIONS)
def test_json_round_trip(phi):
    back = from_json(phi.to_json())
    assert back.to_json() == phi.to_json()
    for x in (0.0, 0.3, 7.0):
        assert back(x) == phi(x)


@pytest.mark.parametrize("phi", SAMPLE_FUNCTIONS)
def test_sympy_evaluation_agrees(phi):
    expr = to_sympy(phi, s)
    for x in (0.25, 1.0, 3.5):
        assert float(expr.subs(s, sp.Rational(str(x)))) == pytest.approx(phi(x), rel=1e-12)


@pytest.mark.parametrize("phi", [PowerLaw(3.0, 2.0), InputScaling(2.0, PowerLaw(1.0, 3.0)),
                                 Composition(PowerLaw(2.0, 1.0), PowerLaw(1.0, 0.5))])
def test_inverse(phi):
    for t in (0.0, 0.5, 8.0):
        assert phi(phi.inverse(t)) == pytest.approx(t, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("phi, st_pair, lhs, rhs", [
    (PowerLaw(1, 2), (1, 1), 4, 8),
    (PowerLaw(1, 1), (2, 3), 5, 10),
    (PowerLaw(1, 3), (0, 2), 8, 64),
])
def test_weak_triangle_examples(phi, st_pair, lhs, rhs):
    a, b = weak_triangle_split(phi)
    x, y = st_pair
    assert phi(x + y) == lhs
    assert a(x) + b(y) == rhs
    assert lhs <= rhs


@pytest.mark.parametrize("phi", SAMPLE_FUNCTIONS)
def test_weak_triangle_random_pairs(phi):
    rng = np.random.default_rng(7)
    a, b = weak_triangle_split(phi)
    pairs = rng.exponential(scale=rng.choice([1e-3, 1.0, 1e3], size=(1000, 1)), size=(1000, 2))
    bad = [(x, y) for x, y in pairs if phi(x + y) > (a(x) + b(y)) * (1 + 1e-12)]
    assert bad == []


@settings(max_examples=300, deadline=None)
@given(st.floats(0.01, 100), st.floats(0.05, 5), st.floats(0, 1e3), st.floats(0, 1e3))
def test_weak_triangle_power_laws(C, q, x, y):
    phi = PowerLaw(C, q)
    assert phi(x + y) <= (phi(2 * x) + phi(2 * y)) * (1 + 1e-12)


def test_split_factors():
    assert split_factors(1) == [2]
    assert split_factors(2) == [2, 2]
    assert split_factors(3) == [2, 4, 4]


def _coeffs(moduli):
    """Slopes of linear moduli, via the symbolic oracle."""
    return [float(sp.diff(to_sympy(phi, s), s)) for phi in moduli]


def test_state_moduli_examples():
    L = 3.0
    assert _coeffs(propagate_state_moduli(IDENTITY, IDENTITY, 1)) == [1]
    assert _coeffs(propagate_state_moduli(PowerLaw(L, 1), IDENTITY, 2)) == [2 * L, 1]
    assert _coeffs(propagate_state_moduli(IDENTITY, IDENTITY, 3)) == [4, 2, 1]


def _unfold_state(ax, au, M):
    """Symbolic unfolding of the M-step trajectory bound, written directly as sympy lambdas.

    Horizon 1: [au]. Horizon h: every earlier modulus is pushed through
    ax after scaling its argument by the weak-triangle factor of its slot,
    then au is appended for the newest input.
    """
    mods = [au]
    for h in range(2, M + 1):
        factors = split_factors(h - 1)
        mods = [(lambda f, c: (lambda x: ax(c * f(x))))(f, c) for f, c in zip(mods, factors)] + [au]
    return mods


@pytest.mark.parametrize("M", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("ax, au", [
    (lambda x: x, lambda x: x),
    (lambda x: sp.Rational(1, 2) * x, lambda x: 3 * x),
    (lambda x: x**2, lambda x: 2 * x),
])
def test_state_moduli_match_symbolic_unfolding(M, ax, au):
    # the library versions of the same functions
    lib = {"x": PowerLaw(1, 1), "hx": PowerLaw(0.5, 1), "x2": PowerLaw(1, 2), "3x": PowerLaw(3, 1),
           "2x": PowerLaw(2, 1)}
    probe = ax(s)
    alpha_x = lib["x"] if probe == s else lib["hx"] if probe == s / 2 else lib["x2"]
    probe = au(s)
    alpha_u = lib["x"] if probe == s else lib["3x"] if probe == 3 * s else lib["2x"]
    got = propagate_state_moduli(alpha_x, alpha_u, M)
    want = _unfold_state(ax, au, M)
    assert len(got) == M
    for g, w in zip(got, want):
        assert sp.simplify(to_sympy(g, s) - w(s)) == 0


@pytest.mark.parametrize("M", [1, 2, 3, 4])
def test_state_moduli_dominate_linear_worst_case(M):
    # x+ = L x + u with |L| <= L: the exact deviation after M steps is
    # sum_m L^(M-1-m) |du_m|, so each propagated slope must dominate L^(M-1-m).
    L = 0.7
    slopes = _coeffs(propagate_state_moduli(PowerLaw(L, 1), IDENTITY, M))
    for m, c in enumerate(slopes):
        assert float(c) >= L ** (M - 1 - m) - 1e-15


def test_cost_moduli_examples():
    stage, terminal = propagate_cost_moduli(IDENTITY, IDENTITY, IDENTITY, IDENTITY, IDENTITY, 1)
    assert _coeffs(stage) == [1]
    assert len(terminal) == 2
    # the terminal state after one step moves by at most du, doubled by the split
    assert _coeffs(terminal)[0] == 2
    stage, terminal = propagate_cost_moduli(IDENTITY, IDENTITY, IDENTITY, IDENTITY, IDENTITY, 2)
    assert _coeffs(stage) == [2, 1]
    assert len(terminal) == 3
    assert _coeffs(terminal)[:2] == [4, 2]


@pytest.mark.parametrize("M", [1, 2, 3])
def test_cost_moduli_match_symbolic_unfolding(M):
    ax, au, gx, gu, gN = (lambda x: x / 2), (lambda x: x), (lambda x: 4 * x), (lambda x: x), (lambda x: 4 * x)
    stage, terminal = propagate_cost_moduli(PowerLaw(0.5, 1), IDENTITY, PowerLaw(4, 1), IDENTITY,
                                            PowerLaw(4, 1), M)
    if M == 1:
        want_stage = [gu]
    else:
        c = split_factors(M - 1)
        want_stage = [(lambda f, k: (lambda x: gx(k * f(x))))(f, k)
                      for f, k in zip(_unfold_state(ax, au, M - 1), c)] + [gu]
    c = split_factors(M)
    want_term = [(lambda f, k: (lambda x: gN(k * f(x))))(f, k) for f, k in zip(_unfold_state(ax, au, M), c)]
    assert len(stage) == M and len(terminal) == M + 1
    for g, w in zip(stage, want_stage):
        assert sp.simplify(to_sympy(g, s) - w(s)) == 0
    for g, w in zip(terminal[:M], want_term):
        assert sp.simplify(to_sympy(g, s) - w(s)) == 0


def test_bound_sum():
    assert bound_sum([PowerLaw(2, 1), PowerLaw(1, 2)], [1.0, 3.0]) == 11.0
    # terminal moduli carry one slot more than there are inputs; extra slots are ignored
    assert bound_sum([IDENTITY, IDENTITY], [1.0]) == 1.0


def test_from_json_rejects_unknown_node():
    with pytest.raises(InputError):
        from_json({"exp": {}})
