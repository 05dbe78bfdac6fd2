import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from aidl import expr as E
from aidl.expr import (
    BranchyExpression,
    Const,
    DomainError,
    Parameter,
    Residual,
    differentiate,
    evaluate,
    pin_branches,
    pin_with_pattern,
    structurally_equal,
    to_sexpr,
)
from models import central_difference, random_expression


def P(name, v):
    return Parameter(name, v)


def test_min_of_constants():
    assert evaluate(E.min_(Const(2), Const(3))) == 2


def test_square_at_zero():
    x = P("x", 0.0)
    assert evaluate(E.square(x)) == 0


def test_abs_of_difference():
    # |3 - 7| traced by hand
    assert evaluate(E.abs_(Const(3) - Const(7))) == 4


def test_norm_is_abs():
    x = P("x", -2.5)
    assert evaluate(E.norm(x)) == 2.5
    assert pin_branches(E.norm(x.ref())).op == "neg"


@pytest.mark.parametrize("build", [
    lambda: E.sqrt(Const(-1)),
    lambda: E.arcsin(Const(1.5)),
    lambda: E.arccos(Const(-2)),
    lambda: Const(1) / Const(1e-13),
])
def test_domain_errors(build):
    with pytest.raises(DomainError):
        evaluate(build())


def test_arcsin_grazing_boundary_is_clamped():
    assert evaluate(E.arcsin(Const(1.0 + 1e-14))) == pytest.approx(math.pi / 2)


def test_derivative_power_rule():
    x = P("x", 3.0)
    d = differentiate(E.square(x), x)
    assert to_sexpr(d) == '(mul 2 (param "x"))'


def test_derivative_of_constant_is_zero():
    x = P("x", 1.0)
    d = differentiate(Const(5), x)
    assert isinstance(d, Const) and d.value == 0


def test_derivative_product_against_finite_difference():
    x = P("x", 1.0)
    e = x.ref() * E.sin(x)
    d = evaluate(differentiate(e, x))
    fd = central_difference(e, x, {x.id: 1.0})
    assert d == pytest.approx(math.sin(1) + math.cos(1), rel=1e-12)
    assert abs(d - fd) <= 1e-6


def test_derivative_wrt_absent_parameter():
    x, y = P("x", 1.0), P("y", 2.0)
    assert evaluate(differentiate(E.square(x), y)) == 0


def test_differentiate_refuses_branches():
    x = P("x", 1.0)
    with pytest.raises(BranchyExpression):
        differentiate(E.abs_(x), x)


def test_pin_min_picks_smaller():
    a, b = P("a", 1.0), P("b", 2.0)
    pinned = pin_branches(E.min_(a, b))
    assert isinstance(pinned, E.ParamRef) and pinned.param is a


def test_pin_abs_negative_branch():
    s = P("s", -3.0)
    pinned = pin_branches(E.abs_(s))
    assert pinned.op == "neg" and evaluate(pinned) == 3.0


def test_pin_abs_tie_goes_positive():
    s = P("s", 0.0)
    _, pattern = pin_with_pattern(E.abs_(s))
    assert pattern == (0,)


def test_pin_nested():
    p, q, r = P("p", 5.0), P("q", 2.0), P("r", 4.0)
    e = E.max_(E.min_(p, q), r)
    pinned = pin_branches(e)
    assert pinned.param is r
    assert evaluate(pinned) == evaluate(e)


def test_env_overrides_current_values():
    x = P("x", 1.0)
    assert evaluate(E.square(x), {x.id: 3.0}) == 9.0
    assert x.value == 1.0


def test_parameters_reject_non_finite():
    x = P("x", 1.0)
    with pytest.raises(ValueError):
        x.value = float("nan")


def test_residual_satisfaction():
    x = P("x", 2.0)
    r = Residual(x.ref() - 2.0 - 1e-10)
    assert r.satisfied()
    assert not Residual(x.ref() - 2.1).satisfied()


def test_sexpr_form():
    w = P("width", 1.0)
    assert to_sexpr(Const(2) * w) == '(mul 2 (param "width"))'


# --- properties --------------------------------------------------------------------

def _random_case(seed, depth=8, branchy=False):
    rng = random.Random(seed)
    ps = [P(f"x{i}", 0.0) for i in range(3)]
    env = {p.id: rng.uniform(-10, 10) for p in ps}
    e = random_expression(rng, ps, env, rng.randint(1, depth))
    if branchy:
        # splice piecewise operators over random branch-free pieces
        for _ in range(rng.randint(1, 4)):
            other = random_expression(rng, ps, env, 3)
            op = rng.choice(["min", "max", "abs", "norm"])
            e = E.binary(op, e, other) if op in ("min", "max") else E.unary(op, e - other)
    return ps, env, e


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_derivative_matches_central_difference(seed):
    ps, env, e = _random_case(seed)
    for p in ps:
        sym = evaluate(differentiate(e, p), env)
        fd = central_difference(e, p, env)
        assert abs(sym - fd) <= 1e-4 * max(1.0, abs(sym))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pinning_preserves_value_exactly(seed):
    _, env, e = _random_case(seed, depth=5, branchy=True)
    assert evaluate(pin_branches(e, env), env) == evaluate(e, env)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pinning_is_idempotent(seed):
    _, env, e = _random_case(seed, depth=5, branchy=True)
    once = pin_branches(e, env)
    assert structurally_equal(pin_branches(once, env), once)
    assert not E.has_branches(once)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_evaluation_is_deterministic(seed):
    _, env, e = _random_case(seed)
    assert evaluate(e, env) == evaluate(e, env)
