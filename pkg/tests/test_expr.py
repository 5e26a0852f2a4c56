import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from psimellin.expr import ExprSyntaxError, as_expr, parse_expr, to_string

SMOOTH = ["exp(-x)", "ln(1+x)", "x^3", "sin(x)*cos(2*x)", "sqrt(1+x^2)",
          "x*exp(-x/2)", "(1+x)^(-2)", "x^1.5", "exp(-x^2/2)", "x+x^2/2"]


def test_literals_and_variable():
    assert parse_expr("exp(-x)").evaluate(0.0) == 1.0
    assert parse_expr("ln(1+x)").evaluate(0.0) == 0.0
    assert parse_expr("2.5e-1").evaluate(7.0) == 0.25
    assert parse_expr(" x * x ").evaluate(3.0) == 9.0


def test_power_rule_derivative():
    assert parse_expr("x^3").derivative().evaluate(2.0) == pytest.approx(12.0, rel=1e-15)


def test_precedence():
    # exponentiation is right-associative and binds tighter than unary minus
    assert parse_expr("2^3^2").evaluate(0.0) == 512.0
    assert parse_expr("-x^2").evaluate(3.0) == -9.0
    assert parse_expr("(-x)^2").evaluate(3.0) == 9.0
    assert parse_expr("2^-1").evaluate(0.0) == 0.5
    assert parse_expr("1-2-3").evaluate(0.0) == -4.0
    assert parse_expr("8/4/2").evaluate(0.0) == 1.0


def test_other_variable_name():
    assert parse_expr("p^2+1", variable="p").evaluate(3.0) == 10.0
    with pytest.raises(ExprSyntaxError):
        parse_expr("x", variable="p")


@pytest.mark.parametrize("source", ["", "x+", "exp(x", "foo(x)", "x y", "2**x", ")"])
def test_syntax_errors(source):
    with pytest.raises(ExprSyntaxError):
        parse_expr(source)


def test_vectorized_evaluation():
    x = np.linspace(0.5, 2.0, 7)
    np.testing.assert_allclose(parse_expr("x*exp(-x)").evaluate(x), x * np.exp(-x), rtol=1e-15)


@pytest.mark.parametrize("source", SMOOTH)
def test_string_round_trip(source):
    e = parse_expr(source)
    again = parse_expr(to_string(e))
    x = np.array([0.3, 1.0, 2.7])
    np.testing.assert_allclose(again.evaluate(x), e.evaluate(x), rtol=1e-14)


def test_as_expr_accepts_numbers():
    assert as_expr(2.0).evaluate(5.0) == 2.0
    assert as_expr("x").evaluate(5.0) == 5.0


def _richardson(func, x, h):
    d1 = (func(x + h) - func(x - h)) / (2 * h)
    d2 = (func(x + h / 2) - func(x - h / 2)) / h
    return (4 * d2 - d1) / 3


@given(st.sampled_from(SMOOTH), st.floats(0.2, 3.0))
def test_derivative_matches_central_differences(source, x):
    e = parse_expr(source)
    exact = float(e.derivative().evaluate(x))
    estimates = [_richardson(lambda t: float(e.evaluate(t)), x, h) for h in (1e-2, 5e-3, 2.5e-3)]
    best = min(abs(est - exact) for est in estimates)
    assert best <= 1e-6 * max(abs(exact), 1e-3)


@given(st.floats(0.1, 5.0), st.floats(-3.0, 3.0))
def test_power_evaluates_like_math(x, k):
    assert float(parse_expr(f"x^({k!r})").evaluate(x)) == pytest.approx(math.pow(x, k), rel=1e-14)
