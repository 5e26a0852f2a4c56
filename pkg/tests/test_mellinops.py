import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from psimellin.funcspace import AdmissiblePsi, Weight
from psimellin.mellinops import (
    ConvergenceError,
    FdeProblem,
    case4_printed_integrand,
    case4_problem,
    case5_integrand,
    case5_problem,
    check_convolution_theorem,
    check_identity,
    convolve,
    fde_case1,
    fde_closed_case3,
    fde_integrand,
    fde_kernel_h,
    fde_right_sided_check,
    solve_fde,
)
from psimellin.quad import Tolerance
from psimellin.special import gamma_complex
from psimellin.transforms import mellin_transform

SQRT_PI = math.sqrt(math.pi)


# {{{ transform rules

def test_derivative_rule_classical():
    r = check_identity("derivative", "exp(-x)", "x", "1", 1.7, {"n": 1})
    ref = -gamma_complex(1.7)
    assert r.passed
    assert abs(r.lhs - ref) <= 1e-8 * abs(ref)
    assert abs(r.rhs - ref) <= 1e-8 * abs(ref)


def test_shifting_rule():
    r = check_identity("shifting", "exp(-x)", "ln(1+x)", "1+x", 0.8, {"a": 1.0})
    assert r.passed and r.rel_diff < 1e-9 and not r.diagnostic


def test_literal_shifting_is_a_diagnostic():
    r = check_identity("shifting-literal", "exp(-x)", "ln(1+x)", "1+x", 0.8, {"a": 1.0})
    assert r.diagnostic
    # the doubly weighted form is a different integral
    assert r.rel_diff > 1e-3


def test_rl_integral_rule():
    r = check_identity("rl-integral", "exp(-x)", "x", "1", 0.3, {"alpha": 0.5})
    ref = gamma_complex(0.2) / gamma_complex(0.7) * mellin_transform("exp(-x)", p=0.8).value
    assert abs(r.rhs - ref) <= 1e-12 * abs(ref)
    assert r.passed and r.rel_diff < 1e-5


def test_rl_integral_rule_outside_range_is_noted():
    r = check_identity("rl-integral", "exp(-x)", "x", "1", 0.8, {"alpha": 0.5})
    assert "outside" in r.notes


def test_laplace_and_fourier_relations():
    assert check_identity("laplace", "exp(-x)", "x", "1", 2.5).passed
    assert check_identity("fourier", "exp(-x^2/2)", "x", "1", 0.0, {"k": 1.0}).passed
    literal = check_identity("fourier-literal", "exp(-x^2/2)", "x", "1", 0.0, {"k": 1.0})
    assert literal.diagnostic


def test_unknown_identity():
    with pytest.raises(ValueError):
        check_identity("no-such-rule", "exp(-x)")

# }}}


# {{{ convolution

def test_convolution_fixtures():
    # int_0^inf e^-s e^-1/s ds/s = 2 K_0(2) (Bessel function reference via mpmath)
    r = convolve("exp(-x)", "exp(-x)", "x", "1", 1.0)
    assert r.value == pytest.approx(0.22778774549906687, rel=1e-10)


def test_convolution_general_against_mpmath():
    r = convolve("exp(-x)", "x*exp(-x)", AdmissiblePsi("ln(1+x)"), Weight("1+x"), 1.0)
    assert r.value == pytest.approx(0.29096419731815312, rel=1e-10)


@given(st.floats(-50.0, 50.0), st.floats(0.2, 5.0))
def test_convolution_is_linear(c, x):
    # purely relative tolerance: an absolute floor would stop small multiples early
    tol = Tolerance(abs_tol=1e-300, rel_tol=1e-13)
    base = convolve("exp(-x)", "x*exp(-x)", "x+x^2/2", "1+x", x, tol).value
    scaled = convolve("exp(-x)", f"{c!r}*x*exp(-x)", "x+x^2/2", "1+x", x, tol).value
    assert abs(scaled - c * base) <= 1e-11 * abs(c * base) + 1e-300


@pytest.mark.parametrize("width", [0.05, 0.1])
def test_convolution_sifting(width):
    # f concentrated near s0 with unit mass in ds/s: (f * g)(x) ~ g(x / s0) up to O(width^2)
    s0 = 2.0
    bump = f"exp(-(ln(x/{s0})/{width})^2/2)/({width}*{math.sqrt(2 * math.pi)!r})"
    r = convolve(bump, "exp(-x)", "x", "1", 3.0)
    assert r.value == pytest.approx(math.exp(-1.5), rel=width**2)


def test_convolution_theorem_fixtures():
    r = check_convolution_theorem("exp(-x)", "exp(-x)", "x", "1", 1.5)
    assert abs(r.lhs - math.pi / 4) <= 1e-6 and abs(r.rhs - math.pi / 4) <= 1e-12
    r = check_convolution_theorem("(1+x)^(-2)", "(1+x)^(-2)", "ln(1+x)", "1", 1.0)
    assert r.passed and r.rel_diff < 1e-4
    r = check_convolution_theorem("0", "exp(-x)", "x", "1", 1.5)
    assert r.lhs == 0 and r.rhs == 0

# }}}


# {{{ fractional differential equation

def test_kernel_fixtures():
    assert fde_kernel_h(AdmissiblePsi("x"), Weight(1), 1.5, 1.0) == 0
    assert fde_kernel_h(AdmissiblePsi("x"), Weight(1), 1.5, 3.0) == 0
    ref = 0.75**0.5 / (0.25**1.5 * math.gamma(1.5))
    assert fde_kernel_h(AdmissiblePsi("x"), Weight(1), 1.5, 0.25) == pytest.approx(ref, rel=1e-14)
    scaled = fde_kernel_h(AdmissiblePsi("x"), Weight("exp(x)"), 1.5, 0.25)
    assert scaled == pytest.approx(ref * math.exp(-0.25), rel=1e-14)


def test_closed_case3():
    assert fde_closed_case3(1, -2, 1.5, 1.0) == pytest.approx(SQRT_PI, rel=1e-14)
    assert fde_closed_case3(2, -4, 1.5, 1.0) == pytest.approx(SQRT_PI, rel=1e-14)
    with pytest.raises(ConvergenceError):
        fde_closed_case3(1, 0, 1.5, 1.0)


def test_case3_solution():
    problem = FdeProblem(1.5, "x^(-2)")
    r = solve_fde(problem, 2.0)
    assert r.converged and r.value == pytest.approx(SQRT_PI / 4, rel=1e-10)
    for k, n in ((2.0, -4.0), (0.5, -1.5)):
        problem = FdeProblem(1.5, f"x^({n})", AdmissiblePsi(f"x^{k}"))
        for x in (0.5, 1.3):
            ref = fde_closed_case3(k, n, 1.5, x)
            assert solve_fde(problem, x).value == pytest.approx(ref, rel=1e-8)


def test_zero_source():
    assert solve_fde(FdeProblem(1.5, "0", "x+x^2/2", "1+x"), 0.7).value == 0


@pytest.mark.parametrize("g", ["x^(-2)", "exp(-x)", "x^(-3)*exp(-1/x)"])
def test_case1_matches_generic(g):
    problem = FdeProblem(1.7, g)
    for x in (0.5, 1.0, 2.0):
        generic = solve_fde(problem, x).value
        classical = fde_case1(g, 1.7, x).value
        assert abs(generic - classical) <= 1e-8 * abs(generic)


def test_validation():
    with pytest.raises(ValueError):
        FdeProblem(2.5, "x^(-2)")
    with pytest.raises(ValueError):
        FdeProblem(1.0, "x^(-2)")
    with pytest.raises(ValueError):
        solve_fde(FdeProblem(1.5, "x^(-2)"), 0.0)


@pytest.mark.parametrize(("alpha", "g", "psi", "omega"), [
    (1.5, "x^(-2)", "ln(1+x)", "1"),
    (1.7, "exp(-x)", "x+x^2/2", "1+x"),
])
def test_right_sided_relation(alpha, g, psi, omega):
    lhs, rhs = fde_right_sided_check(FdeProblem(alpha, g, psi, omega), 1.0)
    assert lhs.converged and rhs.converged
    assert abs(lhs.value - rhs.value) <= 1e-8 * abs(rhs.value)


def test_right_sided_divergence_is_flagged():
    # omega g psi' ~ 1 at infinity: the weighted integral does not exist
    lhs, rhs = fde_right_sided_check(FdeProblem(1.5, "x^(-2)", "x+x^2/2", "1+x"), 1.0)
    assert not lhs.converged and not rhs.converged


def test_case4_integrand_and_divergence():
    problem = case4_problem()
    s = np.array([0.3, 0.8, 1.2, 1.6])
    for x in (0.5, 1.0):
        generic = fde_integrand(problem, x, s)
        printed = case4_printed_integrand(1.5, x, s)
        np.testing.assert_allclose(generic, printed, rtol=1e-6)
    # omega(z) g(z) = e^z z^2 grows without bound as s -> 0: no finite solution
    assert not solve_fde(problem, 1.0).converged


def test_case5_against_mpmath():
    problem = case5_problem()
    # mpmath quadrature of the re-derived integrand at 20 digits
    for x, ref in ((2.0, 1.2253123493944116), (3.0, 0.27292027813661568)):
        r = solve_fde(problem, x)
        assert r.converged and r.value == pytest.approx(ref, rel=1e-9)


def test_case5_integrand():
    problem = case5_problem()
    s = np.array([1.05, 1.4, 2.0, 2.6])

    def g(z):
        return z**-2.0

    for x in (1.5, 2.0, 3.0):
        generic = fde_integrand(problem, x, s)
        derived = case5_integrand(1.5, x, s, g)
        np.testing.assert_allclose(generic, derived, rtol=1e-6)
        literal = case5_integrand(1.5, x, s, g, literal=True)
        assert not np.allclose(literal, derived, rtol=1e-3)

# }}}
