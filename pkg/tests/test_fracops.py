import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from psimellin.expr import parse_expr
from psimellin.fracops import (
    FracSpec,
    apply_operator,
    caputo_derivative,
    conjugated_op,
    derivative_order,
    hilfer_derivative,
    integral_function,
    rl_derivative,
    rl_integral,
)
from psimellin.funcspace import AdmissiblePsi, Weight, d_psi_omega
from psimellin.quad import integrate_finite

INV_GAMMA_15 = 1.0 / math.gamma(1.5)  # 1.1283791670955126 = Gamma(2)/Gamma(1.5)

# (f, psi, omega) with f vanishing at the base point, so that all four
# operators are defined without boundary terms
SUITE = [
    ("x*exp(-x)", "x", "1"),
    ("x*exp(-x)", "x+x^2/2", "1+x"),
    ("x*exp(-x)", "ln(1+x)", "1+x"),
    ("x*exp(-x)", "x+x^2/2", "exp(-x/2)"),
    ("x^2", "x", "1"),
]


def _ops(psi, omega):
    return AdmissiblePsi(psi), Weight(omega)


# {{{ fixtures

def test_integral_fixtures():
    assert rl_integral("1", "x", "1", 0.5, 0.0, 1.0).value == pytest.approx(INV_GAMMA_15, rel=1e-12)
    assert rl_integral("exp(-x)", "ln(1+x)", "1+x", 0.7, 1.0, 1.0).value == 0
    assert rl_integral("x", "x", "1", 1.0, 0.0, 2.0).value == pytest.approx(2.0, rel=1e-12)


def test_rl_derivative_fixtures():
    r = rl_derivative("x", "x", "1", 0.5, 0.0, 1.0)
    assert r.value == pytest.approx(INV_GAMMA_15, rel=1e-8)
    for x in (0.5, 1.0, 2.5):
        r = rl_derivative("x*exp(-x)", "x", "1", 1.0, 0.0, x)
        assert r.value == pytest.approx((1 - x) * math.exp(-x), abs=1e-8)


def test_caputo_fixtures():
    for psi in ("x", "ln(1+x)"):
        assert abs(caputo_derivative("3.5", psi, "1", 0.5, 0.0, 1.3).value) <= 1e-15
    r = caputo_derivative("x", "x", "1", 0.5, 0.0, 1.0)
    assert r.value == pytest.approx(INV_GAMMA_15, rel=1e-10)
    # continuity in alpha towards the first derivative
    r = caputo_derivative("x^2", "x", "1", 0.999, 0.0, 1.0)
    assert r.value == pytest.approx(2.0, abs=1e-2)


def test_hilfer_fixture():
    r = hilfer_derivative("x", "x", "1", 0.5, 0.5, 0.0, 1.0)
    assert r.value == pytest.approx(INV_GAMMA_15, rel=1e-6)


def test_conjugated_fixtures():
    spec = FracSpec(0.5, "rl-integral")
    direct = apply_operator(spec, "exp(-x)", "x", "1", 1.3)
    conj = conjugated_op("exp(-x)", "x", "1", spec, 1.3)
    assert abs(direct.value - conj.value) <= 1e-12
    r = conjugated_op("1", "ln(1+x)", "1", spec, math.e - 1)
    assert r.value == pytest.approx(INV_GAMMA_15, rel=1e-10)


# reference values: the conjugated classical operator evaluated with mpmath
# at 25 digits (derivatives in the form [F(0) u^-a + int (u-v)^-a F'(v) dv] / Gamma(1-a))
MPMATH_OPERATORS = [
    (FracSpec(0.5, "rl-integral"), "exp(-x)", "x", "1", 1.0, 0.60715770584139257),
    (FracSpec(0.6, "rl-integral"), "exp(-x)", "ln(1+x)", "1+x", 2.0, 0.27582206594511229),
    (FracSpec(0.5, "rl-derivative"), "exp(-x)", "x", "1", 1.0, -0.042968122293636282),
    (FracSpec(0.7, "rl-derivative"), "exp(-x)", "ln(1+x)", "1+x", 1.0, -0.071966021224310998),
    (FracSpec(0.6, "caputo"), "x*exp(-x)", "x+x^2/2", "exp(-x/2)", 1.5, -0.019065850724583766),
    # for f analytic at the base point with f(a) = 0 the Hilfer value equals
    # the Riemann-Liouville one for every beta < 1
    (FracSpec(0.6, "hilfer", 0.3), "x*exp(-x)", "x+x^2/2", "1+x", 1.0, 0.23041852083301645),
]


@pytest.mark.parametrize(("spec", "f", "psi", "omega", "x", "ref"), MPMATH_OPERATORS)
def test_against_mpmath(spec, f, psi, omega, x, ref):
    tol = 1e-10 if spec.kind == "rl-integral" else 1e-6
    direct = apply_operator(spec, f, *_ops(psi, omega), x)
    conj = conjugated_op(f, *_ops(psi, omega), spec, x)
    assert abs(direct.value - ref) <= tol * abs(ref)
    assert abs(conj.value - ref) <= tol * abs(ref)


def test_conjugated_cross_check_derivative():
    spec = FracSpec(0.7, "rl-derivative")
    psi, omega = _ops("ln(1+x)", "1+x")
    direct = apply_operator(spec, "exp(-x)", psi, omega, 1.0)
    conj = conjugated_op("exp(-x)", psi, omega, spec, 1.0)
    assert abs(direct.value - conj.value) < 1e-4

# }}}


# {{{ validation

def test_validation():
    with pytest.raises(ValueError):
        FracSpec(0.0)
    with pytest.raises(ValueError):
        FracSpec(0.5, "grunwald")
    with pytest.raises(ValueError):
        FracSpec(0.5, "hilfer", beta=1.5)
    with pytest.raises(ValueError):
        rl_integral("1", "x", "1", 0.5, 2.0, 1.0)
    assert [derivative_order(a) for a in (0.3, 1.0, 1.5, 2.0, 0.5 + 3j)] == [1, 1, 2, 2, 1]


def test_large_interval():
    # beyond the two-panel split length; oracle I^0.5 e^{-x} = x^0.5 e^{-x} 1F1(0.5; 1.5; x) / Gamma(1.5)
    import mpmath

    x = 40.0
    ref = float(mpmath.sqrt(x) * mpmath.exp(-x) * mpmath.hyp1f1(0.5, 1.5, x) / mpmath.gamma(1.5))
    r = rl_integral("exp(-x)", "x", "1", 0.5, 0.0, x)
    assert r.value == pytest.approx(ref, rel=1e-10)

# }}}


# {{{ properties

@pytest.mark.parametrize(("f", "psi", "omega"), SUITE)
def test_integer_order_collapse(f, psi, omega):
    p, w = _ops(psi, omega)
    x = 1.2
    plain = rl_integral(f, p, w, 1.0, 0.0, x).value
    g = parse_expr(f).evaluate
    ref = integrate_finite(lambda t: w(t) * g(t) * p.prime(t), 0.0, x).value / w(x)
    assert abs(plain - ref) <= 1e-6 * abs(ref)
    exact = d_psi_omega(f, p, w, 1, x)
    for op in (rl_derivative, caputo_derivative):
        assert abs(op(f, p, w, 1.0, 0.0, x).value - exact) <= 1e-6 * max(abs(exact), 1e-2)


@pytest.mark.parametrize(("f", "psi", "omega"), SUITE)
@pytest.mark.parametrize("kind", ["rl-integral", "rl-derivative", "caputo", "hilfer"])
def test_direct_and_conjugated_agree(f, psi, omega, kind):
    spec = FracSpec(0.6, kind, 0.4)
    p, w = _ops(psi, omega)
    for x in (0.4, 1.7):
        direct = apply_operator(spec, f, p, w, x)
        conj = conjugated_op(f, p, w, spec, x)
        assert abs(direct.value - conj.value) <= 1e-4 * max(abs(conj.value), 1e-2)


@pytest.mark.parametrize(("f", "psi", "omega"), SUITE)
def test_hilfer_endpoints(f, psi, omega):
    p, w = _ops(psi, omega)
    x = 0.9
    rd = rl_derivative(f, p, w, 0.6, 0.0, x).value
    cap = caputo_derivative(f, p, w, 0.6, 0.0, x).value
    assert abs(hilfer_derivative(f, p, w, 0.6, 0.0, 0.0, x).value - rd) <= 1e-4
    assert abs(hilfer_derivative(f, p, w, 0.6, 1.0, 0.0, x).value - cap) <= 1e-4


def test_hilfer_interpolates_boundary_term():
    # f = 1 with psi = x: RL gives x^-a / Gamma(1-a) for beta < 1, Caputo gives 0
    a, x = 0.5, 1.0
    rl = x**-a / math.gamma(1 - a)
    for beta in (0.0, 0.5):
        assert hilfer_derivative("1", "x", "1", a, beta, 0.0, x).value == pytest.approx(rl, rel=1e-6)
    assert abs(hilfer_derivative("1", "x", "1", a, 1.0, 0.0, x).value) <= 1e-12


@given(st.sampled_from(SUITE[:4]), st.floats(0.2, 0.9), st.floats(0.2, 0.9), st.floats(0.3, 3.0))
def test_semigroup(case, alpha, gamma, x):
    f, psi, omega = case
    p, w = _ops(psi, omega)
    inner = integral_function(f, p, w, gamma)
    nested = rl_integral(inner, p, w, alpha, 0.0, x).value
    direct = rl_integral(f, p, w, alpha + gamma, 0.0, x).value
    assert abs(nested - direct) <= 1e-5 * abs(direct)


@given(st.floats(0.1, 0.95), st.floats(0.2, 4.0))
def test_classical_power_rule(alpha, x):
    # D^alpha x^2 = Gamma(3) / Gamma(3 - alpha) x^(2 - alpha)
    ref = 2.0 / math.gamma(3 - alpha) * x ** (2 - alpha)
    assert rl_derivative("x^2", "x", "1", alpha, 0.0, x).value == pytest.approx(ref, rel=1e-6)
    assert caputo_derivative("x^2", "x", "1", alpha, 0.0, x).value == pytest.approx(ref, rel=1e-6)


def test_vectorized_integral_function():
    op = integral_function("exp(-x)", "x+x^2/2", "1+x", 0.5)
    xs = np.array([0.0, 0.5, 2.0])
    vals, _ = op(xs)
    assert vals[0] == 0
    for x, v in zip(xs[1:], vals[1:]):
        assert v == pytest.approx(rl_integral("exp(-x)", "x+x^2/2", "1+x", 0.5, 0.0, x).value, rel=1e-13)

# }}}
