import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from psimellin.expr import parse_expr
from psimellin.funcspace import (
    IDENTITY_PSI,
    UNIT_WEIGHT,
    AdmissibilityError,
    AdmissiblePsi,
    UnboundedWeightWarning,
    Weight,
    d_psi_omega,
    m_omega,
    q_psi,
)

PSIS = ["x", "ln(1+x)", "x+x^2/2", "x^3+x", "2*x"]
WEIGHTS = ["1", "1+x", "exp(-x/2)"]
FUNCS = ["exp(-x)", "(1+x)^(-2)", "x*exp(-x)"]


# {{{ admissibility

def test_rejects_non_monotone_and_shifted():
    with pytest.raises(AdmissibilityError):
        AdmissiblePsi("x^2-x")
    with pytest.raises(AdmissibilityError):
        AdmissiblePsi("x+1")


@pytest.mark.parametrize("omega", ["0", "-1", "1-x"])
def test_rejects_non_positive_weights(omega):
    with pytest.raises(AdmissibilityError):
        Weight(omega)


def test_unbounded_weight_is_accepted_with_warning():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        w = Weight("exp(x)")
    assert w.unbounded
    assert any(issubclass(c.category, UnboundedWeightWarning) for c in caught)


@pytest.mark.parametrize("psi", PSIS)
def test_inverse(psi):
    p = AdmissiblePsi(psi)
    x = np.array([1e-3, 0.5, 1.0, 7.0, 40.0])
    np.testing.assert_allclose(p.inverse(p(x)), x, rtol=1e-12)


def test_difference_is_accurate_for_small_gaps():
    p = AdmissiblePsi("ln(1+x)")
    x, d = 2.0, 1e-9
    # psi(x) - psi(x - d) = ln((1+x)/(1+x-d)), formed without cancellation
    assert float(p.difference(x, d)) == pytest.approx(-math.log1p(-d / 3.0), rel=1e-13)

# }}}


# {{{ Q_psi and M_omega

def test_q_psi_fixtures():
    log_psi = AdmissiblePsi("ln(1+x)")
    assert q_psi(lambda x: x, log_psi)(math.e - 1) == pytest.approx(1.0, rel=1e-15)
    assert q_psi(parse_expr("x^2"), IDENTITY_PSI)(3.0) == 9.0
    round_trip = q_psi(q_psi(parse_expr("exp(-x)"), log_psi), log_psi, "inverse")
    assert round_trip(2.0) == pytest.approx(math.exp(-2.0), rel=1e-14)


def test_m_omega_fixtures():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnboundedWeightWarning)
        assert m_omega(lambda x: 1.0, Weight("exp(x)"))(1.0) == pytest.approx(math.e, rel=1e-15)
    assert m_omega(parse_expr("x"), Weight(parse_expr("x^2")))(3.0) == pytest.approx(27.0)


@given(st.sampled_from(FUNCS), st.sampled_from(WEIGHTS), st.floats(0.01, 20.0))
def test_m_omega_inverse_pair(f, omega, x):
    w = Weight(omega)
    back = m_omega(m_omega(parse_expr(f), w), w, "inverse")
    assert back(x) == pytest.approx(float(parse_expr(f).evaluate(x)), rel=1e-13)

# }}}


# {{{ the operator D_{psi, omega}

def test_d_psi_omega_fixtures():
    assert d_psi_omega("exp(-x)", IDENTITY_PSI, UNIT_WEIGHT, 1, 0.0) == pytest.approx(-1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnboundedWeightWarning)
        for x in (0.0, 0.7, 3.0):
            assert d_psi_omega("1", IDENTITY_PSI, Weight("exp(x)"), 1, x) == pytest.approx(1.0)
    log_psi = AdmissiblePsi("ln(1+x)")
    assert d_psi_omega("ln(1+x)", log_psi, UNIT_WEIGHT, 1, 3.0) == pytest.approx(1.0, rel=1e-15)


def _conjugated_derivative(f, psi, omega, x, h=1e-3):
    """(1/omega) Q_psi d/du Q_psi^{-1} (omega f), differentiated numerically in u."""
    fe, p, w = parse_expr(f), AdmissiblePsi(psi), Weight(omega)

    def phi(u):
        t = float(p.inverse(np.float64(u)))
        return float(w(t) * fe.evaluate(t))

    u = float(p(np.float64(x)))
    d1 = (phi(u + h) - phi(u - h)) / (2 * h)
    d2 = (phi(u + h / 2) - phi(u - h / 2)) / h
    d4 = (phi(u + h / 4) - phi(u - h / 4)) / (h / 2)
    r1, r2 = (4 * d2 - d1) / 3, (4 * d4 - d2) / 3
    return (16 * r2 - r1) / 15 / float(w(x))


@given(st.sampled_from(FUNCS), st.sampled_from(["x", "ln(1+x)", "x+x^2/2"]),
       st.sampled_from(WEIGHTS), st.floats(0.3, 4.0))
def test_conjugation_identity(f, psi, omega, x):
    exact = d_psi_omega(f, AdmissiblePsi(psi), Weight(omega), 1, x)
    numeric = _conjugated_derivative(f, psi, omega, x)
    assert abs(exact - numeric) <= 1e-7 * max(abs(exact), 1e-2)


def test_second_order_is_iterated_first_order():
    psi, omega = AdmissiblePsi("x+x^2/2"), Weight("1+x")
    from psimellin.funcspace import d_psi_omega_expr

    once = d_psi_omega_expr("x*exp(-x)", psi, omega, 1)
    twice = d_psi_omega_expr(once, psi, omega, 1)
    direct = d_psi_omega("x*exp(-x)", psi, omega, 2, 1.3)
    assert float(twice.evaluate(1.3)) == pytest.approx(direct, rel=1e-13)

# }}}
