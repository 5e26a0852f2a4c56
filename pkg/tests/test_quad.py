import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from psimellin.quad import (
    Tolerance,
    integrate_finite,
    integrate_finite_batch,
    integrate_semi_infinite,
    integrate_vertical_line,
    integrate_whole_line,
)
from psimellin.special import gamma_complex

# {{{ finite intervals


def test_finite_fixtures():
    assert integrate_finite(lambda t: np.ones_like(t), 0.0, 1.0).value == pytest.approx(1.0, rel=1e-14)
    r = integrate_finite(lambda t: t**-0.5, 0.0, 1.0)
    assert r.converged and r.value == pytest.approx(2.0, rel=1e-10)
    r = integrate_finite(lambda t: (1 - t) ** 0.5 * t**-0.5, 0.0, 1.0)
    assert r.value == pytest.approx(math.pi / 2, rel=1e-10)


def test_strong_endpoint_singularity():
    # int_0^1 t^-0.9 cos t dt, summed term by term from the cosine series
    ref = sum((-1) ** n / (math.factorial(2 * n) * (2 * n + 0.1)) for n in range(15))
    r = integrate_finite(lambda t: t**-0.9 * np.cos(t), 0.0, 1.0)
    assert r.converged
    assert r.value == pytest.approx(ref, rel=1e-12)


def test_truncated_singularity_is_flagged():
    # t^-0.99 keeps mass below the smallest representable node
    r = integrate_finite(lambda t: t**-0.99, 0.0, 1.0, Tolerance(max_evals=50_000))
    assert not r.converged
    assert abs(r.value - 100.0) <= r.err_abs


def test_distances_form_avoids_cancellation():
    # with distances=True the integrand receives (t, t - a, b - t)
    r = integrate_finite(lambda t, dl, dr: dr**-0.5, 0.0, 1e-3, distances=True)
    assert r.value == pytest.approx(2 * math.sqrt(1e-3), rel=1e-12)


def test_batch_matches_scalar():
    b = np.array([0.5, 1.0, 3.0])

    def g(t, dl, dr, rows):
        return np.exp(-t) * dl**-0.5

    vals, _, ok, _ = integrate_finite_batch(g, 0.0, b)
    for v, hi in zip(vals, b):
        scalar = integrate_finite(lambda t: np.exp(-t) * t**-0.5, 0.0, hi).value
        assert v == pytest.approx(scalar.real, rel=1e-12)
    assert ok.all()


@given(st.floats(0.1, 5.0), st.floats(-0.5, 2.0), st.floats(0.0, 1.0))
def test_interval_additivity(b, k, frac):
    c = frac * b

    def g(t):
        return t**k * np.exp(-t)

    whole = integrate_finite(g, 0.0, b)
    left, right = integrate_finite(g, 0.0, c), integrate_finite(g, c, b)
    budget = whole.err_abs + left.err_abs + right.err_abs + 1e-12 * abs(whole.value)
    assert abs(whole.value - left.value - right.value) <= 10 * budget


@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_linearity(c):
    def g(t):
        return np.exp(-t) * t**-0.3

    base = integrate_finite(g, 0.0, 2.0).value
    scaled = integrate_finite(lambda t: c * g(t), 0.0, 2.0).value
    assert abs(scaled - c * base) <= 1e-12 * abs(c * base) + 1e-300

# }}}


# {{{ infinite intervals

def test_semi_infinite_fixtures():
    assert integrate_semi_infinite(lambda x: np.exp(-x)).value == pytest.approx(1.0, rel=1e-12)
    r = integrate_semi_infinite(lambda x: x**1.5 * np.exp(-x))
    assert r.value == pytest.approx(1.32934038817913702, rel=1e-10)
    r = integrate_semi_infinite(lambda x: np.exp(-x * x))
    assert r.value == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-10)


@pytest.mark.parametrize("p", [0.125, 0.05, 0.01])
def test_weak_singularity_at_zero(p):
    # int_0^inf x^(p-1) / (1 + x) dx = pi / sin(p pi); small p leaves a slowly vanishing tail
    r = integrate_semi_infinite(lambda x: x ** (p - 1) / (1 + x))
    ref = math.pi / math.sin(p * math.pi)
    assert abs(r.value - ref) <= r.err_abs
    if p == 0.125:
        assert r.converged and r.value == pytest.approx(ref, rel=1e-13)


def test_divergent_integral_is_flagged():
    r = integrate_semi_infinite(lambda x: np.ones_like(x), Tolerance(max_evals=20_000))
    assert not r.converged


def test_whole_line():
    r = integrate_whole_line(lambda x: np.exp(-x * x))
    assert r.value == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_vertical_line_fixtures():
    assert integrate_vertical_line(lambda p: np.zeros_like(p), 0.0, 1.0).value == 0
    r = integrate_vertical_line(lambda p: np.ones_like(p), 0.0, 1.0)
    assert r.value == pytest.approx(2j, rel=1e-13)
    r = integrate_vertical_line(lambda p: gamma_complex(p), 1.5, 60.0)
    assert r.value == pytest.approx(2j * math.pi * math.exp(-1.0), rel=1e-8)


def test_vertical_line_extension_reaches_tail():
    # slowly decaying integrand: the contour must be extended beyond T = 4
    r = integrate_vertical_line(lambda p: gamma_complex(p), 1.5, 4.0, extend=True)
    assert r.value == pytest.approx(2.31145469958184344j, rel=1e-8)

# }}}


# {{{ error estimates

FIXTURES = [
    (lambda t: t**-0.5, 0.0, 1.0, 2.0),
    (lambda t: np.sqrt(1 - t) / np.sqrt(t), 0.0, 1.0, math.pi / 2),
    (lambda t: np.exp(t), 0.0, 2.0, math.expm1(2.0)),
    (lambda t: np.log(t), 0.0, 1.0, -1.0),
    (lambda t: 1 / (1 + t * t), 0.0, 10.0, math.atan(10.0)),
    (lambda t: np.cos(10 * t), 0.0, 1.0, math.sin(10.0) / 10),
    (lambda t: t**-0.75 * np.exp(-t), 0.0, 3.0, None),
    (lambda t: np.sin(t) ** 2, 0.0, math.pi, math.pi / 2),
]


@pytest.mark.parametrize("rtol", [1e-4, 1e-7, 1e-10])
def test_error_estimates_are_honest(rtol):
    import mpmath

    honest = total = 0
    for g, a, b, ref in FIXTURES:
        if ref is None:
            ref = float(mpmath.gammainc(0.25, a, b))
        r = integrate_finite(g, a, b, Tolerance(abs_tol=1e-300, rel_tol=rtol))
        total += 1
        honest += abs(r.value - ref) <= 10 * r.err_abs + 4e-16 * abs(ref)
    assert honest >= 0.95 * total

# }}}
