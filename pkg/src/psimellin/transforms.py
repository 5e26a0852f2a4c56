r"""The weighted Mellin transform with respect to a function, and relatives.

For an admissible :math:`\psi` and a weight :math:`\omega`,

.. math::

    F(p) = \int_0^\infty \psi(x)^{p - 1} \omega(x) f(x) \psi'(x) \,\mathrm{d}x,

which after the substitution :math:`u = \psi(x)` is the classical Mellin
transform of :math:`u \mapsto \omega(\psi^{-1}(u)) f(\psi^{-1}(u))`. Both forms
are implemented (``method="direct"`` and ``method="conjugated"``) so each can
check the other.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from psimellin.expr import Expr, as_expr
from psimellin.funcspace import (
    IDENTITY_PSI,
    UNIT_WEIGHT,
    AdmissiblePsi,
    Weight,
    as_function,
    as_psi,
    as_weight,
)
from psimellin.quad import (
    DEFAULT_TOL,
    QuadResult,
    Tolerance,
    integrate_semi_infinite_batch,
    integrate_vertical_line,
    integrate_whole_line,
)

Method = Literal["direct", "conjugated"]


class StripWarning(UserWarning):
    """A transform was requested outside the estimated fundamental strip."""


# {{{ fundamental strip


@dataclass(frozen=True)
class Strip:
    """Open vertical strip ``lower < Re(p) < upper`` (bounds may be infinite)."""

    lower: float
    upper: float
    note: str = ""

    @property
    def empty(self) -> bool:
        return not self.lower < self.upper

    def contains(self, p: complex) -> bool:
        return self.lower < complex(p).real < self.upper


def _log_slopes(logpsi: np.ndarray, logval: np.ndarray) -> np.ndarray:
    return np.diff(logval) / np.diff(logpsi)


def _fit_end(psi: AdmissiblePsi, wf: Callable, grid: np.ndarray, at_infinity: bool):
    """Return ``(exponent, kind)`` with kind in {"power", "fast_decay", "fast_growth"}."""
    with np.errstate(all="ignore"):
        values = np.abs(np.asarray(wf(grid), dtype=complex))
        logpsi = np.log(psi(grid))
    if np.any(~np.isfinite(logpsi)):
        return None, "inconclusive"
    if np.any(values == 0):
        # underflow: faster than any power of psi, in the direction of the end
        return None, "fast_decay"
    if np.any(np.isinf(values)):
        return None, "fast_growth"
    logval = np.log(values)
    if np.any(~np.isfinite(logval)):
        return None, "inconclusive"
    slopes = _log_slopes(logpsi, logval)
    slope, _ = np.polyfit(logpsi, logval, 1)
    # a power law has nearly constant local slopes; exponentials do not
    spread = np.abs(slopes[-1] - slopes[0])
    if spread > 0.5 + 0.5 * abs(slopes[0]):
        outward = slopes[-1] if at_infinity else slopes[0]
        decaying = outward < 0 if at_infinity else outward > 0
        return None, "fast_decay" if decaying else "fast_growth"
    return round(float(slope), 3) + 0.0, "power"  # + 0.0 drops a negative zero


def estimate_strip(f, psi: AdmissiblePsi | Expr | str, omega: Weight | Expr | str | float) -> Strip:
    r"""Estimate the fundamental strip from the asymptotics of :math:`\omega f`.

    If :math:`\omega f = O(\psi^a)` as :math:`x \to 0^+` and
    :math:`O(\psi^b)` as :math:`x \to \infty`, the strip is ``(-a, -b)``. The
    exponents come from least-squares slopes of ``log|omega f|`` against
    ``log psi`` on 16 geometric samples in ``[1e-8, 1e-3]`` and
    ``[1e3, 1e8]``; decay faster than any power gives an infinite bound.
    """
    psi = as_psi(psi)
    omega = as_weight(omega)
    func = as_function(f)

    def wf(x):
        return omega(x) * np.asarray(_values(func(x)), dtype=complex)

    notes = []
    a, kind0 = _fit_end(psi, wf, np.geomspace(1e-8, 1e-3, 16), at_infinity=False)
    if kind0 == "power":
        lower = -a
    elif kind0 == "fast_decay":
        lower = -math.inf
    elif kind0 == "fast_growth":
        lower = math.inf
    else:
        lower = -math.inf
        notes.append("inconclusive fit at 0")

    b, kind1 = _fit_end(psi, wf, np.geomspace(1e3, 1e8, 16), at_infinity=True)
    if kind1 == "power":
        upper = -b
    elif kind1 == "fast_decay":
        upper = math.inf
    elif kind1 == "fast_growth":
        upper = -math.inf
    else:
        upper = math.inf
        notes.append("inconclusive fit at infinity")

    if notes:
        warnings.warn("strip estimate: " + "; ".join(notes), StripWarning, stacklevel=2)
    strip = Strip(float(lower) + 0.0, float(upper) + 0.0, "; ".join(notes))
    if strip.empty:
        strip = Strip(strip.lower, strip.upper, (strip.note + "; " if strip.note else "") + "empty strip")
    return strip


# }}}


# {{{ forward transform


def _values(result):
    return result[0] if isinstance(result, tuple) else result


def _safe_product(*factors):
    """Product that is exactly zero wherever one factor is exactly zero."""
    out = factors[0]
    zero = factors[0] == 0
    for factor in factors[1:]:
        out = out * factor
        zero = zero | (factor == 0)
    return np.where(zero, 0.0, out)


def _kernel_power(base, exponent):
    """``base ** exponent`` for positive ``base`` and complex exponents (broadcast)."""
    with np.errstate(all="ignore"):
        return np.exp(np.multiply.outer(exponent, np.log(base)))


def mellin_batch(
    f,
    psi: AdmissiblePsi,
    omega: Weight,
    p,
    tol: Tolerance | None = None,
    method: Method = "direct",
):
    """Transform at every point of the array *p* with shared abscissas.

    Returns ``(values, errors, converged, n_evals, note)``. *f* may be an
    expression or a vectorized callable; a callable may return
    ``(values, errors)``, which are propagated into the error estimate.
    """
    tol = tol or DEFAULT_TOL
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    func = as_function(f)

    if method == "direct":
        def g(x):
            out = func(x)
            if isinstance(out, tuple):
                fx, fe = out
            else:
                fx, fe = out, None
            jac = _safe_product(omega(x), psi.prime(x))
            base = _safe_product(jac, np.asarray(fx, dtype=complex))
            power = _kernel_power(psi(x), p - 1.0)
            vals = np.where(base == 0, 0.0, power * base)
            if fe is None:
                return vals
            return vals, _safe_product(np.abs(power), np.abs(jac), fe)
    elif method == "conjugated":
        def g(u):
            x = psi.inverse(u)
            out = func(x)
            if isinstance(out, tuple):
                fx, fe = out
            else:
                fx, fe = out, None
            w = omega(x)
            base = _safe_product(w, np.asarray(fx, dtype=complex))
            # psi^{-1}(u) beyond the float range: the integrand of a convergent
            # transform has vanished there, so these nodes carry no mass
            base = np.where(np.isinf(x), 0.0, base)
            power = _kernel_power(u, p - 1.0)
            vals = np.where(base == 0, 0.0, power * base)
            if fe is None:
                return vals
            fe = np.where(np.isinf(x), 0.0, fe)
            return vals, _safe_product(np.abs(power), np.abs(w), fe)
    else:
        raise ValueError(f"unknown method {method!r}")

    return integrate_semi_infinite_batch(g, tol)


@dataclass(frozen=True)
class TransformJob:
    f: Expr | Callable
    psi: AdmissiblePsi = IDENTITY_PSI
    omega: Weight = UNIT_WEIGHT
    p_points: Sequence[complex] = field(default_factory=lambda: (1.0,))
    tol: Tolerance = DEFAULT_TOL
    method: Method = "direct"
    force: bool = False

    def __post_init__(self) -> None:
        if len(self.p_points) == 0:
            raise ValueError("p_points must be nonempty")
        if isinstance(self.f, str):
            object.__setattr__(self, "f", as_expr(self.f))
        object.__setattr__(self, "psi", as_psi(self.psi))
        object.__setattr__(self, "omega", as_weight(self.omega))


def mellin_forward(job: TransformJob) -> list[QuadResult]:
    """Evaluate the transform at each point of ``job.p_points``.

    Points outside the estimated strip produce a :class:`StripWarning` (unless
    ``job.force``) and are attempted anyway; divergence shows up as a
    non-converged result.
    """
    if not job.force and isinstance(job.f, Expr):
        strip = estimate_strip(job.f, job.psi, job.omega)
        outside = [p for p in job.p_points if not strip.contains(p)]
        if outside:
            warnings.warn(
                f"p = {outside} outside the estimated strip ({strip.lower}, {strip.upper})",
                StripWarning,
                stacklevel=2,
            )

    results = []
    for p in job.p_points:
        value, err, n, ok, note = mellin_batch(job.f, job.psi, job.omega, [p], job.tol, job.method)
        results.append(QuadResult(complex(value[0]), float(err[0]), int(n), bool(ok), note))
    return results


def mellin_transform(
    f,
    psi: AdmissiblePsi | Expr | str = IDENTITY_PSI,
    omega: Weight | Expr | str | float = UNIT_WEIGHT,
    p: complex = 1.0,
    tol: Tolerance | None = None,
    method: Method = "direct",
) -> QuadResult:
    """Single-point convenience wrapper around :func:`mellin_batch`."""
    value, err, n, ok, note = mellin_batch(f, as_psi(psi), as_weight(omega), [p], tol, method)
    return QuadResult(complex(value[0]), float(err[0]), int(n), bool(ok), note)


def mellin_function(
    f,
    psi: AdmissiblePsi,
    omega: Weight,
    tol: Tolerance | None = None,
    method: Method = "direct",
) -> Callable:
    """Return ``p -> F(p)`` computed numerically, vectorized over arrays of ``p``."""

    def transform(p):
        p = np.asarray(p, dtype=complex)
        value, _, _, _, _ = mellin_batch(f, psi, omega, p.ravel(), tol, method)
        return value.reshape(p.shape)

    return transform


# }}}


# {{{ inverse transform


def mellin_inverse(
    F: Callable,
    psi: AdmissiblePsi | Expr | str,
    omega: Weight | Expr | str | float,
    x: float,
    gamma: float,
    tol: Tolerance | None = None,
    *,
    T: float = 16.0,
) -> QuadResult:
    r"""Invert along the line ``Re(p) = gamma``:

    .. math::

        f(x) = \frac{1}{2 \pi i\, \omega(x)} \int_{\gamma - i\infty}^{\gamma + i\infty}
            F(p) \psi(x)^{-p} \,\mathrm{d}p.

    The line is truncated by doubling ``T`` (see
    :func:`~psimellin.quad.integrate_vertical_line`). A non-finite ``F`` on
    the contour (``gamma`` outside the strip) gives a non-converged result; an
    ``F`` that raises at a pole, such as
    :func:`~psimellin.special.gamma_complex`, propagates its
    :class:`~psimellin.special.PoleError`.
    """
    psi = as_psi(psi)
    omega = as_weight(omega)
    tol = tol or DEFAULT_TOL
    if not x > 0:
        raise ValueError("x must be positive")
    U = float(psi(np.float64(x)))
    log_u = math.log(U)

    def G(p):
        with np.errstate(all="ignore"):
            return np.asarray(F(p), dtype=complex) * np.exp(-p * log_u)

    line = integrate_vertical_line(G, gamma, T, tol, log_x=log_u, extend=True)
    scale = 1.0 / (2j * math.pi * float(omega(np.float64(x))))
    note = line.note
    if not np.isfinite(line.value):
        note = "non-finite transform on the contour (pole or gamma outside the strip)"
    return QuadResult(line.value * scale, line.err_abs * abs(scale), line.n_evals,
                      line.converged, note)


# }}}


# {{{ bilateral Laplace and Fourier


def _line_integrand(f, psi_line, omega_line):
    fx = as_function(f)
    psi_e = as_expr(psi_line)
    dpsi = psi_e.derivative()
    omega_e = as_expr(omega_line)
    return fx, psi_e, dpsi, omega_e


def laplace_bilateral(f, psi_line="x", omega_line=1.0, p: complex = 0.0,
                      tol: Tolerance | None = None) -> QuadResult:
    r"""``int_R exp(-p psi(x)) omega(x) f(x) psi'(x) dx`` over the whole line.

    ``psi_line`` and ``omega_line`` are plain expressions on the real line; no
    admissibility is imposed on them. Divergence is reported through the
    ``converged`` flag.
    """
    fx, psi_e, dpsi, omega_e = _line_integrand(f, psi_line, omega_line)
    p = complex(p)

    def g(x):
        base = _safe_product(omega_e.evaluate(x), np.asarray(fx(x), dtype=complex), dpsi.evaluate(x))
        return np.where(base == 0, 0.0, np.exp(-p * psi_e.evaluate(x)) * base)

    return integrate_whole_line(g, tol)


def fourier_psi_omega(f, psi_line="x", omega_line=1.0, k: float = 0.0,
                      tol: Tolerance | None = None) -> QuadResult:
    r"""``(2 pi)^{-1/2} int_R exp(-i k psi(x)) omega(x) f(x) psi'(x) dx``."""
    fx, psi_e, dpsi, omega_e = _line_integrand(f, psi_line, omega_line)
    k = float(k)

    def g(x):
        base = _safe_product(omega_e.evaluate(x), np.asarray(fx(x), dtype=complex), dpsi.evaluate(x))
        return np.where(base == 0, 0.0, np.exp(-1j * k * psi_e.evaluate(x)) * base)

    res = integrate_whole_line(g, tol)
    scale = 1.0 / math.sqrt(2.0 * math.pi)
    return QuadResult(res.value * scale, res.err_abs * scale, res.n_evals, res.converged, res.note)


# }}}
