r"""Weighted fractional integrals and derivatives with respect to a function.

For :math:`\Re(\alpha) > 0` the left-sided integral with base point :math:`a` is

.. math::

    I^{\alpha}_{a+;\psi,\omega} f(x) = \frac{1}{\Gamma(\alpha)\,\omega(x)}
        \int_a^x (\psi(x) - \psi(t))^{\alpha - 1} \omega(t) f(t) \psi'(t) \,\mathrm{d}t,

and with :math:`\mathcal{D} = \frac{1}{\psi'}\left(\frac{d}{dx} + \frac{\omega'}{\omega}\right)`
the derivatives are

* Riemann-Liouville: :math:`\mathcal{D}^n I^{n - \alpha}`,
* Caputo: :math:`I^{n - \alpha} \mathcal{D}^n`,
* Hilfer: :math:`I^{\beta(n - \alpha)} \mathcal{D}^n I^{(1 - \beta)(n - \alpha)}`.

Every operator has a direct implementation (quadrature in :math:`t` with the
weighted kernel) and a conjugated implementation that applies the classical
operator (:math:`\psi = x`, :math:`\omega = 1`) to
:math:`u \mapsto \omega(\psi^{-1}(u)) f(\psi^{-1}(u))`; the two serve as each
other's oracle.

All internal routines are vectorized over :math:`x` and accept integrands
returning ``(values, errors)`` so that operators can be nested (Hilfer
derivatives, Mellin transforms of operators) with honest error bounds.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np

from psimellin.expr import Expr, as_expr, div, mul
from psimellin.funcspace import (
    IDENTITY_PSI,
    UNIT_WEIGHT,
    AdmissiblePsi,
    Weight,
    as_function,
    as_psi,
    as_weight,
    d_psi_omega_expr,
)
from psimellin.quad import DEFAULT_TOL, QuadResult, Tolerance, integrate_finite_batch
from psimellin.special import gamma_complex

Kind = Literal["rl-integral", "rl-derivative", "caputo", "hilfer"]
KINDS = ("rl-integral", "rl-derivative", "caputo", "hilfer")

#: tolerance used for quadratures that are later differentiated numerically
INNER_TOL = Tolerance(abs_tol=1e-15, rel_tol=1e-13)

#: intervals longer than this are split into a near-x panel and a logarithmic panel
SPLIT_LENGTH = 16.0

#: rows per batch of vectorized integrals, bounding the memory of nested operators
CHUNK_ROWS = 512

#: first finite-difference step relative to the local length scale
FD_STEP = 0.125

#: accuracy expected from (and demanded of) results that involve finite differences
FD_TOL = Tolerance(abs_tol=1e-10, rel_tol=1e-6)


def _loosen(tol: Tolerance, floor: Tolerance) -> Tolerance:
    return Tolerance(abs_tol=max(tol.abs_tol, floor.abs_tol),
                     rel_tol=max(tol.rel_tol, floor.rel_tol), max_evals=tol.max_evals)


def derivative_order(alpha: complex) -> int:
    r"""Integer :math:`n` with :math:`n - 1 < \Re(\alpha) \le n`.

    This coincides with ``floor(Re(alpha)) + 1`` for non-integer orders and
    makes integer orders collapse to :math:`\mathcal{D}^n`.
    """
    re = complex(alpha).real
    if not re > 0:
        raise ValueError("Re(alpha) must be positive")
    return max(1, math.ceil(re))


@dataclass(frozen=True)
class FracSpec:
    """Order and kind of a fractional operator."""

    alpha: complex
    kind: Kind = "rl-integral"
    beta: float = 0.0
    base_point: float = 0.0

    def __post_init__(self) -> None:
        if not complex(self.alpha).real > 0:
            raise ValueError("Re(alpha) must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not self.base_point >= 0:
            raise ValueError("base_point must be non-negative")

    @property
    def n(self) -> int:
        return derivative_order(self.alpha)


def _split(out):
    if isinstance(out, tuple):
        vals, errs = out
        return np.asarray(vals, dtype=complex), np.asarray(errs, dtype=float)
    return np.asarray(out, dtype=complex), None


# {{{ vectorized kernels


def _integral_values(func: Callable, psi: AdmissiblePsi, omega: Weight, alpha: complex,
                     a: float, x: np.ndarray, tol: Tolerance,
                     antiderivative: Callable | None = None, func_weighted: bool = False,
                     weighted: bool = False):
    """Vectorized :math:`I^\\alpha_{a+}` at the points *x* (any shape).

    Returns ``(values, errors, converged)`` shaped like *x*. ``alpha == 0`` is
    the identity. With *func_weighted*, *func* already returns ``omega * f``;
    with *weighted*, the result is ``omega * I f``. Both avoid forming
    ``omega(t) / omega(x)``, which overflows for decaying weights.

    *antiderivative*, if given, is a callable ``Phi`` with
    ``Phi' = omega * psi' * f``. Far from the base point the kernel is then
    split as ``K(t) = (K(t) - K(a)) + K(a)``, so integrands whose total mass
    cancels (derivatives of decaying functions) keep their relative accuracy.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    xf = x.ravel()
    alpha = complex(alpha)
    if xf.size > CHUNK_ROWS:
        parts = [_integral_values(func, psi, omega, alpha, a, xf[i:i + CHUNK_ROWS], tol,
                                  antiderivative, func_weighted, weighted)
                 for i in range(0, xf.size, CHUNK_ROWS)]
        return tuple(np.concatenate(arrs).reshape(shape) for arrs in zip(*parts))
    if alpha == 0:
        vals, errs = _split(func(xf))
        errs = np.zeros(xf.shape) if errs is None else errs
        if func_weighted != weighted:
            w = omega(xf) if weighted else 1.0 / omega(xf)
            vals, errs = vals * w, errs * np.abs(w)
        return vals.reshape(shape), errs.reshape(shape), np.isfinite(vals).reshape(shape)
    if np.any(xf < a):
        raise ValueError("fractional integrals require x >= a")

    scale = 1.0 / gamma_complex(alpha)
    rho = alpha.real
    length = xf - a
    # long intervals: the half next to x keeps the kernel substitution, the half
    # next to a is mapped logarithmically so features of f at unit scale survive
    long_rows = length > SPLIT_LENGTH
    near_len = np.where(long_rows, 0.5 * length, length)

    def integrand(t, kernel):
        fv, fe = _split(func(t))
        jac = psi.prime(t) if func_weighted else omega(t) * psi.prime(t)
        vals = np.where(fv == 0, 0.0, kernel * jac * fv)
        if fe is None:
            return vals
        return vals, np.abs(kernel * jac) * fe

    def near(u, dl, dr, rows):
        xr = xf[rows][:, None]
        lr = length[rows][:, None]
        nr = near_len[rows][:, None]
        if rho >= 1.0:
            d = dl
            tma = lr - nr + dr
        else:
            # d = x - t = w^(1/rho) turns d^(alpha-1) dt into d^(i Im alpha) dw / rho,
            # so the weakly singular kernel costs nothing even for alpha near 0
            d = dl ** (1.0 / rho)
            tma = lr - nr + nr * -np.expm1(np.log1p(-dr / nr**rho) / rho)
        t = np.where(d <= 0.5 * lr, xr - d, a + tma)
        positive = d > 0
        safe_d = np.where(positive, d, 1.0)
        gap = psi.difference(xr, safe_d)
        if rho >= 1.0:
            kernel = np.where(positive, np.exp((alpha - 1.0) * np.log(gap)), 0.0)
        else:
            ratio = np.where(positive, gap / safe_d, psi.prime(xr))
            kernel = np.exp((alpha - 1.0) * np.log(ratio)) / rho
            if alpha.imag != 0:
                kernel = kernel * np.where(positive, np.exp(1j * alpha.imag * np.log(safe_d)), 1.0)
        return integrand(t, kernel)

    upper = near_len**rho if rho < 1.0 else near_len
    total, err, ok, _ = integrate_finite_batch(near, 0.0, upper, tol)

    far_rows = np.flatnonzero(long_rows)
    if far_rows.size:
        base_mass = None
        if antiderivative is not None:
            phi_a, _ = _split(antiderivative(np.array([a], dtype=float)))
            if np.isfinite(phi_a[0]):
                base_mass = phi_a[0]
        # psi(x) - psi(a), the kernel's argument at the base point
        full_gap = psi.difference(xf[far_rows], length[far_rows])

        def far(v, dl, dr, rows):
            rows = far_rows[rows]
            xr = xf[rows][:, None]
            lr = length[rows][:, None]
            tma = np.expm1(v)
            if base_mass is None:
                kernel = np.exp((alpha - 1.0) * np.log(psi.difference(xr, lr - tma)))
            else:
                gap = full_gap[np.searchsorted(far_rows, rows)][:, None]
                rise = psi.difference(a + tma, tma) / gap
                kernel = np.exp((alpha - 1.0) * np.log(gap)) * np.expm1(
                    (alpha - 1.0) * np.log1p(-rise))
            return integrand(a + tma, kernel * (1.0 + tma))

        far_len = length[far_rows] - near_len[far_rows]
        ftotal, ferr, fok, _ = integrate_finite_batch(far, 0.0, np.log1p(far_len), tol)
        if base_mass is not None:
            phi_v, phi_e = _split(antiderivative(a + far_len))
            k_a = np.exp((alpha - 1.0) * np.log(full_gap))
            ftotal = ftotal + k_a * (phi_v - base_mass)
            if phi_e is not None:
                ferr = ferr + np.abs(k_a) * phi_e
            fok = fok & np.isfinite(phi_v)
        total[far_rows] += ftotal
        err[far_rows] += ferr
        ok[far_rows] &= fok

    wx = 1.0 if weighted else omega(xf)
    values = scale * total / wx
    errors = abs(scale) * err / wx
    return values.reshape(shape), errors.reshape(shape), ok.reshape(shape)


def _lower_coefficients(psi: AdmissiblePsi, n: int) -> list[Expr]:
    """Coefficients ``c_k`` with ``((1/psi') d/dx)^n = sum_k c_k d^k/dx^k``."""
    coeffs: list[Expr] = [as_expr(1.0)]
    for _ in range(n):
        new = [as_expr(0.0)] * (len(coeffs) + 1)
        for k, c in enumerate(coeffs):
            new[k] = new[k] + div(c.derivative(), psi.psi_prime)
            new[k + 1] = new[k + 1] + div(c, psi.psi_prime)
        coeffs = new
    return coeffs


def _central_difference(values: np.ndarray, errors: np.ndarray, k: int, h: np.ndarray):
    """Central ``k``-th difference from samples at offsets ``(k/2 - j) h``, j = 0..k."""
    binom = np.array([(-1.0) ** j * math.comb(k, j) for j in range(k + 1)])
    d = np.tensordot(binom, values, axes=(0, 0)) / h**k
    e = np.tensordot(np.abs(binom), errors, axes=(0, 0)) / h**k
    return d, e


def _derivatives_by_richardson(J: Callable, x: np.ndarray, a: float, orders: range):
    """Derivatives ``d^k J / dx^k`` at *x* for ``k`` in *orders*.

    Central differences with steps ``h, h/2, h/4`` combined by two Richardson
    steps, where ``h = FD_STEP * max(min(x - a, 1), (x - a) / 16)``. Returns dicts ``k -> values`` and
    ``k -> error estimates``.
    """
    # scale 1 covers features of f; far from a the operators vary on the scale x - a
    dist = x - a
    if np.any(dist <= 0):
        raise ValueError("finite differences need x > a")
    span = np.maximum(np.minimum(dist, 1.0), dist / 16.0)
    steps = [FD_STEP * span / 2**level for level in range(3)]

    # gather every stencil point of every order and level, evaluate once
    offsets = sorted({(k / 2.0 - j) / 2**level
                      for k in orders for level in range(3) for j in range(k + 1)})
    index = {o: i for i, o in enumerate(offsets)}
    base_h = steps[0]
    pts = x[None, :] + np.array(offsets)[:, None] * base_h[None, :]
    vals, errs = J(pts)

    dvals, derrs = {}, {}
    for k in orders:
        level_vals = []
        level_errs = []
        for level, h in enumerate(steps):
            rows = [index[(k / 2.0 - j) / 2**level] for j in range(k + 1)]
            d, e = _central_difference(vals[rows], errs[rows], k, h)
            level_vals.append(d)
            level_errs.append(e)
        r1a = (4.0 * level_vals[1] - level_vals[0]) / 3.0
        r1b = (4.0 * level_vals[2] - level_vals[1]) / 3.0
        r2 = (16.0 * r1b - r1a) / 15.0
        noise = (4.0 * level_errs[1] + level_errs[0]) / 3.0 + (4.0 * level_errs[2]
                                                                 + level_errs[1]) / 3.0
        noise = (16.0 * noise + noise) / 15.0
        dvals[k] = r2
        derrs[k] = np.abs(r2 - r1b) + noise
    return dvals, derrs


def _derivative_of_integral(func: Callable, psi: AdmissiblePsi, omega: Weight, gamma: complex,
                            n: int, a: float, x: np.ndarray, tol: Tolerance,
                            exact: Expr | None = None, weighted: bool = False):
    r"""Vectorized :math:`\mathcal{D}^n I^{\gamma}_{a+} f` at *x*.

    Uses :math:`\mathcal{D}^n (J/\omega) = \omega^{-1} L^n J` with
    :math:`L = (1/\psi') d/dx` and :math:`J = \omega I^\gamma f`; ``L^n`` is
    expanded into exact coefficients times finite-difference derivatives of
    ``J``. When ``gamma == 0`` and *exact* (an expression for *f*) is given,
    the result is computed symbolically instead. With *weighted* the result
    is multiplied by ``omega``.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    xf = x.ravel()
    if complex(gamma) == 0 and exact is not None:
        expr = d_psi_omega_expr(exact, psi, omega, n)
        with np.errstate(all="ignore"):
            vals = np.asarray(expr.evaluate(xf), dtype=complex)
            if weighted:
                vals = vals * omega(xf)
        return vals.reshape(shape), np.zeros(shape), np.isfinite(vals).reshape(shape)

    inner_tol = Tolerance(abs_tol=min(tol.abs_tol, INNER_TOL.abs_tol),
                          rel_tol=min(tol.rel_tol, INNER_TOL.rel_tol), max_evals=tol.max_evals)

    def J(pts):
        # non-converged rows still carry an error estimate, which enters the budget below
        v, e, _ = _integral_values(func, psi, omega, gamma, a, pts, inner_tol, weighted=True)
        return v, e

    coeffs = _lower_coefficients(psi, n)
    # quadrature nodes of an outer integral may round onto the base point itself;
    # those rows get nan and are dropped by the outer rule
    inside = xf > a
    xi = xf[inside]
    total = np.full(xf.shape, np.nan, dtype=complex)
    err = np.full(xf.shape, np.inf)
    if xi.size:
        dvals, derrs = _derivatives_by_richardson(J, xi, a, range(1, n + 1))
        tot = np.zeros(xi.shape, dtype=complex)
        er = np.zeros(xi.shape)
        with np.errstate(all="ignore"):
            for k in range(1, n + 1):
                c = np.asarray(coeffs[k].evaluate(xi), dtype=float) * np.ones(xi.shape)
                tot += c * dvals[k]
                er += np.abs(c) * derrs[k]
            w = 1.0 if weighted else omega(xi)
        total[inside] = tot / w
        err[inside] = er / w
    conv = np.isfinite(total) & (err <= _loosen(tol, FD_TOL).bound(total))
    return total.reshape(shape), err.reshape(shape), conv.reshape(shape)


# }}}


# {{{ operator callables


def _check_base(a: float, x) -> None:
    if np.any(np.asarray(x) < a):
        raise ValueError("x must not be smaller than the base point a")


def integral_function(f, psi, omega, alpha, a: float = 0.0, tol: Tolerance | None = None,
                      weighted: bool = False):
    """Callable ``x -> (values, errors)`` for :math:`I^\\alpha_{a+;\\psi,\\omega} f`.

    With *weighted* the callable returns ``omega * I f`` instead, which stays
    finite where the operator value itself overflows.
    """
    func = as_function(f)
    psi, omega, tol = as_psi(psi), as_weight(omega), tol or DEFAULT_TOL

    def op(x):
        x = np.asarray(x, dtype=float)
        out_v = np.zeros(x.shape, dtype=complex)
        out_e = np.zeros(x.shape)
        inside = x > a
        if inside.any():
            v, e, _ = _integral_values(func, psi, omega, alpha, a, x[inside], tol,
                                       weighted=weighted)
            out_v[inside], out_e[inside] = v, e
        return out_v, out_e

    return op


def _derivative_callable(kind: Kind, f, psi, omega, alpha, beta, a, tol, weighted=False):
    """Callable ``x -> (values, errors, converged)`` for the derivative of the given kind.

    With *weighted* the values are multiplied by ``omega``.
    """
    psi, omega, tol = as_psi(psi), as_weight(omega), tol or DEFAULT_TOL
    alpha = complex(alpha)
    n = derivative_order(alpha)
    expr = as_expr(f) if isinstance(f, (Expr, str)) else None
    func = as_function(f)

    if kind == "rl-derivative":
        def op(x):
            return _derivative_of_integral(func, psi, omega, n - alpha, n, a, x, tol, expr,
                                           weighted)
        return op

    if kind == "caputo":
        if expr is None:
            raise TypeError("Caputo derivatives need f as an expression")
        inner = as_function(d_psi_omega_expr(expr, psi, omega, n))
        # omega psi' D^n f = (omega D^(n-1) f)'
        lower = as_function(mul(omega.omega, d_psi_omega_expr(expr, psi, omega, n - 1)))

        def op(x):
            return _integral_values(inner, psi, omega, n - alpha, a, x, tol, lower,
                                    weighted=weighted)
        return op

    if kind == "hilfer":
        if not 0.0 <= beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        g1 = (1.0 - beta) * (n - alpha)
        g2 = beta * (n - alpha)
        if g1 == 0:
            return _derivative_callable("caputo", f, psi, omega, alpha, 1.0, a, tol, weighted)
        outer_tol = _loosen(tol, FD_TOL)

        def middle(t):
            # accuracy of the middle stage is judged through its propagated errors
            v, e, _ = _derivative_of_integral(func, psi, omega, g1, n, a, t, tol, expr,
                                              weighted=True)
            return v, e

        def lower(t):
            # omega psi' D^n I f = (omega D^(n-1) I f)'
            t = np.asarray(t, dtype=float)
            if n == 1:
                v, e, _ = _integral_values(func, psi, omega, g1, a, t, tol, weighted=True)
            else:
                v, e, _ = _derivative_of_integral(func, psi, omega, g1, n - 1, a, t, tol, expr,
                                                  weighted=True)
            return v, e

        def op(x):
            return _integral_values(middle, psi, omega, g2, a, x, outer_tol, lower,
                                    func_weighted=True, weighted=weighted)
        return op

    raise ValueError(f"{kind!r} is not a derivative")


def derivative_function(kind: Kind, f, psi, omega, alpha, beta: float = 0.0, a: float = 0.0,
                        tol: Tolerance | None = None, weighted: bool = False):
    """Callable ``x -> (values, errors)`` for a fractional derivative (for nesting).

    With *weighted* the callable returns ``omega`` times the derivative.
    """
    op = _derivative_callable(kind, f, psi, omega, alpha, beta, a, tol, weighted)

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        out_v = np.full(x.shape, np.nan, dtype=complex)
        out_e = np.full(x.shape, np.inf)
        inside = x > a
        if inside.any():
            v, e, _ = op(x[inside])
            out_v[inside], out_e[inside] = v, e
        return out_v, out_e

    return wrapped


# }}}


# {{{ public scalar interface


def _result(values, errors, ok, note: str = "") -> QuadResult:
    value = complex(np.asarray(values).ravel()[0])
    converged = bool(np.asarray(ok).ravel()[0]) and np.isfinite(value)
    if not converged and not note:
        note = "not converged"
    return QuadResult(value, float(np.asarray(errors).ravel()[0]), 1, converged, note)


def rl_integral(f, psi=IDENTITY_PSI, omega=UNIT_WEIGHT, alpha: complex = 0.5, a: float = 0.0,
                x: float = 1.0, tol: Tolerance | None = None) -> QuadResult:
    r"""Weighted Riemann-Liouville integral :math:`I^\alpha_{a+;\psi,\omega} f(x)`.

    The kernel :math:`(\psi(x) - \psi(t))^{\alpha - 1}` is formed from the
    distance ``x - t`` supplied by the tanh-sinh rule, so the endpoint
    singularity costs no accuracy. Returns ``0`` at ``x == a``.
    """
    if not complex(alpha).real > 0:
        raise ValueError("Re(alpha) must be positive")
    _check_base(a, x)
    if x == a:
        return QuadResult(0j, 0.0, 0, True, "")
    v, e, ok = _integral_values(as_function(f), as_psi(psi), as_weight(omega), alpha, a,
                                np.array([x], dtype=float), tol or DEFAULT_TOL)
    return _result(v, e, ok)


def rl_derivative(f, psi=IDENTITY_PSI, omega=UNIT_WEIGHT, alpha: complex = 0.5, a: float = 0.0,
                  x: float = 1.0, tol: Tolerance | None = None) -> QuadResult:
    r""":math:`\mathcal{D}^n I^{n - \alpha} f(x)` with :math:`n - 1 < \Re\alpha \le n`.

    The outer :math:`\mathcal{D}^n` is applied by Richardson-extrapolated
    central differences of the inner integral; requires ``x > a``.
    """
    _check_base(a, x)
    op = _derivative_callable("rl-derivative", f, psi, omega, alpha, 0.0, a, tol)
    return _result(*op(np.array([x], dtype=float)))


def caputo_derivative(f, psi=IDENTITY_PSI, omega=UNIT_WEIGHT, alpha: complex = 0.5,
                      a: float = 0.0, x: float = 1.0, tol: Tolerance | None = None) -> QuadResult:
    r""":math:`I^{n - \alpha} \mathcal{D}^n f(x)`; the inner :math:`\mathcal{D}^n f` is exact."""
    _check_base(a, x)
    if x == a:
        return QuadResult(0j, 0.0, 0, True, "")
    op = _derivative_callable("caputo", f, psi, omega, alpha, 1.0, a, tol)
    return _result(*op(np.array([x], dtype=float)))


def hilfer_derivative(f, psi=IDENTITY_PSI, omega=UNIT_WEIGHT, alpha: complex = 0.5,
                      beta: float = 0.5, a: float = 0.0, x: float = 1.0,
                      tol: Tolerance | None = None) -> QuadResult:
    r""":math:`I^{\beta(n-\alpha)} \mathcal{D}^n I^{(1-\beta)(n-\alpha)} f(x)`.

    ``beta = 0`` is the Riemann-Liouville derivative and ``beta = 1`` the
    Caputo derivative.
    """
    _check_base(a, x)
    if beta == 0:
        return rl_derivative(f, psi, omega, alpha, a, x, tol)
    op = _derivative_callable("hilfer", f, psi, omega, alpha, beta, a, tol)
    return _result(*op(np.array([x], dtype=float)))


def apply_operator(spec: FracSpec, f, psi=IDENTITY_PSI, omega=UNIT_WEIGHT, x: float = 1.0,
                   tol: Tolerance | None = None) -> QuadResult:
    """Dispatch on ``spec.kind`` to the direct implementation."""
    a = spec.base_point
    if spec.kind == "rl-integral":
        return rl_integral(f, psi, omega, spec.alpha, a, x, tol)
    if spec.kind == "rl-derivative":
        return rl_derivative(f, psi, omega, spec.alpha, a, x, tol)
    if spec.kind == "caputo":
        return caputo_derivative(f, psi, omega, spec.alpha, a, x, tol)
    return hilfer_derivative(f, psi, omega, spec.alpha, spec.beta, a, x, tol)


# }}}


# {{{ conjugated form


def conjugated_function(f, psi: AdmissiblePsi, omega: Weight):
    r"""The conjugated function :math:`u \mapsto \omega(\psi^{-1}(u)) f(\psi^{-1}(u))`.

    An expression when :math:`\psi^{-1}` is known in closed form (so that
    classical derivatives stay exact), otherwise a numeric callable.
    """
    if psi.inverse_expr is not None and isinstance(f, (Expr, str)):
        return mul(omega.omega, as_expr(f)).substitute(psi.inverse_expr)
    func = as_function(f)

    def phi(u):
        x = psi.inverse(np.asarray(u, dtype=float))
        return omega(x) * func(x)

    return phi


def _classical_caputo_numeric(f, psi: AdmissiblePsi, omega: Weight, n: int):
    r"""``u -> phi^{(n)}(u)`` for the conjugated function with a numeric inverse.

    Uses :math:`\phi^{(n)}(\psi(x)) = ((1/\psi') d/dx)^n (\omega f)(x)`, built
    as an expression in ``x`` and evaluated at :math:`x = \psi^{-1}(u)`.
    """
    g = mul(omega.omega, as_expr(f))
    for _ in range(n):
        g = div(g.derivative(), psi.psi_prime)

    def deriv(u):
        return g.evaluate(psi.inverse(np.asarray(u, dtype=float)))

    return deriv


def conjugated_op(f, psi=IDENTITY_PSI, omega=UNIT_WEIGHT, spec: FracSpec | None = None,
                  x: float = 1.0, tol: Tolerance | None = None) -> QuadResult:
    r"""Evaluate an operator as :math:`M_\omega^{-1} Q_\psi\, \mathrm{op}\, Q_\psi^{-1} M_\omega f`.

    The classical operator (the :math:`\psi = x`, :math:`\omega = 1` code
    path) is applied to the conjugated function with base point
    :math:`\psi(a)`, evaluated at :math:`u = \psi(x)` and divided by
    :math:`\omega(x)`.
    """
    spec = spec or FracSpec(0.5)
    psi, omega, tol = as_psi(psi), as_weight(omega), tol or DEFAULT_TOL
    u = float(psi(np.float64(x)))
    ua = float(psi(np.float64(spec.base_point)))
    wx = float(omega(np.float64(x)))
    phi = conjugated_function(f, psi, omega)
    classical = FracSpec(spec.alpha, spec.kind, spec.beta, ua)

    if spec.kind == "caputo" and not isinstance(phi, Expr):
        n = spec.n
        inner = _classical_caputo_numeric(f, psi, omega, n)
        if u == ua:
            res = QuadResult(0j, 0.0, 0, True, "")
        else:
            v, e, ok = _integral_values(inner, IDENTITY_PSI, UNIT_WEIGHT, n - complex(spec.alpha),
                                        ua, np.array([u]), tol)
            res = _result(v, e, ok)
    elif spec.kind == "caputo" or isinstance(phi, Expr):
        res = apply_operator(classical, phi, IDENTITY_PSI, UNIT_WEIGHT, u, tol)
    elif spec.kind == "rl-integral":
        res = rl_integral(phi, IDENTITY_PSI, UNIT_WEIGHT, spec.alpha, ua, u, tol)
    else:
        op = _derivative_callable(spec.kind, phi, IDENTITY_PSI, UNIT_WEIGHT, spec.alpha,
                                  spec.beta, ua, tol)
        res = _result(*op(np.array([u], dtype=float)))
    return QuadResult(res.value / wx, res.err_abs / wx, res.n_evals, res.converged, res.note)


# }}}
