"""Admissible functions ``psi`` and weights ``omega`` and the pointwise operators.

The conjugation operators are

* ``Q_psi f = f o psi`` and its inverse ``f o psi^{-1}``,
* ``M_omega f = omega * f`` and its inverse ``f / omega``,

and the first order differential operator is
``D_{psi,omega} = (1/psi') (d/dx + omega'/omega)``.
"""

from __future__ import annotations

import warnings
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from psimellin.expr import (
    ONE,
    BinOp,
    Const,
    DomainError,
    Expr,
    Func,
    Var,
    X,
    add,
    as_expr,
    div,
    log_of,
    mul,
    power,
    sub,
)

#: logarithmic grid used by all admissibility checks
SAMPLE_GRID = np.logspace(-6, 6, 64)

Direction = Literal["forward", "inverse"]


class AdmissibilityError(ValueError):
    """Raised when ``psi`` or ``omega`` violates its structural requirements."""


class UnboundedWeightWarning(UserWarning):
    """The weight is positive but not bounded on the sample grid."""


# {{{ inverse of psi


def _square_coefficient(e: Expr) -> float | None:
    """Return ``c`` if *e* is ``x^2``, ``c*x^2``, ``x^2*c`` or ``x^2/c``."""

    def is_square(node):
        return (isinstance(node, BinOp) and node.op == "^" and isinstance(node.left, Var)
                and isinstance(node.right, Const) and node.right.value == 2.0)

    if is_square(e):
        return 1.0
    if isinstance(e, BinOp):
        if e.op == "*" and isinstance(e.left, Const) and is_square(e.right):
            return e.left.value
        if e.op == "*" and isinstance(e.right, Const) and is_square(e.left):
            return e.right.value
        if e.op == "/" and isinstance(e.right, Const) and is_square(e.left):
            return 1.0 / e.right.value
    return None


def _symbolic_inverse(psi: Expr) -> Expr | None:
    """Closed-form inverse for ``x``, ``c*x``, ``x^k``, ``x + c x^2``, ``ln(1+x)``, ``ln(x)``."""
    if isinstance(psi, Var):
        return X
    if isinstance(psi, BinOp):
        left, right = psi.left, psi.right
        if psi.op == "*":
            if isinstance(left, Const) and isinstance(right, Var) and left.value > 0:
                return div(X, left)
            if isinstance(right, Const) and isinstance(left, Var) and right.value > 0:
                return div(X, right)
        if psi.op == "/" and isinstance(left, Var) and isinstance(right, Const) and right.value > 0:
            return mul(X, right)
        if psi.op == "^" and isinstance(left, Var) and isinstance(right, Const) and right.value > 0:
            return power(X, Const(1.0 / right.value))
    if isinstance(psi, BinOp) and psi.op == "+":
        # x + c x^2 (either order): x = 2u / (1 + sqrt(1 + 4 c u)), free of cancellation
        for lin, quad in ((psi.left, psi.right), (psi.right, psi.left)):
            c = _square_coefficient(quad)
            if isinstance(lin, Var) and c is not None and c > 0:
                root = Func("sqrt", add(ONE, mul(Const(4.0 * c), X)))
                return div(mul(Const(2.0), X), add(ONE, root))
    if isinstance(psi, Func) and psi.name == "ln":
        arg = psi.arg
        if isinstance(arg, Var):
            return Func("exp", X)
        if isinstance(arg, BinOp) and arg.op == "+":
            pair = (arg.left, arg.right)
            if any(isinstance(e, Var) for e in pair) and any(
                isinstance(e, Const) and e.value == 1.0 for e in pair
            ):
                return sub(Func("exp", X), Const(1.0))
    return None


def _numeric_inverse(psi: Expr, dpsi: Expr, u: np.ndarray, lower: float = 0.0) -> np.ndarray:
    """Solve ``psi(x) = u`` by a bracketed Newton iteration with bisection fallback."""
    u = np.asarray(u, dtype=float)
    out = np.full(u.shape, np.nan)
    psi_lo = float(psi.evaluate(np.float64(lower)))
    if not np.isfinite(psi_lo):
        psi_lo = -np.inf
    flat_u = u.ravel()
    flat_out = out.ravel()

    ok = np.isfinite(flat_u) & (flat_u >= psi_lo)
    flat_out[np.isposinf(flat_u)] = np.inf
    flat_out[flat_u == psi_lo] = lower
    ok &= flat_u != psi_lo
    if not ok.any():
        return flat_out.reshape(u.shape)

    target = flat_u[ok]
    lo = np.full(target.shape, float(lower))
    hi = np.full(target.shape, max(1.0, lower + 1.0))
    with np.errstate(all="ignore"):
        # expand the upper bracket until psi(hi) >= u
        for _ in range(2100):
            short = psi.evaluate(hi) < target
            if not short.any():
                break
            lo = np.where(short, hi, lo)
            hi = np.where(short, hi * 2.0, hi)
        bracketed = psi.evaluate(hi) >= target

        xk = 0.5 * (lo + hi)
        for _ in range(200):
            fx = psi.evaluate(xk) - target
            lo = np.where(fx < 0, xk, lo)
            hi = np.where(fx >= 0, xk, hi)
            step = fx / dpsi.evaluate(xk)
            xn = xk - step
            bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
            xn = np.where(bad, 0.5 * (lo + hi), xn)
            done = np.abs(xn - xk) <= 4e-16 * np.abs(xn) + 1e-300
            xk = xn
            if done.all():
                break
    result = np.where(bracketed, xk, np.nan)
    flat_out[ok] = result
    return flat_out.reshape(u.shape)


# }}}


@dataclass(frozen=True)
class AdmissiblePsi:
    r"""An increasing function :math:`\psi` with :math:`\psi(0) = 0`.

    The constructor checks admissibility on :data:`SAMPLE_GRID`; pass
    ``strict=False`` to keep a function that fails the checks (the failures are
    recorded in :attr:`diagnostics`). Monotonicity of an arbitrary expression is
    undecidable, so the checks are sampled and can miss pathologies between
    grid points.
    """

    psi: Expr
    strict: bool = True
    psi_prime: Expr = field(init=False)
    psi_second: Expr = field(init=False)
    psi_third: Expr = field(init=False)
    inverse_expr: Expr | None = field(init=False)
    diagnostics: tuple[str, ...] = field(init=False)

    def __init__(self, psi: Expr | str, *, strict: bool = True) -> None:
        psi = as_expr(psi)
        d1 = psi.derivative()
        d2 = d1.derivative()
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "strict", strict)
        object.__setattr__(self, "psi_prime", d1)
        object.__setattr__(self, "psi_second", d2)
        object.__setattr__(self, "psi_third", d2.derivative())
        object.__setattr__(self, "inverse_expr", _symbolic_inverse(psi))

        problems = self._check()
        object.__setattr__(self, "diagnostics", tuple(problems))
        if problems and strict:
            raise AdmissibilityError(f"psi = {psi} is not admissible: " + "; ".join(problems))

    def _check(self) -> list[str]:
        problems = []
        with np.errstate(all="ignore"):
            at_zero = float(self.psi.evaluate(np.float64(0.0)))
            if not np.isfinite(at_zero):
                at_zero = float(self.psi.evaluate(np.float64(1e-300)))
            if not (np.isfinite(at_zero) and abs(at_zero) <= 1e-10):
                problems.append(f"psi(0) = {at_zero:g} != 0")

            values = self.psi.evaluate(SAMPLE_GRID)
            slopes = self.psi_prime.evaluate(SAMPLE_GRID)
        if not np.all(np.isfinite(slopes) & (slopes > 0)):
            problems.append("psi' is not positive on the sample grid")
        if not np.all(np.diff(values) > 0):
            problems.append("psi is not increasing on the sample grid")
        if not problems:
            back = self.inverse(values)
            rel = np.abs(back - SAMPLE_GRID) / SAMPLE_GRID
            if not np.all(rel < 1e-9):
                problems.append("psi^{-1}(psi(x)) != x on the sample grid")
        return problems

    def __call__(self, x):
        with np.errstate(all="ignore"):
            return self.psi.evaluate(x)

    def prime(self, x):
        with np.errstate(all="ignore"):
            return self.psi_prime.evaluate(x)

    def inverse(self, u):
        """Evaluate :math:`\\psi^{-1}` (symbolically when possible)."""
        with np.errstate(all="ignore"):
            if self.inverse_expr is not None:
                return self.inverse_expr.evaluate(u)
            lower = 0.0
            if not np.isfinite(float(self.psi.evaluate(np.float64(0.0)))):
                lower = 1e-300
            return _numeric_inverse(self.psi, self.psi_prime, u, lower=lower)

    def difference(self, x, dist):
        r"""Evaluate :math:`\psi(x) - \psi(x - d)` without cancellation for small *d*."""
        x = np.asarray(x, dtype=float)
        dist = np.asarray(dist, dtype=float)
        with np.errstate(all="ignore"):
            direct = self.psi.evaluate(x) - self.psi.evaluate(x - dist)
            mid = x - 0.5 * dist
            series = dist * (
                self.psi_prime.evaluate(mid) + dist**2 / 24.0 * self.psi_third.evaluate(mid)
            )
        small = dist <= 1e-3 * np.maximum(np.abs(x), 1e-300)
        return np.where(small, series, direct)

    def __str__(self) -> str:
        return str(self.psi)


@dataclass(frozen=True)
class Weight:
    r"""A strictly positive weight :math:`\omega` on :math:`(0, \infty)`.

    Weights that overflow on the sample grid (such as ``exp(x)``) are accepted
    with an :class:`UnboundedWeightWarning`; weights that underflow to zero for
    large ``x`` (such as ``exp(-x/2)``) are accepted. Other non-positive or
    undefined values are rejected.
    """

    omega: Expr
    omega_prime: Expr = field(init=False)
    log_derivative_expr: Expr = field(init=False)
    unbounded: bool = field(init=False)

    def __init__(self, omega: Expr | str | float) -> None:
        omega = as_expr(omega)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "omega_prime", omega.derivative())
        object.__setattr__(self, "log_derivative_expr", log_of(omega).derivative())

        with np.errstate(all="ignore"):
            values = omega.evaluate(SAMPLE_GRID)
        # zeros far out on the grid are underflow of a decaying weight, not sign changes
        underflow = (values == 0) & (SAMPLE_GRID >= 1e2)
        if np.any(np.isnan(values)) or np.any((values <= 0) & ~underflow):
            raise AdmissibilityError(f"omega = {omega} is not positive on the sample grid")
        unbounded = bool(np.any(np.isinf(values)) or values.max() > 1e12)
        object.__setattr__(self, "unbounded", unbounded)
        if unbounded:
            warnings.warn(
                f"omega = {omega} is unbounded on (0, inf)",
                UnboundedWeightWarning,
                stacklevel=2,
            )

    def __call__(self, x):
        with np.errstate(all="ignore"):
            return self.omega.evaluate(x)

    def log_derivative(self, x):
        with np.errstate(all="ignore"):
            return self.log_derivative_expr.evaluate(x)

    def __str__(self) -> str:
        return str(self.omega)


IDENTITY_PSI = AdmissiblePsi(X)
UNIT_WEIGHT = Weight(Const(1.0))


def as_psi(psi: AdmissiblePsi | Expr | str) -> AdmissiblePsi:
    return psi if isinstance(psi, AdmissiblePsi) else AdmissiblePsi(psi)


def as_weight(omega: Weight | Expr | str | float) -> Weight:
    return omega if isinstance(omega, Weight) else Weight(omega)


def as_function(f) -> Callable:
    """Return a vectorized callable for an :class:`Expr`, text, or callable."""
    if isinstance(f, str):
        f = as_expr(f)
    if isinstance(f, Expr):
        expr = f

        def evaluate(x):
            with np.errstate(all="ignore"):
                return expr.evaluate(x)

        return evaluate
    if callable(f):
        return f
    value = float(f)
    return lambda x: np.full_like(np.asarray(x, dtype=float), value)


# {{{ pointwise operators


def q_psi(f, psi: AdmissiblePsi, direction: Direction = "forward") -> Callable:
    """Return ``f o psi`` (forward) or ``f o psi^{-1}`` (inverse)."""
    func = as_function(f)
    if direction == "forward":
        return lambda x: func(psi(x))
    if direction == "inverse":

        def composed(x):
            inner = psi.inverse(x)
            if np.any(np.isnan(inner) & ~np.isnan(np.asarray(x, dtype=float))):
                raise DomainError(f"cannot invert psi = {psi} at the requested points")
            return func(inner)

        return composed
    raise ValueError(f"unknown direction {direction!r}")


def m_omega(f, omega: Weight, direction: Direction = "forward") -> Callable:
    """Return ``omega * f`` (forward) or ``f / omega`` (inverse)."""
    func = as_function(f)
    if direction == "forward":
        return lambda x: omega(x) * func(x)
    if direction == "inverse":
        return lambda x: func(x) / omega(x)
    raise ValueError(f"unknown direction {direction!r}")


def d_psi_omega_expr(f: Expr | str, psi: AdmissiblePsi, omega: Weight, n: int = 1) -> Expr:
    """Expression tree for ``(D_{psi,omega})^n f``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    g = as_expr(f)
    log_dw = omega.log_derivative_expr
    for _ in range(n):
        g = div(add(g.derivative(), mul(log_dw, g)), psi.psi_prime)
    return g


def d_psi_omega(f: Expr | str, psi: AdmissiblePsi, omega: Weight, n: int, x: float) -> float:
    """Evaluate ``(D_{psi,omega})^n f`` at *x* from exact derivatives.

    Raises :class:`~psimellin.expr.DomainError` when an intermediate value is
    undefined at *x*.
    """
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    if x < 0:
        raise DomainError("x must be non-negative")
    return d_psi_omega_expr(f, psi, omega, int(n))(x)


# }}}
