r"""Operational rules of the weighted Mellin transform, convolution and an FDE solver.

Each rule is evaluated numerically from both sides: the left-hand side is the
transform of an operated function (nested quadrature through
:mod:`psimellin.fracops` when the operator is fractional), the right-hand side
a Gamma ratio times a shifted transform. :func:`check_identity` returns an
:class:`IdentityReport` with the comparison.

Two of the rules are stated in the literature with an extra factor
:math:`\omega(x)` inside the transformed function. Under the definition of the
transform that factor weights by :math:`\omega` twice; the consistent forms are
the defaults here, and the literal forms are kept as diagnostics
(``shifting-literal``, ``mu-shift-literal``) that are reported but never count
as failures.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import asdict, dataclass, field

import numpy as np

from psimellin.expr import Expr, as_expr, mul, power
from psimellin.fracops import FD_TOL, derivative_function, integral_function
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
from psimellin.quad import (
    DEFAULT_TOL,
    QuadResult,
    Tolerance,
    integrate_finite,
    integrate_finite_batch,
    integrate_semi_infinite,
    integrate_semi_infinite_batch,
)
from psimellin.special import gamma_ratio
from psimellin.transforms import fourier_psi_omega, laplace_bilateral, mellin_batch

#: default relative thresholds per identity
THRESHOLDS = {
    "shifting": 1e-9,
    "shifting-literal": 1e-9,
    "derivative": 1e-8,
    "rl-integral": 1e-5,
    "rl-derivative": 1e-4,
    "mu-shift": 1e-4,
    "mu-shift-literal": 1e-4,
    "caputo": 1e-4,
    "hilfer": 1e-4,
    "laplace": 1e-8,
    "fourier": 1e-8,
    "fourier-literal": 1e-8,
    "convolution": 1e-4,
}

#: identities evaluated for information only; they never count as failures
DIAGNOSTICS = frozenset({"shifting-literal", "mu-shift-literal", "fourier-literal"})

IDENTITIES = tuple(THRESHOLDS)

#: below this magnitude of the right-hand side the absolute difference is used
_RHS_ZERO = 1e-300

#: solution rows evaluated together when the solution is itself integrated
_SOLVE_CHUNK = 64

#: outer nodes of a nested transform; each node costs a full operator evaluation
_NESTED_EVALS = 20_000
#: quadrature tolerance for left-hand sides built from finite differences
_NESTED_FD_TOL = Tolerance(abs_tol=1e-12, rel_tol=1e-6, max_evals=_NESTED_EVALS)
#: quadrature tolerance for left-hand sides built from nested quadrature only
_NESTED_TOL = Tolerance(abs_tol=1e-13, rel_tol=1e-9, max_evals=_NESTED_EVALS)


@dataclass(frozen=True)
class IdentityReport:
    identity_name: str
    lhs: complex
    rhs: complex
    abs_diff: float
    rel_diff: float
    passed: bool
    notes: str = ""
    threshold: float = 0.0
    diagnostic: bool = False
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = asdict(self)
        for key in ("lhs", "rhs"):
            value = complex(out[key])
            out[key] = [value.real, value.imag]
        return out


def _compare(name: str, lhs: QuadResult | complex, rhs: complex, threshold: float,
             notes: list[str], params: dict) -> IdentityReport:
    if isinstance(lhs, QuadResult):
        if not lhs.converged:
            notes.append("left-hand side not converged" + (f" ({lhs.note})" if lhs.note else ""))
        lhs = lhs.value
    lhs, rhs = complex(lhs), complex(rhs)
    abs_diff = abs(lhs - rhs)
    if not (np.isfinite(abs_diff)):
        abs_diff = math.inf
    rel_diff = abs_diff / abs(rhs) if abs(rhs) > _RHS_ZERO else abs_diff
    if not np.isfinite(rel_diff):
        rel_diff = math.inf
    passed = rel_diff < threshold
    return IdentityReport(name, lhs, rhs, float(abs_diff), float(rel_diff), bool(passed),
                          "; ".join(notes), threshold, name in DIAGNOSTICS, params)


def _transform(f, psi, omega, p, tol, notes: list[str], label: str) -> complex:
    value, err, _, ok, note = mellin_batch(f, psi, omega, [p], tol)
    if not ok:
        notes.append(f"{label} not converged" + (f" ({note})" if note else ""))
    return complex(value[0])


def _ratio(a: complex, b: complex, notes: list[str]) -> complex:
    r = gamma_ratio(a, b)
    if r.pole:
        notes.append(f"pole of the Gamma ratio at Gamma({a})")
    return r.value


# {{{ identities


def check_identity(
    name: str,
    f,
    psi: AdmissiblePsi | Expr | str = IDENTITY_PSI,
    omega: Weight | Expr | str | float = UNIT_WEIGHT,
    p: complex = 0.5,
    params: dict | None = None,
    tol: Tolerance | None = None,
    threshold: float | None = None,
) -> IdentityReport:
    """Evaluate both sides of the named rule and compare them.

    *params* holds the rule's parameters: ``a`` (shifting), ``n``
    (derivative), ``alpha`` (fractional rules), ``beta`` (Hilfer), ``mu``
    (``mu-shift``) and ``k`` (Fourier). The Laplace and Fourier rules are
    checked in the classical setting (``psi = x``, ``omega = 1``) only.
    """
    if name not in THRESHOLDS:
        raise ValueError(f"unknown identity {name!r}; choose from {', '.join(IDENTITIES)}")
    params = dict(params or {})
    psi, omega = as_psi(psi), as_weight(omega)
    tol = tol or DEFAULT_TOL
    threshold = THRESHOLDS[name] if threshold is None else threshold
    p = complex(p)
    f = as_expr(f) if isinstance(f, str) else f
    notes: list[str] = []
    record = {"p": [p.real, p.imag], "f": str(f), "psi": str(psi), "omega": str(omega)}
    record.update({k: (v if not isinstance(v, complex) else [v.real, v.imag])
                   for k, v in params.items()})

    if name in ("shifting", "shifting-literal"):
        a = complex(params.get("a", 1.0))
        shifted = mul(power(psi.psi, _const(a)), f) if a.imag == 0 else None
        if shifted is None:
            base = as_function(f)

            def shifted(x):
                return np.exp(a * np.log(psi(x))) * base(x)
        if name == "shifting-literal":
            inner = shifted
            shifted = lambda x, inner=as_function(inner): omega(x) * inner(x)
        lhs = _transform(shifted, psi, omega, p, tol, notes, "left transform")
        rhs = _transform(f, psi, omega, p + a, tol, notes, "shifted transform")
        return _compare(name, lhs, rhs, threshold, notes, record)

    if name == "derivative":
        n = int(params.get("n", 1))
        dn = d_psi_omega_expr(f, psi, omega, n)
        lhs = _transform(dn, psi, omega, p, tol, notes, "transform of the derivative")
        ratio = _ratio(1.0 - p + n, 1.0 - p, notes)
        rhs = ratio * _transform(f, psi, omega, p - n, tol, notes, "shifted transform")
        return _compare(name, lhs, rhs, threshold, notes, record)

    alpha = complex(params.get("alpha", 0.5))

    if name == "rl-integral":
        if not (alpha + p).real < 1:
            notes.append("Re(alpha + p) >= 1: outside the rule's range")
        op = integral_function(f, psi, omega, alpha, 0.0, _inner_tol(tol), weighted=True)
        lhs = _nested_transform(op, psi, p, _NESTED_TOL, notes)
        ratio = _ratio(1.0 - p - alpha, 1.0 - p, notes)
        rhs = ratio * _transform(f, psi, omega, p + alpha, tol, notes, "shifted transform")
        return _compare(name, lhs, rhs, threshold, notes, record)

    if name in ("rl-derivative", "caputo", "hilfer"):
        beta = float(params.get("beta", 0.5))
        op = derivative_function(name, f, psi, omega, alpha, beta, 0.0, _inner_tol(tol),
                                 weighted=True)
        lhs = _nested_transform(op, psi, p, _NESTED_FD_TOL, notes)
        ratio = _ratio(1.0 - p + alpha, 1.0 - p, notes)
        rhs = ratio * _transform(f, psi, omega, p - alpha, tol, notes, "shifted transform")
        return _compare(name, lhs, rhs, threshold, notes, record)

    if name in ("mu-shift", "mu-shift-literal"):
        mu = complex(params.get("mu", 0.5))
        op = derivative_function("rl-derivative", f, psi, omega, alpha, 0.0, 0.0, _inner_tol(tol),
                                 weighted=True)
        literal = name == "mu-shift-literal"

        def weighted(x):
            v, e = op(x)
            factor = np.exp(mu * np.log(psi(x)))
            if literal:
                factor = factor * omega(x)
            return factor * v, np.abs(factor) * e

        lhs = _nested_transform(weighted, psi, p, _NESTED_FD_TOL, notes)
        ratio = _ratio(1.0 - mu - p + alpha, 1.0 - mu - p, notes)
        rhs = ratio * _transform(f, psi, omega, mu + p - alpha, tol, notes, "shifted transform")
        return _compare(name, lhs, rhs, threshold, notes, record)

    if name == "laplace":
        if str(psi) != "x" or str(omega) != "1":
            notes.append("only the classical setting psi = x, omega = 1 is asserted")
        lhs = _transform(f, IDENTITY_PSI, UNIT_WEIGHT, p, tol, notes, "Mellin transform")
        g = as_expr(f).substitute(as_expr("exp(-x)"))
        rhs = laplace_bilateral(g, "x", 1.0, p, tol)
        if not rhs.converged:
            notes.append("bilateral Laplace transform not converged")
        return _compare(name, lhs, rhs.value, threshold, notes, record)

    if name in ("fourier", "fourier-literal"):
        k = float(params.get("k", 1.0))
        four = fourier_psi_omega(f, "x", 1.0, k, tol)
        if not four.converged:
            notes.append("Fourier transform not converged")
        g = as_expr(f).substitute(as_expr("ln(x)"))
        if name == "fourier":
            mel = _transform(g, IDENTITY_PSI, UNIT_WEIGHT, -1j * k, tol, notes, "Mellin transform")
            rhs = mel / math.sqrt(2.0 * math.pi)
        else:
            rhs = _transform(g, IDENTITY_PSI, UNIT_WEIGHT, 1.0 - 1j * k, tol, notes,
                             "Mellin transform")
        return _compare(name, four.value, rhs, threshold, notes, record)

    # convolution
    g = params.get("g", f)
    return check_convolution_theorem(f, g, psi, omega, p, tol, threshold)


def _const(a: complex) -> Expr:
    return as_expr(float(a.real))


def _inner_tol(tol: Tolerance) -> Tolerance:
    # purely relative: an absolute error floor would be amplified by psi^(p-1) at large x
    return Tolerance(abs_tol=1e-300, rel_tol=min(tol.rel_tol, 1e-12),
                     max_evals=tol.max_evals)


def _nested_transform(op: Callable, psi, p, tol: Tolerance, notes: list[str]) -> QuadResult:
    """Transform of an operator output already multiplied by the weight."""
    value, err, n, ok, note = mellin_batch(op, psi, UNIT_WEIGHT, [p], tol)
    return QuadResult(complex(value[0]), float(err[0]), int(n), bool(ok), note)


# }}}


# {{{ convolution


def _convolution_rows(f, g, psi: AdmissiblePsi, omega: Weight, x: np.ndarray,
                      tol: Tolerance, weighted: bool = False):
    """Vectorized convolution at the points *x*: ``(values, errors, converged)``.

    With *weighted* the values are multiplied by ``omega(x)``.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    xf = x.ravel()
    ff, gf = as_function(f), as_function(g)
    log_psi_x = np.log(psi(xf))

    def integrand(s):
        with np.errstate(all="ignore"):
            fs = ff(s) * omega(s)
            jac = psi.prime(s) / psi(s)
            ratio = np.exp(log_psi_x[:, None] - np.log(psi(s))[None, :])
            z = psi.inverse(ratio)
            gz = gf(z)
            wz = omega(z)
            inner = np.where((gz == 0) | (wz == 0), 0.0, gz * wz)
            # psi^{-1} overflowing means z lies beyond every float; omega g has
            # to vanish there for the convolution to exist
            inner = np.where(np.isinf(z) & ~np.isfinite(inner), 0.0, inner)
            outer = np.where(fs == 0, 0.0, fs * jac)
            return np.where(outer[None, :] == 0, 0.0, outer[None, :] * inner)

    value, err, _, ok, _ = integrate_semi_infinite_batch(integrand, tol)
    wx = 1.0 if weighted else omega(xf)
    return (value / wx).reshape(shape), (err / wx).reshape(shape), np.broadcast_to(ok, shape)


def convolve(f, g, psi=IDENTITY_PSI, omega=UNIT_WEIGHT, x: float = 1.0,
             tol: Tolerance | None = None) -> QuadResult:
    r"""Generalized convolution :math:`(f \ast_{\psi,\omega} g)(x)`.

    .. math::

        \frac{1}{\omega(x)} \int_0^\infty \omega(s) f(s)\, \omega(z) g(z)
            \frac{\psi'(s)}{\psi(s)} \,\mathrm{d}s,
        \qquad z = \psi^{-1}\!\left(\frac{\psi(x)}{\psi(s)}\right).
    """
    if not x > 0:
        raise ValueError("x must be positive")
    psi, omega = as_psi(psi), as_weight(omega)
    v, e, ok = _convolution_rows(f, g, psi, omega, np.array([x]), tol or DEFAULT_TOL)
    conv = bool(ok[0]) and bool(np.isfinite(v[0]))
    return QuadResult(complex(v[0]), float(e[0]), 1, conv, "" if conv else "not converged")


def convolution_function(f, g, psi, omega, tol: Tolerance | None = None,
                         weighted: bool = False) -> Callable:
    """Callable ``x -> (values, errors)`` for the convolution (for nesting).

    With *weighted* the callable returns ``omega`` times the convolution.
    """
    psi, omega = as_psi(psi), as_weight(omega)
    tol = tol or DEFAULT_TOL

    def op(x):
        v, e, _ = _convolution_rows(f, g, psi, omega, x, tol, weighted)
        return v, e

    return op


def check_convolution_theorem(f, g, psi=IDENTITY_PSI, omega=UNIT_WEIGHT, p: complex = 1.0,
                              tol: Tolerance | None = None,
                              threshold: float | None = None) -> IdentityReport:
    """Compare the transform of ``f * g`` with the product of the transforms."""
    psi, omega = as_psi(psi), as_weight(omega)
    tol = tol or DEFAULT_TOL
    threshold = THRESHOLDS["convolution"] if threshold is None else threshold
    p = complex(p)
    notes: list[str] = []
    op = convolution_function(f, g, psi, omega, _inner_tol(tol), weighted=True)
    lhs = _nested_transform(op, psi, p, _NESTED_TOL, notes)
    rhs = (_transform(f, psi, omega, p, tol, notes, "transform of f")
           * _transform(g, psi, omega, p, tol, notes, "transform of g"))
    record = {"p": [p.real, p.imag], "f": str(f), "g": str(g), "psi": str(psi),
              "omega": str(omega)}
    return _compare("convolution", lhs, rhs, threshold, notes, record)


# }}}


# {{{ fractional differential equation


class ConvergenceError(ValueError):
    """A closed form was requested outside its range of convergence."""


@dataclass(frozen=True)
class FdeProblem:
    r"""``psi(x)^alpha D^alpha y = g`` for ``1 < alpha <= 2`` (weighted, w.r.t. psi)."""

    alpha: float
    g: Expr
    psi: AdmissiblePsi = IDENTITY_PSI
    omega: Weight = UNIT_WEIGHT

    def __post_init__(self) -> None:
        if not 1.0 < self.alpha <= 2.0:
            raise ValueError("alpha must satisfy 1 < alpha <= 2")
        object.__setattr__(self, "g", as_expr(self.g))
        object.__setattr__(self, "psi", as_psi(self.psi))
        object.__setattr__(self, "omega", as_weight(self.omega))


def fde_kernel_h(psi: AdmissiblePsi, omega: Weight, alpha: float, x):
    r"""``h(x) = (1 - psi(x))_+^(alpha-1) / (omega(x) psi(x)^alpha Gamma(alpha))``."""
    psi, omega = as_psi(psi), as_weight(omega)
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        u = psi(x)
        inside = u < 1.0
        gap = np.where(inside, 1.0 - u, 1.0)
        value = gap ** (alpha - 1.0) / (omega(x) * u**alpha * math.gamma(alpha))
    value = np.where(inside, value, 0.0)
    return float(value) if value.ndim == 0 else value


def _support(psi: AdmissiblePsi) -> tuple[float, float]:
    """The interval where ``0 < psi(s) < 1``."""
    lo = float(psi.inverse(np.float64(0.0)))
    hi = float(psi.inverse(np.float64(1.0)))
    return max(lo, 0.0), hi


def fde_integrand(problem: FdeProblem, x: float, s):
    r"""Integrand of the solution formula (without the prefactor ``1/(omega(x) Gamma(alpha))``).

    .. math::

        (1 - \psi(s))_+^{\alpha - 1} \psi(s)^{-\alpha}\, \omega(z) g(z)\,
        \frac{\psi'(s)}{\psi(s)}, \qquad z = \psi^{-1}(\psi(x) / \psi(s)).
    """
    psi, omega, alpha = problem.psi, problem.omega, problem.alpha
    s = np.asarray(s, dtype=float)
    with np.errstate(all="ignore"):
        u = psi(s)
        z = psi.inverse(psi(np.float64(x)) / u)
        head = np.where(u < 1.0, (1.0 - np.minimum(u, 1.0)) ** (alpha - 1.0), 0.0)
        return head * u ** (-alpha - 1.0) * omega(z) * problem.g.evaluate(z) * psi.prime(s)


def solve_fde(problem: FdeProblem, x: float, tol: Tolerance | None = None) -> QuadResult:
    r"""Evaluate the solution formula at *x*.

    .. math::

        y(x) = \frac{1}{\omega(x)\Gamma(\alpha)} \int_{\{0 < \psi(s) < 1\}}
            \frac{(1 - \psi(s))^{\alpha - 1}}{\psi(s)^\alpha}\, \omega(z) g(z)\,
            \frac{\psi'(s)}{\psi(s)} \,\mathrm{d}s

    with :math:`z = \psi^{-1}(\psi(x)/\psi(s))`. For admissible
    :math:`\psi` the domain is :math:`(0, \psi^{-1}(1))`. Both endpoint
    singularities are left to the tanh-sinh rule; ``1 - psi(s)`` is formed from
    the distance to the right endpoint to avoid cancellation. Divergence (for
    example when ``g`` grows too fast) is reported through ``converged``.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    vals, errs, ok, n_evals = _solve_rows(problem, np.array([x], dtype=float), tol or DEFAULT_TOL)
    value, err, conv = complex(vals[0]), float(errs[0]), bool(ok[0])
    note = ""
    if not conv:
        note = f"solution integral did not converge at x = {x:g}"
        if not np.isfinite(value):
            note += " (non-finite integrand value)"
    return QuadResult(value, err, n_evals, conv, note)


def _solve_rows(problem: FdeProblem, x: np.ndarray, tol: Tolerance):
    """Solution formula at every point of the 1-d array *x* (all positive)."""
    psi, omega, alpha = problem.psi, problem.omega, problem.alpha
    lo, hi = _support(psi)
    psi_x = psi(x)
    g = problem.g

    def integrand(s, dl, dr, rows):
        u = psi(s)
        gap = psi.difference(hi, dr)
        z = psi.inverse(psi_x[rows][:, None] / u)
        gz = g.evaluate(z)
        wz = omega(z)
        tail = np.where((gz == 0) | (wz == 0), 0.0, gz * wz)
        return gap ** (alpha - 1.0) * u ** (-alpha - 1.0) * psi.prime(s) * tail

    with np.errstate(all="ignore"):
        total, err, ok, n_evals = integrate_finite_batch(
            integrand, np.full(x.shape, lo), np.full(x.shape, hi), tol)
        scale = 1.0 / (omega(x) * math.gamma(alpha))
    return total * scale, err * np.abs(scale), ok & np.isfinite(total), n_evals


def solve_fde_function(problem: FdeProblem, tol: Tolerance | None = None) -> Callable:
    """Callable ``x -> (values, errors)`` of the solution (for residual checks)."""
    tol = tol or DEFAULT_TOL

    def y(x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        vals = np.full(flat.shape, np.nan, dtype=complex)
        errs = np.full(flat.shape, np.inf)
        # bounded batches: each row carries every inner quadrature node
        (inside,) = np.nonzero(flat > 0)
        for start in range(0, inside.size, _SOLVE_CHUNK):
            idx = inside[start:start + _SOLVE_CHUNK]
            v, e, ok, _ = _solve_rows(problem, flat[idx], tol)
            vals[idx] = np.where(ok, v, np.nan)
            errs[idx] = e
        return vals.reshape(x.shape), errs.reshape(x.shape)

    return y


def fde_case1(g, alpha: float, x: float, tol: Tolerance | None = None) -> QuadResult:
    r"""Classical solution ``(1/Gamma(alpha)) int_0^1 (1-s)^(alpha-1) s^(-alpha-1) g(x/s) ds``."""
    func = as_function(g)

    def integrand(s, dl, dr):
        return dr ** (alpha - 1.0) * s ** (-alpha - 1.0) * func(x / s)

    with np.errstate(all="ignore"):
        res = integrate_finite(integrand, 0.0, 1.0, tol, distances=True)
    scale = 1.0 / math.gamma(alpha)
    return QuadResult(res.value * scale, res.err_abs * scale, res.n_evals, res.converged, res.note)


def fde_closed_case3(k: float, n: float, alpha: float, x: float) -> float:
    r"""Closed form for ``omega = 1``, ``psi = x^k``, ``g = x^n``.

    ``y(x) = x^n Gamma(-alpha - n/k) / Gamma(-n/k)``, which requires
    ``-alpha - n/k > 0`` for the solution integral to converge at ``s = 0``.
    """
    if not k > 0:
        raise ValueError("k must be positive")
    a = -alpha - n / k
    if not a > 0:
        raise ConvergenceError(f"-alpha - n/k = {a:g} <= 0: the solution integral diverges")
    ratio = gamma_ratio(a, -n / k)
    return float(x**n * ratio.value.real)


def fde_residual(problem: FdeProblem, x: float, tol: Tolerance | None = None) -> QuadResult:
    r"""``psi(x)^alpha D^alpha y(x) - g(x)`` with the left-sided derivative from 0.

    ``y`` is the computed solution (:func:`solve_fde`), and the derivative is
    :func:`~psimellin.fracops.rl_derivative` applied to it numerically. A
    non-converged inner computation shows up as ``converged=False``.
    """
    psi, omega, alpha = problem.psi, problem.omega, problem.alpha
    y = solve_fde_function(problem, tol)
    op = derivative_function("rl-derivative", y, psi, omega, alpha, 0.0, 0.0,
                             tol or FD_TOL)
    with np.errstate(all="ignore"):
        v, e = op(np.array([x], dtype=float))
    value = complex(v[0]) * float(psi(np.float64(x))) ** alpha - problem.g(x)
    err = float(e[0]) * float(psi(np.float64(x))) ** alpha
    ok = bool(np.isfinite(value) and err <= FD_TOL.bound(problem.g(x)))
    return QuadResult(value, err, 1, ok, "" if ok else "derivative of the solution not resolved")


def fde_right_sided_check(problem: FdeProblem, x: float, tol: Tolerance | None = None):
    r"""Return ``(psi(x)^alpha y(x), I_-^alpha g(x))`` for the right-sided weighted integral.

    .. math::

        I^\alpha_{-;\psi,\omega} g(x) = \frac{1}{\Gamma(\alpha)\omega(x)}
            \int_x^\infty (\psi(t) - \psi(x))^{\alpha - 1} \omega(t) g(t) \psi'(t) \,\mathrm{d}t

    The solution formula satisfies ``psi^alpha y = I_-^alpha g`` identically,
    so the two numbers agree whenever both integrals converge.
    """
    psi, omega, alpha, g = problem.psi, problem.omega, problem.alpha, problem.g
    tol = tol or DEFAULT_TOL
    y = solve_fde(problem, x, tol)
    psi_x = float(psi(np.float64(x)))

    # t = x + r, integrate r over (0, inf)
    def integrand(r):
        with np.errstate(all="ignore"):
            t = x + r
            gap = psi(t) - psi_x
            small = r <= 1e-3 * x
            gap = np.where(small, psi.difference(t, r), gap)
            body = omega(t) * g.evaluate(t) * psi.prime(t)
            return np.where(body == 0, 0.0, gap ** (alpha - 1.0) * body)

    right = integrate_semi_infinite(integrand, tol)
    scale = 1.0 / (math.gamma(alpha) * float(omega(np.float64(x))))
    left_side = QuadResult(y.value * psi_x**alpha, y.err_abs * psi_x**alpha, y.n_evals,
                           y.converged, y.note)
    right_side = QuadResult(right.value * scale, right.err_abs * scale, right.n_evals,
                            right.converged, right.note)
    return left_side, right_side


# {{{ particular cases


def case4_problem(alpha: float = 1.5) -> FdeProblem:
    return FdeProblem(alpha, as_expr("x^2"), AdmissiblePsi("ln(x+1)"), Weight("exp(x)"))


def case4_printed_integrand(alpha: float, x: float, s) -> np.ndarray:
    """The Case 4 integrand written out by hand, independent of the generic code."""
    s = np.asarray(s, dtype=float)
    ls = np.log(s + 1.0)
    inner = np.exp(np.log(x + 1.0) / ls) - 1.0
    head = np.where(ls < 1.0, np.abs(1.0 - ls) ** (alpha - 1.0), 0.0)
    return head / ls**alpha * np.exp(inner) * inner**2 / (s + 1.0) / ls


def case5_problem(alpha: float = 1.5, g: str = "x^(-2)") -> FdeProblem:
    """``omega = x^alpha``, ``psi = ln(x)`` (not admissible; kept with ``strict=False``)."""
    return FdeProblem(alpha, as_expr(g), AdmissiblePsi("ln(x)", strict=False),
                      Weight(f"x^{alpha!r}"))


def case5_integrand(alpha: float, x: float, s, g: Callable, *, literal: bool = False):
    r"""The Case 5 integrand, re-derived by hand (without ``1/(x^alpha Gamma(alpha))``).

    The corrected form is
    :math:`(1 - \ln s)^{\alpha-1} (\ln s)^{-\alpha} x^{\alpha/\ln s} g(x^{1/\ln s}) / (s \ln s)`.
    With ``literal=True`` the factor :math:`(\ln s)^{-\alpha}` is omitted, as in
    the printed simplification.
    """
    s = np.asarray(s, dtype=float)
    ls = np.log(s)
    z = np.exp(np.log(x) / ls)
    head = np.where(ls < 1.0, np.abs(1.0 - ls) ** (alpha - 1.0), 0.0)
    gz = g(z)
    # z overflows as s -> 1+; x^(alpha/ln s) g(z) -> 0 there whenever the integral exists
    value = np.where(gz == 0, 0.0, head * np.exp(alpha * np.log(x) / ls) * gz / (s * ls))
    if not literal:
        value = value * ls ** (-alpha)
    return value


# }}}

# }}}


# {{{ builtin identity suite


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    f: str
    psi: str = "x"
    omega: str = "1"
    p: complex = 0.5
    params: dict = field(default_factory=dict)


def builtin_suite() -> list[SuiteEntry]:
    """Test points satisfying the hypotheses of each rule (strips and boundary terms)."""
    return [
        SuiteEntry("shifting", "exp(-x)", "ln(1+x)", "1+x", 0.8, {"a": 1.0}),
        SuiteEntry("shifting", "exp(-x)", "x+x^2/2", "exp(-x/2)", 1.3, {"a": 0.5}),
        SuiteEntry("shifting", "(1+x)^(-2)", "ln(1+x)", "1", 0.7, {"a": 2.0 + 1.0j}),
        SuiteEntry("shifting-literal", "exp(-x)", "ln(1+x)", "1+x", 0.8, {"a": 1.0}),
        SuiteEntry("derivative", "exp(-x)", "x", "1", 1.7, {"n": 1}),
        SuiteEntry("derivative", "exp(-x)", "ln(1+x)", "1+x", 1.7, {"n": 1}),
        SuiteEntry("derivative", "x*exp(-x)", "x+x^2/2", "exp(-x/2)", 2.5, {"n": 2}),
        SuiteEntry("rl-integral", "exp(-x)", "x", "1", 0.3, {"alpha": 0.5}),
        SuiteEntry("rl-integral", "exp(-x)", "x+x^2/2", "1+x", 0.2, {"alpha": 0.6}),
        SuiteEntry("rl-derivative", "exp(-x)", "x", "1", 1.2, {"alpha": 0.5}),
        SuiteEntry("rl-derivative", "exp(-x)", "x+x^2/2", "1+x", 1.2, {"alpha": 0.7}),
        SuiteEntry("mu-shift", "exp(-x)", "x", "1", 0.9, {"alpha": 0.5, "mu": 0.3}),
        SuiteEntry("mu-shift", "exp(-x)", "x+x^2/2", "1+x", 0.9, {"alpha": 0.7, "mu": 0.4}),
        SuiteEntry("mu-shift-literal", "exp(-x)", "x+x^2/2", "1+x", 0.9,
                   {"alpha": 0.7, "mu": 0.4}),
        SuiteEntry("caputo", "x*exp(-x)", "x", "1", 1.2, {"alpha": 0.5}),
        SuiteEntry("caputo", "x*exp(-x)", "x+x^2/2", "exp(-x/2)", 1.3, {"alpha": 0.6}),
        SuiteEntry("hilfer", "x*exp(-x)", "x", "1", 1.2, {"alpha": 0.5, "beta": 0.5}),
        SuiteEntry("hilfer", "x*exp(-x)", "x+x^2/2", "1+x", 1.3, {"alpha": 0.6, "beta": 0.3}),
        SuiteEntry("laplace", "exp(-x)", "x", "1", 2.5, {}),
        SuiteEntry("fourier", "exp(-x^2/2)", "x", "1", 0.0, {"k": 1.0}),
        SuiteEntry("fourier-literal", "exp(-x^2/2)", "x", "1", 0.0, {"k": 1.0}),
        SuiteEntry("convolution", "exp(-x)", "x", "1", 1.5, {"g": "exp(-x)"}),
        SuiteEntry("convolution", "(1+x)^(-2)", "ln(1+x)", "1", 1.0, {"g": "(1+x)^(-2)"}),
        SuiteEntry("convolution", "exp(-x)", "ln(1+x)", "1+x", 1.5, {"g": "x*exp(-x)"}),
    ]


def run_entry(entry: SuiteEntry, tol: Tolerance | None = None,
              threshold: float | None = None) -> IdentityReport:
    params = dict(entry.params)
    if entry.name == "convolution":
        return check_convolution_theorem(entry.f, params["g"], entry.psi, entry.omega, entry.p,
                                         tol, threshold)
    return check_identity(entry.name, entry.f, entry.psi, entry.omega, entry.p, params, tol,
                          threshold)


# }}}
