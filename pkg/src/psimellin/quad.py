"""Double-exponential and Gauss-Kronrod quadrature for complex integrands.

Three variable transformations of the trapezoidal rule are provided:

* tanh-sinh on finite intervals ``[a, b]``,
* exp-sinh on ``(0, inf)``,
* sinh-sinh on the whole real line,

all refined by halving the step until two consecutive levels agree. Integrands
are called with numpy arrays of abscissas and must be vectorized. An integrand
may return ``(values, errors)`` to propagate the uncertainty of an inner
numerical computation into the outer error estimate.

Vertical-line integrals in the complex plane use adaptive 15-point
Gauss-Kronrod panels.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import cache

import numpy as np

_EPS = np.finfo(float).eps
_HALF_PI = 0.5 * math.pi

#: nodes whose |t| exceeds this may return non-finite values (overflow far in
#: the tails); they are dropped instead of poisoning the sum
_T_TRIM = 3.0


@dataclass(frozen=True)
class Tolerance:
    """Requested accuracy: converged when ``err <= max(abs_tol, rel_tol*|value|)``."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_evals: int = 2_000_000

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_evals <= 0:
            raise ValueError("max_evals must be positive")

    def bound(self, value) -> np.ndarray | float:
        return np.maximum(self.abs_tol, self.rel_tol * np.abs(value))


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True)
class QuadResult:
    value: complex
    err_abs: float
    n_evals: int
    converged: bool
    note: str = ""

    def __complex__(self) -> complex:
        return complex(self.value)


class QuadratureError(ArithmeticError):
    """Raised by helpers that need a converged integral and did not get one."""

    def __init__(self, message: str, result: QuadResult | None = None) -> None:
        super().__init__(message)
        self.result = result


# {{{ node tables


_T_MAX = {"finite": 6.0, "half": 6.5, "line": 6.5}
_H0 = 0.5


@cache
def _level_nodes(kind: str, level: int):
    """Abscissas and weights (already multiplied by dx/dt) added at *level*.

    For the finite rule the abscissas are returned as the fractions of the
    interval measured from the left and from the right end, so that both
    distances stay accurate near the endpoints.
    """
    t_max = _T_MAX[kind]
    if level == 0:
        j = np.arange(-int(t_max / _H0), int(t_max / _H0) + 1)
        t = j * _H0
    else:
        step = _H0 / 2**level
        count = int(t_max / step)
        j = np.arange(-count, count + 1)
        j = j[j % 2 != 0]
        t = j * step
    y = _HALF_PI * np.sinh(t)
    dy = _HALF_PI * np.cosh(t)
    with np.errstate(over="ignore", under="ignore"):
        if kind == "finite":
            left = 1.0 / (1.0 + np.exp(-2.0 * y))
            right = 1.0 / (1.0 + np.exp(2.0 * y))
            w = dy / (2.0 * np.cosh(y) ** 2)
            return t, left, right, w
        if kind == "half":
            x = np.exp(y)
            return t, x, None, x * dy
        x = np.sinh(y)
        return t, x, None, np.cosh(y) * dy


def _split(result):
    if isinstance(result, tuple):
        vals, errs = result
        return np.asarray(vals, dtype=complex), np.asarray(errs, dtype=float)
    return np.asarray(result, dtype=complex), None


# }}}


# {{{ (0, inf) and the real line


@np.errstate(over="ignore", invalid="ignore")
def _de_single(g: Callable, kind: str, tol: Tolerance, min_level: int = 2):
    """Integrate ``g(x)`` (values of shape ``(..., m)``) with exp-sinh or sinh-sinh.

    Returns ``(value, err, n_evals, converged, note)`` with array-valued
    ``value`` and ``err`` of the broadcast batch shape.
    """
    total = None
    prev = None
    prop = None
    absum = None
    n_evals = 0
    notes = []
    level = 0
    while True:
        t, x, _, w = _level_nodes(kind, level)
        h = _H0 / 2**level
        with np.errstate(all="ignore"):
            vals, errs = _split(g(x))
            contrib = vals * w
        bad = ~np.isfinite(contrib)
        interior = bad & (np.abs(t) < _T_TRIM)
        if np.any(interior):
            shape = contrib.shape[:-1]
            return (np.full(shape, np.nan + 0j), np.full(shape, np.inf), n_evals + t.size,
                    False, "non-finite integrand value")
        if np.any(bad):
            contrib = np.where(bad, 0.0, contrib)
            notes.append("tail overflow dropped")
        n_evals += t.size
        level_sum = contrib.sum(axis=-1)
        level_abs = np.abs(contrib).sum(axis=-1)
        level_prop = ((np.abs(w) * np.where(bad, 0.0, errs)).sum(axis=-1)
                      if errs is not None else 0.0)
        if level == 0:
            raw = level_sum
            absum = level_abs
            prop = level_prop
            # the outermost node pair bounds what lies beyond the truncation point
            edge = np.abs(t) >= _T_MAX[kind] - _H0
            tail = (np.abs(contrib) * edge).max(axis=-1) * h
        else:
            raw = raw + level_sum
            absum = absum + level_abs
            prop = prop + level_prop
        prev = total
        total = h * raw
        if prev is not None and level >= min_level:
            disc = np.abs(total - prev) + tail + 64 * _EPS * h * absum
            err = disc + h * prop
            bound = tol.bound(total)
            # refining further cannot help once the propagated inner error dominates
            if np.all((disc <= bound) | (disc <= 0.1 * h * prop)):
                converged = bool(np.all(err <= bound))
                if not np.all(np.isfinite(total)):
                    converged = False
                    notes.append("sum overflowed")
                elif not converged:
                    notes.append("inner error exceeds tolerance")
                return total, err, n_evals, converged, "; ".join(sorted(set(notes)))
        level += 1
        next_count = _level_nodes(kind, level)[0].size
        if n_evals + next_count > tol.max_evals or level > 14:
            err = np.abs(total - prev) + tail + h * prop + 64 * _EPS * h * absum
            notes.append("evaluation budget exhausted")
            converged = bool(np.all(err <= tol.bound(total)) and np.all(np.isfinite(total)))
            return total, err, n_evals, converged, "; ".join(sorted(set(notes)))


def _to_result(value, err, n_evals, converged, note) -> QuadResult:
    return QuadResult(complex(np.asarray(value).ravel()[0]), float(np.asarray(err).ravel()[0]),
                      int(n_evals), bool(converged), note)


def integrate_semi_infinite(g: Callable, tol: Tolerance | None = None) -> QuadResult:
    """Integrate ``g`` over ``(0, inf)`` with the exp-sinh rule.

    Algebraic singularities at ``0`` with exponent ``> -1`` and algebraic or
    exponential decay at infinity are handled without special treatment.
    """
    return _to_result(*_de_single(g, "half", tol or DEFAULT_TOL))


def integrate_semi_infinite_batch(g: Callable, tol: Tolerance | None = None):
    """Like :func:`integrate_semi_infinite` for integrands of shape ``(..., m)``."""
    return _de_single(g, "half", tol or DEFAULT_TOL)


def integrate_whole_line(g: Callable, tol: Tolerance | None = None) -> QuadResult:
    """Integrate ``g`` over the real line with the sinh-sinh rule."""
    return _to_result(*_de_single(g, "line", tol or DEFAULT_TOL))


# }}}


# {{{ finite intervals


@np.errstate(over="ignore", invalid="ignore")
def integrate_finite_batch(
    g: Callable,
    a,
    b,
    tol: Tolerance | None = None,
    *,
    min_level: int = 2,
    max_level: int = 12,
):
    """Row-batched tanh-sinh quadrature over ``[a_i, b_i]``.

    ``g(x, dl, dr, rows)`` receives abscissas of shape ``(len(rows), m)``
    together with their distances to the left and right endpoints, and the
    indices of the rows being evaluated; rows that have converged are not
    evaluated again. Returns arrays ``(value, err, converged)`` and the number
    of integrand evaluations.
    """
    tol = tol or DEFAULT_TOL
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    nrows = a.size
    length = b - a

    raw = np.zeros(nrows, dtype=complex)
    absum = np.zeros(nrows)
    prop = np.zeros(nrows)
    tail = np.zeros(nrows)
    total = np.zeros(nrows, dtype=complex)
    err = np.full(nrows, np.inf)
    done = length == 0
    failed = np.zeros(nrows, dtype=bool)
    inexact = np.zeros(nrows, dtype=bool)
    err[done] = 0.0
    n_evals = 0

    for level in range(max_level + 1):
        active = np.flatnonzero(~done & ~failed)
        if active.size == 0:
            break
        t, left, right, w = _level_nodes("finite", level)
        if n_evals + active.size * t.size > tol.max_evals and level > min_level:
            break
        h = _H0 / 2**level
        la = length[active][:, None]
        dl = la * left
        dr = la * right
        x = np.where(t < 0, a[active][:, None] + dl, b[active][:, None] - dr)
        with np.errstate(all="ignore"):
            vals, errs = _split(g(x, dl, dr, active))
            contrib = vals * (w * la)
        n_evals += x.size
        bad = ~np.isfinite(contrib)
        interior = (bad & (np.abs(t) < _T_TRIM)).any(axis=1)
        if interior.any():
            failed[active[interior]] = True
            total[active[interior]] = np.nan
            err[active[interior]] = np.inf
        contrib = np.where(bad, 0.0, contrib)
        raw[active] += contrib.sum(axis=1)
        absum[active] += np.abs(contrib).sum(axis=1)
        if errs is not None:
            prop[active] += (np.where(bad, 0.0, errs) * (np.abs(w) * la)).sum(axis=1)
        if level == 0:
            # the outermost node pair bounds what lies beyond the truncation point
            edge = np.abs(t) >= _T_MAX["finite"] - _H0
            tail[active] = (np.abs(contrib) * edge).max(axis=1) * h
        new_total = h * raw[active]
        if level >= min_level:
            disc = np.abs(new_total - total[active]) + tail[active] + 64 * _EPS * h * absum[active]
            e = disc + h * prop[active]
            err[active] = e
            bound = tol.bound(new_total)
            # rows whose error is dominated by propagated inner error stop refining
            settled = ((disc <= bound) | (disc <= 0.1 * h * prop[active])) & ~failed[active]
            done[active[settled]] = True
            inexact[active[settled]] = ~(e[settled] <= bound[settled]) | ~np.isfinite(
                new_total[settled])
        total[active] = np.where(failed[active], np.nan, new_total)

    converged = done & ~failed & ~inexact
    return total, err, converged, n_evals


def integrate_finite(
    g: Callable,
    a: float,
    b: float,
    tol: Tolerance | None = None,
    *,
    distances: bool = False,
) -> QuadResult:
    """Integrate ``g`` over ``[a, b]`` with the tanh-sinh rule.

    With ``distances=True`` the integrand is called as ``g(x, x - a, b - x)``
    with both distances computed without cancellation, which keeps algebraic
    singularities at the right endpoint accurate.
    """
    if not a <= b:
        raise ValueError("integrate_finite requires a <= b")
    if distances:
        def wrapped(x, dl, dr, rows):
            return g(x, dl, dr)
    else:
        def wrapped(x, dl, dr, rows):
            return g(x)

    total, err, converged, n = integrate_finite_batch(wrapped, a, b, tol)
    note = "" if converged[0] else ("non-finite integrand value" if np.isnan(total[0]) else
                                    "not converged")
    return QuadResult(complex(total[0]), float(err[0]), max(int(n), 1), bool(converged[0]), note)


# }}}


# {{{ vertical lines

# 15-point Gauss-Kronrod rule on [-1, 1] (the 7-point Gauss nodes are the odd entries)
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G_WEIGHTS = np.zeros(15)
_G_WEIGHTS[1:7:2] = _WG[:3]
_G_WEIGHTS[7] = _WG[3]
_G_WEIGHTS[9:14:2] = _WG[2::-1]


def _gk_panels(f: Callable, lo: np.ndarray, hi: np.ndarray):
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    tau = mid[:, None] + half[:, None] * _GK_NODES
    with np.errstate(all="ignore"):
        vals = np.asarray(f(tau), dtype=complex)
    kron = half * (vals @ _GK_WEIGHTS)
    gauss = half * (vals @ _G_WEIGHTS)
    err = np.abs(kron - gauss)
    # QUADPACK-style sharpening of the raw Gauss/Kronrod difference
    scale = half * (np.abs(vals) @ _GK_WEIGHTS)
    with np.errstate(all="ignore"):
        sharp = np.where(scale > 0, scale * np.minimum(1.0, (200 * err / scale) ** 1.5), err)
    err = np.maximum(sharp, 50 * _EPS * scale)
    return kron, err, vals


def _adaptive_panels(f: Callable, edges: np.ndarray, tol: Tolerance, budget: int):
    lo, hi = edges[:-1].copy(), edges[1:].copy()
    value = np.zeros(0, dtype=complex)
    errs = np.zeros(0)
    lows = np.zeros(0)
    highs = np.zeros(0)
    n = 0
    pending_lo, pending_hi = lo, hi
    for _ in range(60):
        kron, err, vals = _gk_panels(f, pending_lo, pending_hi)
        n += vals.size
        if not np.all(np.isfinite(vals)):
            return complex(np.nan), np.inf, n, False
        value = np.concatenate([value, kron])
        errs = np.concatenate([errs, err])
        lows = np.concatenate([lows, pending_lo])
        highs = np.concatenate([highs, pending_hi])
        total = value.sum()
        bound = tol.bound(total)
        if errs.sum() <= bound or n + 30 * value.size > budget:
            break
        # split every panel whose share of the error budget is exceeded
        share = bound * (highs - lows) / (highs[-1] - lows[0] if highs.size else 1.0)
        width = highs - lows
        worst = errs > np.maximum(share, 0.1 * bound / max(value.size, 1))
        worst &= width > 1e-12 * (1.0 + np.abs(lows))
        if not worst.any():
            break
        split_lo, split_hi = lows[worst], highs[worst]
        keep = ~worst
        value, errs, lows, highs = value[keep], errs[keep], lows[keep], highs[keep]
        mids = 0.5 * (split_lo + split_hi)
        pending_lo = np.concatenate([split_lo, mids])
        pending_hi = np.concatenate([mids, split_hi])
        order = np.argsort(lows)
        value, errs, lows, highs = value[order], errs[order], lows[order], highs[order]
    total = value.sum()
    err = float(errs.sum())
    return complex(total), err, n, bool(err <= tol.bound(total))


def _panel_edges(lo: float, hi: float, width: float) -> np.ndarray:
    count = max(1, int(math.ceil((hi - lo) / width)))
    return np.linspace(lo, hi, count + 1)


def integrate_vertical_line(
    G: Callable,
    gamma: float,
    T: float,
    tol: Tolerance | None = None,
    *,
    log_x: float = 0.0,
    extend: bool = False,
    T_max: float = 1e4,
) -> QuadResult:
    r"""Integrate ``G(p) dp`` along ``p = gamma + i tau``, ``|tau| <= T``.

    The returned value is the raw contour integral (it includes the factor
    ``i`` from ``dp = i dtau`` but not ``1/(2 pi i)``). Panels are no wider than
    one period ``2 pi / |log_x|`` of the kernel ``X^{-i tau}`` with
    ``log_x = ln X``.

    With ``extend=True``, ``T`` is doubled until the last doubling changes the
    value by less than the tolerance and ``|G(gamma +- iT)|`` is below it, up to
    ``T_max``.
    """
    tol = tol or DEFAULT_TOL
    if not T > 0:
        raise ValueError("T must be positive")
    width = 2.0
    if log_x != 0.0:
        width = min(width, 2.0 * math.pi / abs(log_x))

    def f(tau):
        return 1j * np.asarray(G(gamma + 1j * tau), dtype=complex)

    budget = tol.max_evals
    value, err, n, ok = _adaptive_panels(f, _panel_edges(-T, T, width), tol, budget)
    if not extend:
        return QuadResult(value, err, n, bool(ok and np.isfinite(value)),
                          "" if ok else "not converged")

    while True:
        if not np.isfinite(value):
            return QuadResult(value, math.inf, n, False, "non-finite integrand value")
        if 2 * T > T_max:
            return QuadResult(value, err, n, False, "truncation cap reached")
        new_T = 2 * T
        left = _adaptive_panels(f, _panel_edges(-new_T, -T, width), tol, budget - n)
        right = _adaptive_panels(f, _panel_edges(T, new_T, width), tol, budget - n)
        n += left[2] + right[2]
        increment = left[0] + right[0]
        value = value + increment
        err = err + left[1] + right[1]
        ok = ok and left[3] and right[3]
        T = new_T
        with np.errstate(all="ignore"):
            edge = np.abs(np.asarray(G(gamma + 1j * np.array([-T, T])), dtype=complex))
        n += 2
        bound = tol.bound(value)
        if abs(increment) <= bound and bool(np.all(edge <= bound)):
            return QuadResult(value, err + abs(increment), n, bool(ok and np.isfinite(value)),
                              "" if ok else "not converged")


# }}}
