"""Complex Gamma, log-Gamma, Beta and Gamma ratios.

Gamma uses the Lanczos approximation with ``g = 7`` and nine coefficients,
combined with the reflection formula for ``Re(z) < 1/2``. All functions accept
Python scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_POLE_TOL = 1e-12


class PoleError(ZeroDivisionError):
    """Raised when Gamma is evaluated at a non-positive integer."""


def _pole_index(z: np.ndarray) -> np.ndarray:
    """Return ``m`` where ``z`` is (within tolerance) the pole ``-m``, else ``-1``."""
    re = np.real(z)
    nearest = np.round(re)
    is_pole = (nearest <= 0) & (np.abs(re - nearest) <= _POLE_TOL) & (np.abs(np.imag(z)) <= _POLE_TOL)
    return np.where(is_pole, -nearest, -1).astype(int)


def _loggamma_right(z: np.ndarray) -> np.ndarray:
    """Lanczos log-Gamma for ``Re(z) >= 1/2``."""
    z = z - 1.0
    acc = np.full_like(z, _LANCZOS_COEFFS[0])
    for k, c in enumerate(_LANCZOS_COEFFS[1:], start=1):
        acc = acc + c / (z + k)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)


def _log_sin_pi(z: np.ndarray) -> np.ndarray:
    # log(sin(pi z)) without overflow for large |Im z|
    y = np.imag(z)
    big = np.abs(y) > 20.0
    out = np.empty_like(z)
    small = ~big
    out[small] = np.log(np.sin(np.pi * z[small]))
    if big.any():
        zb = z[big]
        s = np.sign(np.imag(zb))
        # sin(pi z) = (e^{i pi z} - e^{-i pi z}) / 2i; keep the growing exponential
        lead = -s * 1j * np.pi * zb
        rest = 1.0 - np.exp(2.0 * s * 1j * np.pi * zb)
        out[big] = lead + np.log(rest) - np.log(2j * (-s))
    return out


def loggamma(z):
    """A logarithm of Gamma: ``exp(loggamma(z)) == gamma(z)``.

    The imaginary part is not normalized to the principal branch. Poles are
    returned as ``inf``; use :func:`gamma_complex` for the checked version.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)
    with np.errstate(all="ignore"):
        right = np.real(z) >= 0.5
        out[right] = _loggamma_right(z[right])
        left = ~right
        if left.any():
            zl = z[left]
            out[left] = math.log(math.pi) - _log_sin_pi(zl) - _loggamma_right(1.0 - zl)
    out[_pole_index(z) >= 0] = np.inf
    return out[0] if scalar else out


def gamma_complex(z):
    """Gamma function for complex arguments.

    Raises :class:`PoleError` at non-positive integers (within ``1e-12``).
    """
    z = np.asarray(z, dtype=complex)
    if np.any(_pole_index(z) >= 0):
        raise PoleError(f"Gamma has a pole at {z[_pole_index(z) >= 0].ravel()[0]}")
    scalar = z.ndim == 0
    z1 = np.atleast_1d(z)
    out = np.empty_like(z1)
    right = np.real(z1) >= 0.5
    with np.errstate(all="ignore"):
        out[right] = np.exp(_loggamma_right(z1[right]))
        left = ~right
        if left.any():
            zl = z1[left]
            # direct reflection keeps more digits than exp(log) for moderate |z|
            out[left] = np.pi / (np.sin(np.pi * zl) * np.exp(_loggamma_right(1.0 - zl)))
    return complex(out[0]) if scalar else out


def _ratio_values(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``Gamma(a)/Gamma(b)``; returns ``(value, numerator_pole)``."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    a = np.atleast_1d(a)
    b = np.atleast_1d(b)
    ma = _pole_index(a)
    mb = _pole_index(b)
    with np.errstate(all="ignore"):
        value = np.exp(loggamma(a) - loggamma(b))
    value = np.where((mb >= 0) & (ma < 0), 0.0, value)
    both = (ma >= 0) & (mb >= 0)
    if both.any():
        # limit of Gamma(-m + e) / Gamma(-k + e) as e -> 0
        m = ma[both]
        k = mb[both]
        lim = np.array(
            [(-1.0) ** (mi - ki) * math.factorial(ki) / math.factorial(mi) for mi, ki in zip(m, k)],
            dtype=complex,
        )
        value[both] = lim
    pole = (ma >= 0) & (mb < 0)
    value = np.where(pole, np.nan, value)
    return value, pole


@dataclass(frozen=True)
class GammaRatio:
    """``Gamma(numerator_arg) / Gamma(denominator_arg)`` with explicit pole flag."""

    numerator_arg: complex
    denominator_arg: complex
    value: complex
    pole: bool

    @property
    def finite(self) -> bool:
        return not self.pole


def gamma_ratio(a: complex, b: complex) -> GammaRatio:
    """Compute ``Gamma(a)/Gamma(b)`` as ``exp(loggamma(a) - loggamma(b))``.

    A pole of the numerator is flagged (``pole=True``, value ``nan``) rather
    than returned as infinity; a pole of the denominator alone gives ``0``.
    """
    value, pole = _ratio_values(a, b)
    return GammaRatio(complex(a), complex(b), complex(value[0]), bool(pole[0]))


def gamma_ratio_values(a, b) -> np.ndarray:
    """Array version of :func:`gamma_ratio`; numerator poles become ``nan``."""
    value, _ = _ratio_values(a, b)
    return value


def beta(a: complex, b: complex) -> complex:
    """Euler Beta function ``Gamma(a) Gamma(b) / Gamma(a + b)`` via log-Gamma."""
    za = np.asarray(a, dtype=complex)
    zb = np.asarray(b, dtype=complex)
    if np.any(_pole_index(za) >= 0) or np.any(_pole_index(zb) >= 0):
        raise PoleError(f"Beta has a pole at a={a}, b={b}")
    if _pole_index(np.atleast_1d(za + zb))[0] >= 0:
        return 0j
    return complex(np.exp(loggamma(za) + loggamma(zb) - loggamma(za + zb)))
