"""Weighted Mellin transforms with respect to a function.

The transform of ``f`` with weight ``omega`` and admissible ``psi`` is

.. math::

    \\mathcal{M}_{\\psi,\\omega}[f](p) = \\int_0^\\infty \\psi(x)^{p-1}
        \\omega(x) f(x) \\psi'(x) \\,\\mathrm{d}x .

The package provides the transform and its inverse, weighted fractional
integrals and derivatives with respect to ``psi``, numerical checks of the
identities that relate them, the convolution theorem, and the solution
formula of a Riemann-Liouville type fractional differential equation.
"""

from psimellin.expr import Expr, ExprSyntaxError, as_expr, parse_expr
from psimellin.fracops import (
    FracSpec,
    apply_operator,
    caputo_derivative,
    conjugated_op,
    hilfer_derivative,
    rl_derivative,
    rl_integral,
)
from psimellin.funcspace import (
    IDENTITY_PSI,
    UNIT_WEIGHT,
    AdmissibilityError,
    AdmissiblePsi,
    Weight,
    d_psi_omega,
    m_omega,
    q_psi,
)
from psimellin.mellinops import (
    FdeProblem,
    IdentityReport,
    builtin_suite,
    check_convolution_theorem,
    check_identity,
    convolve,
    solve_fde,
)
from psimellin.quad import QuadResult, Tolerance
from psimellin.special import beta, gamma_complex, gamma_ratio, loggamma
from psimellin.transforms import (
    Strip,
    StripWarning,
    TransformJob,
    estimate_strip,
    fourier_psi_omega,
    laplace_bilateral,
    mellin_forward,
    mellin_inverse,
    mellin_transform,
)

__all__ = [
    "IDENTITY_PSI",
    "UNIT_WEIGHT",
    "AdmissibilityError",
    "AdmissiblePsi",
    "Expr",
    "ExprSyntaxError",
    "FdeProblem",
    "FracSpec",
    "IdentityReport",
    "QuadResult",
    "Strip",
    "StripWarning",
    "Tolerance",
    "TransformJob",
    "Weight",
    "apply_operator",
    "as_expr",
    "beta",
    "builtin_suite",
    "caputo_derivative",
    "check_convolution_theorem",
    "check_identity",
    "conjugated_op",
    "convolve",
    "d_psi_omega",
    "estimate_strip",
    "fourier_psi_omega",
    "gamma_complex",
    "gamma_ratio",
    "hilfer_derivative",
    "laplace_bilateral",
    "loggamma",
    "m_omega",
    "mellin_forward",
    "mellin_inverse",
    "mellin_transform",
    "parse_expr",
    "q_psi",
    "rl_derivative",
    "rl_integral",
    "solve_fde",
]
