"""Finite-dimensional toolkit for amalgamated free products of C*-algebras.

Exact modules (``linalg``, ``algebra``, ``rfd``, ``noninj``) work over the
Gaussian rationals; ``dilation`` builds floating-point dilation towers.
"""

__version__ = "0.1.0"

from .linalg import GaussRational, RatMatrix, StiemkeCertificate, is_psd, nullspace_basis, rref, solve, strictly_positive_nullvector
from .algebra import (
    AmalgamSetup,
    CondExp,
    Element,
    FdAlgebra,
    Inclusion,
    Trace,
    canonical_inclusion,
    condexp_trace_preserving,
    default_trace,
    make_algebra,
    make_trace,
    matrix_algebra,
    minimal_central_projections,
    trace_apply,
    unitize,
    validate_condexp,
    validate_diagram,
    validate_star_hom,
)
from .rfd import inclusion_matrix, restrict_trace, rfd_decide, solve_trace_matching

__all__ = [
    "__version__",
    "GaussRational", "RatMatrix", "StiemkeCertificate", "is_psd", "nullspace_basis", "rref", "solve",
    "strictly_positive_nullvector",
    "AmalgamSetup", "CondExp", "Element", "FdAlgebra", "Inclusion", "Trace", "canonical_inclusion",
    "condexp_trace_preserving", "default_trace", "make_algebra", "make_trace", "matrix_algebra",
    "minimal_central_projections", "trace_apply", "unitize", "validate_condexp", "validate_diagram",
    "validate_star_hom",
    "inclusion_matrix", "restrict_trace", "rfd_decide", "solve_trace_matching",
]
