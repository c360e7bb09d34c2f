"""LP-relaxation certificates for polynomial positivity over boxes and
polyhedra, and polynomial Lyapunov function synthesis for polynomial ODEs."""

from .poly import (Box, OdeSystem, ParametricPolynomial, Polynomial,
                   affine_substitute, evaluate, lie_derivative, lie_matrix,
                   monomial_basis, transform_matrix)
from .bernstein import (BernsteinCoeffs, basis_value_bound, bernstein_coeffs,
                        conversion_matrix, enclosure, eval_basis,
                        recurrence_constraints)
from .lp import LinearProgram, LpOutcome, solve, solve_linear_system
from .relax import (PositivityCertificate, RelaxMethod, certify_nonneg,
                    handelman_lp, interval_bound, lower_bound,
                    lower_bound_subdivided)
from .lyapunov import (LyapunovQuery, LyapunovResult, check_positive_definite,
                       encode_cell, escalate, make_template, orthant_cells,
                       synthesize)
from .benchgen import BenchSpec, GeneratedBenchmark, generate

__version__ = "0.1.0"

__all__ = [
    "Box", "OdeSystem", "ParametricPolynomial", "Polynomial",
    "affine_substitute", "evaluate", "lie_derivative", "lie_matrix",
    "monomial_basis", "transform_matrix",
    "BernsteinCoeffs", "basis_value_bound", "bernstein_coeffs",
    "conversion_matrix", "enclosure", "eval_basis", "recurrence_constraints",
    "LinearProgram", "LpOutcome", "solve", "solve_linear_system",
    "PositivityCertificate", "RelaxMethod", "certify_nonneg", "handelman_lp",
    "interval_bound", "lower_bound", "lower_bound_subdivided",
    "LyapunovQuery", "LyapunovResult", "check_positive_definite",
    "encode_cell", "escalate", "make_template", "orthant_cells", "synthesize",
    "BenchSpec", "GeneratedBenchmark", "generate",
]
