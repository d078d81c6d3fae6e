"""Small dense SDP stack: problem container, lowering, and an interior-point
solver on a homogeneous self-dual embedding.

The solver targets desk-scale instances (matrix variables up to roughly
16 x 16, hence embedded cone blocks up to ~34); anything callable with the
``solve(problem, settings)`` contract can be substituted for it, e.g. a bridge
to an external conic solver for cross-validation or for paper-scale arrays.
"""

from .problem import (
    COMPLEX_HERMITIAN,
    REAL_SYMMETRIC,
    ConicProblem,
    LinearRow,
    LmiData,
    MatrixVar,
    embed_hermitian_entries,
    lower,
)
from .solver import (
    INFEASIBLE,
    MAX_ITER,
    NUMERICAL_FAILURE,
    OPTIMAL,
    UNBOUNDED,
    DualValues,
    SolverResult,
    SolverSettings,
    check_kkt,
    compute_residuals,
    solve,
)

__all__ = [
    "COMPLEX_HERMITIAN",
    "REAL_SYMMETRIC",
    "ConicProblem",
    "LinearRow",
    "LmiData",
    "MatrixVar",
    "embed_hermitian_entries",
    "lower",
    "INFEASIBLE",
    "MAX_ITER",
    "NUMERICAL_FAILURE",
    "OPTIMAL",
    "UNBOUNDED",
    "DualValues",
    "SolverResult",
    "SolverSettings",
    "check_kkt",
    "compute_residuals",
    "solve",
]
