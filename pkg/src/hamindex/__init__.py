"""Index theory and saddle-point reduction for Hamiltonian boundary value problems."""

__version__ = "0.1.0"

from .flow import CrossingTrace, fundamental_matrix  # noqa: E402
from .index import (  # noqa: E402
    IndexReport,
    consistency_report,
    homotopy_nullity_sum,
    index,
    nullity,
    qform_indices,
    relative_index,
)
from .operator import Bolza, OperatorSpec, PPeriodic, SpecError, SturmLiouville, build_operator, dirichlet  # noqa: E402
from .paths import MatrixPath  # noqa: E402
from .reduction import (  # noqa: E402
    NonlinearProblem,
    ReducedPoint,
    decompose_gradient,
    recover_solution,
    reduced_gradient,
    reduced_hessian,
    reduced_value,
    solve_minus,
)
from .search import CriticalPoint, SearchConfig, multi_start_search, newton_solve, verify_theorem  # noqa: E402
from .spectral import EigenPair, SpectralModel, build_spectral_model, eigen_scan, gram_matrix  # noqa: E402

__all__ = [
    "Bolza",
    "CriticalPoint",
    "CrossingTrace",
    "EigenPair",
    "IndexReport",
    "MatrixPath",
    "NonlinearProblem",
    "OperatorSpec",
    "PPeriodic",
    "ReducedPoint",
    "SearchConfig",
    "SpecError",
    "SpectralModel",
    "SturmLiouville",
    "build_operator",
    "build_spectral_model",
    "consistency_report",
    "decompose_gradient",
    "dirichlet",
    "eigen_scan",
    "fundamental_matrix",
    "gram_matrix",
    "homotopy_nullity_sum",
    "index",
    "multi_start_search",
    "newton_solve",
    "nullity",
    "qform_indices",
    "recover_solution",
    "reduced_gradient",
    "reduced_hessian",
    "reduced_value",
    "relative_index",
    "solve_minus",
    "verify_theorem",
]
