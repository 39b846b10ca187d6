from .oblique import oblique_cg, retract, riemannian_gradient, tangent_project
from .simplex import kkt_residual, nnls, project_simplex
from .unmix import (
    NumericalError,
    ReferenceStats,
    SolverConfig,
    UnmixResult,
    elmm,
    fclsu,
    reference_objective,
    relmm,
    sclsu,
    volume_term,
)

__all__ = [
    "NumericalError",
    "ReferenceStats",
    "SolverConfig",
    "UnmixResult",
    "elmm",
    "fclsu",
    "kkt_residual",
    "nnls",
    "oblique_cg",
    "project_simplex",
    "reference_objective",
    "relmm",
    "retract",
    "riemannian_gradient",
    "sclsu",
    "tangent_project",
    "volume_term",
]
