"""Hyperspectral unmixing under spectral variability.

Subspace dimension estimation, reference endmember extraction (perspective
VCA, spherical k-means) and abundance / scaling / local endmember estimation
with FCLSU, SCLSU, ELMM and RELMM.
"""

from .core import (
    AbundanceMatrix,
    CoefficientMatrix,
    EndmemberMatrix,
    LocalEndmemberStack,
    ScalingMatrix,
    SpectralCube,
    perspective_project,
    reconstruct,
    spectral_angle,
)
from .solvers import SolverConfig, UnmixResult, elmm, fclsu, relmm, sclsu

__version__ = "0.1.0"
