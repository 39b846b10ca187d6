"""Simplex projection and nonnegative least squares for single vectors."""

import warnings

import numpy as np

from .. import kernels
from ..core import as_array


def project_simplex(v):
    """Euclidean projection of ``v`` onto {a >= 0, sum(a) = 1} (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("project_simplex expects a vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("project_simplex expects finite input")
    return kernels.project_simplex_rows(v[None, :])[0]


def nnls(S, x, max_iter=500):
    """argmin ||x - S φ||² subject to φ >= 0.

    Emits a RuntimeWarning when the active-set loop hits ``max_iter``.
    """
    S = as_array(S)
    x = np.asarray(x, dtype=np.float64)
    phi, ok = kernels.nnls_columns(S, x[:, None], max_iter)
    if not ok[0]:
        warnings.warn("nnls did not converge", RuntimeWarning, stacklevel=2)
    return phi[0]


def kkt_residual(S, x, phi):
    """Largest violation of the NNLS optimality conditions at ``phi``."""
    S = as_array(S)
    g = S.T @ (S @ phi - x)
    return float(np.max(np.maximum(phi * np.abs(g), np.maximum(0.0, -g))))
