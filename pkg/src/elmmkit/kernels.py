"""Backend dispatch for the per-pixel hot loops.

All functions take pixel-major arrays: ``Xt`` is (N, L), coefficient arrays
are (N, P), stacks of local endmembers are (N, L, P). The numba module is
imported lazily so the numpy path never triggers compilation.
"""

import numpy as np

from . import _accel
from . import _kernels_numpy as _npk


def _use_numba():
    if _accel.get_backend() != "numba":
        return None
    from . import _kernels_numba

    return _kernels_numba


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def project_simplex_rows(V):
    nb = _use_numba()
    V = _f64(V)
    if nb is not None:
        return nb.project_simplex_rows(V)
    return _npk.project_simplex_rows(V)


def simplex_qp(G, b, a0, max_iter=500, tol=1e-6, polish=True):
    """Solve min 0.5 aᵀG a - bᵀa over the simplex, independently per row of b.

    Returns ``(A, iterations)``. ``G`` may be (1, P, P) to share one Gram
    matrix across pixels.
    """
    G, b, a0 = _f64(G), _f64(b), _f64(a0)
    nb = _use_numba()
    if nb is not None:
        return nb.simplex_qp(G, b, a0, int(max_iter), float(tol), bool(polish))
    return _npk.simplex_qp(G, b, a0, int(max_iter), float(tol), bool(polish))


def nnls_columns(S, X, max_iter=500):
    """Nonnegative least squares for every column of X; returns ((N, P), ok)."""
    S, X = _f64(S), _f64(X)
    nb = _use_numba()
    if nb is not None:
        G = _f64(S.T @ S)
        b = _f64((S.T @ X).T)
        return nb.nnls_gram(G, b, int(max_iter))
    return _npk.nnls_columns(S, X, int(max_iter))


def update_locals(Xt, A, Psi, S0, lam):
    args = (_f64(Xt), _f64(A), _f64(Psi), _f64(S0), float(lam))
    nb = _use_numba()
    if nb is not None:
        return nb.update_locals(*args)
    return _npk.update_locals(*args)


def stack_gram(stack, Xt):
    nb = _use_numba()
    if nb is not None:
        return nb.stack_gram(_f64(stack), _f64(Xt))
    return _npk.stack_gram(_f64(stack), _f64(Xt))


def pixel_terms(Xt, stack, A, Psi, S0):
    args = (_f64(Xt), _f64(stack), _f64(A), _f64(Psi), _f64(S0))
    nb = _use_numba()
    if nb is not None:
        return nb.pixel_terms(*args)
    return _npk.pixel_terms(*args)


def update_scalings(stack, S0, floor):
    nb = _use_numba()
    if nb is not None:
        return nb.update_scalings(_f64(stack), _f64(S0), float(floor))
    return _npk.update_scalings(_f64(stack), _f64(S0), float(floor))
