"""Signal subspace dimension: multiple-regression noise estimation followed by
minimum-error eigenvector selection (HySIME)."""

import warnings
from dataclasses import dataclass

import numpy as np

from .core import SpectralCube, as_array

# eigenvalues below this fraction of the largest are treated as zero when
# regressing one band on the others
PINV_RCOND = 1e-12
# well-conditioned systems use the single-inverse shortcut
COND_LIMIT = 1e10
# diagonal loading of the noise correlation, relative to mean signal power
NOISE_LOADING = 1e-5


@dataclass(frozen=True, eq=False)
class IdEstimate:
    dimension: int
    noise_band_power: np.ndarray  # length L
    eigen_signal_power: np.ndarray  # length L, power of the data along each eigenvector
    eigen_noise_power: np.ndarray = None
    eigenvectors: np.ndarray = None


def _matrix(cube):
    return cube.data if isinstance(cube, SpectralCube) else as_array(cube)


def estimate_noise(cube):
    """Regress every band on all the others; return ``(variances, residuals)``.

    ``residuals`` is L x N, ``variances[i]`` the mean squared residual of band i.
    """
    Y = _matrix(cube)
    L, N = Y.shape
    if L < 2:
        raise ValueError("noise estimation needs at least two bands")
    if N <= L:
        warnings.warn(f"only {N} pixels for {L} bands; noise estimates will be poor",
                      RuntimeWarning, stacklevel=2)
    R = Y @ Y.T
    w, Q = np.linalg.eigh(R)
    B = np.zeros((L, L))  # column i: regression weights for band i
    if w[0] > 0 and w[-1] / w[0] < COND_LIMIT:
        Ri = (Q / w) @ Q.T
        for i in range(L):
            beta = Ri[:, i] / Ri[i, i]
            # (R⁻¹)_{:,i} ∝ [-β; 1]; weights for the other bands are -beta
            B[:, i] = -beta
            B[i, i] = 0.0
    else:
        others = np.ones(L, dtype=bool)
        for i in range(L):
            others[:] = True
            others[i] = False
            Ro = R[np.ix_(others, others)]
            B[others, i] = np.linalg.pinv(Ro, rcond=PINV_RCOND, hermitian=True) @ R[others, i]
    W = Y - B.T @ Y
    return np.mean(W * W, axis=1), W


def estimate_id(cube):
    """Number of eigen-directions of the signal correlation whose data power
    exceeds twice the noise power projected on them (ties excluded)."""
    Y = _matrix(cube)
    L, N = Y.shape
    noise_var, W = estimate_noise(Y)
    Xs = Y - W
    Ry = Y @ Y.T / N
    Rx = Xs @ Xs.T / N
    Rn = W @ W.T / N
    Rn = Rn + np.trace(Rx) / L * NOISE_LOADING * np.eye(L)
    lam, E = np.linalg.eigh(Rx)
    E = E[:, ::-1]
    py = np.einsum("li,lk,ki->i", E, Ry, E)
    pn = np.einsum("li,lk,ki->i", E, Rn, E)
    d = int(np.sum(py > 2.0 * pn))
    return IdEstimate(
        dimension=max(1, min(d, L)),
        noise_band_power=noise_var,
        eigen_signal_power=py,
        eigen_noise_power=pn,
        eigenvectors=E,
    )
