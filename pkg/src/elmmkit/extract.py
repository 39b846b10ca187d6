"""Reference endmember extraction: perspective-projection VCA and spherical k-means."""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import EndmemberMatrix, SpectralCube, as_array, perspective_project_columns

log = logging.getLogger(__name__)


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ExtractionResult:
    endmembers: EndmemberMatrix
    pixel_indices: np.ndarray = None  # VCA only
    labels: np.ndarray = None  # k-means only; -1 marks excluded pixels
    objective_trace: list = field(default_factory=list)


def _matrix(cube):
    return cube.data if isinstance(cube, SpectralCube) else as_array(cube)


def _canonical_signs(U):
    k = np.argmax(np.abs(U), axis=0)
    return U * np.sign(U[k, np.arange(U.shape[1])])


def vca(cube, P, seed=0, floor=1e-10):
    """Vertex component analysis after perspective projection onto uᵀy = 1,
    with u the mean pixel.

    Returns actual pixels of the cube. Pixels with |xᵀu| <= ``floor`` are
    excluded (with a warning).
    """
    X = _matrix(cube)
    L, N = X.shape
    if P > min(L, N):
        raise ExtractionError(f"cannot extract {P} endmembers from a {L} x {N} cube")
    u = X.mean(axis=1)
    Y, usable = perspective_project_columns(X, u, floor)
    keep = np.nonzero(usable)[0]
    if keep.size < N:
        warnings.warn(f"vca: {N - keep.size} pixels nearly orthogonal to the data mean "
                      "were excluded", RuntimeWarning, stacklevel=2)
    if keep.size < P:
        raise ExtractionError(f"only {keep.size} usable pixels for {P} endmembers")
    Y = Y[:, keep]
    Ud = np.linalg.svd(Y, full_matrices=False)[0][:, :P]
    Z = _canonical_signs(Ud).T @ Y  # P x N'

    rng = np.random.default_rng(seed)
    E = np.zeros((P, P))
    chosen = []
    for i in range(P):
        w = rng.standard_normal(P)
        if i:
            Q = np.linalg.qr(E[:, :i])[0]
            w = w - Q @ (Q.T @ w)
        f = w / np.linalg.norm(w)
        score = np.abs(f @ Z)
        score[chosen] = -np.inf
        k = int(np.argmax(score))
        chosen.append(k)
        E[:, i] = Z[:, k]
    idx = keep[np.array(chosen)]
    return ExtractionResult(endmembers=EndmemberMatrix(X[:, idx]), pixel_indices=idx)


def _kmeanspp(U, P, rng):
    n = U.shape[1]
    C = np.empty((U.shape[0], P))
    C[:, 0] = U[:, rng.integers(n)]
    best = U.T @ C[:, 0]
    for j in range(1, P):
        w = np.clip(1.0 - best, 0.0, None) ** 2
        tot = w.sum()
        k = rng.choice(n, p=w / tot) if tot > 0 else rng.integers(n)
        C[:, j] = U[:, k]
        best = np.maximum(best, U.T @ C[:, j])
    return C


def _centroids(U, labels, P):
    C = np.empty((U.shape[0], P))
    for j in range(P):
        C[:, j] = U[:, labels == j].sum(axis=1)
    return C


def _lloyd(U, C, max_iter, max_reseeds=10):
    P = C.shape[1]
    labels = None
    trace = []
    reseeds = 0
    for _ in range(max_iter):
        sims = C.T @ U
        new = np.argmax(sims, axis=0)
        obj = float(sims[new, np.arange(U.shape[1])].sum())
        trace.append(obj)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        counts = np.bincount(labels, minlength=P)
        while np.any(counts == 0):
            reseeds += 1
            if reseeds > max_reseeds:
                raise ExtractionError("spherical k-means kept producing empty clusters")
            j = int(np.argmin(counts))
            own = sims[labels, np.arange(U.shape[1])]
            own[counts[labels] <= 1] = np.inf  # never empty another cluster
            labels[int(np.argmin(own))] = j
            counts = np.bincount(labels, minlength=P)
        S = _centroids(U, labels, P)
        C = S / np.linalg.norm(S, axis=0)
    return labels, C, trace


def spherical_kmeans(cube, P, seed=0, max_iter=300, n_init=5, min_norm=1e-12):
    """k-means on the unit sphere with cosine similarity.

    Pixels are normalised before clustering (zero pixels get label -1), so
    the result is invariant to per-pixel brightness. Seeded k-means++ with
    weights (1 - cos)², ``n_init`` restarts, best total similarity wins.
    Columns are ordered by decreasing cluster size, ties by first member.
    """
    X = _matrix(cube)
    norms = np.linalg.norm(X, axis=0)
    usable = norms > min_norm
    idx = np.nonzero(usable)[0]
    if idx.size < P:
        raise ExtractionError(f"only {idx.size} nonzero pixels for {P} clusters")
    U = X[:, idx] / norms[idx]
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        labels, C, trace = _lloyd(U, _kmeanspp(U, P, rng), max_iter)
        if best is None or trace[-1] > best[2][-1]:
            best = (labels, C, trace)
    labels, C, trace = best

    counts = np.bincount(labels, minlength=P)
    first = np.array([np.argmax(labels == j) for j in range(P)])
    order = np.lexsort((first, -counts))
    relabel = np.empty(P, dtype=int)
    relabel[order] = np.arange(P)
    full = np.full(X.shape[1], -1, dtype=int)
    full[idx] = relabel[labels]
    C = C[:, order]
    return ExtractionResult(
        endmembers=EndmemberMatrix(C / np.linalg.norm(C, axis=0), normalized=True),
        labels=full,
        objective_trace=trace,
    )
