"""Evaluation against ground truth: class alignment, aRMSE, mean SAM."""

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .core import DimensionError, as_array, spectral_angles

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalReport:
    armse: float
    mean_sam_deg: float
    recon_rmse: float
    permutation: tuple  # permutation[j] = estimated class matched to true class j

    def to_text(self):
        perm = " ".join(str(int(k)) for k in self.permutation)
        return (
            f"armse={self.armse:.10g}\n"
            f"mean_sam_deg={self.mean_sam_deg:.10g}\n"
            f"recon_rmse={self.recon_rmse:.10g}\n"
            f"permutation={perm}\n"
        )


def _angle_cost(S_est, S_true):
    E = S_est / np.linalg.norm(S_est, axis=0)
    T = S_true / np.linalg.norm(S_true, axis=0)
    return np.arccos(np.clip(E.T @ T, -1.0, 1.0))  # [est, true]


def align_classes(S_est, S_true):
    """Permutation matching estimated to true endmembers by total spectral angle.

    Exhaustive for P <= 8, greedy (smallest remaining angle first) above.
    Returns an int array ``perm`` with ``S_est[:, perm]`` aligned to ``S_true``.
    """
    S_est = as_array(S_est)
    S_true = as_array(S_true)
    if S_est.shape != S_true.shape:
        raise DimensionError(f"shape mismatch: {S_est.shape} vs {S_true.shape}")
    C = _angle_cost(S_est, S_true)
    p = C.shape[0]
    if p <= 8:
        cols = np.arange(p)
        best, best_cost = None, np.inf
        for perm in itertools.permutations(range(p)):
            cost = C[list(perm), cols].sum()
            if cost < best_cost:
                best, best_cost = perm, cost
        return np.array(best, dtype=int)
    perm = np.full(p, -1, dtype=int)
    used = np.zeros(p, dtype=bool)
    for flat in np.argsort(C, axis=None, kind="stable"):
        i, j = divmod(int(flat), p)
        if not used[i] and perm[j] < 0:
            perm[j] = i
            used[i] = True
    return perm


def armse(A_est, A_true):
    """(1 / (N sqrt(P))) * sum_n ||â_n - a_n||₂ for P x N abundance matrices."""
    A_est = as_array(A_est)
    A_true = as_array(A_true)
    if A_est.shape != A_true.shape:
        raise DimensionError(f"shape mismatch: {A_est.shape} vs {A_true.shape}")
    p, n = A_true.shape
    return float(np.sum(np.linalg.norm(A_est - A_true, axis=0)) / (n * np.sqrt(p)))


def mean_sam(locals_est, locals_true, return_skipped=False):
    """Mean spectral angle in degrees over all (pixel, class) pairs.

    Pairs with a zero column on either side are skipped.
    """
    E = as_array(locals_est)
    T = as_array(locals_true)
    if E.shape != T.shape:
        raise DimensionError(f"shape mismatch: {E.shape} vs {T.shape}")
    n, L, p = E.shape
    ang = spectral_angles(E.transpose(1, 0, 2).reshape(L, n * p),
                          T.transpose(1, 0, 2).reshape(L, n * p))
    bad = np.isnan(ang)
    skipped = int(bad.sum())
    if skipped:
        log.warning("mean_sam: skipped %d zero columns", skipped)
    value = float(np.rad2deg(np.mean(ang[~bad]))) if skipped < ang.size else np.nan
    return (value, skipped) if return_skipped else value


def recon_rmse(X, locals_, A):
    X = as_array(X)
    R = X - np.einsum("nlp,pn->ln", as_array(locals_), as_array(A))
    return float(np.sqrt(np.mean(R * R)))


def evaluate(result, truth, cube):
    """Align ``result`` to ``truth`` once (from the references) and score it."""
    perm = align_classes(result.references, truth.references)
    A = as_array(result.abundances)[perm]
    stack = as_array(result.locals)[:, :, perm]
    return EvalReport(
        armse=armse(A, truth.abundances),
        mean_sam_deg=mean_sam(stack, truth.locals),
        recon_rmse=recon_rmse(cube, result.locals, result.abundances),
        permutation=tuple(int(k) for k in perm),
    )
