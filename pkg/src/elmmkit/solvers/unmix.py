"""FCLSU, SCLSU, ELMM and RELMM.

ELMM and RELMM minimise, by block coordinate descent,

    0.5 * sum_n ( ||x_n - S_n a_n||² + lambda_s ||S_n - S0 diag(ψ_n)||²_F )
        + 0.5 * lambda_s0 * tr(S0 V S0ᵀ),      V = P I - 1 1ᵀ

with a_n on the unit simplex (the last term and the S0 block only for
RELMM). Blocks are visited in the order {S_n}, {A, Ψ}, S0.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .. import kernels
from ..core import (
    AbundanceMatrix,
    EndmemberMatrix,
    LocalEndmemberStack,
    ScalingMatrix,
    SpectralCube,
    as_array,
)
from .oblique import oblique_cg

log = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    """A solver produced a non-finite objective."""


@dataclass(frozen=True)
class SolverConfig:
    lambda_s: float = 0.1
    lambda_s0: float = 0.0
    epsilon: float = 1e-3
    max_outer_iter: int = 200
    max_inner_iter: int = 500
    psi_floor: float = 1e-8
    seed: int = 0
    inner_tol: float = 1e-6
    # False selects the closed-form, unconstrained S0 update of RELMM
    normalize_references: bool = True

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.lambda_s < 0 or self.lambda_s0 < 0:
            raise ValueError("regularisation weights must be nonnegative")
        if self.psi_floor <= 0:
            raise ValueError("psi_floor must be positive")
        if self.max_outer_iter < 0 or self.max_inner_iter < 1:
            raise ValueError("iteration limits must be positive")


@dataclass
class UnmixResult:
    abundances: AbundanceMatrix
    scalings: ScalingMatrix
    references: EndmemberMatrix
    locals: LocalEndmemberStack
    objective_trace: list
    reconstruction_rmse: float
    iterations: int
    converged: bool
    method: str = ""
    flagged: np.ndarray = None
    coefficients: np.ndarray = None
    block_changes: list = field(default_factory=list)


def _matrix(cube):
    if isinstance(cube, SpectralCube):
        return cube.data
    return as_array(cube)


def _rmse(X, stack, A):
    R = X - np.einsum("nlp,pn->ln", stack, A)
    return float(np.sqrt(np.mean(R * R)))


def _check_dims(X, S):
    if X.shape[0] != S.shape[0]:
        raise ValueError(f"cube has {X.shape[0]} bands, endmembers have {S.shape[0]}")
    if S.shape[1] > S.shape[0]:
        raise ValueError("more endmembers than bands")


def volume_term(S0):
    """tr(S0 V S0ᵀ) with V = P I - 1 1ᵀ; equals the sum of squared pairwise
    distances between the columns of S0."""
    S0 = as_array(S0)
    p = S0.shape[1]
    V = p * np.eye(p) - np.ones((p, p))
    return float(np.trace(S0 @ V @ S0.T))


def fclsu(cube, S, cfg=SolverConfig()):
    """Fully constrained least squares: per pixel min ||x - S a|| over the simplex."""
    X = _matrix(cube)
    S = as_array(S)
    _check_dims(X, S)
    p, n = S.shape[1], X.shape[1]
    G = (S.T @ S)[None]
    b = (S.T @ X).T
    A, iters = kernels.simplex_qp(G, b, np.full((n, p), 1.0 / p),
                                  cfg.max_inner_iter, cfg.epsilon * 1e-2)
    A = A.T
    stack = np.broadcast_to(S, (n,) + S.shape)
    R = X - S @ A
    return UnmixResult(
        abundances=AbundanceMatrix(A),
        scalings=ScalingMatrix(np.ones((p, n))),
        references=EndmemberMatrix(S),
        locals=LocalEndmemberStack(stack),
        objective_trace=[0.5 * float(np.sum(R * R))],
        reconstruction_rmse=float(np.sqrt(np.mean(R * R))),
        iterations=int(iters.max(initial=0)),
        converged=bool(np.all(iters < cfg.max_inner_iter)),
        method="fclsu",
        flagged=np.zeros(n, dtype=bool),
    )


def sclsu(cube, S0, cfg=SolverConfig()):
    """Scaled constrained least squares: NNLS, then split φ_n into ψ_n a_n.

    Pixels whose total coefficient falls below ``psi_floor`` are flagged and
    given uniform abundances with ψ_n = psi_floor.
    """
    X = _matrix(cube)
    S0 = as_array(S0)
    _check_dims(X, S0)
    p, n = S0.shape[1], X.shape[1]
    phi, ok = kernels.nnls_columns(S0, X, cfg.max_inner_iter)
    psi = phi.sum(axis=1)
    flagged = psi < cfg.psi_floor
    if flagged.any():
        log.warning("sclsu: %d near-zero-brightness pixels flagged", int(flagged.sum()))
    if not ok.all():
        log.warning("sclsu: nnls did not converge on %d pixels", int((~ok).sum()))
    A = np.empty((n, p))
    A[~flagged] = phi[~flagged] / psi[~flagged, None]
    A[flagged] = 1.0 / p
    psi = np.where(flagged, cfg.psi_floor, psi)
    Psi = np.repeat(psi[None, :], p, axis=0)
    stack = S0[None, :, :] * psi[:, None, None]
    R = X - S0 @ phi.T
    return UnmixResult(
        abundances=AbundanceMatrix(A.T),
        scalings=ScalingMatrix(Psi),
        references=EndmemberMatrix(S0, normalized=_is_unit(S0)),
        locals=LocalEndmemberStack(stack),
        objective_trace=[0.5 * float(np.sum(R * R))],
        reconstruction_rmse=_rmse(X, stack, A.T),
        iterations=1,
        converged=bool(ok.all()),
        method="sclsu",
        flagged=flagged | ~ok,
        coefficients=phi.T,
    )


def _is_unit(S):
    return bool(np.all(np.abs(np.linalg.norm(S, axis=0) - 1.0) <= 1e-10))


def _objective(Xt, stack, A, Psi, S0, cfg, with_volume):
    fid, cpl = kernels.pixel_terms(Xt, stack, A, Psi, S0)
    f = 0.5 * (float(np.sum(fid)) + cfg.lambda_s * float(np.sum(cpl)))
    if with_volume:
        f += 0.5 * cfg.lambda_s0 * volume_term(S0)
    if not np.isfinite(f):
        raise NumericalError("objective became non-finite")
    return f


def _rel(new, old):
    d = np.linalg.norm(new - old)
    o = np.linalg.norm(old)
    return float(d / o) if o > 0 else (0.0 if d == 0 else np.inf)


@dataclass(frozen=True)
class ReferenceStats:
    """Sufficient statistics of the S0 subproblem given {S_n} and Ψ."""

    B: np.ndarray  # sum_n S_n diag(ψ_n), L x P
    c: np.ndarray  # sum_n ψ_pn², length P
    const: float  # sum_n ||S_n||²_F

    @classmethod
    def from_blocks(cls, stack, Psi):
        """``stack`` is (N, L, P); ``Psi`` is (N, P)."""
        return cls(
            B=np.einsum("nlp,np->lp", stack, Psi),
            c=np.einsum("np,np->p", Psi, Psi),
            const=float(np.einsum("nlp,nlp->", stack, stack)),
        )


def reference_objective(stats, lambda_s, lambda_s0):
    """Return ``fun(S0) -> (cost, egrad)`` for the S0 block:

    lambda_s/2 sum_n ||S_n - S0 Ψ_n||² + lambda_s0/2 tr(S0 V S0ᵀ).
    """
    B, c = stats.B, stats.c
    p = B.shape[1]
    V = p * np.eye(p) - np.ones((p, p))

    def fun(S0):
        SV = S0 @ V
        fit = stats.const - 2.0 * np.sum(S0 * B) + np.sum(c * np.sum(S0 * S0, axis=0))
        cost = 0.5 * lambda_s * fit + 0.5 * lambda_s0 * np.sum(S0 * SV)
        egrad = lambda_s * (S0 * c - B) + lambda_s0 * SV
        return float(cost), egrad

    def step_hint(S0, d):
        curv = lambda_s * np.sum(c * np.sum(d * d, axis=0)) + lambda_s0 * np.sum(d * (d @ V))
        slope = np.sum(fun(S0)[1] * d)
        if curv <= 0:
            return None
        return -slope / curv

    fun.step_hint = step_hint
    return fun


def _closed_form_references(stats, lambda_s, lambda_s0):
    p = stats.B.shape[1]
    V = p * np.eye(p) - np.ones((p, p))
    M = lambda_s * np.diag(stats.c) + lambda_s0 * V
    return np.linalg.solve(M, lambda_s * stats.B.T).T


def _bcd(X, S0, A, Psi, stack, cfg, method):
    """Shared BCD loop. A and Psi are (N, P); S0 is L x P."""
    update_refs = method == "relmm"
    Xt = np.ascontiguousarray(X.T)
    f = _objective(Xt, stack, A, Psi, S0, cfg, update_refs)
    trace = [f]
    changes = []
    converged = False
    it = 0
    for it in range(1, cfg.max_outer_iter + 1):
        stack_new = kernels.update_locals(Xt, A, Psi, S0, cfg.lambda_s)
        G, b = kernels.stack_gram(stack_new, Xt)
        A_new, _ = kernels.simplex_qp(G, b, A, cfg.max_inner_iter, cfg.inner_tol)
        Psi_new = kernels.update_scalings(stack_new, S0, cfg.psi_floor)
        S0_new = S0
        if update_refs:
            stats = ReferenceStats.from_blocks(stack_new, Psi_new)
            if cfg.normalize_references:
                fun = reference_objective(stats, cfg.lambda_s, cfg.lambda_s0)
                S0_new, info = oblique_cg(fun, S0, max_iter=cfg.max_inner_iter,
                                          step_hint=fun.step_hint)
                if info.stalled and info.iterations == 0:
                    log.debug("relmm: S0 step stalled at outer iteration %d", it)
            else:
                S0_new = _closed_form_references(stats, cfg.lambda_s, cfg.lambda_s0)
        f = _objective(Xt, stack_new, A_new, Psi_new, S0_new, cfg, update_refs)
        trace.append(f)
        ch = {
            "locals": _rel(stack_new, stack),
            "abundances": _rel(A_new, A),
            "scalings": _rel(Psi_new, Psi),
        }
        if update_refs:
            ch["references"] = _rel(S0_new, S0)
        changes.append(ch)
        stack, A, Psi, S0 = stack_new, A_new, Psi_new, S0_new
        if max(ch.values()) < cfg.epsilon:
            converged = True
            break
    log.info("%s: %d outer iterations, objective %.6g", method, it, f)
    return UnmixResult(
        abundances=AbundanceMatrix(A.T),
        scalings=ScalingMatrix(Psi.T),
        references=EndmemberMatrix(S0, normalized=_is_unit(S0)),
        locals=LocalEndmemberStack(stack),
        objective_trace=trace,
        reconstruction_rmse=_rmse(X, stack, A.T),
        iterations=it,
        converged=converged,
        method=method,
        flagged=np.zeros(X.shape[1], dtype=bool),
        block_changes=changes,
    )


def _require_lambda(cfg):
    if cfg.lambda_s <= 0:
        raise ValueError("lambda_s must be positive for ELMM/RELMM")


def elmm(cube, S0, cfg=SolverConfig(), init=None):
    """Extended linear mixing model with fixed references S0.

    ``init`` is an UnmixResult supplying A and Ψ (SCLSU on S0 when omitted).
    """
    _require_lambda(cfg)
    X = _matrix(cube)
    S0 = as_array(S0)
    _check_dims(X, S0)
    if init is None:
        init = sclsu(X, S0, cfg)
    A = np.ascontiguousarray(init.abundances.data.T)
    Psi = np.ascontiguousarray(init.scalings.data.T)
    stack = S0[None, :, :] * Psi[:, None, :]
    return _bcd(X, S0, A, Psi, stack, cfg, "elmm")


def relmm(cube, S0_init, cfg=SolverConfig(), init=None):
    """ELMM with reference re-estimation under a pairwise-distance volume
    penalty; references stay unit-norm unless ``cfg.normalize_references``
    is False (then the S0 block has a closed form)."""
    _require_lambda(cfg)
    X = _matrix(cube)
    S0 = as_array(S0_init)
    _check_dims(X, S0)
    S0 = S0 / np.linalg.norm(S0, axis=0)
    if init is None:
        init = sclsu(X, S0, cfg)
    A = np.ascontiguousarray(init.abundances.data.T)
    Psi = np.ascontiguousarray(init.scalings.data.T)
    stack = S0[None, :, :] * Psi[:, None, :]
    return _bcd(X, S0, A, Psi, stack, cfg, "relmm")


def with_overrides(cfg, **kw):
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
