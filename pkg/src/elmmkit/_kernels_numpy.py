"""Vectorised numpy versions of the hot kernels (no numba required)."""

import numpy as np
from scipy.optimize import nnls as _scipy_nnls


def project_simplex_rows(V):
    V = np.asarray(V, dtype=float)
    n, p = V.shape
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    k = np.arange(1, p + 1)
    cond = U - css / k > 0
    rho = p - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(V - tau[:, None], 0.0)


def _quad(G, b, A):
    return np.einsum("ni,nij,nj->n", A, G, A) * 0.5 - np.einsum("ni,ni->n", b, A)


def _polish(G, b, A):
    n, p = A.shape
    out = A.copy()
    active = A > 0.0
    todo = np.ones(n, dtype=bool)
    weights = 1 << np.arange(p)
    for _ in range(p):
        pending = np.nonzero(todo)[0]
        if pending.size == 0:
            break
        # one batched KKT solve per support pattern
        codes = active[pending].astype(np.int64) @ weights
        for code in np.unique(codes):
            idx = pending[codes == code]
            sup = np.flatnonzero((code >> np.arange(p)) & 1)
            if sup.size == 0:
                todo[idx] = False
                continue
            k = sup.size
            K = np.zeros((idx.size, k + 1, k + 1))
            K[:, :k, :k] = G[np.ix_(idx, sup, sup)]
            K[:, :k, k] = 1.0
            K[:, k, :k] = 1.0
            r = np.ones((idx.size, k + 1))
            r[:, :k] = b[np.ix_(idx, sup)]
            good = np.linalg.cond(K) < 1e12
            sol = np.zeros((idx.size, k + 1))
            if good.any():
                sol[good] = np.linalg.solve(K[good], r[good][..., None])[..., 0]
            neg = (sol[:, :k] < 0.0) & good[:, None]
            ok = good & ~neg.any(axis=1)
            sel = idx[ok]
            z = np.zeros((sel.size, p))
            z[:, sup] = sol[ok, :k]
            better = _quad(G[sel], b[sel], z) <= _quad(G[sel], b[sel], A[sel])
            out[sel[better]] = z[better]
            todo[idx[ok | ~good]] = False
            retry = good & ~ok
            rows = idx[retry]
            active[np.ix_(rows, sup)] &= ~neg[retry]
    return out


def simplex_qp(G, b, a0, max_iter, tol, polish):
    n, p = b.shape
    lips = np.linalg.eigvalsh(G)[:, -1]
    if G.shape[0] == 1:
        G = np.broadcast_to(G, (n, p, p))
        lips = np.broadcast_to(lips, (n,))
    A = project_simplex_rows(a0)
    iters = np.zeros(n, dtype=np.int64)
    live = lips > 0.0
    step = np.where(live, 1.0 / np.where(live, lips, 1.0), 0.0)
    for _ in range(max_iter):
        if not live.any():
            break
        idx = np.nonzero(live)[0]
        a = A[idx]
        g = np.einsum("nij,nj->ni", G[idx], a) - b[idx]
        anew = project_simplex_rows(a - step[idx, None] * g)
        iters[idx] += 1
        dn = np.linalg.norm(anew - a, axis=1)
        an = np.maximum(np.linalg.norm(a, axis=1), 1e-300)
        A[idx] = anew
        live[idx[dn <= tol * an]] = False
    if polish:
        A = _polish(np.asarray(G), b, A)
    return A, iters


def nnls_columns(S, X, max_iter):
    n = X.shape[1]
    out = np.zeros((n, S.shape[1]))
    ok = np.ones(n, dtype=bool)
    for i in range(n):
        try:
            out[i] = _scipy_nnls(S, X[:, i], maxiter=max_iter)[0]
        except RuntimeError:
            ok[i] = False
    return out, ok


def update_locals(Xt, A, Psi, S0, lam):
    aa = np.einsum("np,np->n", A, A)
    SP = S0[None, :, :] * Psi[:, None, :]  # (N, L, P)
    M = Xt[:, :, None] * A[:, None, :] + lam * SP
    Ma = Xt * aa[:, None] + lam * np.einsum("nlp,np->nl", SP, A)
    c = Ma / (lam + aa)[:, None]
    return (M - c[:, :, None] * A[:, None, :]) / lam


def stack_gram(stack, Xt):
    G = np.einsum("nli,nlj->nij", stack, stack)
    b = np.einsum("nli,nl->ni", stack, Xt)
    return G, b


def pixel_terms(Xt, stack, A, Psi, S0):
    r = Xt - np.einsum("nlp,np->nl", stack, A)
    d = stack - S0[None, :, :] * Psi[:, None, :]
    return np.einsum("nl,nl->n", r, r), np.einsum("nlp,nlp->n", d, d)


def update_scalings(stack, S0, floor):
    num = np.einsum("lp,nlp->np", S0, stack)
    return np.maximum(num / np.einsum("lp,lp->p", S0, S0), floor)
