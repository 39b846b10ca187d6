"""Jitted per-pixel kernels.

Every kernel here loops over pixels with ``prange`` and writes only to
the pixel's own output slot, so results do not depend on the thread count.
Layouts are pixel-major: stacks are (N, L, P), coefficient arrays (N, P).
"""

import numpy as np

from numba import prange

from ._accel import njit


@njit
def _project_into(v, out, u):
    """Simplex projection of v into out; u is scratch of the same length."""
    p = v.shape[0]
    # insertion sort, descending (P is small)
    for j in range(p):
        x = v[j]
        k = j
        while k > 0 and u[k - 1] < x:
            u[k] = u[k - 1]
            k -= 1
        u[k] = x
    css = 0.0
    tau = 0.0
    for j in range(p):
        css += u[j]
        t = (css - 1.0) / (j + 1)
        if u[j] - t > 0.0:
            tau = t
    for j in range(p):
        d = v[j] - tau
        out[j] = d if d > 0.0 else 0.0


@njit
def project_simplex_vec(v, out):
    _project_into(v, out, np.empty(v.shape[0]))


@njit(parallel=True)
def project_simplex_rows(V):
    out = np.empty_like(V)
    for n in prange(V.shape[0]):
        _project_into(V[n], out[n], np.empty(V.shape[1]))
    return out


@njit
def _quad(G, b, a):
    p = a.shape[0]
    f = 0.0
    for i in range(p):
        gi = 0.0
        for j in range(p):
            gi += G[i, j] * a[j]
        f += a[i] * (0.5 * gi - b[i])
    return f


@njit
def _polish(G, b, a):
    """Refine a projected-gradient iterate by solving the equality-constrained
    problem on its support; drop negative coordinates and retry."""
    p = a.shape[0]
    active = a > 0.0
    for _ in range(p):
        k = 0
        for j in range(p):
            if active[j]:
                k += 1
        if k == 0:
            return False, a
        idx = np.empty(k, dtype=np.int64)
        k = 0
        for j in range(p):
            if active[j]:
                idx[k] = j
                k += 1
        K = np.zeros((k + 1, k + 1))
        r = np.zeros(k + 1)
        for i in range(k):
            for j in range(k):
                K[i, j] = G[idx[i], idx[j]]
            K[i, k] = 1.0
            K[k, i] = 1.0
            r[i] = b[idx[i]]
        r[k] = 1.0
        if np.linalg.cond(K) > 1e12:
            return False, a
        sol = np.linalg.solve(K, r)
        if not np.all(np.isfinite(sol)):
            return False, a
        ok = True
        for i in range(k):
            if sol[i] < 0.0:
                active[idx[i]] = False
                ok = False
        if ok:
            z = np.zeros(p)
            for i in range(k):
                z[idx[i]] = sol[i]
            return True, z
    return False, a


@njit(parallel=True)
def simplex_qp(G, b, a0, max_iter, tol, polish):
    """Per pixel: min 0.5 aᵀG a - bᵀa over the unit simplex.

    ``G`` is (N, P, P) or (1, P, P) when shared by all pixels.
    Projected gradient with step 1/λmax(G), then an optional support polish
    accepted only if it does not increase the objective.
    """
    n_pix, p = b.shape
    shared = G.shape[0] == 1
    stride = 0 if shared else 1
    lip_shared = np.linalg.eigvalsh(G[0])[-1]
    A = np.empty_like(a0)
    iters = np.zeros(n_pix, dtype=np.int64)
    for n in prange(n_pix):
        m = n * stride
        Gn = G[m]
        bn = b[n]
        lip = lip_shared if shared else np.linalg.eigvalsh(Gn)[-1]
        a = np.empty(p)
        work = np.empty(p)
        _project_into(a0[n], a, work)
        if lip > 0.0:
            step = 1.0 / lip
            trial = np.empty(p)
            anew = np.empty(p)
            it = 0
            while it < max_iter:
                it += 1
                for i in range(p):
                    gi = -bn[i]
                    for j in range(p):
                        gi += Gn[i, j] * a[j]
                    trial[i] = a[i] - step * gi
                _project_into(trial, anew, work)
                dn = 0.0
                an = 0.0
                for i in range(p):
                    dn += (anew[i] - a[i]) ** 2
                    an += a[i] ** 2
                    a[i] = anew[i]
                if np.sqrt(dn) <= tol * max(np.sqrt(an), 1e-300):
                    break
            iters[n] = it
            if polish:
                ok, z = _polish(Gn, bn, a.copy())
                if ok and _quad(Gn, bn, z) <= _quad(Gn, bn, a):
                    a = z
        A[n] = a
    return A, iters


@njit
def _nnls_one(G, b, max_iter):
    """Lawson-Hanson active set on the normal equations."""
    p = b.shape[0]
    x = np.zeros(p)
    passive = np.zeros(p, dtype=np.bool_)
    scale = 0.0
    for i in range(p):
        scale = max(scale, abs(b[i]))
        for j in range(p):
            scale = max(scale, abs(G[i, j]))
    tol = 1e-13 * max(scale, 1e-300)
    it = 0
    while it < max_iter:
        w = b - G @ x
        jmax = -1
        wmax = tol
        for j in range(p):
            if not passive[j] and w[j] > wmax:
                wmax = w[j]
                jmax = j
        if jmax < 0:
            return x, True
        passive[jmax] = True
        while True:
            it += 1
            idx = np.nonzero(passive)[0]
            Gp = np.empty((idx.size, idx.size))
            bp = np.empty(idx.size)
            for i in range(idx.size):
                bp[i] = b[idx[i]]
                for j in range(idx.size):
                    Gp[i, j] = G[idx[i], idx[j]]
            if np.linalg.cond(Gp) > 1e13:
                # dependent column entered the passive set
                return x, False
            zp = np.linalg.solve(Gp, bp)
            if np.all(zp > 0.0):
                x[:] = 0.0
                for i in range(idx.size):
                    x[idx[i]] = zp[i]
                break
            alpha = np.inf
            for i in range(idx.size):
                if zp[i] <= 0.0:
                    xi = x[idx[i]]
                    alpha = min(alpha, xi / (xi - zp[i]))
            for i in range(idx.size):
                k = idx[i]
                x[k] = x[k] + alpha * (zp[i] - x[k])
                if x[k] <= tol:
                    x[k] = 0.0
                    passive[k] = False
            if it >= max_iter:
                return x, False
    return x, False


@njit(parallel=True)
def nnls_gram(G, b, max_iter):
    n_pix, p = b.shape
    out = np.zeros((n_pix, p))
    ok = np.zeros(n_pix, dtype=np.bool_)
    for n in prange(n_pix):
        x, conv = _nnls_one(G, b[n], max_iter)
        out[n] = x
        ok[n] = conv
    return out, ok


@njit(parallel=True)
def update_locals(Xt, A, Psi, S0, lam):
    """Closed-form minimiser of 0.5||x - S a||² + 0.5 lam ||S - S0 diag(ψ)||²,
    via Sherman-Morrison on (a aᵀ + lam I)."""
    n_pix, n_bands = Xt.shape
    p = A.shape[1]
    out = np.empty((n_pix, n_bands, p))
    for n in prange(n_pix):
        a = A[n]
        psi = Psi[n]
        aa = 0.0
        for j in range(p):
            aa += a[j] * a[j]
        denom = lam + aa
        for l in range(n_bands):
            x = Xt[n, l]
            ma = x * aa
            for j in range(p):
                ma += lam * S0[l, j] * psi[j] * a[j]
            c = ma / denom
            for j in range(p):
                m = x * a[j] + lam * S0[l, j] * psi[j]
                out[n, l, j] = (m - c * a[j]) / lam
    return out


@njit(parallel=True)
def stack_gram(stack, Xt):
    n_pix, n_bands, p = stack.shape
    G = np.zeros((n_pix, p, p))
    b = np.zeros((n_pix, p))
    for n in prange(n_pix):
        for l in range(n_bands):
            x = Xt[n, l]
            for i in range(p):
                s = stack[n, l, i]
                b[n, i] += s * x
                for j in range(p):
                    G[n, i, j] += s * stack[n, l, j]
    return G, b


@njit(parallel=True)
def pixel_terms(Xt, stack, A, Psi, S0):
    """Per-pixel ||x - S a||² and ||S - S0 diag(ψ)||²_F."""
    n_pix, n_bands, p = stack.shape
    fid = np.zeros(n_pix)
    cpl = np.zeros(n_pix)
    for n in prange(n_pix):
        f = 0.0
        c = 0.0
        for l in range(n_bands):
            r = Xt[n, l]
            for j in range(p):
                s = stack[n, l, j]
                r -= s * A[n, j]
                d = s - S0[l, j] * Psi[n, j]
                c += d * d
            f += r * r
        fid[n] = f
        cpl[n] = c
    return fid, cpl


@njit(parallel=True)
def update_scalings(stack, S0, floor):
    n_pix, n_bands, p = stack.shape
    out = np.empty((n_pix, p))
    nrm = np.zeros(p)
    for j in range(p):
        for l in range(n_bands):
            nrm[j] += S0[l, j] * S0[l, j]
    for n in prange(n_pix):
        for j in range(p):
            s = 0.0
            for l in range(n_bands):
                s += S0[l, j] * stack[n, l, j]
            v = s / nrm[j]
            out[n, j] = v if v > floor else floor
    return out
