"""Riemannian conjugate gradient on the oblique manifold (unit-norm columns)."""

from dataclasses import dataclass, field

import numpy as np


def normalize(S):
    return S / np.linalg.norm(S, axis=0)


def tangent_project(S, Z):
    """Project Z onto the tangent space at S (remove the radial part per column)."""
    return Z - S * np.sum(S * Z, axis=0)


def riemannian_gradient(S, egrad):
    return tangent_project(S, egrad)


def retract(S, xi):
    """Column-wise renormalisation retraction."""
    return normalize(S + xi)


def _inner(a, b):
    return float(np.sum(a * b))


@dataclass
class CGInfo:
    iterations: int = 0
    costs: list = field(default_factory=list)
    grad_norm: float = np.nan
    converged: bool = False
    stalled: bool = False


def oblique_cg(fun, S0, max_iter=500, grad_tol=1e-9, step_hint=None,
               restart_every=None, armijo=1e-4, shrink=0.5, max_backtracks=50):
    """Minimise ``fun`` over matrices with unit-norm columns.

    ``fun(S)`` returns ``(cost, euclidean_gradient)``. ``step_hint(S, d)``
    may return a first trial step along direction ``d`` (e.g. the minimiser
    of a quadratic model). Directions use Hestenes-Stiefel with nonnegative
    clipping, restarted every ``restart_every`` iterations (default L*P) and
    whenever the new direction is not a descent direction. Previous
    directions are carried over by tangent-space projection.

    Returns ``(S, info)``; the cost sequence is non-increasing.
    """
    S = normalize(np.array(S0, dtype=np.float64))
    if restart_every is None:
        restart_every = S.size
    f, eg = fun(S)
    g = riemannian_gradient(S, eg)
    gn0 = np.sqrt(_inner(g, g))
    info = CGInfo(costs=[f], grad_norm=gn0)
    if gn0 == 0.0:
        info.converged = True
        return S, info
    d = -g
    t_prev = None
    since_restart = 0
    for it in range(1, max_iter + 1):
        slope = _inner(g, d)
        if slope >= 0.0:
            d = -g
            slope = -_inner(g, g)
            since_restart = 0
        S_new, f_new, t = _armijo(fun, S, f, d, slope, step_hint, t_prev,
                                  armijo, shrink, max_backtracks)
        if S_new is None and since_restart > 0:
            # conjugate direction failed: fall back to steepest descent
            d = -g
            slope = -_inner(g, g)
            since_restart = 0
            S_new, f_new, t = _armijo(fun, S, f, d, slope, step_hint, t_prev,
                                      armijo, shrink, max_backtracks)
        if S_new is None:
            info.stalled = True
            break
        f_new, eg_new = fun(S_new)
        g_new = riemannian_gradient(S_new, eg_new)
        info.iterations = it
        info.costs.append(f_new)
        gn = np.sqrt(_inner(g_new, g_new))
        info.grad_norm = gn
        S, f, t_prev = S_new, f_new, t
        if gn <= grad_tol * max(gn0, 1e-300):
            g = g_new
            info.converged = True
            break
        g_old = tangent_project(S, g)
        d_old = tangent_project(S, d)
        y = g_new - g_old
        denom = _inner(d_old, y)
        beta = _inner(g_new, y) / denom if denom != 0.0 else 0.0
        beta = max(beta, 0.0)
        since_restart += 1
        if since_restart >= restart_every:
            beta = 0.0
            since_restart = 0
        d = -g_new + beta * d_old
        g = g_new
    return S, info


def _armijo(fun, S, f, d, slope, step_hint, t_prev, c, shrink, max_backtracks):
    t = None
    if step_hint is not None:
        t = step_hint(S, d)
    if t is None or not np.isfinite(t) or t <= 0.0:
        t = 2.0 * t_prev if t_prev else 1.0 / np.sqrt(_inner(d, d))
    for _ in range(max_backtracks):
        S_new = retract(S, t * d)
        f_new = fun(S_new)[0]
        if f_new <= f + c * t * slope and f_new <= f:
            return S_new, f_new, t
        t *= shrink
    return None, f, t
