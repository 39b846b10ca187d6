from types import SimpleNamespace

import numpy as np
import pytest

from elmmkit import kernels
from elmmkit.core import AbundanceMatrix, ScalingMatrix, SpectralCube
from elmmkit.metrics import armse
from elmmkit.solvers import (
    NumericalError,
    ReferenceStats,
    SolverConfig,
    elmm,
    fclsu,
    reference_objective,
    relmm,
    sclsu,
)
from elmmkit.solvers.unmix import _closed_form_references, _objective

from conftest import random_refs


def _cone_data(seed, L=20, p=3, n=60, psi_range=(0.5, 2.0)):
    rng = np.random.default_rng(seed)
    S0 = random_refs(rng, L, p)
    A = rng.dirichlet(np.ones(p), size=n).T
    psi = rng.uniform(*psi_range, size=n)
    return S0, A, psi, S0 @ A * psi


# FCLSU

@pytest.mark.usefixtures("kernel_backend")
class TestFCLSU:
    def test_pure_and_half_pixels(self):
        rng = np.random.default_rng(0)
        S = random_refs(rng, 10, 3)
        X = np.column_stack([S[:, 1], 0.5 * S[:, 0] + 0.5 * S[:, 1]])
        A = fclsu(X, S).abundances.data
        np.testing.assert_allclose(A[:, 0], [0, 1, 0], atol=1e-8)
        np.testing.assert_allclose(A[:, 1], [0.5, 0.5, 0], atol=1e-8)

    def test_random_exact_recovery(self):
        rng = np.random.default_rng(1)
        S = rng.uniform(size=(10, 4))
        A = rng.dirichlet(np.ones(4), size=50).T
        res = fclsu(S @ A, S)
        assert armse(res.abundances.data, A) < 1e-6
        assert res.reconstruction_rmse < 1e-8


# SCLSU

@pytest.mark.usefixtures("kernel_backend")
class TestSCLSU:
    def test_split_arithmetic(self):
        res = sclsu(np.array([[0.6], [0.9]]), np.eye(2))
        np.testing.assert_allclose(res.scalings.data[:, 0], [1.5, 1.5], atol=1e-14)
        np.testing.assert_allclose(res.abundances.data[:, 0], [0.4, 0.6], atol=1e-14)

    def test_exact_recovery(self):
        S0, A, psi, X = _cone_data(2)
        res = sclsu(X, S0)
        assert np.max(np.abs(res.abundances.data - A)) < 1e-6
        assert np.max(np.abs(res.scalings.data - psi)) < 1e-6
        # the scaling is one scalar per pixel, repeated over the rows
        assert np.all(res.scalings.data == res.scalings.data[0])

    def test_product_equals_coefficients(self):
        S0, _, _, X = _cone_data(3)
        X = X + 0.01 * np.random.default_rng(3).standard_normal(X.shape)
        res = sclsu(X, S0)
        ok = ~res.flagged
        prod = res.abundances.data * res.scalings.data
        np.testing.assert_allclose(prod[:, ok], res.coefficients[:, ok], atol=1e-10)

    def test_zero_pixel_flagged(self):
        S0 = random_refs(np.random.default_rng(4), 5, 3)
        X = np.column_stack([S0[:, 0], np.zeros(5)])
        res = sclsu(X, S0)
        assert res.flagged.tolist() == [False, True]
        np.testing.assert_allclose(res.abundances.data[:, 1], 1 / 3)
        assert np.all(res.scalings.data[:, 1] == SolverConfig().psi_floor)


# ELMM

def _init(A, Psi):
    return SimpleNamespace(abundances=AbundanceMatrix(A), scalings=ScalingMatrix(Psi))


def test_elmm_large_lambda_collapses_to_sclsu(kernel_backend):
    S0, _, _, X = _cone_data(5)
    X = X + 1e-3 * np.random.default_rng(5).standard_normal(X.shape)
    base = sclsu(X, S0)
    res = elmm(X, S0, SolverConfig(lambda_s=1e6), init=base)
    assert np.max(np.abs(res.abundances.data - base.abundances.data)) < 1e-3


def test_elmm_monotone_on_scene(small_scene, kernel_backend):
    cube, truth = small_scene
    S0 = truth.references.data
    init = sclsu(cube, S0)
    res = elmm(cube, S0, SolverConfig(lambda_s=0.05), init=init)
    trace = np.array(res.objective_trace)
    assert np.all(np.diff(trace) <= 1e-9)
    assert trace[-1] < trace[0]
    assert res.references.data is not None
    np.testing.assert_array_equal(res.references.data, S0)


def test_elmm_locals_are_stationary():
    S0, A, psi, X = _cone_data(6, n=10)
    X = X + 0.02 * np.random.default_rng(6).standard_normal(X.shape)
    lam = 0.2
    res = elmm(X, S0, SolverConfig(lambda_s=lam, max_outer_iter=3))
    # one more S_n update from the returned A, Ψ reproduces the stack
    Xt = np.ascontiguousarray(X.T)
    A_ = res.abundances.data.T
    Psi_ = res.scalings.data.T
    stack = kernels.update_locals(Xt, A_, Psi_, S0, lam)
    for n in range(X.shape[1]):
        a = A_[n]
        grad = -np.outer(Xt[n] - stack[n] @ a, a) + lam * (stack[n] - S0 * Psi_[n])
        assert np.linalg.norm(grad) < 1e-8


def test_elmm_requires_positive_lambda():
    S0, _, _, X = _cone_data(7, n=5)
    with pytest.raises(ValueError):
        elmm(X, S0, SolverConfig(lambda_s=0.0))


def test_nonfinite_objective_aborts():
    S0, A, psi, X = _cone_data(8, n=5)
    Xt = np.ascontiguousarray(X.T)
    stack = np.full((5, 20, 3), np.inf)
    with pytest.raises(NumericalError):
        _objective(Xt, stack, A.T, np.ones((5, 3)), S0, SolverConfig(), False)


# RELMM

def test_relmm_fixed_point():
    S0, A, psi, X = _cone_data(9)
    Psi = np.repeat(psi[None], 3, axis=0)
    cfg = SolverConfig(lambda_s=0.1, lambda_s0=0.0, max_outer_iter=1)
    res = relmm(X, S0, cfg, init=_init(A, Psi))
    np.testing.assert_allclose(res.references.data, S0, atol=1e-8)


def test_relmm_monotone_and_normalized(small_scene, kernel_backend):
    cube, truth = small_scene
    rng = np.random.default_rng(0)
    S_init = truth.references.data + 0.05 * np.abs(rng.standard_normal(truth.references.data.shape))
    res = relmm(cube, S_init, SolverConfig(lambda_s=0.1, lambda_s0=0.5))
    trace = np.array(res.objective_trace)
    assert np.all(np.diff(trace) <= 1e-9)
    np.testing.assert_allclose(np.linalg.norm(res.references.data, axis=0), 1.0, atol=1e-10)
    assert res.references.normalized
    assert np.all(res.scalings.data > 0)
    np.testing.assert_allclose(res.abundances.data.sum(axis=0), 1.0, atol=1e-9)


def test_relmm_unnormalized_converges(small_scene):
    cube, truth = small_scene
    # a strong volume weight lets the unconstrained references drift in scale on
    # a scene this small; the standard scene converges at lambda_s0 = 0.5
    cfg = SolverConfig(lambda_s=0.1, lambda_s0=0.01, normalize_references=False)
    res = relmm(cube, truth.references.data, cfg)
    assert res.converged
    assert max(res.block_changes[-1].values()) < cfg.epsilon
    assert np.all(np.diff(res.objective_trace) <= 1e-9)


def test_closed_form_references_is_stationary():
    rng = np.random.default_rng(10)
    stack = rng.standard_normal((30, 8, 3))
    Psi = rng.uniform(0.5, 1.5, size=(30, 3))
    stats = ReferenceStats.from_blocks(stack, Psi)
    S0 = _closed_form_references(stats, 0.3, 0.2)
    _, g = reference_objective(stats, 0.3, 0.2)(S0)
    assert np.linalg.norm(g) < 1e-10


def test_relmm_initialization_scale_invariant():
    S0, _, _, X = _cone_data(11, n=30)
    cfg = SolverConfig(lambda_s=0.1, lambda_s0=0.1, max_outer_iter=2)
    base = relmm(X, S0, cfg)
    # power-of-two column scalings are exact in binary floating point
    pow2 = relmm(X, S0 * np.array([2.0, 0.25, 8.0]), cfg)
    np.testing.assert_array_equal(pow2.references.data, base.references.data)
    np.testing.assert_array_equal(pow2.abundances.data, base.abundances.data)
    other = relmm(X, S0 * np.array([3.1, 0.7, 1.9]), cfg)
    np.testing.assert_allclose(other.references.data, base.references.data, atol=1e-12)


def test_cube_object_and_matrix_agree(small_scene):
    cube, truth = small_scene
    a = fclsu(cube, truth.references.data).abundances.data
    b = fclsu(cube.data, truth.references.data).abundances.data
    np.testing.assert_array_equal(a, b)
    assert isinstance(cube, SpectralCube)


def test_band_mismatch():
    with pytest.raises(ValueError):
        fclsu(np.ones((4, 3)), np.ones((5, 2)))
