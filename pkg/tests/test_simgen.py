import numpy as np
import pytest

from elmmkit.metrics import armse
from elmmkit.simgen import (
    LibraryError,
    SceneSpec,
    generate_scene,
    library_angles,
    make_class_library,
    sample_gmm,
)
from elmmkit.solvers import fclsu

SMALL = dict(bands=60, lines=20, samples=25)


def test_single_variant_library_is_the_references():
    lib, refs = make_class_library(50, 3, 1, seed=0)
    np.testing.assert_array_equal(np.concatenate(lib, axis=1), refs.data)


@pytest.mark.parametrize("seed", range(5))
def test_default_library_angles(seed):
    lib, refs = make_class_library(200, 3, 10, seed=seed)
    within, cross = library_angles(lib, refs)
    assert within <= 8.0
    assert cross >= 10.0
    for V in lib:
        assert np.all(V > 0)
        np.testing.assert_allclose(np.linalg.norm(V, axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(refs.data, axis=0), 1.0, atol=1e-12)


def test_library_rejection_failure():
    with pytest.raises(LibraryError):
        make_class_library(30, 4, 2, seed=0, min_class_angle_deg=89.0, max_draws=5)


def test_spec_validation():
    with pytest.raises(ValueError):
        SceneSpec(gmm=((1.0, 0.1, 0.5),))
    with pytest.raises(ValueError):
        SceneSpec(gmm=((-1.0, 0.1, 1.0),))
    with pytest.raises(ValueError):
        SceneSpec(snr_db=float("nan"))
    with pytest.raises(ValueError):
        SceneSpec(dirichlet_alpha=0.0)
    with pytest.raises(ValueError):
        SceneSpec(shadow_fraction=1.5)


def test_gmm_truncation():
    rng = np.random.default_rng(0)
    draws = sample_gmm(rng, ((0.05, 0.5, 0.5), (1.0, 0.1, 0.5)), 5000)
    assert np.all(draws > 0)


def test_exact_lmm_recovered_by_fclsu():
    spec = SceneSpec(**SMALL, variants_per_class=1, snr_db=float("inf"),
                     gmm=((1.0, 0.0, 1.0),), seed=4)
    cube, truth = generate_scene(spec)
    assert truth.noise_variance == 0.0
    np.testing.assert_array_equal(cube.data, truth.signal)
    res = fclsu(cube, truth.references.data)
    assert armse(res.abundances.data, truth.abundances.data) < 1e-6


@pytest.mark.parametrize("snr", [10.0, 30.0, 45.0])
def test_realized_snr(snr):
    cube, truth = generate_scene(SceneSpec(**SMALL, snr_db=snr, seed=1))
    E = cube.data - truth.signal
    measured = 10 * np.log10(np.sum(truth.signal ** 2) / np.sum(E ** 2))
    assert abs(measured - snr) < 0.5


def test_dirichlet_sparsity():
    cube, truth = generate_scene(SceneSpec(bands=10, lines=100, samples=100, seed=2))
    frac = np.mean(truth.abundances.data.max(axis=0) > 0.9)
    assert frac >= 0.30


def test_truth_invariants(small_scene):
    cube, truth = small_scene
    A = truth.abundances.data
    assert np.all(A >= 0)
    np.testing.assert_allclose(A.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(truth.scalings.data > 0)
    stack = truth.locals.data
    for j, V in enumerate(truth.class_library):
        np.testing.assert_array_equal(stack[:, :, j], V[:, truth.labels[:, j]].T)
    assert truth.locals.n_pixels == cube.n_pixels


def test_same_seed_is_bitwise_identical():
    a, ta = generate_scene(SceneSpec(**SMALL, seed=9, shadow_fraction=0.05))
    b, tb = generate_scene(SceneSpec(**SMALL, seed=9, shadow_fraction=0.05))
    assert a.data.tobytes() == b.data.tobytes()
    assert ta.scalings.data.tobytes() == tb.scalings.data.tobytes()
    c, _ = generate_scene(SceneSpec(**SMALL, seed=10, shadow_fraction=0.05))
    assert a.data.tobytes() != c.data.tobytes()


def test_shadow_pixels_are_dark():
    cube, truth = generate_scene(SceneSpec(**SMALL, seed=3, shadow_fraction=0.02,
                                           snr_db=float("inf")))
    norms = np.linalg.norm(cube.data, axis=0)
    assert norms.min() < 0.02 * np.median(norms)
    assert truth.shadow_mask.sum() == round(0.02 * cube.n_pixels)
    # the noiseless signal is dark regardless of the noise level
    _, noisy = generate_scene(SceneSpec(**SMALL, seed=3, shadow_fraction=0.02))
    sig = np.linalg.norm(noisy.signal, axis=0)
    assert sig.min() < 0.02 * np.median(sig)
