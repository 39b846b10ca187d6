import numpy as np
import pytest

from elmmkit.core import SpectralCube, perspective_project_columns, spectral_angle
from elmmkit.extract import ExtractionError, spherical_kmeans, vca
from elmmkit.metrics import align_classes

from _oracles import extreme_points


def _generators(rng, L, p, min_deg=20.0):
    while True:
        S = np.abs(rng.standard_normal((L, p))) + 0.05
        S /= np.linalg.norm(S, axis=0)
        ang = np.degrees(np.arccos(np.clip(S.T @ S, -1, 1)))
        if ang[np.triu_indices(p, 1)].min() > min_deg:
            return S


def _simplex_scene(rng, L=30, p=3, n=300):
    S = _generators(rng, L, p)
    A = rng.dirichlet(np.full(p, 0.7), size=n).T
    A[:, :p] = np.eye(p)
    perm = rng.permutation(n)
    return S, A[:, perm], S @ A[:, perm]


def _angles_deg(E, S):
    return np.array([[np.degrees(spectral_angle(E[:, i], S[:, j]))
                      for j in range(S.shape[1])] for i in range(E.shape[1])])


class TestVCA:
    def test_simplex_pure_pixels(self):
        rng = np.random.default_rng(0)
        S, A, X = _simplex_scene(rng)
        res = vca(X, 3, seed=1)
        Y, _ = perspective_project_columns(X, X.mean(axis=1))
        ext = extreme_points(Y)
        assert sorted(res.pixel_indices.tolist()) == sorted(ext)
        perm = align_classes(res.endmembers.data, S)
        np.testing.assert_allclose(res.endmembers.data[:, perm], S, atol=1e-12)

    def test_cone_with_scalings(self):
        rng = np.random.default_rng(1)
        S, A, X = _simplex_scene(rng)
        X = X * rng.uniform(0.5, 1.5, X.shape[1])
        E = vca(X, 3, seed=2).endmembers.data
        ang = _angles_deg(E, S)
        assert ang.min(axis=0).max() < 0.5

    def test_shadow_pixels_break_vca(self):
        rng = np.random.default_rng(2)
        L, n = 50, 2000
        S = _generators(rng, L, 3)
        A = rng.dirichlet(np.full(3, 0.3), size=n).T
        X = S @ A * rng.uniform(0.5, 1.5, n)
        shadow = rng.choice(n, 40, replace=False)
        X[:, shadow] *= 0.004
        X += 5e-4 * rng.standard_normal(X.shape)
        assert np.linalg.norm(X[:, shadow], axis=0).max() < 0.01
        E = vca(X, 3, seed=0).endmembers.data
        ang = _angles_deg(E, S)
        assert ang.min(axis=1).max() > 10.0

    def test_returns_data_pixels_deterministically(self, small_scene):
        cube, _ = small_scene
        a = vca(cube, 3, seed=5)
        b = vca(cube, 3, seed=5)
        np.testing.assert_array_equal(a.pixel_indices, b.pixel_indices)
        assert len(set(a.pixel_indices.tolist())) == 3
        np.testing.assert_array_equal(a.endmembers.data, cube.data[:, a.pixel_indices])

    def test_errors(self):
        with pytest.raises(ExtractionError):
            vca(np.ones((2, 10)), 3)
        X = np.array([[1.0, -1.0, 1.0, 2.0], [0.0, 0.0, 1.0, 1.0]])
        # the first two pixels are orthogonal to the mean and get excluded
        X[:, 0] = [1.0, -1.5]
        X[:, 1] = [-1.0, 1.5]
        with pytest.warns(RuntimeWarning, match="excluded"):
            res = vca(X, 2)
        assert set(res.pixel_indices.tolist()) <= {2, 3}


class TestSphericalKMeans:
    def _clusters(self, seed, sizes=(120, 90, 60)):
        rng = np.random.default_rng(seed)
        S = _generators(rng, 20, 3, min_deg=25.0)
        cols, labels = [], []
        for j, m in enumerate(sizes):
            for _ in range(m):
                d = S[:, j] + 0.005 * rng.standard_normal(20)
                cols.append(d * rng.uniform(0.2, 3.0))
                labels.append(j)
        order = rng.permutation(len(labels))
        X = np.array(cols).T[:, order]
        return S, X, np.array(labels)[order]

    def test_recovers_partition(self):
        S, X, truth = self._clusters(0)
        within = max(np.degrees(spectral_angle(X[:, i], S[:, truth[i]])) for i in range(X.shape[1]))
        assert within < 2.0
        res = spherical_kmeans(X, 3, seed=0)
        # sizes are distinct, so canonical order reproduces the generating labels
        np.testing.assert_array_equal(res.labels, truth)
        assert res.endmembers.normalized

    def test_collinear_single_cluster(self):
        d = np.array([0.2, 0.5, 0.3, 0.9])
        X = np.outer(d, np.linspace(0.1, 5, 40))
        E = spherical_kmeans(X, 1).endmembers.data[:, 0]
        # acos cannot resolve angles below ~1e-8, so compare unit vectors instead
        np.testing.assert_allclose(E, d / np.linalg.norm(d), atol=1e-12)

    def test_shadows_do_not_move_centroids(self):
        S, X, _ = self._clusters(1)
        rng = np.random.default_rng(1)
        Xs = X.copy()
        dark = rng.choice(X.shape[1], 25, replace=False)
        Xs[:, dark] *= 0.01
        a = spherical_kmeans(X, 3, seed=0).endmembers.data
        b = spherical_kmeans(Xs, 3, seed=0).endmembers.data
        assert np.degrees(np.arccos(np.clip(np.sum(a * b, axis=0), -1, 1))).max() < 1.0

    def test_scale_invariance(self, small_scene):
        cube, _ = small_scene
        rng = np.random.default_rng(2)
        Xs = cube.data * rng.uniform(0.01, 100.0, cube.n_pixels)
        a = spherical_kmeans(cube, 3, seed=4)
        b = spherical_kmeans(Xs, 3, seed=4)
        np.testing.assert_array_equal(a.labels, b.labels)
        np.testing.assert_allclose(a.endmembers.data, b.endmembers.data, atol=1e-10)

    def test_objective_nondecreasing(self, small_scene):
        cube, _ = small_scene
        trace = np.array(spherical_kmeans(cube, 3, seed=0).objective_trace)
        assert np.all(np.diff(trace) >= -1e-9)

    def test_canonical_order_and_zero_pixels(self):
        S, X, _ = self._clusters(3)
        X[:, 5] = 0.0
        res = spherical_kmeans(X, 3, seed=1)
        assert res.labels[5] == -1
        counts = np.bincount(res.labels[res.labels >= 0], minlength=3)
        assert np.all(np.diff(counts) <= 0)

    def test_deterministic(self, small_scene):
        cube, _ = small_scene
        a = spherical_kmeans(cube, 3, seed=9)
        b = spherical_kmeans(cube, 3, seed=9)
        np.testing.assert_array_equal(a.endmembers.data, b.endmembers.data)

    def test_repeated_empty_clusters_raise(self):
        # two distinct directions cannot fill three clusters
        X = np.repeat(np.array([[1.0, 0.0], [0.0, 1.0]]), 5, axis=1)
        with pytest.raises(ExtractionError):
            spherical_kmeans(X, 3, seed=0)

    def test_too_few_pixels(self):
        with pytest.raises(ExtractionError):
            spherical_kmeans(np.zeros((3, 5)), 2)


def test_extraction_accepts_cube_objects():
    X = np.abs(np.random.default_rng(4).standard_normal((6, 12)))
    cube = SpectralCube.from_matrix(X, 3, 4)
    np.testing.assert_array_equal(spherical_kmeans(cube, 2).labels,
                                  spherical_kmeans(X, 2).labels)
