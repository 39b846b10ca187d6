"""Synthetic scenes with endmember variability and full ground truth.

Each pixel draws one variant per class from a library of unit-norm spectra,
Dirichlet abundances, a single positive scaling factor from a truncated
Gaussian mixture (optionally darkened to simulate shadows), and white
Gaussian noise at a prescribed SNR.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import (
    AbundanceMatrix,
    EndmemberMatrix,
    LocalEndmemberStack,
    ScalingMatrix,
    SpectralCube,
    spectral_angles,
)

DEFAULT_GMM = ((0.6, 0.05, 0.2), (0.9, 0.05, 0.3), (1.1, 0.05, 0.3), (1.5, 0.1, 0.2))


class LibraryError(RuntimeError):
    pass


@dataclass(frozen=True)
class SceneSpec:
    bands: int = 200
    lines: int = 100
    samples: int = 100
    classes: int = 3
    variants_per_class: int = 10
    dirichlet_alpha: float = 0.3
    gmm: tuple = DEFAULT_GMM  # (mean, stddev, weight) per component
    snr_db: float = 30.0
    shadow_fraction: float = 0.0
    shadow_factor: float = 0.01
    seed: int = 0
    variability: float = 0.1  # max relative amplitude of intrinsic perturbations
    min_class_angle_deg: float = 10.0

    def __post_init__(self):
        if min(self.bands, self.lines, self.samples, self.classes, self.variants_per_class) < 1:
            raise ValueError("dimensions must be positive")
        if self.dirichlet_alpha <= 0:
            raise ValueError("dirichlet_alpha must be positive")
        w = np.array([c[2] for c in self.gmm], dtype=float)
        if abs(w.sum() - 1.0) > 1e-12 or np.any(w < 0):
            raise ValueError("gmm weights must be nonnegative and sum to one")
        if any(c[0] <= 0 or c[1] < 0 for c in self.gmm):
            raise ValueError("gmm means must be positive and stddevs nonnegative")
        if np.isnan(self.snr_db) or self.snr_db == -np.inf:
            raise ValueError("snr_db must be a number (inf disables noise)")
        if not 0.0 <= self.shadow_fraction <= 1.0:
            raise ValueError("shadow_fraction must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    abundances: AbundanceMatrix
    scalings: ScalingMatrix
    locals: LocalEndmemberStack
    class_library: list  # P arrays of shape (L, K), unit-norm columns
    references: EndmemberMatrix
    labels: np.ndarray  # (N, P) variant index used per pixel and class
    signal: np.ndarray = field(repr=False, default=None)  # noiseless L x N
    noise_variance: float = 0.0
    shadow_mask: np.ndarray = field(repr=False, default=None)


def _bump_spectrum(rng, bands):
    t = np.arange(bands, dtype=float)
    s = np.full(bands, rng.uniform(0.02, 0.1))
    for _ in range(rng.integers(3, 7)):
        c = rng.uniform(0, bands - 1)
        w = rng.uniform(bands / 20, bands / 4)
        s += rng.uniform(0.2, 1.0) * np.exp(-0.5 * ((t - c) / w) ** 2)
    return s / np.linalg.norm(s)


def _perturbation(rng, bands, amplitude, n_terms=4):
    t = np.linspace(0.0, 1.0, bands)
    m = np.arange(1, n_terms + 1)
    d = (rng.standard_normal(n_terms)[:, None]
         * np.cos(np.pi * m[:, None] * t + rng.uniform(0, 2 * np.pi, n_terms)[:, None])).sum(0)
    return d * (amplitude * rng.uniform(0.5, 1.0) / np.max(np.abs(d)))


def make_class_library(bands, classes, variants, seed=0, variability=0.1,
                       min_class_angle_deg=10.0, max_draws=1000):
    """Return ``(library, references)``.

    ``library[p]`` is an (L, K) array of unit-norm variants of class p: smooth
    multiplicative perturbations (at most ``variability`` in relative
    amplitude) of a positive base spectrum built from Gaussian bumps.
    ``references`` holds the normalised class means. With K = 1 the only
    variant is the base spectrum itself.
    """
    if variants < 1:
        raise ValueError("need at least one variant per class")
    rng = np.random.default_rng(seed)
    min_angle = np.deg2rad(min_class_angle_deg)
    for _ in range(max_draws):
        library = []
        for _ in range(classes):
            base = _bump_spectrum(rng, bands)
            if variants == 1:
                library.append(base[:, None].copy())
                continue
            V = np.stack([base * (1.0 + _perturbation(rng, bands, variability))
                          for _ in range(variants)], axis=1)
            library.append(V / np.linalg.norm(V, axis=0))
        if _separated(library, min_angle):
            break
    else:
        raise LibraryError(
            f"no library with cross-class angles >= {min_class_angle_deg} deg "
            f"after {max_draws} draws"
        )
    if variants == 1:
        refs = np.concatenate(library, axis=1)
    else:
        refs = np.stack([V.mean(axis=1) for V in library], axis=1)
        refs = refs / np.linalg.norm(refs, axis=0)
    return library, EndmemberMatrix(refs, normalized=True)


def _separated(library, min_angle):
    for i in range(len(library)):
        for j in range(i + 1, len(library)):
            Vi = library[i] / np.linalg.norm(library[i], axis=0)
            Vj = library[j] / np.linalg.norm(library[j], axis=0)
            c = np.clip(Vi.T @ Vj, -1.0, 1.0)
            if np.arccos(c.max()) < min_angle:
                return False
    return True


def sample_gmm(rng, gmm, n):
    """Draw n positive values from a Gaussian mixture, redrawing non-positive ones."""
    means = np.array([c[0] for c in gmm], dtype=float)
    stds = np.array([c[1] for c in gmm], dtype=float)
    weights = np.array([c[2] for c in gmm], dtype=float)
    out = np.empty(n)
    todo = np.arange(n)
    while todo.size:
        comp = rng.choice(len(gmm), size=todo.size, p=weights)
        draw = means[comp] + stds[comp] * rng.standard_normal(todo.size)
        good = draw > 0
        out[todo[good]] = draw[good]
        todo = todo[~good]
    return out


def generate_scene(spec):
    """Return ``(cube, truth)`` for a :class:`SceneSpec`; deterministic in ``spec.seed``."""
    lib_seq, ab_seq, sc_seq, noise_seq = np.random.SeedSequence(spec.seed).spawn(4)
    library, refs = make_class_library(
        spec.bands, spec.classes, spec.variants_per_class,
        seed=lib_seq, variability=spec.variability,
        min_class_angle_deg=spec.min_class_angle_deg,
    )
    n = spec.lines * spec.samples
    p, L = spec.classes, spec.bands

    rng = np.random.default_rng(ab_seq)
    labels = rng.integers(0, spec.variants_per_class, size=(n, p))
    A = rng.dirichlet(np.full(p, spec.dirichlet_alpha), size=n)
    # renormalise: the sampler only guarantees unit sums to ~1 ulp per term
    A = A / A.sum(axis=1, keepdims=True)

    stack = np.empty((n, L, p))
    for j in range(p):
        stack[:, :, j] = library[j][:, labels[:, j]].T

    rng = np.random.default_rng(sc_seq)
    psi = sample_gmm(rng, spec.gmm, n)
    shadow = np.zeros(n, dtype=bool)
    n_shadow = int(round(spec.shadow_fraction * n))
    if n_shadow:
        shadow[rng.choice(n, size=n_shadow, replace=False)] = True
        psi[shadow] *= spec.shadow_factor

    Y = psi[None, :] * np.einsum("nlp,np->ln", stack, A)
    rng = np.random.default_rng(noise_seq)
    if np.isinf(spec.snr_db):
        var = 0.0
        X = Y.copy()
    else:
        var = float(np.sum(Y * Y) / (Y.size * 10.0 ** (spec.snr_db / 10.0)))
        X = Y + np.sqrt(var) * rng.standard_normal(Y.shape)

    truth = GroundTruth(
        abundances=AbundanceMatrix(A.T),
        scalings=ScalingMatrix(np.repeat(psi[None, :], p, axis=0)),
        locals=LocalEndmemberStack(stack),
        class_library=library,
        references=refs,
        labels=labels,
        signal=Y,
        noise_variance=var,
        shadow_mask=shadow,
    )
    return SpectralCube(X, spec.lines, spec.samples), truth


def library_angles(library, references):
    """(within, cross): largest variant-to-reference angle inside each class and
    smallest angle between variants of different classes, in degrees."""
    refs = np.asarray(getattr(references, "data", references))
    within = max(
        float(np.max(np.rad2deg(spectral_angles(V, np.repeat(refs[:, [j]], V.shape[1], 1)))))
        for j, V in enumerate(library)
    )
    cross = np.inf
    for i in range(len(library)):
        for j in range(i + 1, len(library)):
            c = np.clip(library[i].T @ library[j], -1.0, 1.0)
            cross = min(cross, float(np.rad2deg(np.arccos(c.max()))))
    return within, cross
