"""Data types and geometric primitives shared by every stage.

Images are stored band-major: an L x N matrix whose columns are pixels,
with pixel ``n = line * samples + sample``.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels


class DomainError(ValueError):
    """Input outside the domain of a geometric operation."""


class NearOrthogonalPixelError(DomainError):
    """A pixel is (almost) orthogonal to the projection vector."""


class DimensionError(ValueError):
    pass


def _frozen(a, ndim, name):
    a = np.array(a, dtype=np.float64, copy=True)
    if a.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite values")
    a.setflags(write=False)
    return a


def as_array(obj):
    """Return the underlying ndarray of a container type, or the array itself."""
    return np.asarray(getattr(obj, "data", obj), dtype=np.float64)


@dataclass(frozen=True, eq=False)
class SpectralCube:
    """Observed image X (L x N) with its spatial shape."""

    data: np.ndarray
    lines: int
    samples: int

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data, 2, "cube data"))
        if self.lines < 1 or self.samples < 1:
            raise DimensionError("lines and samples must be positive")
        if self.data.shape[1] != self.lines * self.samples:
            raise DimensionError(
                f"cube has {self.data.shape[1]} pixels, expected "
                f"{self.lines} x {self.samples}"
            )

    @property
    def bands(self):
        return self.data.shape[0]

    @property
    def n_pixels(self):
        return self.data.shape[1]

    @classmethod
    def from_matrix(cls, X, lines=None, samples=None):
        X = np.asarray(X)
        if lines is None and samples is None:
            lines, samples = 1, X.shape[1]
        elif lines is None:
            lines = X.shape[1] // samples
        elif samples is None:
            samples = X.shape[1] // lines
        return cls(X, int(lines), int(samples))

    @classmethod
    def from_image(cls, img):
        """Build from a (lines, samples, bands) array."""
        img = np.asarray(img)
        lines, samples, bands = img.shape
        return cls(img.reshape(lines * samples, bands).T, lines, samples)

    def to_image(self):
        return self.data.T.reshape(self.lines, self.samples, self.bands)


@dataclass(frozen=True, eq=False)
class EndmemberMatrix:
    """L x P signatures; ``normalized`` marks membership of the oblique manifold."""

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data, 2, "endmembers"))
        norms = np.linalg.norm(self.data, axis=0)
        if np.any(norms <= 0.0):
            raise DomainError("endmember columns must have positive norm")
        if self.normalized and np.any(np.abs(norms - 1.0) > 1e-10):
            raise DomainError("normalized endmembers must have unit-norm columns")

    @property
    def n_endmembers(self):
        return self.data.shape[1]

    def normalize(self):
        return EndmemberMatrix(normalize_columns(self.data), normalized=True)


@dataclass(frozen=True, eq=False)
class AbundanceMatrix:
    """P x N fractions, each column on the unit simplex."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data, 2, "abundances"))
        if np.any(self.data < -1e-12):
            raise DomainError("abundances must be nonnegative")
        if np.any(np.abs(self.data.sum(axis=0) - 1.0) > 1e-9):
            raise DomainError("abundance columns must sum to one")


@dataclass(frozen=True, eq=False)
class ScalingMatrix:
    """P x N positive scaling factors."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data, 2, "scalings"))
        if np.any(self.data <= 0.0):
            raise DomainError("scaling factors must be strictly positive")


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    """Product A ⊙ Ψ; nonnegative, no sum constraint."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data, 2, "coefficients"))
        if np.any(self.data < 0.0):
            raise DomainError("coefficients must be nonnegative")


@dataclass(frozen=True, eq=False)
class LocalEndmemberStack:
    """Per-pixel endmember matrices, stored as an (N, L, P) array."""

    stack: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "stack", _frozen(self.stack, 3, "local endmembers"))

    @property
    def data(self):
        return self.stack

    @property
    def n_pixels(self):
        return self.stack.shape[0]

    def __len__(self):
        return self.stack.shape[0]

    def __getitem__(self, n):
        return self.stack[n]

    @classmethod
    def from_references(cls, S0, scalings, n_pixels=None):
        """Stack of S0 diag(ψ_n); ``scalings`` is P x N (or None for ψ ≡ 1)."""
        S0 = as_array(S0)
        if scalings is None:
            return cls(np.broadcast_to(S0, (n_pixels,) + S0.shape))
        Psi = as_array(scalings)
        return cls(S0[None, :, :] * Psi.T[:, None, :])


def normalize_columns(M):
    M = np.asarray(M, dtype=np.float64)
    norms = np.linalg.norm(M, axis=0)
    if np.any(norms <= 0.0):
        raise DomainError("cannot normalize a zero column")
    return M / norms


def spectral_angle(s1, s2):
    """Angle in radians between two spectra (scale invariant)."""
    s1 = np.asarray(s1, dtype=np.float64)
    s2 = np.asarray(s2, dtype=np.float64)
    if s1.shape != s2.shape:
        raise DimensionError(f"length mismatch: {s1.shape} vs {s2.shape}")
    n1 = np.linalg.norm(s1)
    n2 = np.linalg.norm(s2)
    if n1 == 0.0 or n2 == 0.0:
        raise DomainError("spectral angle undefined for a zero vector")
    c = np.dot(s1, s2) / (n1 * n2)
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def spectral_angles(S1, S2):
    """Column-wise angles between two equally shaped matrices (NaN for zero columns)."""
    S1 = np.asarray(S1, dtype=np.float64)
    S2 = np.asarray(S2, dtype=np.float64)
    if S1.shape != S2.shape:
        raise DimensionError(f"shape mismatch: {S1.shape} vs {S2.shape}")
    n = np.linalg.norm(S1, axis=0) * np.linalg.norm(S2, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.sum(S1 * S2, axis=0) / n
    out = np.arccos(np.clip(c, -1.0, 1.0))
    out[n == 0.0] = np.nan
    return out


def perspective_project(x, u, floor=1e-10):
    """Scale-free map x -> x / (xᵀu) onto the hyperplane uᵀy = 1."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    d = float(np.dot(x, u))
    if abs(d) <= floor:
        raise NearOrthogonalPixelError(f"|xᵀu| = {abs(d):.3g} is below the floor {floor:g}")
    return x / d


def perspective_project_columns(X, u, floor=1e-10):
    """Project every column of X; returns (projected, usable_mask).

    Columns with |xᵀu| <= floor are flagged in the mask and left as zeros.
    """
    X = np.asarray(X, dtype=np.float64)
    d = np.asarray(u, dtype=np.float64) @ X
    usable = np.abs(d) > floor
    Y = np.zeros_like(X)
    Y[:, usable] = X[:, usable] / d[usable]
    return Y, usable


def reconstruct(locals_, abundances, lines=None, samples=None):
    """Noiseless image with columns S_n a_n."""
    stack = as_array(locals_)
    A = as_array(abundances)
    if stack.ndim != 3 or A.ndim != 2:
        raise DimensionError("expected an (N, L, P) stack and a P x N abundance matrix")
    n, _, p = stack.shape
    if A.shape != (p, n):
        raise DimensionError(f"abundances have shape {A.shape}, expected {(p, n)}")
    Y = np.einsum("nlp,pn->ln", stack, A)
    return SpectralCube.from_matrix(Y, lines, samples)


def cone_residual(X, S):
    """Distance of each column of X to cone(S), via nonnegative least squares."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64).T).T
    S = as_array(S)
    phi, _ = kernels.nnls_columns(S, X)
    return np.linalg.norm(X - S @ phi.T, axis=0)


def simplex_residual(X, S):
    """Distance of each column of X to conv(S)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64).T).T
    S = as_array(S)
    p = S.shape[1]
    G = (S.T @ S)[None]
    b = (S.T @ X).T
    a0 = np.full((X.shape[1], p), 1.0 / p)
    A, _ = kernels.simplex_qp(G, b, a0, max_iter=5000, tol=1e-12)
    return np.linalg.norm(X - S @ A.T, axis=0)


def in_cone(x, S, tol=1e-8):
    return bool(cone_residual(x, S)[0] <= tol)


def in_simplex(x, S, tol=1e-8):
    return bool(simplex_residual(x, S)[0] <= tol)
