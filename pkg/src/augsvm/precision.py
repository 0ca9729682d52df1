"""Precision-form Gaussian systems: packed triangles, Cholesky with a jitter
ladder, mean solves, and posterior draws.

The global conditional for the weights is N(mu, Sigma) with
Sigma^-1 = A = lam*I + sum_p Sigma_p and A*mu = b = sum_p mu_p. Workers ship
only the packed upper triangle of their Sigma_p; A is assembled by mirroring
the triangle, never by recomputing the lower half.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from .errors import NumericError
from .rng import RngStream, _generator

# jitter ladder: base scale is 1e-8 of the mean diagonal magnitude,
# escalated twice before giving up
JITTER_BASE = 1e-8
JITTER_STEPS = (0.0, 1.0, 10.0, 100.0)


def triangle_size(dim: int) -> int:
    return dim * (dim + 1) // 2


def pack_upper(full: np.ndarray) -> np.ndarray:
    """Row-major upper triangle (diagonal included) of a square matrix."""
    dim = full.shape[0]
    return full[np.triu_indices(dim)].copy()


def unpack_upper(tri: np.ndarray, dim: int) -> np.ndarray:
    """Rebuild the full symmetric matrix by mirroring the packed triangle."""
    if tri.shape != (triangle_size(dim),):
        raise ValueError(f"triangle length {tri.shape} wrong for dim {dim}")
    full = np.zeros((dim, dim))
    iu = np.triu_indices(dim)
    full[iu] = tri
    full.T[iu] = tri
    return full


def add_diagonal(tri: np.ndarray, dim: int, value: float) -> np.ndarray:
    """tri + value on the packed positions of the diagonal."""
    out = tri.copy()
    pos = 0
    for i in range(dim):
        out[pos] += value
        pos += dim - i
    return out


@dataclasses.dataclass
class PrecisionSystem:
    """A (packed upper triangle of the precision matrix) and right side b."""

    tri: np.ndarray
    b: np.ndarray
    dim: int

    def __post_init__(self):
        if self.b.shape != (self.dim,):
            raise ValueError("b shape does not match dim")
        if self.tri.shape != (triangle_size(self.dim),):
            raise ValueError("triangle length does not match dim")

    @staticmethod
    def from_full(a: np.ndarray, b: np.ndarray) -> "PrecisionSystem":
        return PrecisionSystem(tri=pack_upper(a), b=np.asarray(b, np.float64),
                               dim=a.shape[0])

    def full(self) -> np.ndarray:
        return unpack_upper(self.tri, self.dim)


def cholesky_with_jitter(a: np.ndarray):
    """Lower Cholesky factor of a symmetric matrix, retrying with escalating
    diagonal jitter. Returns (L, jitter_used); raises NumericError when the
    ladder is exhausted or the matrix is not finite."""
    if not np.all(np.isfinite(a)):
        raise NumericError("precision matrix contains non-finite entries")
    dim = a.shape[0]
    base = JITTER_BASE * (np.trace(a) / dim)
    for step in JITTER_STEPS:
        jitter = step * base
        try:
            mat = a if jitter == 0.0 else a + jitter * np.eye(dim)
            return np.linalg.cholesky(mat), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericError(
        f"Cholesky failed after jitter ladder up to {JITTER_STEPS[-1] * base:g}")


def _mean_from_factor(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    return scipy.linalg.cho_solve((lower, True), b)


def solve_mean(system: PrecisionSystem) -> np.ndarray:
    lower, _ = cholesky_with_jitter(system.full())
    return _mean_from_factor(lower, system.b)


def draw_gaussian_from_precision(system: PrecisionSystem, rng: RngStream,
                                 z: np.ndarray | None = None) -> np.ndarray:
    """One draw from N(A^-1 b, A^-1) using the same factorization path as
    solve_mean, plus L^-T z noise. Passing z of zeros returns the mean
    exactly (the test hook for the shared path)."""
    lower, _ = cholesky_with_jitter(system.full())
    mu = _mean_from_factor(lower, system.b)
    if z is None:
        z = _generator(rng).standard_normal(system.dim)
    if not np.any(z):
        return mu
    noise = scipy.linalg.solve_triangular(lower, z, lower=True, trans="T")
    return mu + noise
