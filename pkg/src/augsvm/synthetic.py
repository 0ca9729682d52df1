"""Synthetic dataset generators for benchmarks and tests.

These back the bench command's data parameters (N, K, sparsity, seed) and
the standard small benchmarks (blobs, two moons, XOR). Feature matrices are
dense Gaussian draws with an optional Bernoulli sparsity mask; rows are
shuffled so classes interleave across shards.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .types import Dataset, Task


def _assemble(x: np.ndarray, labels: np.ndarray, task: Task, add_bias: bool,
              num_classes: int | None = None) -> Dataset:
    if add_bias:
        x = np.hstack([x, np.ones((x.shape[0], 1))])
    mat = sp.csr_matrix(x)  # drops structural zeros from the sparsity mask
    return Dataset(matrix=mat, labels=labels.astype(np.float64), task=task,
                   has_bias=add_bias, num_classes=num_classes)


def _sparsify(x: np.ndarray, density: float, rng: np.random.Generator):
    if not (0 < density <= 1):
        raise ValueError("density must be in (0, 1]")
    if density < 1.0:
        x *= rng.uniform(size=x.shape) < density
    return x


def _multiclass_centers(k: int, m: int, separation: float) -> np.ndarray:
    if k >= m:
        return separation * np.eye(m, k)
    if k < 2:
        raise ValueError("need k >= 2 for more classes than features")
    angles = 2.0 * np.pi * np.arange(m) / m
    centers = np.zeros((m, k))
    centers[:, 0] = separation * np.cos(angles)
    centers[:, 1] = separation * np.sin(angles)
    return centers


def blobs_cls(n: int, k: int, seed: int = 0, separation: float = 4.0,
              density: float = 1.0, add_bias: bool = True) -> Dataset:
    """Two Gaussian blobs at +-(separation/2) along a diagonal direction."""
    rng = np.random.default_rng(seed)
    direction = np.ones(k) / np.sqrt(k)
    labels = np.where(rng.uniform(size=n) < 0.5, 1.0, -1.0)
    x = rng.standard_normal((n, k)) + np.outer(labels, 0.5 * separation * direction)
    return _assemble(_sparsify(x, density, rng), labels, Task.CLS, add_bias)


def blobs_mlt(n: int, k: int, m: int, seed: int = 0, separation: float = 6.0,
              density: float = 1.0, add_bias: bool = True) -> Dataset:
    """M Gaussian blobs, one per class, labels 1..M, balanced and shuffled."""
    rng = np.random.default_rng(seed)
    centers = _multiclass_centers(k, m, separation)
    labels = 1 + (np.arange(n) % m)
    rng.shuffle(labels)
    x = rng.standard_normal((n, k)) + centers[labels - 1]
    return _assemble(_sparsify(x, density, rng), labels, Task.MLT, add_bias,
                     num_classes=m)


def linear_svr(n: int, k: int, seed: int = 0, noise: float = 0.1,
               weights=None, density: float = 1.0,
               add_bias: bool = True) -> Dataset:
    """y = x . w_true + noise, with w_true ~ N(0, 1/k) unless given."""
    rng = np.random.default_rng(seed)
    w_true = (np.asarray(weights, dtype=np.float64) if weights is not None
              else rng.standard_normal(k) / np.sqrt(k))
    x = _sparsify(rng.standard_normal((n, k)), density, rng)
    y = x @ w_true + noise * rng.standard_normal(n)
    return _assemble(x, y, Task.SVR, add_bias)


def two_moons(n: int = 200, seed: int = 0, noise: float = 0.1,
              add_bias: bool = True) -> Dataset:
    """Two interleaving half circles; linearly inseparable, kernel-friendly."""
    rng = np.random.default_rng(seed)
    n_top = n // 2
    t_top = np.pi * rng.uniform(size=n_top)
    t_bot = np.pi * rng.uniform(size=n - n_top)
    top = np.column_stack([np.cos(t_top), np.sin(t_top)])
    bot = np.column_stack([1.0 - np.cos(t_bot), 0.5 - np.sin(t_bot)])
    x = np.vstack([top, bot]) + noise * rng.standard_normal((n, 2))
    labels = np.concatenate([np.ones(n_top), -np.ones(n - n_top)])
    order = rng.permutation(n)
    return _assemble(x[order], labels[order], Task.CLS, add_bias)


def xor_data(add_bias: bool = True) -> Dataset:
    """The four XOR corners: +1 when the signs agree. Not linearly separable
    even with a bias column."""
    x = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    labels = np.array([1.0, 1.0, -1.0, -1.0])
    return _assemble(x, labels, Task.CLS, add_bias)
