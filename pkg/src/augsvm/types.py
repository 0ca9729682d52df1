"""Core domain types: tasks, rows, datasets, configuration, trained models."""

from __future__ import annotations

import dataclasses
import enum

import numpy as np
import scipy.sparse as sp

from .errors import DataError


class Task(str, enum.Enum):
    CLS = "cls"  # binary classification, labels in {-1, +1}
    SVR = "svr"  # regression, real labels
    MLT = "mlt"  # multiclass, labels in {1..M}


class Solver(str, enum.Enum):
    LIN = "lin"
    KRN = "krn"


class Algo(str, enum.Enum):
    EM = "em"  # deterministic scale updates, point estimate
    MC = "mc"  # Gibbs draws, posterior samples


@dataclasses.dataclass(frozen=True)
class KernelSpec:
    """Kernel family and parameters. Only the Gaussian kernel is supported:
    k(a, b) = exp(-||a - b||^2 / (2 sigma^2))."""

    kind: str = "gaussian"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError(f"unsupported kernel kind: {self.kind!r}")
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise ValueError(f"kernel sigma must be positive finite, got {self.sigma}")


@dataclasses.dataclass(frozen=True)
class SparseRow:
    """One datum in sparse form. Indices are 0-based, strictly ascending,
    all below dim; stored values are finite and never zero."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        if idx.shape != val.shape or idx.ndim != 1:
            raise DataError("index/value arrays must be 1-d and equal length")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise DataError("indices must be strictly ascending")
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise DataError(f"index out of range for dim {self.dim}")
        if np.any(val == 0.0):
            raise DataError("zero values must not be stored")
        if not np.all(np.isfinite(val)):
            raise DataError("non-finite feature value")

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def dot(self, w: np.ndarray) -> float:
        return float(w[self.indices] @ self.values)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def squared_norm(self) -> float:
        return float(self.values @ self.values)


def _validate_labels(labels: np.ndarray, task: Task, num_classes: int | None):
    if labels.ndim != 1 or labels.size == 0:
        raise DataError("labels must be a non-empty 1-d array")
    if not np.all(np.isfinite(labels)):
        raise DataError("non-finite label")
    if task is Task.CLS:
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise DataError("cls labels must be -1 or +1")
    elif task is Task.MLT:
        if num_classes is None or num_classes < 2:
            raise DataError("mlt dataset needs num_classes >= 2")
        if not np.all((labels >= 1) & (labels <= num_classes)):
            raise DataError(f"mlt labels must lie in 1..{num_classes}")
        if np.any(labels != np.floor(labels)):
            raise DataError("mlt labels must be integers")


@dataclasses.dataclass(frozen=True)
class Dataset:
    """Immutable row-major sparse dataset.

    `matrix` is CSR with shape (n, dim); `labels` is float64. Every row
    honours the SparseRow invariants (the parser and builders enforce them).
    `dim` already includes the bias column when `has_bias` is set; the bias
    is the last column, value 1.0 on every row.
    """

    matrix: sp.csr_matrix
    labels: np.ndarray
    task: Task
    has_bias: bool
    num_classes: int | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.float64)
        object.__setattr__(self, "labels", labels)
        if self.matrix.shape[0] != labels.size:
            raise DataError("row count and label count differ")
        if self.matrix.shape[0] == 0:
            raise DataError("dataset has no rows")
        _validate_labels(labels, self.task, self.num_classes)

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def row(self, d: int) -> SparseRow:
        lo, hi = self.matrix.indptr[d], self.matrix.indptr[d + 1]
        return SparseRow(
            indices=self.matrix.indices[lo:hi].astype(np.int64),
            values=self.matrix.data[lo:hi],
            dim=self.dim,
        )

    def rows(self):
        for d in range(self.n):
            yield self.row(d)

    def margins(self, w: np.ndarray) -> np.ndarray:
        """X @ w for the whole dataset."""
        return self.matrix @ w

    @staticmethod
    def from_rows(rows, labels, task: Task, has_bias: bool,
                  num_classes: int | None = None) -> "Dataset":
        if not rows:
            raise DataError("dataset has no rows")
        dim = rows[0].dim
        if any(r.dim != dim for r in rows):
            raise DataError("rows disagree on dim")
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        for i, r in enumerate(rows):
            indptr[i + 1] = indptr[i] + r.nnz
        indices = np.concatenate([r.indices for r in rows]) if indptr[-1] else np.zeros(0, np.int64)
        data = np.concatenate([r.values for r in rows]) if indptr[-1] else np.zeros(0)
        mat = sp.csr_matrix((data, indices, indptr), shape=(len(rows), dim))
        return Dataset(matrix=mat, labels=np.asarray(labels, np.float64),
                       task=task, has_bias=has_bias, num_classes=num_classes)


@dataclasses.dataclass
class AugmentedState:
    """Latent per-datum scales owned by one worker. `gamma` always;
    `omega_svr` for the second regression scale; `class_index` marks which
    class block a multiclass gamma belongs to."""

    gamma: np.ndarray
    omega_svr: np.ndarray | None = None
    class_index: int | None = None

    def check(self, floor: float, n: int):
        assert self.gamma.shape == (n,) and np.all(self.gamma >= floor)
        if self.omega_svr is not None:
            assert self.omega_svr.shape == (n,) and np.all(self.omega_svr >= floor)


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs besides the data."""

    task: Task = Task.CLS
    solver: Solver = Solver.LIN
    algo: Algo = Algo.EM
    lam: float = 1.0
    epsilon: float = 1e-3
    kernel: KernelSpec | None = None
    workers: int = 1
    max_iters: int = 200
    tol_scale: float = 0.001
    burn_in: int = 10
    gamma_floor: float = 1e-6
    seed: int = 0
    add_bias: bool = True
    mc_best_sample: bool = False
    gram_limit: int = 8192

    def __post_init__(self):
        if not (self.lam > 0 and np.isfinite(self.lam)):
            raise ValueError(f"lambda must be positive finite, got {self.lam}")
        if not (self.epsilon >= 0 and np.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.tol_scale > 0):
            raise ValueError("tol must be positive")
        if not (self.gamma_floor > 0):
            raise ValueError("gamma floor must be positive")
        if self.burn_in < 0:
            raise ValueError("burn-in must be >= 0")
        if self.algo is Algo.MC and self.burn_in >= self.max_iters:
            raise ValueError(
                f"burn-in ({self.burn_in}) must be below max iterations "
                f"({self.max_iters}) or no sample survives")
        if self.solver is Solver.KRN:
            if self.task is not Task.CLS:
                raise ValueError("kernel solver supports classification only")
            if self.kernel is None:
                raise ValueError("kernel solver needs a kernel spec")
        if self.task is Task.MLT and self.solver is not Solver.LIN:
            raise ValueError("multiclass runs on the linear solver only")
        if self.gram_limit < 1:
            raise ValueError("gram limit must be >= 1")


@dataclasses.dataclass(frozen=True)
class Model:
    """A trained predictor.

    Linear tasks (cls/svr) use `weights` of shape (dim,). Multiclass stacks
    one weight row per class, shape (num_classes, dim). Kernel models keep
    the expansion coefficients `omega` plus the support data (every training
    row) and the kernel spec. `dim` includes the bias column when `has_bias`.
    """

    task: Task
    solver: Solver
    lam: float
    epsilon: float
    has_bias: bool
    dim: int
    weights: np.ndarray | None = None
    num_classes: int | None = None
    omega: np.ndarray | None = None
    support: Dataset | None = None
    kernel: KernelSpec | None = None

    def __post_init__(self):
        if self.solver is Solver.KRN:
            if self.omega is None or self.support is None or self.kernel is None:
                raise ValueError("kernel model needs omega, support, kernel")
            if self.omega.shape != (self.support.n,):
                raise ValueError("omega length must match support size")
            if self.support.dim != self.dim:
                raise ValueError("support dim mismatch")
        elif self.task is Task.MLT:
            if self.weights is None or self.num_classes is None:
                raise ValueError("multiclass model needs stacked weights")
            if self.weights.shape != (self.num_classes, self.dim):
                raise ValueError("weight stack shape mismatch")
        else:
            if self.weights is None or self.weights.shape != (self.dim,):
                raise ValueError("linear model needs weights of shape (dim,)")
