"""Training objectives and prediction.

All three tasks minimize (lam/2) * ||w||^2 + 2 * sum_d loss_d. The factor 2
on the loss is part of the pinned form (it makes the augmented posterior's
scale conditionals parameter-free), so lambda here is 2/C in the usual
C-parameterized SVM convention.

Per-datum losses are summed with math.fsum: the result is correctly rounded,
hence bitwise invariant under row reordering and sharding. Tests rely on
that exactness; do not replace with np.sum.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DataError
from .types import Dataset, Model, Solver, SparseRow, Task


def _check_dim(w: np.ndarray, dim: int):
    if w.shape != (dim,):
        raise DataError(f"weight dim {w.shape} does not match data dim {dim}")
    if not np.all(np.isfinite(w)):
        raise ValueError("non-finite weight")


def hinge_sum(values: np.ndarray) -> float:
    """Correctly-rounded sum of max(0, v) over the array."""
    return math.fsum(np.maximum(0.0, values))


def objective_cls(w: np.ndarray, data: Dataset, lam: float) -> float:
    _check_dim(w, data.dim)
    margins = data.margins(w)
    return 0.5 * lam * float(w @ w) + 2.0 * hinge_sum(1.0 - data.labels * margins)


def objective_svr(w: np.ndarray, data: Dataset, lam: float, epsilon: float) -> float:
    _check_dim(w, data.dim)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    resid = data.labels - data.margins(w)
    return 0.5 * lam * float(w @ w) + 2.0 * hinge_sum(np.abs(resid) - epsilon)


def zero_one_cost(y: int, labels: np.ndarray) -> np.ndarray:
    """Cost of predicting class y against true labels: 0 if equal else 1."""
    return (labels != y).astype(np.float64)


def cost_matrix(labels: np.ndarray, num_classes: int, cost=zero_one_cost) -> np.ndarray:
    """Column y-1 holds cost(y, labels); shape (n, num_classes)."""
    return np.stack([cost(y, labels) for y in range(1, num_classes + 1)], axis=1)


def objective_mlt(weights: np.ndarray, data: Dataset, lam: float,
                  cost=zero_one_cost) -> float:
    """Cost-augmented multiclass hinge: per datum,
    max_y (cost(y) + w_y.x) - w_{y_d}.x, which is 0 when the true class wins
    every cost-augmented comparison."""
    if data.num_classes is None or weights.shape != (data.num_classes, data.dim):
        raise DataError("weight stack shape does not match dataset")
    scores = data.matrix @ weights.T
    aug = scores + cost_matrix(data.labels, data.num_classes, cost)
    true_idx = data.labels.astype(np.int64) - 1
    per_datum = aug.max(axis=1) - scores[np.arange(data.n), true_idx]
    reg = 0.5 * lam * float(np.sum(weights * weights))
    # the augmented max includes y = y_d with cost 0, so per_datum >= 0 already
    return reg + 2.0 * math.fsum(per_datum)


def raw_score(model: Model, x: SparseRow) -> float:
    """Decision value for cls/svr models (linear or kernel)."""
    if x.dim != model.dim:
        raise DataError(f"datum dim {x.dim} does not match model dim {model.dim}")
    if model.solver is Solver.KRN:
        from .kernel import kernel_eval  # local import, kernel.py imports us

        k = kernel_eval
        return float(math.fsum(
            model.omega[d] * k(model.kernel, model.support.row(d), x)
            for d in range(model.support.n)))
    return x.dot(model.weights)


def predict(model: Model, x: SparseRow):
    """Label for one datum: +/-1 for cls, a real for svr, a class in 1..M
    for mlt (ties broken toward the lowest class index)."""
    if model.task is Task.SVR:
        return raw_score(model, x)
    if model.task is Task.MLT:
        if x.dim != model.dim:
            raise DataError(f"datum dim {x.dim} does not match model dim {model.dim}")
        scores = model.weights[:, x.indices] @ x.values
        return int(np.argmax(scores)) + 1
    return 1.0 if raw_score(model, x) >= 0.0 else -1.0
