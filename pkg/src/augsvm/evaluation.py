"""Model evaluation: batch prediction and task-appropriate metrics."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import DataError
from .objectives import predict
from .types import Dataset, Model, Solver, Task


@dataclasses.dataclass
class EvalReport:
    task: Task
    total: int
    correct: int | None = None
    accuracy: float | None = None          # cls/mlt: exactly correct/total
    confusion: dict | list | None = None   # cls: tp/fn/fp/tn; mlt: MxM counts
    rmse: float | None = None              # svr
    train_seconds: float | None = None     # present when produced by training
    iterations: int | None = None
    stop_reason: str | None = None

    def to_dict(self) -> dict:
        out = {"task": self.task.value, "total": self.total}
        for key in ("correct", "accuracy", "confusion", "rmse",
                    "train_seconds", "iterations", "stop_reason"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out


def predict_many(model: Model, data: Dataset) -> np.ndarray:
    """Vectorized predictions, identical to predict() row by row."""
    if data.dim != model.dim:
        raise DataError(f"data dim {data.dim} does not match model dim {model.dim}")
    if model.solver is Solver.KRN:
        return np.array([predict(model, row) for row in data.rows()])
    if model.task is Task.MLT:
        scores = data.matrix @ model.weights.T
        return (np.argmax(scores, axis=1) + 1).astype(np.float64)
    scores = data.margins(model.weights)
    if model.task is Task.SVR:
        return scores
    return np.where(scores >= 0.0, 1.0, -1.0)


def evaluate_model(model: Model, data: Dataset) -> EvalReport:
    if data.task is not model.task:
        raise DataError(f"dataset task {data.task.value} does not match "
                        f"model task {model.task.value}")
    preds = predict_many(model, data)
    n = data.n
    if model.task is Task.SVR:
        resid = preds - data.labels
        return EvalReport(task=model.task, total=n,
                          rmse=math.sqrt(float(resid @ resid) / n))
    correct = int(np.sum(preds == data.labels))
    if model.task is Task.CLS:
        pos, predpos = data.labels > 0, preds > 0
        confusion = {
            "tp": int(np.sum(pos & predpos)),
            "fn": int(np.sum(pos & ~predpos)),
            "fp": int(np.sum(~pos & predpos)),
            "tn": int(np.sum(~pos & ~predpos)),
        }
    else:
        m = model.num_classes
        counts = np.zeros((m, m), dtype=np.int64)
        for truth, pred in zip(data.labels.astype(np.int64),
                               preds.astype(np.int64)):
            counts[truth - 1, pred - 1] += 1
        confusion = counts.tolist()
    return EvalReport(task=model.task, total=n, correct=correct,
                      accuracy=correct / n, confusion=confusion)
