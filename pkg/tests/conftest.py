"""Shared builders for the test suite.

Datasets here are constructed directly from dense arrays so tests control
every value; the loader path has its own tests in test_dataio.
"""

import numpy as np
import pytest

from augsvm import Dataset, SparseRow, Task


def rows_from_dense(x: np.ndarray) -> list[SparseRow]:
    out = []
    for r in np.asarray(x, dtype=np.float64):
        nz = np.nonzero(r)[0]
        out.append(SparseRow(indices=nz.astype(np.int64), values=r[nz],
                             dim=x.shape[1]))
    return out


def dense_dataset(x, labels, task=Task.CLS, num_classes=None,
                  has_bias=False) -> Dataset:
    x = np.asarray(x, dtype=np.float64)
    return Dataset.from_rows(rows_from_dense(x), np.asarray(labels, np.float64),
                             task, has_bias, num_classes=num_classes)


def random_cls(n, k, seed, margin=0.0):
    """Dense random binary dataset; margin shifts the classes apart."""
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    x = rng.normal(size=(n, k)) + margin * y[:, None] * np.ones(k) / np.sqrt(k)
    return dense_dataset(x, y), x, y


def pytest_runtest_logreport(report):
    # one terminal line per end-to-end criterion, visible outside capture
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.rsplit("::", 1)[-1]
        status = ("PASS" if report.passed
                  else "SKIP" if report.skipped else "FAIL")
        print(f"\n{name}: {status}")


@pytest.fixture
def tiny_cls():
    x = np.array([[2.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    y = [1.0, 1.0, -1.0]
    return dense_dataset(x, y), x, np.asarray(y)
