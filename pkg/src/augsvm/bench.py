"""Scaling measurements behind the bench command.

Runs a sweep over workers (p), dataset size (n), or feature count (k) on
synthetic data, with per-phase instrumentation enabled, and reports median
per-iteration seconds for each phase plus a per-iteration total row (and a
one-off gram_build row for kernel runs). BLAS threading is pinned to one
thread for the duration so measured parallelism is the worker pool's, not
the library's; the stopping rule is disabled so every run executes exactly
the requested number of iterations.
"""

from __future__ import annotations

import numpy as np
from threadpoolctl import threadpool_limits

from . import train
from .dataio import load_libsvm
from .runtime import timing_report
from .synthetic import blobs_cls, blobs_mlt, linear_svr
from .types import Algo, KernelSpec, Solver, Task, TrainConfig

SWEEP_PARAMS = ("p", "n", "k")


def bench_dataset(task: Task, n: int, k: int, classes: int, density: float,
                  seed: int):
    if task is Task.MLT:
        return blobs_mlt(n, k, classes, seed=seed, density=density)
    if task is Task.SVR:
        return linear_svr(n, k, seed=seed, density=density)
    return blobs_cls(n, k, seed=seed, separation=3.0, density=density)


def _median_tail(values) -> float:
    """Median that skips the first (warm-up) iteration when there is room."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size >= 4:
        arr = arr[1:]
    return float(np.median(arr))


def measure(data, config: TrainConfig) -> list[tuple[str, float]]:
    """(phase, seconds) pairs: median per-iteration phase times, a 'total'
    row, and 'gram_build' for kernel runs."""
    with threadpool_limits(limits=1):
        _model, trace = train(data, config, with_timing=True)
    rows = [(phase, _median_tail(secs))
            for phase, secs in timing_report(trace.timing).items()]
    if trace.gram_seconds is not None:
        rows.append(("gram_build", trace.gram_seconds))
    rows.append(("total", _median_tail(trace.iter_seconds)))
    return rows


def run_sweep(param: str, values: list[int], *, task: Task = Task.CLS,
              solver: Solver = Solver.LIN, algo: Algo = Algo.EM,
              n: int = 2000, k: int = 32, classes: int = 3,
              workers: int = 1, lam: float = 1.0, iters: int = 6,
              seed: int = 0, density: float = 1.0, sigma: float = 1.0,
              data_path=None) -> list[dict]:
    """One bench sweep. Returns flat rows:
    {param, value, phase, seconds, iterations}."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"sweep must be one of {SWEEP_PARAMS}")
    if data_path is not None and param != "p":
        raise ValueError("a dataset path fixes n and k; only the p sweep applies")
    rows = []
    for value in values:
        cur_n, cur_k, cur_p = n, k, workers
        if param == "p":
            cur_p = value
        elif param == "n":
            cur_n = value
        else:
            cur_k = value
        if data_path is not None:
            data = load_libsvm(data_path, task)
        else:
            data = bench_dataset(task, cur_n, cur_k, classes, density, seed)
        config = TrainConfig(
            task=task, solver=solver, algo=algo, lam=lam, workers=cur_p,
            max_iters=iters, tol_scale=1e-30, burn_in=0, seed=seed,
            kernel=KernelSpec(sigma=sigma) if solver is Solver.KRN else None,
            gram_limit=max(8192, cur_n))
        for phase, seconds in measure(data, config):
            rows.append({"param": param, "value": value, "phase": phase,
                         "seconds": seconds, "iterations": iters})
    return rows


def write_csv(rows: list[dict], fh):
    fh.write("param,value,phase,seconds,iterations\n")
    for r in rows:
        fh.write(f"{r['param']},{r['value']},{r['phase']},"
                 f"{r['seconds']:.9f},{r['iterations']}\n")
