"""Gaussian-kernel classifier trained in coefficient space.

Same augmented scheme as the linear engine, but the weight vector lives in
the span of the training points: f(x) = sum_d omega_d k(x_d, x). The
per-iteration system is A = lam*K + K diag(1/gamma) K, b = K (y*(1+1/gamma)),
formed with two dense multiplications instead of N rank-1 updates. lam*K is
only positive semidefinite, so the factorization leans on the jitter ladder.

Everything is row-striped: Gram construction, the scale draws, and the dense
products. The factorization itself runs on the coordinator.
"""

from __future__ import annotations

import dataclasses
import math
import time

import numpy as np

from .dataio import stripe_ranges
from .errors import DataError
from .linear import _clamped_abs, _draw_scales, converged_pair
from .objectives import hinge_sum
from .precision import PrecisionSystem, draw_gaussian_from_precision, solve_mean
from .rng import GLOBAL_WEIGHTS, SCALE_GAMMA, RngStream
from .runtime import TimingTrace, TrainTrace, WorkerPool
from .types import Algo, Dataset, KernelSpec, Model, Solver, SparseRow, Task, TrainConfig


def _sq_dist(xi: SparseRow, xj: SparseRow) -> float:
    """||xi - xj||^2 by a merged walk over the two sparse index lists."""
    ai, av = xi.indices, xi.values
    bi, bv = xj.indices, xj.values
    na, nb = len(ai), len(bi)
    i = j = 0
    acc = 0.0
    while i < na and j < nb:
        if ai[i] == bi[j]:
            d = av[i] - bv[j]
            acc += d * d
            i += 1
            j += 1
        elif ai[i] < bi[j]:
            acc += av[i] * av[i]
            i += 1
        else:
            acc += bv[j] * bv[j]
            j += 1
    while i < na:
        acc += av[i] * av[i]
        i += 1
    while j < nb:
        acc += bv[j] * bv[j]
        j += 1
    return acc


def kernel_eval(spec: KernelSpec, xi: SparseRow, xj: SparseRow) -> float:
    if xi.dim != xj.dim:
        raise DataError(f"kernel rows disagree on dim: {xi.dim} vs {xj.dim}")
    return math.exp(-_sq_dist(xi, xj) / (2.0 * spec.sigma * spec.sigma))


@dataclasses.dataclass
class GramMatrix:
    """Dense symmetric matrix of pairwise kernel values."""

    matrix: np.ndarray
    spec: KernelSpec

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def build_gram(data: Dataset, spec: KernelSpec, workers: int = 1,
               limit: int = 8192, kernel_fn=None) -> GramMatrix:
    """All pairwise kernel values. Each (i, j <= i ... j >= i) pair is
    evaluated once on the worker owning row i (rows dealt round-robin), then
    the lower triangle is mirror-copied, so the result is symmetric to the
    bit. `kernel_fn(xi, xj)` overrides the Gaussian pair function (tests)."""
    n = data.n
    if n > limit:
        raise DataError(f"gram matrix needs n <= {limit}, got {n}")
    pair = kernel_fn if kernel_fn is not None else (
        lambda a, b: kernel_eval(spec, a, b))
    rows = [data.row(d) for d in range(n)]
    gram = np.zeros((n, n))

    def fill(rank):
        for i in range(rank, n, workers):
            xi = rows[i]
            out = gram[i]
            for j in range(i, n):
                out[j] = pair(xi, rows[j])

    if workers > 1:
        with WorkerPool(workers) as pool:
            pool.map(fill, range(workers))
    else:
        fill(0)
    il = np.tril_indices(n, -1)
    gram[il] = gram.T[il]
    return GramMatrix(matrix=gram, spec=spec)


def update_scales_krn(omega: np.ndarray, gram: GramMatrix, labels: np.ndarray,
                      kind: Algo, floor: float, rng: RngStream | None = None,
                      lo: int = 0, hi: int | None = None) -> np.ndarray:
    """Scales for rows lo:hi from residual_d = 1 - y_d * (K_d . omega)."""
    hi = gram.n if hi is None else hi
    margins = gram.matrix[lo:hi] @ omega
    resid = _clamped_abs(1.0 - labels[lo:hi] * margins, floor)
    if kind is Algo.EM:
        return resid
    return _draw_scales(resid, rng, floor)


def _stripe_system(gram: GramMatrix, labels: np.ndarray, inv_gamma: np.ndarray,
                   lam: float, lo: int, hi: int):
    """Rows lo:hi of A = lam*K + K diag(1/gamma) K and of b."""
    k_rows = gram.matrix[lo:hi]
    b_rows = k_rows @ (labels * (1.0 + inv_gamma))
    a_rows = lam * k_rows + (k_rows * inv_gamma[None, :]) @ gram.matrix
    return a_rows, b_rows


def krn_global_update(lam: float, gram: GramMatrix, labels: np.ndarray,
                      gamma: np.ndarray, kind: Algo,
                      rng: RngStream | None = None) -> np.ndarray:
    """Coefficient update from full-data scales (the serial reference form;
    train_kernel stripes the same products across workers)."""
    a, b = _stripe_system(gram, labels, 1.0 / gamma, lam, 0, gram.n)
    system = PrecisionSystem.from_full(a, b)
    if kind is Algo.EM:
        return solve_mean(system)
    return draw_gaussian_from_precision(system, rng)


def kernel_objective(omega: np.ndarray, gram: GramMatrix, labels: np.ndarray,
                     lam: float) -> float:
    """(lam/2) omega^T K omega + 2 sum_d max(0, 1 - y_d K_d.omega)."""
    k_omega = gram.matrix @ omega
    return (0.5 * lam * float(omega @ k_omega)
            + 2.0 * hinge_sum(1.0 - labels * k_omega))


def train_kernel(data: Dataset, config: TrainConfig, with_timing: bool = False,
                 kernel_fn=None) -> tuple[Model, TrainTrace]:
    """EM/MC training over the Gram matrix. The returned model keeps every
    training row as support data. With `kernel_fn` overriding the pair
    function the model's stored spec no longer describes the scores; that
    hook is for in-process comparisons only, not for models meant to be
    saved."""
    if config.solver is not Solver.KRN or config.task is not Task.CLS:
        raise ValueError("train_kernel handles krn cls only")
    if data.task is not Task.CLS:
        raise DataError("dataset task must be cls")

    n = data.n
    mc = config.algo is Algo.MC
    t0 = time.perf_counter()
    gram = build_gram(data, config.kernel, workers=config.workers,
                      limit=config.gram_limit, kernel_fn=kernel_fn)
    gram_seconds = time.perf_counter() - t0
    stripes = stripe_ranges(n, config.workers)
    rngs = [RngStream(config.seed, rank, SCALE_GAMMA) if mc else None
            for rank in range(config.workers)]
    rng_global = RngStream(config.seed, 0, GLOBAL_WEIGHTS) if mc else None

    trace = TrainTrace(timing=TimingTrace() if with_timing else None,
                       gram_seconds=gram_seconds)
    timing = trace.timing
    omega = np.zeros(n)
    trace.objectives.append(kernel_objective(omega, gram, data.labels,
                                             config.lam))
    inv_gamma = np.empty(n)
    avg = np.zeros(n)
    n_avg = 0
    best = (np.inf, None)

    with WorkerPool(config.workers) as pool:
        for it in range(config.max_iters):
            it_t0 = time.perf_counter()

            def scales(rank):
                s0 = time.perf_counter()
                lo, hi = stripes[rank]
                gamma = update_scales_krn(omega, gram, data.labels, config.algo,
                                          config.gamma_floor, rngs[rank], lo, hi)
                inv_gamma[lo:hi] = 1.0 / gamma
                return time.perf_counter() - s0

            draw_times = pool.map(scales, range(config.workers))

            def stripe(rank):
                lo, hi = stripes[rank]
                s0 = time.perf_counter()
                k_rows = gram.matrix[lo:hi]
                b_rows = k_rows @ (data.labels * (1.0 + inv_gamma))
                s1 = time.perf_counter()
                a_rows = config.lam * k_rows + (k_rows * inv_gamma[None, :]) @ gram.matrix
                s2 = time.perf_counter()
                return a_rows, b_rows, s1 - s0, s2 - s1

            parts = pool.map(stripe, range(config.workers))
            t_r0 = time.perf_counter()
            a = np.concatenate([p[0] for p in parts], axis=0)
            b = np.concatenate([p[1] for p in parts])
            t_r1 = time.perf_counter()
            system = PrecisionSystem.from_full(a, b)
            if config.algo is Algo.EM:
                omega = solve_mean(system)
            else:
                omega = draw_gaussian_from_precision(system, rng_global)
            t_s1 = time.perf_counter()
            if timing is not None:
                for rank in range(config.workers):
                    timing.add(it, "draw_gamma", rank, draw_times[rank])
                    timing.add(it, "mu_p", rank, parts[rank][2])
                    timing.add(it, "sigma_p", rank, parts[rank][3])
                timing.add(it, "reduce", 0, t_r1 - t_r0)
                timing.add(it, "solve", 0, t_s1 - t_r1)
                timing.add(it, "broadcast", 0, 0.0)

            obj = kernel_objective(omega, gram, data.labels, config.lam)
            trace.objectives.append(obj)
            trace.iter_seconds.append(time.perf_counter() - it_t0)
            if mc:
                if it >= config.burn_in:
                    avg += omega
                    n_avg += 1
                    if obj < best[0]:
                        best = (obj, omega)
            elif it >= 1 and converged_pair(trace.objectives[-2], obj,
                                            config.tol_scale, n):
                trace.stop_reason = "converged"
                break

    if mc:
        omega = best[1] if config.mc_best_sample else avg / n_avg
        trace.samples_averaged = n_avg
    model = Model(task=Task.CLS, solver=Solver.KRN, lam=config.lam,
                  epsilon=config.epsilon, has_bias=data.has_bias, dim=data.dim,
                  omega=omega, support=data, kernel=config.kernel)
    return model, trace
