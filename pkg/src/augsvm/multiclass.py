"""Crammer-Singer multiclass trainer via blockwise class sweeps.

Holding all weight rows but w_y fixed, the per-datum multiclass loss becomes
a one-sided hinge in w_y: the competing score zeta_d(y) = max over y' != y
of (s_{dy'} + cost_d(y')) does not involve w_y, so with rho = zeta - cost(y)
and beta = +1 iff y is the datum's true class, the block problem has exactly
the shape the linear engine already solves. One sweep updates every class
once, in index order, each block seeing the weights the previous blocks just
wrote (Gauss-Seidel); a Jacobi variant would sweep from a frozen snapshot.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np

from .dataio import Shard, partition
from .errors import DataError
from .linear import (_clamped_abs, _draw_scales, converged_pair, mu_stat,
                     sigma_tri_stat, solve_from_total)
from .objectives import objective_mlt, zero_one_cost
from .rng import GLOBAL_WEIGHTS, SCALE_GAMMA, RngStream
from .runtime import (PartialStats, TimingTrace, TrainTrace, WorkerContext,
                      WorkerPool, run_iteration)
from .types import (Algo, AugmentedState, Dataset, Model, Solver, Task,
                    TrainConfig)


@dataclasses.dataclass
class ClassSweepState:
    """Weight rows plus the score cache s_{dy} = w_y . x_d. The cache column
    for a class is refreshed immediately after that class's block update, so
    every block reads scores consistent with the current weights."""

    weights: np.ndarray  # (M, dim)
    scores: np.ndarray   # (N, M)


@dataclasses.dataclass
class BinaryReduction:
    """Per-datum reduction of the multiclass loss to a binary-style block:
    rho = zeta - cost(y), beta = +1 on the true class, -1 elsewhere."""

    rho: np.ndarray
    beta: np.ndarray
    class_index: int


def compute_reduction(state: ClassSweepState, shard: Shard, y: int,
                      cost=zero_one_cost) -> BinaryReduction:
    m = state.weights.shape[0]
    if m < 2:
        raise ValueError("multiclass needs at least two classes")
    scores = state.scores[shard.lo:shard.hi]
    aug = scores + np.stack([cost(c, shard.labels) for c in range(1, m + 1)],
                            axis=1)
    aug[:, y - 1] = -np.inf  # zeta maximizes over the other classes only
    zeta = aug.max(axis=1)
    rho = zeta - cost(y, shard.labels)
    beta = np.where(shard.labels == y, 1.0, -1.0)
    return BinaryReduction(rho=rho, beta=beta, class_index=y)


def update_scales_mlt(w_y: np.ndarray, reduction: BinaryReduction, shard: Shard,
                      kind: Algo, floor: float,
                      rng: RngStream | None = None) -> np.ndarray:
    resid = _clamped_abs(reduction.rho - shard.margins(w_y), floor)
    if kind is Algo.EM:
        return resid
    return _draw_scales(resid, rng, floor)


def local_stats_mlt(shard: Shard, reduction: BinaryReduction,
                    gamma: np.ndarray) -> PartialStats:
    mu_coef = reduction.rho / gamma + reduction.beta
    return PartialStats(mu=mu_stat(shard, mu_coef),
                        sigma_tri=sigma_tri_stat(shard, 1.0 / gamma),
                        count=shard.n)


def train_multiclass(data: Dataset, config: TrainConfig, cost=zero_one_cost,
                     with_timing: bool = False) -> tuple[Model, TrainTrace]:
    if config.task is not Task.MLT or config.solver is not Solver.LIN:
        raise ValueError("train_multiclass handles lin mlt only")
    if data.task is not Task.MLT:
        raise DataError("dataset task must be mlt")
    m = data.num_classes
    present = np.unique(data.labels.astype(np.int64))
    missing = sorted(set(range(1, m + 1)) - set(present.tolist()))
    if missing:
        raise DataError(f"classes with no training rows: {missing}")

    shards = partition(data, config.workers)
    mc = config.algo is Algo.MC
    contexts = [WorkerContext(
        rank=s.rank, shard=s, weights=np.zeros(data.dim),
        rng_gamma=RngStream(config.seed, s.rank, SCALE_GAMMA) if mc else None)
        for s in shards]
    rng_global = RngStream(config.seed, 0, GLOBAL_WEIGHTS) if mc else None

    state = ClassSweepState(weights=np.zeros((m, data.dim)),
                            scores=np.zeros((data.n, m)))
    trace = TrainTrace(timing=TimingTrace() if with_timing else None,
                       class_seconds=[])
    global_fn = lambda total: solve_from_total(config.lam, total, config.algo,
                                               rng_global)
    trace.objectives.append(objective_mlt(state.weights, data, config.lam,
                                          cost))
    avg = np.zeros((m, data.dim))
    n_avg = 0
    best = (np.inf, None)

    with WorkerPool(config.workers) as pool:
        for sweep in range(config.max_iters):
            sweep_t0 = time.perf_counter()
            per_class = []
            for y in range(1, m + 1):
                cls_t0 = time.perf_counter()
                w_y = state.weights[y - 1]

                def map_step(ctx: WorkerContext, y=y, w_y=w_y):
                    t0 = time.perf_counter()
                    red = compute_reduction(state, ctx.shard, y, cost)
                    gamma = update_scales_mlt(w_y, red, ctx.shard, config.algo,
                                              config.gamma_floor, ctx.rng_gamma)
                    ctx.state = AugmentedState(gamma=gamma, class_index=y)
                    t1 = time.perf_counter()
                    mu_coef = red.rho / gamma + red.beta
                    mu = mu_stat(ctx.shard, mu_coef)
                    t2 = time.perf_counter()
                    tri = sigma_tri_stat(ctx.shard, 1.0 / gamma)
                    t3 = time.perf_counter()
                    return (PartialStats(mu=mu, sigma_tri=tri, count=ctx.shard.n),
                            {"draw_gamma": t1 - t0, "mu_p": t2 - t1,
                             "sigma_p": t3 - t2})

                new_w = run_iteration(pool, contexts, map_step, global_fn,
                                      sweep * m + (y - 1), trace.timing)
                state.weights[y - 1] = new_w

                def refresh(ctx: WorkerContext, y=y, w=new_w):
                    state.scores[ctx.shard.lo:ctx.shard.hi, y - 1] = \
                        ctx.shard.margins(w)

                pool.map(refresh, contexts)
                per_class.append(time.perf_counter() - cls_t0)

            trace.class_seconds.append(per_class)
            obj = objective_mlt(state.weights, data, config.lam, cost)
            trace.objectives.append(obj)
            trace.iter_seconds.append(time.perf_counter() - sweep_t0)
            if mc:
                if sweep >= config.burn_in:
                    avg += state.weights
                    n_avg += 1
                    if obj < best[0]:
                        best = (obj, state.weights.copy())
            elif sweep >= 1 and converged_pair(trace.objectives[-2], obj,
                                               config.tol_scale, data.n):
                trace.stop_reason = "converged"
                break

    weights = state.weights
    if mc:
        weights = best[1] if config.mc_best_sample else avg / n_avg
        trace.samples_averaged = n_avg
    model = Model(task=Task.MLT, solver=Solver.LIN, lam=config.lam,
                  epsilon=config.epsilon, has_bias=data.has_bias,
                  dim=data.dim, weights=weights, num_classes=m)
    return model, trace
