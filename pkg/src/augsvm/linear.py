"""Linear-feature trainer for binary classification and regression.

The augmented model attaches one latent scale per datum (two for
regression). Conditioned on the weights, each inverse scale is inverse
Gaussian; conditioned on the scales, the weights are Gaussian with a
precision that is a shard-separable sum, which is what makes the map/reduce
split exact rather than approximate.

EM replaces draws with conditional modes/means: gamma_d = |residual_d| and
the weight update is the Gaussian mean. One EM iteration never increases the
objective. The MC variant runs the same choreography with inverse-Gaussian
and Gaussian draws and never stops early; the returned model averages the
post-burn-in weight samples (or keeps the best-objective sample when
configured).
"""

from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp

from .dataio import Shard, partition
from .errors import DataError, NumericError
from .objectives import objective_cls, objective_svr
from .precision import (PrecisionSystem, add_diagonal, pack_upper,
                        draw_gaussian_from_precision, solve_mean,
                        triangle_size)
from .rng import (GLOBAL_WEIGHTS, SCALE_GAMMA, SCALE_OMEGA, RngStream,
                  draw_inverse_gaussian)
from .runtime import (PartialStats, TimingTrace, TrainTrace, WorkerContext,
                      WorkerPool, reduce_stats, run_iteration)
from .types import (Algo, AugmentedState, Dataset, Model, Solver, Task,
                    TrainConfig)


# ---------------------------------------------------------------------------
# scale updates (the per-datum latent part of the E step / Gibbs sweep)

def _clamped_abs(values: np.ndarray, floor: float) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NumericError("non-finite residual in scale update")
    return np.maximum(floor, np.abs(values))


def _draw_scales(resid_abs_clamped: np.ndarray, rng: RngStream,
                 floor: float) -> np.ndarray:
    """Gibbs draw: 1/gamma_d ~ IG(1/|resid_d|, 1); floor keeps 1/gamma bounded."""
    inv = draw_inverse_gaussian(rng, 1.0 / resid_abs_clamped, shape=1.0)
    return np.maximum(floor, 1.0 / inv)


def update_scales_cls(w: np.ndarray, shard: Shard, kind: Algo, floor: float,
                      rng: RngStream | None = None) -> np.ndarray:
    resid = _clamped_abs(1.0 - shard.labels * shard.margins(w), floor)
    if kind is Algo.EM:
        return resid
    return _draw_scales(resid, rng, floor)


def update_scales_svr(w: np.ndarray, shard: Shard, epsilon: float, kind: Algo,
                      floor: float, rng_gamma: RngStream | None = None,
                      rng_omega: RngStream | None = None):
    """Two scales per datum, one per side of the epsilon tube."""
    fit = shard.margins(w)
    below = _clamped_abs(shard.labels - fit - epsilon, floor)
    above = _clamped_abs(shard.labels - fit + epsilon, floor)
    if kind is Algo.EM:
        return below, above
    return _draw_scales(below, rng_gamma, floor), _draw_scales(above, rng_omega, floor)


# ---------------------------------------------------------------------------
# per-shard sufficient statistics

def stat_coefs_cls(labels: np.ndarray, gamma: np.ndarray):
    inv = 1.0 / gamma
    return labels * (1.0 + inv), inv


def stat_coefs_svr(labels: np.ndarray, gamma: np.ndarray, omega: np.ndarray,
                   epsilon: float):
    return ((labels - epsilon) / gamma + (labels + epsilon) / omega,
            1.0 / gamma + 1.0 / omega)


def mu_stat(shard: Shard, coef: np.ndarray) -> np.ndarray:
    if shard.dense is not None:
        return shard.dense.T @ coef
    return shard.matrix.T @ coef


def sigma_tri_stat(shard: Shard, coef: np.ndarray) -> np.ndarray:
    """Packed upper triangle of X^T diag(coef) X for the shard's rows.

    Scales rows by coef and multiplies, rather than a rank-k update on
    sqrt(coef)-scaled rows: each entry is then a single dot product of
    once-rounded terms, so hand-checkable cases come out exact.
    """
    dim = shard.matrix.shape[1]
    if shard.n == 0:
        return np.zeros(triangle_size(dim))
    if shard.dense is not None:
        return pack_upper(shard.dense.T @ (shard.dense * coef[:, None]))
    full = (shard.matrix.T @ sp.diags(coef) @ shard.matrix).toarray()
    return pack_upper(full)


def local_stats_cls(shard: Shard, gamma: np.ndarray) -> PartialStats:
    mu_coef, sig_coef = stat_coefs_cls(shard.labels, gamma)
    return PartialStats(mu=mu_stat(shard, mu_coef),
                        sigma_tri=sigma_tri_stat(shard, sig_coef),
                        count=shard.n)


def local_stats_svr(shard: Shard, gamma: np.ndarray, omega: np.ndarray,
                    epsilon: float) -> PartialStats:
    mu_coef, sig_coef = stat_coefs_svr(shard.labels, gamma, omega, epsilon)
    return PartialStats(mu=mu_stat(shard, mu_coef),
                        sigma_tri=sigma_tri_stat(shard, sig_coef),
                        count=shard.n)


# ---------------------------------------------------------------------------
# coordinator step

def solve_from_total(lam: float, total: PartialStats, kind: Algo,
                     rng: RngStream | None = None) -> np.ndarray:
    dim = total.mu.shape[0]
    system = PrecisionSystem(tri=add_diagonal(total.sigma_tri, dim, lam),
                             b=total.mu, dim=dim)
    if kind is Algo.EM:
        return solve_mean(system)
    return draw_gaussian_from_precision(system, rng)


def global_update(lam: float, partials: list[PartialStats], kind: Algo,
                  rng: RngStream | None = None) -> np.ndarray:
    """Fold the shard stats (ascending rank, fixed tree) and produce the next
    weight vector: conditional mean for EM, a posterior draw for MC."""
    return solve_from_total(lam, reduce_stats(partials), kind, rng)


# ---------------------------------------------------------------------------
# stopping rule

def converged_pair(prev: float, cur: float, tol_scale: float, n: int) -> bool:
    """EM stops when the objective moved by at most tol_scale * n."""
    return abs(cur - prev) <= tol_scale * n


def first_stop_index(objectives, tol_scale: float, n: int) -> int | None:
    """First iteration where the rule fires on a full trace (None if never).

    objectives[0] is the value at the zero start; it never arms the rule,
    so the earliest possible answer is 2 (two completed iterations).
    """
    for t in range(2, len(objectives)):
        if converged_pair(objectives[t - 1], objectives[t], tol_scale, n):
            return t
    return None


# ---------------------------------------------------------------------------
# training loop

def _make_map_step(config: TrainConfig):
    task, kind = config.task, config.algo
    eps, floor = config.epsilon, config.gamma_floor

    def map_step(ctx: WorkerContext):
        t0 = time.perf_counter()
        if task is Task.CLS:
            gamma = update_scales_cls(ctx.weights, ctx.shard, kind, floor,
                                      ctx.rng_gamma)
            ctx.state = AugmentedState(gamma=gamma)
            t1 = time.perf_counter()
            mu_coef, sig_coef = stat_coefs_cls(ctx.shard.labels, gamma)
        else:
            gamma, omega = update_scales_svr(ctx.weights, ctx.shard, eps, kind,
                                             floor, ctx.rng_gamma, ctx.rng_omega)
            ctx.state = AugmentedState(gamma=gamma, omega_svr=omega)
            t1 = time.perf_counter()
            mu_coef, sig_coef = stat_coefs_svr(ctx.shard.labels, gamma, omega, eps)
        mu = mu_stat(ctx.shard, mu_coef)
        t2 = time.perf_counter()
        tri = sigma_tri_stat(ctx.shard, sig_coef)
        t3 = time.perf_counter()
        times = {"draw_gamma": t1 - t0, "mu_p": t2 - t1, "sigma_p": t3 - t2}
        return PartialStats(mu=mu, sigma_tri=tri, count=ctx.shard.n), times

    return map_step


def train_linear(data: Dataset, config: TrainConfig,
                 with_timing: bool = False) -> tuple[Model, TrainTrace]:
    if config.solver is not Solver.LIN or config.task is Task.MLT:
        raise ValueError("train_linear handles lin cls/svr only")
    if data.task is not config.task:
        raise DataError(f"dataset task {data.task.value} != config {config.task.value}")

    shards = partition(data, config.workers)
    mc = config.algo is Algo.MC
    contexts = []
    for shard in shards:
        contexts.append(WorkerContext(
            rank=shard.rank, shard=shard, weights=np.zeros(data.dim),
            rng_gamma=RngStream(config.seed, shard.rank, SCALE_GAMMA) if mc else None,
            rng_omega=(RngStream(config.seed, shard.rank, SCALE_OMEGA)
                       if mc and config.task is Task.SVR else None)))
    rng_global = RngStream(config.seed, 0, GLOBAL_WEIGHTS) if mc else None

    def objective(w):
        if config.task is Task.CLS:
            return objective_cls(w, data, config.lam)
        return objective_svr(w, data, config.lam, config.epsilon)

    trace = TrainTrace(timing=TimingTrace() if with_timing else None)
    map_step = _make_map_step(config)
    global_fn = lambda total: solve_from_total(config.lam, total, config.algo,
                                               rng_global)

    w = np.zeros(data.dim)
    trace.objectives.append(objective(w))
    avg = np.zeros(data.dim)
    n_avg = 0
    best = (np.inf, None)
    with WorkerPool(config.workers) as pool:
        for it in range(config.max_iters):
            t0 = time.perf_counter()
            w = run_iteration(pool, contexts, map_step, global_fn, it,
                              trace.timing)
            obj = objective(w)
            trace.objectives.append(obj)
            trace.iter_seconds.append(time.perf_counter() - t0)
            if mc:
                if it >= config.burn_in:
                    avg += w
                    n_avg += 1
                    if obj < best[0]:
                        best = (obj, w)
            elif it >= 1 and converged_pair(trace.objectives[-2], obj,
                                            config.tol_scale, data.n):
                trace.stop_reason = "converged"
                break

    if mc:
        w = best[1] if config.mc_best_sample else avg / n_avg
        trace.samples_averaged = n_avg
    model = Model(task=config.task, solver=Solver.LIN, lam=config.lam,
                  epsilon=config.epsilon, has_bias=data.has_bias,
                  dim=data.dim, weights=w)
    return model, trace
