"""Thread-pool map/reduce choreography shared by the trainers.

One iteration: every worker updates its local scales and computes partial
stats from its shard (map), the partials are folded pairwise in a fixed
left-to-right binary tree (reduce), the coordinator solves or samples the
global weights, and the result is copied back into every worker context
(broadcast). Workers are threads; shards only ever touch their own rows, and
BLAS releases the GIL during the heavy stat kernels.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .precision import triangle_size

# canonical per-iteration phases of the linear engine, in execution order;
# barrier_wait rows (per rank) account for time between a worker finishing
# its local phases and the slowest worker arriving at the barrier
LIN_PHASES = ("draw_gamma", "mu_p", "sigma_p", "reduce", "solve", "broadcast")
LOCAL_PHASES = ("draw_gamma", "mu_p", "sigma_p")


class WorkerError(RuntimeError):
    """A worker raised; carries which rank and which iteration."""

    def __init__(self, rank: int, iteration: int, cause: BaseException):
        super().__init__(f"worker {rank} failed at iteration {iteration}: {cause!r}")
        self.rank = rank
        self.iteration = iteration


@dataclasses.dataclass
class PartialStats:
    """One shard's contribution: mu_p = sum coef_d x_d, packed upper triangle
    of Sigma_p = sum coef'_d x_d x_d^T, and the row count."""

    mu: np.ndarray
    sigma_tri: np.ndarray
    count: int

    def __post_init__(self):
        dim = self.mu.shape[0]
        if self.sigma_tri.shape != (triangle_size(dim),):
            raise ValueError("sigma triangle length does not match mu dim")

    def combine(self, other: "PartialStats") -> "PartialStats":
        if self.mu.shape != other.mu.shape:
            raise ValueError("cannot combine stats of different dims")
        return PartialStats(mu=self.mu + other.mu,
                            sigma_tri=self.sigma_tri + other.sigma_tri,
                            count=self.count + other.count)


def tree_reduce(items: list, combine):
    """Fixed pairwise reduction: (0,1),(2,3),... each round, odd item carried
    over. Deterministic order regardless of thread arrival times."""
    items = list(items)
    if not items:
        raise ValueError("nothing to reduce")
    while len(items) > 1:
        merged = [combine(items[i], items[i + 1])
                  for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            merged.append(items[-1])
        items = merged
    return items[0]


def reduce_stats(partials: list[PartialStats]) -> PartialStats:
    return tree_reduce(partials, PartialStats.combine)


@dataclasses.dataclass
class TimingTrace:
    """Flat (iteration, phase, rank, seconds) rows, CSV-serializable."""

    rows: list = dataclasses.field(default_factory=list)

    def add(self, iteration: int, phase: str, rank: int, seconds: float):
        self.rows.append((iteration, phase, rank, float(seconds)))

    def write_csv(self, fh):
        fh.write("iter,phase,rank,seconds\n")
        for it, phase, rank, sec in self.rows:
            fh.write(f"{it},{phase},{rank},{sec:.9f}\n")

    def phase_seconds(self, phase: str) -> np.ndarray:
        """Per-iteration seconds for one phase, max over ranks."""
        per_iter: dict[int, float] = {}
        for it, ph, _rank, sec in self.rows:
            if ph == phase:
                per_iter[it] = max(per_iter.get(it, 0.0), sec)
        return np.array([per_iter[k] for k in sorted(per_iter)])

    def iterations(self) -> list[int]:
        return sorted({it for it, _, _, _ in self.rows})


def timing_report(trace: TimingTrace) -> dict[str, np.ndarray]:
    """Per-phase wall times: phase -> per-iteration seconds (max over ranks
    for the worker-local phases). Drives the scaling measurements."""
    phases: dict[str, np.ndarray] = {}
    names = {phase for _it, phase, _rank, _sec in trace.rows}
    order = [p for p in LIN_PHASES if p in names]
    order += sorted(p for p in names if p not in LIN_PHASES)
    for p in order:
        phases[p] = trace.phase_seconds(p)
    return phases


def format_timing_table(trace: TimingTrace) -> str:
    """Human-readable per-phase summary (iterations, total, median, max)."""
    report = timing_report(trace)
    lines = [f"{'phase':<14} {'iters':>6} {'total_s':>12} {'median_s':>12} {'max_s':>12}"]
    for p, v in report.items():
        lines.append(f"{p:<14} {v.size:>6} {v.sum():>12.6f} "
                     f"{np.median(v):>12.6f} {v.max():>12.6f}")
    return "\n".join(lines)


@dataclasses.dataclass
class WorkerContext:
    """Per-worker mutable state living for the whole training run. Nothing
    here is ever touched by another rank."""

    rank: int
    shard: object  # dataio.Shard
    weights: np.ndarray
    rng_gamma: object | None = None  # RngStream, mc only
    rng_omega: object | None = None  # RngStream, svr mc only
    state: object | None = None  # types.AugmentedState, set by the map step
    iterations_done: int = 0


@dataclasses.dataclass
class TrainTrace:
    """What a training run did, iteration by iteration."""

    objectives: list = dataclasses.field(default_factory=list)
    stop_reason: str = "max_iters"
    iter_seconds: list = dataclasses.field(default_factory=list)
    timing: TimingTrace | None = None
    gram_seconds: float | None = None
    class_seconds: list | None = None  # mlt: per sweep, one entry per class
    samples_averaged: int | None = None  # mc: how many draws the model averages

    @property
    def iterations(self) -> int:
        # objectives[0] is the value at the zero start, before any update
        return max(0, len(self.objectives) - 1)


class WorkerPool:
    """Thin ordered-map wrapper over a thread pool, one slot per worker."""

    def __init__(self, workers: int):
        self.workers = workers
        self._ex = ThreadPoolExecutor(max_workers=workers)

    def map(self, fn, items) -> list:
        futures = [self._ex.submit(fn, item) for item in items]
        return [f.result() for f in futures]

    def shutdown(self):
        self._ex.shutdown(wait=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()
        return False


def run_iteration(pool: WorkerPool, contexts: list[WorkerContext], map_step,
                  global_fn, iteration: int,
                  timing: TimingTrace | None = None) -> np.ndarray:
    """One synchronous map/reduce/solve/broadcast round.

    map_step(ctx) -> (PartialStats, {phase: seconds}); global_fn(total) -> w.
    Worker exceptions surface as WorkerError with rank and iteration. All
    workers must arrive at the barrier before any reduction happens; the
    iteration counters enforce that no context ran ahead.
    """

    def work(ctx: WorkerContext):
        try:
            stats, times = map_step(ctx)
        except Exception as exc:  # noqa: BLE001 - rewrapped with provenance
            raise WorkerError(ctx.rank, iteration, exc) from exc
        ctx.iterations_done += 1
        return stats, times, time.perf_counter()

    results = pool.map(work, contexts)
    t_barrier = time.perf_counter()
    for ctx in contexts:
        if ctx.iterations_done != iteration + 1:
            raise RuntimeError(
                f"lockstep violated: rank {ctx.rank} at "
                f"{ctx.iterations_done}, expected {iteration + 1}")

    partials = [r[0] for r in results]
    if timing is not None:
        for ctx, (_stats, times, t_done) in zip(contexts, results):
            for phase, sec in times.items():
                timing.add(iteration, phase, ctx.rank, sec)
            timing.add(iteration, "barrier_wait", ctx.rank, t_barrier - t_done)

    t0 = time.perf_counter()
    total = reduce_stats(partials)
    t1 = time.perf_counter()
    w = global_fn(total)
    t2 = time.perf_counter()
    for ctx in contexts:
        ctx.weights = w.copy()
    t3 = time.perf_counter()
    if timing is not None:
        timing.add(iteration, "reduce", 0, t1 - t0)
        timing.add(iteration, "solve", 0, t2 - t1)
        timing.add(iteration, "broadcast", 0, t3 - t2)
    return w
