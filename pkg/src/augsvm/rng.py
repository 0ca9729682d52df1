"""Deterministic random streams and the inverse-Gaussian sampler.

Each (seed, rank, purpose) triple names an independent counter-based stream
(Philox keyed by a blake2b digest of the triple). Workers never share a
stream, so draws are reproducible for a fixed seed and worker count no
matter how threads interleave.
"""

from __future__ import annotations

import dataclasses
import hashlib
import struct

import numpy as np

MASK64 = (1 << 64) - 1

# stream purposes used by the trainers
SCALE_GAMMA = "scale-gamma"
SCALE_OMEGA = "scale-omega"
GLOBAL_WEIGHTS = "global-weights"


def stream_key(seed: int, rank: int, purpose: str) -> np.ndarray:
    h = hashlib.blake2b(digest_size=16)
    h.update(struct.pack("<Q", seed & MASK64))
    h.update(struct.pack("<q", rank))
    h.update(purpose.encode("utf-8"))
    return np.frombuffer(h.digest(), dtype=np.uint64).copy()


@dataclasses.dataclass
class RngStream:
    seed: int
    rank: int
    purpose: str

    def __post_init__(self):
        bitgen = np.random.Philox(key=stream_key(self.seed, self.rank, self.purpose))
        self.gen = np.random.Generator(bitgen)


def _generator(rng) -> np.random.Generator:
    return rng.gen if isinstance(rng, RngStream) else rng


def draw_inverse_gaussian(rng, mean, shape: float = 1.0, size=None):
    """IG(mean, shape) draws via the Michael/Schucany/Haas method.

    One chi-square variate gives the two roots of the defining quadratic;
    the smaller root x1 is emitted with probability mean/(mean+x1), else
    mean^2/x1. The larger root is computed first (no cancellation) and x1
    recovered as mean^2/x2, so outputs are strictly positive even for
    extreme variates.
    """
    g = _generator(rng)
    m = np.asarray(mean, dtype=np.float64)
    scalar = m.ndim == 0 and size is None
    if size is not None:
        m = np.broadcast_to(m, size)
    if not np.all(m > 0) or not np.all(np.isfinite(m)):
        raise ValueError("inverse-Gaussian mean must be positive finite")
    if not (shape > 0 and np.isfinite(shape)):
        raise ValueError("inverse-Gaussian shape must be positive finite")
    y = g.standard_normal(m.shape) ** 2
    my = m * y
    x2 = m * (1.0 + (my + np.sqrt(my * (my + 4.0 * shape))) / (2.0 * shape))
    x1 = m * (m / x2)
    u = g.uniform(size=m.shape)
    out = np.where(u <= m / (m + x1), x1, x2)
    return float(out) if scalar else out
