"""Monte Carlo plumbing shared by the estimators.

Randomness is keyed, never sequential: every unit of work draws from
``SeedSequence(seed, spawn_key=key)`` where ``key`` names the estimator,
the stratum and the chunk.  Chunks have a fixed size independent of the
thread count and are reduced in key order, so results are bit-identical
for any ``threads``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

CHUNK_SIZE = 8192


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    stderr: float
    n_samples: int
    seed: int
    truncation_max_jumps: int = 0
    truncated_fraction: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)

    def z_score(self, other: "EstimatorResult | float", other_err: float = 0.0) -> float:
        """``|mean - other| / combined stderr``."""
        if isinstance(other, EstimatorResult):
            other, other_err = other.mean, other.stderr
        sigma = math.hypot(self.stderr, other_err)
        diff = abs(self.mean - other)
        if sigma == 0:
            return 0.0 if diff == 0 else math.inf
        return diff / sigma


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def chunk_sizes(total: int, size: int = CHUNK_SIZE) -> list[int]:
    full, rest = divmod(int(total), size)
    return [size] * full + ([rest] if rest else [])


def run_ordered(fn: Callable, jobs: Sequence, threads: int = 1) -> list:
    """``[fn(job) for job in jobs]``, optionally on a thread pool; order preserved."""
    if threads <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        return 0.0, 0.0
    mean = float(np.mean(values))
    if n < 2:
        return mean, math.inf
    return mean, float(np.std(values, ddof=1) / math.sqrt(n))


def combine_strata(coeffs: Sequence[float], strata: Sequence[np.ndarray]) -> tuple[float, float, int]:
    """Stratified estimate ``sum_s c_s mean_s`` with its standard error."""
    mean, var, count = 0.0, 0.0, 0
    for c, vals in zip(coeffs, strata):
        m, se = mean_and_stderr(vals)
        mean += c * m
        var += (c * se) ** 2 if np.isfinite(se) else 0.0
        count += len(vals)
    return mean, math.sqrt(var), count


def allocate(weights: Sequence[float], total: int, minimum: int = 64) -> list[int]:
    """Split ``total`` samples proportionally to ``weights`` with a floor."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    return [max(minimum, int(round(total * wi))) for wi in w]
