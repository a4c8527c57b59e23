"""Probabilistic representation over Poisson-interpolated paths.

With a rate-1 Poisson process ``N`` (jump times ``tau_i``) and i.i.d.
directions ``U_i`` of density ``G(1, .)``, the path ``X`` moves linearly
with velocity ``U_{i+1}`` between jumps, and

    v(t, x) = e^t E[ prod (tau_i - tau_{i-1}) prod W(x + X_{tau_i}) ].

Given ``N_t = n`` the jump times are uniform order statistics on
``[0, t]``; batch samplers use that, the single-path sampler uses
exponential gaps.  Moments over the noise replace ``prod W`` by the
Isserlis sum of the covariance matrix at the jump positions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .combinatorics import isserlis_batch
from .montecarlo import (
    EstimatorResult,
    allocate,
    chunk_sizes,
    combine_strata,
    mean_and_stderr,
    run_ordered,
    substream,
)
from .noise_model import InfiniteVarianceError, NoiseSample, SpectralMeasure, as_points, noise_eval, pair_covariance
from .wave_kernel import sample_unit_bump

log = logging.getLogger(__name__)

# estimator tags in the substream key, so estimators sharing a seed stay independent
_TAG_REALIZATION, _TAG_MEAN, _TAG_SECOND, _TAG_TERMS, _TAG_SIMPLEX = 1, 2, 3, 4, 5


@dataclass(frozen=True, eq=False)
class JumpPath:
    t_horizon: float
    jump_times: np.ndarray  # (N,)
    directions: np.ndarray  # (N, d)
    positions: np.ndarray  # (N, d), X at the jump times; X_0 = 0 is implicit

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.jump_times, prepend=0.0)

    @property
    def weight_factor(self) -> float:
        return float(np.prod(self.gaps))

    def position(self, s: float) -> np.ndarray:
        """``X_s`` by linear interpolation, for ``s`` up to the last jump."""
        taus = np.concatenate([[0.0], self.jump_times])
        pts = np.concatenate([np.zeros((1, self.directions.shape[1])), self.positions])
        i = int(np.searchsorted(taus, s, side="right")) - 1
        if i >= self.n_jumps:
            raise ValueError("position after the last jump needs the next direction")
        return pts[i] + (s - taus[i]) * self.directions[i]


def sample_jump_path(t: float, dim: int, rng: np.random.Generator) -> JumpPath:
    """One path on ``(0, t]`` from exponential inter-arrival gaps."""
    if t <= 0:
        raise ValueError("t must be positive")
    times = []
    s = rng.exponential()
    while s <= t:
        times.append(s)
        s += rng.exponential()
    taus = np.array(times)
    dirs = sample_unit_bump(dim, rng, len(taus)).reshape(len(taus), dim)
    gaps = np.diff(taus, prepend=0.0)
    pos = np.cumsum(gaps[:, None] * dirs, axis=0)
    return JumpPath(float(t), taus, dirs, pos)


def sample_conditional_paths(t: float, n: int, dim: int, size: int, rng: np.random.Generator):
    """``size`` paths conditioned on ``N_t = n``: returns gaps ``(size, n)`` and positions ``(size, n, d)``."""
    taus = np.sort(rng.uniform(0.0, t, (size, n)), axis=1)
    gaps = np.diff(taus, axis=1, prepend=0.0)
    dirs = sample_unit_bump(dim, rng, (size, n)).reshape(size, n, dim)
    pos = np.cumsum(gaps[..., None] * dirs, axis=1)
    return gaps, pos


def poisson_stratum_coefficient(t: float, n: int) -> float:
    """``e^t P(N_t = n) = t^n / n!``."""
    return math.exp(n * math.log(t) - math.lgamma(n + 1)) if n else 1.0


def _stratum_weights(t: float, strata) -> list[float]:
    # a-priori weight e^{-t} t^n/n! * t^n
    return [math.exp(-t) * poisson_stratum_coefficient(t, n) * t**n for n in strata]


def _plain_chunks(seed: int, tag: int, t: float, n_paths: int, max_jumps: int, threads: int, score: Callable):
    """Unstratified sampling: ``N ~ Poisson(t)``, over-long paths scored 0.

    ``score(gaps, pos)`` maps a batch of ``n``-jump paths to per-path
    values without the ``e^t`` factor.
    """

    def job(args):
        c, size = args
        rng = substream(seed, tag, 0, c)
        counts = rng.poisson(t, size)
        out = np.zeros(size)
        for n in np.unique(counts):
            if n > max_jumps:
                continue
            sel = counts == n
            if n == 0:
                out[sel] = score(None, None, 0)
                continue
            gaps, pos = sample_conditional_paths(t, int(n), score.dim, int(sel.sum()), rng)
            out[sel] = score(gaps, pos, int(n))
        return out * math.exp(t), int(np.sum(counts > max_jumps))

    results = run_ordered(job, list(enumerate(chunk_sizes(n_paths))), threads)
    values = np.concatenate([r[0] for r in results]) if results else np.zeros(0)
    truncated = sum(r[1] for r in results)
    return values, truncated


def _stratified(seed: int, tag: int, t: float, n_paths: int, max_jumps: int, threads: int, score: Callable, parity=None):
    """Stratify on ``N_t = n`` for ``n <= max_jumps``; the ``n = 0`` stratum is exact."""
    strata = [n for n in range(1, max_jumps + 1) if parity is None or n % 2 == parity]
    coeffs = [poisson_stratum_coefficient(t, n) for n in strata]
    sizes = allocate(_stratum_weights(t, strata), n_paths) if strata else []
    samples = []
    for n, size in zip(strata, sizes):

        def job(args, n=n):
            c, m = args
            rng = substream(seed, tag, 1 + n, c)
            gaps, pos = sample_conditional_paths(t, n, score.dim, m, rng)
            return score(gaps, pos, n)

        parts = run_ordered(job, list(enumerate(chunk_sizes(size))), threads)
        samples.append(np.concatenate(parts))
    mean, stderr, count = combine_strata(coeffs, samples)
    mean += float(score(None, None, 0)) if parity in (None, 0) else 0.0
    tail = float(stats.poisson.sf(max_jumps, t))
    return mean, stderr, count, tail


class _RealizationScore:
    def __init__(self, noise: NoiseSample, x):
        self.noise = noise
        self.dim = noise.dim
        self.x = as_points(x, self.dim).reshape(self.dim)

    def __call__(self, gaps, pos, n):
        if n == 0:
            return 1.0
        w = noise_eval(self.noise, self.x + pos)  # (P, n)
        return np.prod(gaps, axis=1) * np.prod(w, axis=1)


class _MeanScore:
    def __init__(self, measure: SpectralMeasure, eps: float):
        _check_covariance(measure, eps)
        self.measure, self.eps, self.dim = measure, eps, measure.dim

    def __call__(self, gaps, pos, n):
        if n == 0:
            return 1.0
        if n % 2:
            return np.zeros(len(gaps))
        diffs = pos[:, :, None, :] - pos[:, None, :, :]
        cov = pair_covariance(self.measure, self.eps, diffs)
        return np.prod(gaps, axis=1) * isserlis_batch(cov)


def _check_covariance(measure, eps):
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0 and math.isinf(getattr(measure, "total_mass", math.inf)):
        raise InfiniteVarianceError("pairing covariance diverges at coincident points: eps = 0 needs finite mu")


def fk_realization(
    noise: NoiseSample,
    t: float,
    x,
    n_paths: int,
    max_jumps: int = 16,
    seed: int = 0,
    *,
    stratified: bool = False,
    threads: int = 1,
) -> EstimatorResult:
    """Estimate ``v(t, x)`` for one noise realization."""
    if max_jumps < 1:
        raise ValueError("max_jumps must be >= 1")
    score = _RealizationScore(noise, x)
    if stratified:
        mean, se, count, tail = _stratified(seed, _TAG_REALIZATION, t, n_paths, max_jumps, threads, score)
        return EstimatorResult(mean, se, count, seed, max_jumps, tail)
    values, truncated = _plain_chunks(seed, _TAG_REALIZATION, t, n_paths, max_jumps, threads, score)
    mean, se = mean_and_stderr(values)
    return EstimatorResult(mean, se, n_paths, seed, max_jumps, truncated / n_paths)


def fk_chaos_terms(noise: NoiseSample, t: float, x, n_max: int, n_paths: int, seed: int = 0, threads: int = 1):
    """Per-jump-count contributions ``(t^n/n!) E[prod gaps prod W | N_t = n]``.

    The ``n``-th entry estimates the chaos increment ``H_n(t, x)`` of the
    same realization; entry 0 is exactly 1.
    """
    score = _RealizationScore(noise, x)
    out = [EstimatorResult(1.0, 0.0, 0, seed)]
    for n in range(1, n_max + 1):

        def job(args, n=n):
            c, m = args
            rng = substream(seed, _TAG_TERMS, n, c)
            gaps, pos = sample_conditional_paths(t, n, score.dim, m, rng)
            return score(gaps, pos, n)

        vals = np.concatenate(run_ordered(job, list(enumerate(chunk_sizes(n_paths))), threads))
        m, se = mean_and_stderr(vals)
        c = poisson_stratum_coefficient(t, n)
        out.append(EstimatorResult(c * m, c * se, n_paths, seed))
    return out


def fk_mean(
    measure: SpectralMeasure,
    eps: float,
    t: float,
    x,
    n_paths: int,
    max_jumps: int = 16,
    seed: int = 0,
    *,
    stratified: bool = False,
    threads: int = 1,
) -> EstimatorResult:
    """Estimate ``E[v(t, x)]`` through Isserlis sums along each path.

    Stationarity makes the result independent of ``x``; it is accepted for
    interface symmetry.
    """
    score = _MeanScore(measure, eps)
    if stratified:
        mean, se, count, tail = _stratified(seed, _TAG_MEAN, t, n_paths, max_jumps, threads, score, parity=0)
        return EstimatorResult(mean, se, count, seed, max_jumps, tail)
    values, truncated = _plain_chunks(seed, _TAG_MEAN, t, n_paths, max_jumps, threads, score)
    mean, se = mean_and_stderr(values)
    return EstimatorResult(mean, se, n_paths, seed, max_jumps, truncated / n_paths)


def fk_second_moment(
    measure: SpectralMeasure,
    eps: float,
    t: float,
    x,
    n_paths: int,
    max_jumps: int = 16,
    seed: int = 0,
    *,
    threads: int = 1,
) -> EstimatorResult:
    """Estimate ``E[v(t, x)^2]`` from pairs of independent paths.

    Both paths start at ``x``; the joint covariance over their ``N + N'``
    jump positions feeds one Isserlis sum.
    """
    _check_covariance(measure, eps)
    dim = measure.dim

    def job(args):
        c, size = args
        rng = substream(seed, _TAG_SECOND, 0, c)
        n1 = rng.poisson(t, size)
        n2 = rng.poisson(t, size)
        out = np.zeros(size)
        over = (n1 > max_jumps) | (n2 > max_jumps)
        keep = ~over & ((n1 + n2) % 2 == 0)
        for a, b in sorted(set(zip(n1[keep].tolist(), n2[keep].tolist()))):
            sel = keep & (n1 == a) & (n2 == b)
            m = int(sel.sum())
            if a + b == 0:
                out[sel] = 1.0
                continue
            g1, p1 = sample_conditional_paths(t, a, dim, m, rng)
            g2, p2 = sample_conditional_paths(t, b, dim, m, rng)
            pos = np.concatenate([p1, p2], axis=1)
            diffs = pos[:, :, None, :] - pos[:, None, :, :]
            cov = pair_covariance(measure, eps, diffs)
            out[sel] = np.prod(g1, axis=1) * np.prod(g2, axis=1) * isserlis_batch(cov)
        return out * math.exp(2 * t), int(over.sum())

    results = run_ordered(job, list(enumerate(chunk_sizes(n_paths))), threads)
    values = np.concatenate([r[0] for r in results])
    mean, se = mean_and_stderr(values)
    return EstimatorResult(mean, se, n_paths, seed, max_jumps, sum(r[1] for r in results) / n_paths)


def poisson_simplex_estimate(t: float, n: int, n_paths: int, seed: int = 0, threads: int = 1) -> EstimatorResult:
    """``e^t E[prod gaps 1{N_t = n}]`` from unconditioned Poisson paths; exact value ``t^{2n}/(2n)!``."""

    def job(args):
        c, size = args
        rng = substream(seed, _TAG_SIMPLEX, n, c)
        # arrival times from exponential gaps, one row per path
        k = max(n + 1, int(t + 8 * math.sqrt(t) + 16))
        arrivals = np.cumsum(rng.exponential(size=(size, k)), axis=1)
        counts = np.sum(arrivals <= t, axis=1)
        hit = counts == n
        gaps = np.diff(arrivals[:, :n], axis=1, prepend=0.0)
        return np.where(hit, np.prod(gaps, axis=1), 0.0) * math.exp(t)

    vals = np.concatenate(run_ordered(job, list(enumerate(chunk_sizes(n_paths))), threads))
    m, se = mean_and_stderr(vals)
    return EstimatorResult(m, se, n_paths, seed)
