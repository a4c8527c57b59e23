"""Picard iteration for the mollified wave equation on a fixed noise realization.

``v_{n+1}(t, x) = 1 + int_0^t int G(t - s, x - y) v_n(s, y) W(y) dy ds``.

Two quadratures are provided for d = 1:

* ``"cone"``: trapezoid in time; in space the cone integral is the exact
  integral of the piecewise-linear interpolant, read off a running
  primitive (fractional boundary cells included).  Works for any
  ``n_t``, ``n_x``.
* ``"diamond"``: with ``dt = dx = h``, ``w = G * F`` satisfies
  ``w(t+h, x) + w(t-h, x) - w(t, x+h) - w(t, x-h) = 1/2 int_diamond F``,
  which is marched in O(1) per cell.  Needs ``n_x = 2 n_t + 1``; vectorized
  over many realizations at once.

d = 2 uses the cone scheme with polar coordinates around ``x`` and the
``rho = a sin(theta)`` substitution (Gauss-Legendre in theta, periodic
trapezoid in the angle, bilinear interpolation).

Finite propagation speed makes ``[x_c - t_max, x_c + t_max]`` sufficient
for ``v(t_max, x_c)``; values outside the backward cone of that point use
clamped data and are not accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .montecarlo import EstimatorResult, mean_and_stderr, run_ordered
from .noise_model import NoiseSample, SpectralMeasure, noise_eval, sample_noise

DEFAULT_ITERS = 12
_REALIZATION_BATCH = 256


class NumericalError(ArithmeticError):
    """A non-finite value appeared; ``location`` is ``(iterate, t, x)``."""

    def __init__(self, message: str, location=None):
        super().__init__(message)
        self.location = location


@dataclass(frozen=True)
class GridSpec:
    t_max: float
    x_center: tuple
    n_t: int
    n_x: int
    dim: int = 1

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"only d = 1, 2 are supported, got {self.dim}")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.n_t < 1 or self.n_x < 2:
            raise ValueError("need n_t >= 1 and n_x >= 2")
        xc = tuple(float(v) for v in np.atleast_1d(self.x_center))
        if len(xc) != self.dim:
            raise ValueError(f"x_center must have {self.dim} coordinates")
        object.__setattr__(self, "x_center", xc)

    @classmethod
    def matched(cls, t_max: float, x_center, n_t: int, dim: int = 1) -> "GridSpec":
        """The grid with ``dx = dt``, as the diamond scheme needs."""
        return cls(t_max, x_center, n_t, 2 * n_t + 1, dim)

    @property
    def dt(self) -> float:
        return self.t_max / self.n_t

    @property
    def dx(self) -> float:
        return 2 * self.t_max / (self.n_x - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_t + 1)

    def axis(self, k: int = 0) -> np.ndarray:
        c = self.x_center[k]
        return np.linspace(c - self.t_max, c + self.t_max, self.n_x)

    def points(self) -> np.ndarray:
        """Spatial nodes, shape ``(n_x, 1)`` or ``(n_x, n_x, 2)``."""
        if self.dim == 1:
            return self.axis(0)[:, None]
        X, Y = np.meshgrid(self.axis(0), self.axis(1), indexing="ij")
        return np.stack([X, Y], axis=-1)

    @property
    def is_matched(self) -> bool:
        return self.n_x == 2 * self.n_t + 1

    def refined(self) -> "GridSpec":
        return replace(self, n_t=2 * self.n_t, n_x=2 * self.n_x - 1)


@dataclass(frozen=True, eq=False)
class FieldGrid:
    values: np.ndarray  # (n_t + 1, n_x) or (n_t + 1, n_x, n_x)
    spec: GridSpec

    def at_center(self, time_index: int = -1) -> float:
        """Value at ``x_center``; exact node when ``n_x`` is odd, else linear interpolation."""
        v = self.values[time_index]
        for _ in range(self.spec.dim):
            m = v.shape[0]
            v = v[m // 2] if m % 2 else 0.5 * (v[m // 2 - 1] + v[m // 2])
        return float(v)

    def rows(self):
        """``(t, x..., value)`` tuples in time-major order."""
        pts = self.spec.points().reshape(-1, self.spec.dim)
        for t, slab in zip(self.spec.times, self.values):
            for p, val in zip(pts, slab.reshape(-1)):
                yield (float(t), *map(float, p), float(val))


# ---------------------------------------------------------------------------
# d = 1 kernels


def _cone_1d(F: np.ndarray, spec: GridSpec) -> np.ndarray:
    """``(G * F)(t_i, x)`` on the grid for ``F`` of shape ``(n_t + 1, n_x)``."""
    h, x = spec.dx, spec.axis(0)
    n_x = spec.n_x
    # running primitive of the piecewise-linear interpolant
    P = np.zeros_like(F)
    P[:, 1:] = np.cumsum(0.5 * h * (F[:, 1:] + F[:, :-1]), axis=1)
    slope = np.diff(F, axis=1) / h

    def primitive(j, y):
        # j: (J, 1) time indices, y: (J, n_x) query points
        k = np.clip(np.floor((y - x[0]) / h).astype(int), 0, n_x - 2)
        u = np.clip(y - x[k], 0.0, h)
        return P[j, k] + F[j, k] * u + 0.5 * slope[j, k] * u * u

    out = np.zeros_like(F)
    times = spec.times
    for i in range(1, spec.n_t + 1):
        j = np.arange(i + 1)[:, None]
        a = (times[i] - times[: i + 1])[:, None]
        inner = 0.5 * (primitive(j, x + a) - primitive(j, x - a))
        w = np.full(i + 1, spec.dt)
        w[0] = w[-1] = 0.5 * spec.dt
        out[i] = w @ inner
    return out


def _diamond_1d(F: np.ndarray, spec: GridSpec) -> np.ndarray:
    """``(G * F)`` by d'Alembert marching; ``F`` has shape ``(n_t + 1, ..., n_x)``."""
    if not spec.is_matched:
        raise ValueError("the diamond scheme needs n_x = 2 n_t + 1 (dx = dt)")
    h2 = spec.dt**2
    out = np.zeros_like(F)
    # first step: int_0^h (h - s) F(s, x) ds with F linear in s
    out[1] = h2 * (F[0] / 3 + F[1] / 6)
    for i in range(1, spec.n_t):
        w, nxt = out[i], out[i + 1]
        np.multiply(F[i], h2, out=nxt)
        nxt -= out[i - 1]
        nxt[..., 1:] += w[..., :-1]
        nxt[..., :-1] += w[..., 1:]
        # edge replication outside the domain
        nxt[..., 0] += w[..., 0]
        nxt[..., -1] += w[..., -1]
    return out


# ---------------------------------------------------------------------------
# d = 2 kernel


def _bilinear(field: np.ndarray, x0: float, y0: float, h: float, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    n = field.shape[0]
    fx = np.clip((px - x0) / h, 0.0, n - 1.0)
    fy = np.clip((py - y0) / h, 0.0, n - 1.0)
    i = np.minimum(fx.astype(int), n - 2)
    j = np.minimum(fy.astype(int), n - 2)
    u, v = fx - i, fy - j
    return (
        field[i, j] * (1 - u) * (1 - v)
        + field[i + 1, j] * u * (1 - v)
        + field[i, j + 1] * (1 - u) * v
        + field[i + 1, j + 1] * u * v
    )


def _cone_2d(F: np.ndarray, spec: GridSpec, n_theta: int = 12, n_phi: int = 24) -> np.ndarray:
    gx, gy = spec.axis(0), spec.axis(1)
    h = spec.dx
    theta, wt = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.25 * math.pi * (theta + 1)
    wt = 0.25 * math.pi * wt
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    times = spec.times
    out = np.zeros_like(F)
    for i in range(1, spec.n_t + 1):
        acc = np.zeros_like(X)
        for j in range(i):
            a = times[i] - times[j]
            rho = a * np.sin(theta)
            # G(a, rho) rho drho dphi = a sin(theta) / (2 pi) dtheta dphi
            dx_ = rho[:, None] * np.cos(phi)[None, :]
            dy_ = rho[:, None] * np.sin(phi)[None, :]
            vals = _bilinear(F[j], gx[0], gy[0], h, X[..., None, None] + dx_, Y[..., None, None] + dy_)
            inner = np.einsum("...qp,q->...", vals, wt * rho) / n_phi
            wj = 0.5 * spec.dt if j == 0 else spec.dt
            acc += wj * inner
        out[i] = acc
    return out


# ---------------------------------------------------------------------------
# public API


def noise_on_grid(noise: NoiseSample, spec: GridSpec) -> np.ndarray:
    if noise.dim != spec.dim:
        raise ValueError("noise and grid dimensions differ")
    return noise_eval(noise, spec.points())


def _convolve(F: np.ndarray, spec: GridSpec, scheme: str) -> np.ndarray:
    if spec.dim == 2:
        if scheme != "cone":
            raise ValueError("d = 2 supports the cone scheme only")
        return _cone_2d(F, spec)
    if scheme == "cone":
        return _cone_1d(F, spec)
    if scheme == "diamond":
        return _diamond_1d(F, spec)
    raise ValueError(f"unknown scheme {scheme!r}")


def _check_finite(values: np.ndarray, spec: GridSpec, iterate: int):
    if np.all(np.isfinite(values)):
        return
    idx = np.argwhere(~np.isfinite(values))[0]
    t = spec.times[idx[0]]
    x = tuple(float(spec.axis(k)[idx[1 + k]]) for k in range(spec.dim))
    raise NumericalError(f"picard_solver: non-finite value in iterate {iterate} at t={t:.6g}, x={x}", (iterate, t, x))


def picard_run(noise: NoiseSample, spec: GridSpec, n_iters: int = DEFAULT_ITERS, scheme: str = "cone") -> list[FieldGrid]:
    """Iterates ``v_0 = 1, v_1, ..., v_{n_iters}`` as grids."""
    if n_iters < 1:
        raise ValueError("n_iters must be >= 1")
    W = noise_on_grid(noise, spec)
    v = np.ones((spec.n_t + 1,) + W.shape)
    out = [FieldGrid(v, spec)]
    for n in range(1, n_iters + 1):
        # overflow is reported below with its location
        with np.errstate(over="ignore", invalid="ignore"):
            v = 1.0 + _convolve(v * W[None], spec, scheme)
        _check_finite(v, spec, n)
        out.append(FieldGrid(v, spec))
    return out


def chaos_increment(iterates: list[FieldGrid], n: int) -> FieldGrid:
    """``H_n = v_n - v_{n-1}``, with ``H_0 = 1``."""
    if not 0 <= n < len(iterates):
        raise IndexError(f"chaos increment {n} needs iterates 0..{n}, have {len(iterates) - 1}")
    if n == 0:
        return FieldGrid(np.ones_like(iterates[0].values), iterates[0].spec)
    return FieldGrid(iterates[n].values - iterates[n - 1].values, iterates[n].spec)


def center_values_batch(W: np.ndarray, spec: GridSpec, n_iters: int = DEFAULT_ITERS, *, chaos: bool = False) -> np.ndarray:
    """``v_{n_iters}(t_max, x_c)`` for a stack of d = 1 noise traces ``W`` of shape ``(R, n_x)``.

    Uses the diamond scheme.  With ``chaos=True`` returns the increments
    ``H_0..H_{n_iters}`` at the centre, shape ``(R, n_iters + 1)``.
    """
    if spec.dim != 1:
        raise ValueError("batched evaluation is d = 1 only")
    c = spec.n_x // 2
    # time-major layout keeps each marching step contiguous
    v = np.ones((spec.n_t + 1,) + W.shape)
    centers = [v[-1, :, c].copy()]
    for n in range(1, n_iters + 1):
        v = _diamond_1d(v * W[None], spec)
        v += 1.0
        if not np.all(np.isfinite(v[-1, :, c])):
            raise NumericalError(f"picard_solver: non-finite centre value in iterate {n}", (n, spec.t_max, spec.x_center))
        centers.append(v[-1, :, c].copy())
    centers = np.stack(centers, axis=1)
    if chaos:
        return np.concatenate([centers[:, :1], np.diff(centers, axis=1)], axis=1)
    return centers[:, -1]


def grid_error_estimate(noise: NoiseSample, spec: GridSpec, n_iters: int = DEFAULT_ITERS, scheme: str = "cone") -> tuple[float, float]:
    """``(v_fine, |v_h - v_{h/2}| / 3)`` at the apex; the schemes are second order."""
    coarse = picard_run(noise, spec, n_iters, scheme)[-1].at_center()
    fine = picard_run(noise, spec.refined(), n_iters, scheme)[-1].at_center()
    return fine, abs(fine - coarse) / 3.0


def realization_seed(seed: int, index: int) -> int:
    """Noise seed of realization ``index``, derived from the run seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(7, int(index)))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def realization_values(
    measure: SpectralMeasure,
    eps: float,
    spec: GridSpec,
    n_iters: int,
    n_realizations: int,
    seed: int,
    *,
    n_freq: int = 256,
    scheme: str | None = None,
    threads: int = 1,
) -> np.ndarray:
    """``v_{n_iters}(t_max, x_c)`` for independent noise realizations."""
    if scheme is None:
        scheme = "diamond" if spec.dim == 1 and spec.is_matched else "cone"
    batches = [list(range(lo, min(lo + _REALIZATION_BATCH, n_realizations))) for lo in range(0, n_realizations, _REALIZATION_BATCH)]

    def job(indices):
        noises = [sample_noise(measure, eps, n_freq, realization_seed(seed, r)) for r in indices]
        if scheme == "diamond":
            W = np.stack([noise_on_grid(s, spec) for s in noises])
            return center_values_batch(W, spec, n_iters)
        return np.array([picard_run(s, spec, n_iters, scheme)[-1].at_center() for s in noises])

    return np.concatenate(run_ordered(job, batches, threads))


def moment_estimate(
    measure: SpectralMeasure,
    eps: float,
    spec: GridSpec,
    n_iters: int = DEFAULT_ITERS,
    n_realizations: int = 1000,
    seed: int = 0,
    **kw,
) -> tuple[EstimatorResult, EstimatorResult]:
    """Monte Carlo over the noise of ``E[v(t_max, x_c)]`` and ``E[v(t_max, x_c)^2]``."""
    if n_realizations < 2:
        raise ValueError("n_realizations must be >= 2")
    vals = realization_values(measure, eps, spec, n_iters, n_realizations, seed, **kw)
    m1, s1 = mean_and_stderr(vals)
    m2, s2 = mean_and_stderr(vals * vals)
    return EstimatorResult(m1, s1, len(vals), seed), EstimatorResult(m2, s2, len(vals), seed)
