"""Fourier-domain chaos kernels, Skorohod moments and the Stratonovich mean.

Everything reduces to simplex integrals

    Psi(r_1..r_n; t) = int_{T_n(t)} prod_j g_{r_j}(t_{j+1} - t_j) dt,
    g_r(s) = sin(s r) / r,  t_{n+1} = t,

with ``r_j = |xi_1 + ... + xi_j|``.  Writing ``Psi_j = g_{r_j} * Psi_{j-1}``
(time convolution, ``Psi_0 = 1``) and using ``g'' = -r^2 g``, each
``Psi_j`` solves ``Psi_j'' + r_j^2 Psi_j = Psi_{j-1}`` from rest, so the
whole chain is one linear ODE of size ``2n + 1`` and ``Psi`` is a single
matrix exponential.  Nested quadrature and simplex Monte Carlo are kept as
independent oracles.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import integrate, linalg

from ._quad import quad
from .combinatorics import _pairings, census, enumerate_strato_terms
from .montecarlo import mean_and_stderr, substream
from .noise_model import (
    SPHERE_AREA,
    InfiniteVarianceError,
    Riesz,
    SpectralAtoms,
    SpectralMeasure,
    as_points,
    gamma_eval,
    mollified_variance,
    pair_covariance,
)
from .wave_kernel import g_fourier_radial

EXACT_SYMMETRIZATION_MAX_N = 5
_EXPM_BATCH = 4096


@dataclass(frozen=True)
class KernelQuery:
    n: int
    t: float
    x: tuple
    frequencies: tuple  # n points in R^d
    eps: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if len(self.frequencies) != self.n:
            raise ValueError(f"expected {self.n} frequencies, got {len(self.frequencies)}")
        if self.t <= 0:
            raise ValueError("t must be positive")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")

    @property
    def freq_array(self) -> np.ndarray:
        return np.asarray(self.frequencies, dtype=float).reshape(self.n, -1)


@dataclass(frozen=True)
class SeriesResult:
    value: float
    stderr: float = 0.0
    terms: tuple = ()
    tail_ratio: float = 0.0


# ---------------------------------------------------------------------------
# simplex integrals


def _chain_generator(r: np.ndarray) -> np.ndarray:
    """Generators for a batch of radius vectors ``r`` of shape ``(B, n)``.

    State ``(Psi_0, Psi_1, Psi_1', ..., Psi_n, Psi_n')``.
    """
    B, n = r.shape
    m = 2 * n + 1
    A = np.zeros((B, m, m))
    for j in range(1, n + 1):
        p, dp = 2 * j - 1, 2 * j
        prev = 0 if j == 1 else 2 * j - 3
        A[:, p, dp] = 1.0
        A[:, dp, p] = -r[:, j - 1] ** 2
        A[:, dp, prev] = 1.0
    return A


def simplex_integral(r, t: float) -> np.ndarray:
    """``Psi(r; t)`` for radius vectors ``r`` of shape ``(n,)`` or ``(B, n)``."""
    r = np.asarray(r, dtype=float)
    single = r.ndim == 1
    r = np.atleast_2d(r)
    n = r.shape[1]
    if n == 0:
        out = np.ones(r.shape[0])
    else:
        out = np.empty(r.shape[0])
        for lo in range(0, r.shape[0], _EXPM_BATCH):
            A = _chain_generator(r[lo : lo + _EXPM_BATCH]) * t
            out[lo : lo + _EXPM_BATCH] = linalg.expm(A)[:, 2 * n - 1, 0]
    return float(out[0]) if single else out


def simplex_integral_unique(r: np.ndarray, t: float) -> np.ndarray:
    """``simplex_integral`` evaluated once per distinct row."""
    r = np.asarray(r, dtype=float)
    if r.shape[0] == 0:
        return np.zeros(0)
    uniq, inv = np.unique(np.round(r, 12), axis=0, return_inverse=True)
    return simplex_integral(uniq, t)[inv.reshape(-1)]


def simplex_integral_quadrature(r: Sequence[float], t: float) -> float:
    """Oracle: nested adaptive quadrature, practical for ``n <= 3``."""
    n = len(r)
    if n > 3:
        raise ValueError("nested quadrature oracle is limited to n <= 3")

    def g(j, s):
        return float(g_fourier_radial(s, r[j]))

    if n == 1:
        return quad(lambda t1: g(0, t - t1), 0, t, epsabs=1e-13)[0]
    if n == 2:
        return integrate.dblquad(lambda t1, t2: g(0, t2 - t1) * g(1, t - t2), 0, t, 0, lambda t2: t2, epsabs=1e-12)[0]
    return integrate.tplquad(
        lambda t1, t2, t3: g(0, t2 - t1) * g(1, t3 - t2) * g(2, t - t3),
        0, t, 0, lambda t3: t3, 0, lambda t3, t2: t2,
        epsabs=1e-10,
    )[0]


def simplex_integral_mc(r: Sequence[float], t: float, n_samples: int, seed: int = 0) -> tuple[float, float]:
    """Oracle: sorted uniforms on ``[0, t]``, volume ``t^n/n!``."""
    r = np.asarray(r, dtype=float)
    n = len(r)
    rng = substream(seed, 11, n)
    times = np.sort(rng.uniform(0, t, (n_samples, n)), axis=1)
    gaps = np.diff(np.concatenate([times, np.full((n_samples, 1), t)], axis=1), axis=1)
    vals = np.prod(g_fourier_radial(gaps, r[None, :]), axis=1)
    m, se = mean_and_stderr(vals)
    vol = t**n / math.factorial(n)
    return vol * m, vol * se


def _radii(freqs: np.ndarray) -> np.ndarray:
    """``|xi_1 + ... + xi_j|`` along the last-but-one axis of ``(..., n, d)``."""
    return np.linalg.norm(np.cumsum(freqs, axis=-2), axis=-1)


def fourier_fn(q: KernelQuery) -> complex:
    """Fourier transform of the ``n``-th Skorohod kernel at ``(xi_1..xi_n)``.

    ``exp(-i (sum xi) . x) Psi(|xi_1|, |xi_1 + xi_2|, ...; t)``, times
    ``exp(-(eps/2) sum |xi_j|^2)`` for the mollified kernel.
    """
    f = q.freq_array
    x = as_points(q.x, f.shape[1]).reshape(-1)
    val = simplex_integral(_radii(f), q.t)
    damp = math.exp(-0.5 * q.eps * float(np.sum(f * f)))
    return complex(np.exp(-1j * float(f.sum(axis=0) @ x)) * val * damp)


def _symmetrized_abs(freqs: np.ndarray, t: float) -> np.ndarray:
    """``|F f~_n|`` without damping, exact average over all ``n!`` orders.

    ``freqs`` has shape ``(B, n, d)``; the phase is order independent.
    """
    B, n, _ = freqs.shape
    perms = np.array(list(itertools.permutations(range(n))))
    r = _radii(freqs[:, perms, :]).reshape(B * len(perms), n)
    return simplex_integral_unique(r, t).reshape(B, len(perms)).mean(axis=1)


def _sampled_symmetrized(freqs: np.ndarray, t: float, n_perm: int, rng) -> np.ndarray:
    B, n, _ = freqs.shape
    perms = np.argsort(rng.random((B, n_perm, n)), axis=-1)
    permuted = np.take_along_axis(freqs[:, None, :, :], perms[..., None], axis=2)
    r = _radii(permuted).reshape(B * n_perm, n)
    return simplex_integral(r, t).reshape(B, n_perm).mean(axis=1)


# ---------------------------------------------------------------------------
# norms and the Skorohod second moment


def _atom_multisets(m: SpectralAtoms, n: int):
    """Yield ``(arrangements (A, n, d), weight)`` per multiset of atoms.

    ``weight = multinomial * prod w``; the arrangements are the distinct
    orderings, whose average equals the full ``n!`` average.
    """
    freqs, w = m.freqs, m.weights_array
    for combo in itertools.combinations_with_replacement(range(len(w)), n):
        counts = Counter(combo)
        mult = math.factorial(n)
        for c in counts.values():
            mult //= math.factorial(c)
        arrangements = sorted(set(itertools.permutations(combo)))
        yield freqs[np.array(arrangements)], mult * float(np.prod(w[list(combo)]))


def kernel_norm_sq(
    n: int,
    t: float,
    x,
    measure: SpectralMeasure,
    eps: float = 0.0,
    *,
    symmetrization: str = "exact",
    n_samples: int = 20000,
    seed: int = 0,
) -> tuple[float, float]:
    """``||f~_n^eps(., x; t)||^2`` in ``H^{(x) n}``, returned as ``(value, stderr)``.

    Atoms: exact finite sum (symmetrization by distinct orderings of each
    multiset, so no order limit).  Continuous measures: Monte Carlo over
    ``mu^{(x) n}`` with exact symmetrization up to n = 5, or sampled
    permutations (``symmetrization="sampled"``), which uses two independent
    permutation averages so that their product is unbiased for the square.
    The value does not depend on ``x``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if symmetrization not in ("exact", "sampled"):
        raise ValueError("symmetrization must be 'exact' or 'sampled'")
    if isinstance(measure, SpectralAtoms):
        if not measure.weights:
            return 0.0, 0.0
        total = []
        for arr, weight in _atom_multisets(measure, n):
            damp = math.exp(-eps * float(np.sum(arr[0] ** 2)))
            r = _radii(arr).reshape(len(arr), n)
            sym = simplex_integral_unique(r, t).mean()
            total.append(weight * damp * sym * sym)
        return math.fsum(total), 0.0

    if symmetrization == "exact" and n > EXACT_SYMMETRIZATION_MAX_N:
        raise ValueError(f"exact symmetrization is limited to n <= {EXACT_SYMMETRIZATION_MAX_N}; use 'sampled'")
    rng = substream(seed, 12, n)
    freqs, logw = _draw_frequencies(measure, eps, n, n_samples, t, rng)
    if symmetrization == "exact":
        a = _symmetrized_abs(freqs, t)
        vals = np.exp(logw) * a * a
    else:
        a = _sampled_symmetrized(freqs, t, 8, rng)
        b = _sampled_symmetrized(freqs, t, 8, rng)
        vals = np.exp(logw) * a * b
    return mean_and_stderr(vals)


def _draw_frequencies(measure, eps, n, size, t, rng):
    """Draws ``(size, n, d)`` with log importance weights against ``e^{-eps|xi|^2} mu``."""
    d = measure.dim
    if eps > 0 or not math.isinf(measure.total_mass):
        mass = mollified_variance(measure, eps)
        radii = measure.sample_radii(eps, size * n, rng).reshape(size, n)
        logw = np.full(size, n * math.log(mass))
    else:
        # eps = 0, infinite mass: log-logistic radial proposal with the
        # density's own power at the origin and scale 1/t
        beta, lam = measure.alpha, 1.0 / t
        u = rng.uniform(size=(size, n))
        radii = lam * (u / (1 - u)) ** (1 / beta)
        q = (beta / lam) * (radii / lam) ** (beta - 1) / (1 + (radii / lam) ** beta) ** 2
        target = _radial_density(measure, radii)
        logw = np.sum(np.log(target) - np.log(q), axis=1)
    if d == 1:
        dirs = rng.choice([-1.0, 1.0], size=(size, n, 1))
    else:
        phi = rng.uniform(0, 2 * math.pi, (size, n))
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    return radii[..., None] * dirs, logw


def _radial_density(m: Riesz, r):
    # mu(|xi| in dr) / dr
    return SPHERE_AREA[m.dim] * m.spectral_density(r) * r ** (m.dim - 1)


def skorohod_second_moment(t: float, x, measure: SpectralMeasure, eps: float = 0.0, n_max: int = 8, **kw) -> SeriesResult:
    """``E[u^2] = 1 + sum_{n <= n_max} n! ||f~_n||^2``; ``E[u] = 1`` at every order."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    terms, errs = [], []
    for n in range(1, n_max + 1):
        v, se = kernel_norm_sq(n, t, x, measure, eps, **kw)
        terms.append(math.factorial(n) * v)
        errs.append(math.factorial(n) * se)
    value = 1.0 + math.fsum(terms)
    tail = abs(terms[-1]) / value
    return SeriesResult(value, math.sqrt(math.fsum(e * e for e in errs)), tuple(terms), tail)


# ---------------------------------------------------------------------------
# Stratonovich mean


def active_partial_sums(n: int, pairs: Sequence[tuple[int, int]], etas: np.ndarray) -> np.ndarray:
    """Partial sums ``xi_1 + ... + xi_j`` when ``xi_l = eta``, ``xi_m = -eta``.

    ``pairs`` use 1-based positions with ``l < m``; ``eta_i`` is active at
    positions ``l_i <= j < m_i``.  ``etas`` has shape ``(..., k, d)``;
    returns ``(..., n, d)``.
    """
    etas = np.asarray(etas, dtype=float)
    out = np.zeros(etas.shape[:-2] + (n, etas.shape[-1]))
    for i, (l, m) in enumerate(pairs):
        if not 1 <= l < m <= n:
            raise ValueError(f"bad pair {(l, m)} for n = {n}")
        out[..., l - 1 : m - 1, :] += etas[..., i : i + 1, :]
    return out


def stratonovich_mean_term(n: int, t: float, measure: SpectralMeasure, eps: float = 0.0, *, n_samples: int = 20000, seed: int = 0) -> tuple[float, float]:
    """Sum over pairings of ``[n]`` of ``H_{n, n/2, {}, I}(t, x)``; ``(value, stderr)``."""
    if n % 2:
        return 0.0, 0.0
    if n == 0:
        return 1.0, 0.0
    if eps < 0:
        raise ValueError("eps must be non-negative")
    k = n // 2
    pairings = list(_pairings(tuple(range(1, n + 1))))
    if isinstance(measure, SpectralAtoms):
        if not measure.weights:
            return 0.0, 0.0
        f, w = measure.freqs, measure.weights_array * np.exp(-eps * np.sum(measure.freqs**2, axis=1))
        combos = np.array(list(itertools.product(range(len(w)), repeat=k)))  # (C, k)
        etas = f[combos]  # (C, k, d)
        weights = np.prod(w[combos], axis=1)
        radii = np.concatenate([_radii_from_sums(active_partial_sums(n, p, etas)) for p in pairings])
        vals = simplex_integral_unique(radii, t)
        return math.fsum(np.tile(weights, len(pairings)) * vals), 0.0

    if eps == 0 and math.isinf(measure.total_mass):
        raise InfiniteVarianceError("the eps = 0 pairing covariance needs a finite spectral measure")
    # Monte Carlo: uniform pairing, eta_i from the normalized mu_eps
    mass = mollified_variance(measure, eps)
    rng = substream(seed, 13, n)
    choice = rng.integers(len(pairings), size=n_samples)
    freqs, _ = _draw_frequencies(measure, eps, k, n_samples, t, rng)
    radii = np.empty((n_samples, n))
    for idx, p in enumerate(pairings):
        sel = choice == idx
        radii[sel] = _radii_from_sums(active_partial_sums(n, p, freqs[sel]))
    vals = simplex_integral(radii, t) * len(pairings) * mass**k
    return mean_and_stderr(vals)


def _radii_from_sums(sums: np.ndarray) -> np.ndarray:
    return np.linalg.norm(sums, axis=-1)


def stratonovich_mean_series(t: float, measure: SpectralMeasure, eps: float = 0.0, n_max: int = 8, **kw) -> SeriesResult:
    """``E[v(t, x)] = 1 + sum_{n even <= n_max} (pairing terms)``; odd orders vanish."""
    if n_max < 0 or n_max % 2:
        raise ValueError("n_max must be a non-negative even integer")
    terms, errs = [], []
    for n in range(2, n_max + 1, 2):
        v, se = stratonovich_mean_term(n, t, measure, eps, **kw)
        terms.append(v)
        errs.append(se)
    value = 1.0 + math.fsum(terms)
    tail = abs(terms[-1]) / abs(value) if terms else 0.0
    return SeriesResult(value, math.sqrt(math.fsum(e * e for e in errs)), tuple(terms), tail)


def kernel_covariance_integral(measure: SpectralMeasure, s: float, eps: float = 0.0) -> float:
    """``int G(s, z) C(z) dz`` with ``C = gamma`` (eps = 0) or the smoothed covariance."""
    d = measure.dim

    def cov(z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return float(gamma_eval(measure, z) if eps == 0 else pair_covariance(measure, eps, z))

    if d == 1:
        # split at 0 where a Riesz kernel is singular
        return 0.5 * (quad(lambda z: cov([z]), -s, 0.0)[0] + quad(lambda z: cov([z]), 0.0, s)[0])

    def radial(theta):
        rho = s * math.sin(theta)
        ang = quad(lambda phi: cov([rho * math.cos(phi), rho * math.sin(phi)]), 0.0, 2 * math.pi)[0]
        return s * math.sin(theta) * ang / (2 * math.pi)

    return quad(radial, 0.0, math.pi / 2)[0]


def mean_term_n2_physical(t: float, measure: SpectralMeasure, eps: float = 0.0) -> float:
    """The ``n = 2`` mean term computed in physical space.

    ``int_{T_2} int int G(t - t_2, x - x_2) G(t_2 - t_1, x_2 - x_1) C(x_1 - x_2)``;
    integrating out ``x`` against the outer kernel (mass ``t - t_2``) and
    substituting ``s = t_2 - t_1`` leaves ``int_0^t (t - s)^2/2 K(s) ds``
    with ``K(s) = int G(s, z) C(z) dz``.
    """
    return quad(lambda s: 0.5 * (t - s) ** 2 * kernel_covariance_integral(measure, s, eps), 0.0, t)[0]


# ---------------------------------------------------------------------------
# census and Parseval


@dataclass(frozen=True)
class CensusRow:
    level: int
    count: int
    label: str


def decomposition_census(n: int) -> list[CensusRow]:
    """Term counts per chaos level ``n - 2k``: the Skorohod term and the corrections."""
    rows = []
    for k, count in enumerate(census(n)):
        if k == 0:
            rows.append(CensusRow(n, count, f"Skorohod term J_{n}"))
        else:
            rows.append(CensusRow(n - 2 * k, count, f"correction M_{n}"))
    return rows


def correction_terms(n: int):
    """The ``k >= 1`` terms of order ``n``; empty for ``n = 1``."""
    return [term for term in enumerate_strato_terms(n) if term.k >= 1]


@dataclass(frozen=True)
class GaussianBump:
    """``amplitude * exp(-|x|^2 / (2 scale^2))``; its transform is positive."""

    scale: float
    amplitude: float = 1.0

    def fourier_radial(self, r, dim):
        return self.amplitude * (2 * math.pi * self.scale**2) ** (dim / 2) * np.exp(-0.5 * (self.scale * r) ** 2)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.exp(-np.sum(x * x, axis=-1) / (2 * self.scale**2))


@dataclass(frozen=True)
class ConeIndicator:
    """``amplitude * G(t, .)``, the wave kernel itself; transform ``sin(t r)/r``."""

    t: float
    amplitude: float = 1.0

    def fourier_radial(self, r, dim):
        return self.amplitude * g_fourier_radial(self.t, r)


TestFunction = Union[GaussianBump, ConeIndicator]


def parseval_check(measure: SpectralMeasure, phi: TestFunction) -> tuple[float, float]:
    """``(int phi gamma dx, int F phi dmu)`` computed independently."""
    d = measure.dim
    if isinstance(phi, ConeIndicator):
        lhs = phi.amplitude * kernel_covariance_integral(measure, phi.t)
    elif isinstance(phi, GaussianBump):
        lhs = _bump_gamma_integral(measure, phi)
    else:
        raise TypeError(f"unsupported test function {type(phi).__name__}")

    if isinstance(measure, Riesz) and isinstance(phi, ConeIndicator):
        rhs = phi.amplitude * _riesz_sine_integral(measure, phi.t)
    else:
        rhs = measure.radial_integral(lambda r: float(phi.fourier_radial(r, d)))
    return lhs, rhs


def _bump_gamma_integral(measure, phi: GaussianBump) -> float:
    d = measure.dim
    if d == 1:
        f = lambda z: float(phi(np.array([z]))) * float(gamma_eval(measure, [z]))  # noqa: E731
        return 2 * quad(f, 0.0, math.inf)[0] if isinstance(measure, Riesz) else quad(f, -math.inf, math.inf)[0]

    def radial(rho):
        if rho == 0:
            return 0.0
        ang = quad(lambda a: float(gamma_eval(measure, [rho * math.cos(a), rho * math.sin(a)])), 0.0, 2 * math.pi)[0]
        return rho * float(phi(np.array([rho, 0.0]))) * ang

    # the bump is below exp(-72) past 12 scale lengths
    return quad(radial, 0.0, 12.0 * phi.scale)[0]


def _riesz_sine_integral(m: Riesz, t: float) -> float:
    """``int sin(t|xi|)/|xi| mu(dxi)`` as a radial oscillatory integral."""
    f = lambda r: _radial_density(m, r) / r  # noqa: E731
    head = quad(lambda r: f(r) * math.sin(t * r), 0.0, 1.0)[0]
    tail = integrate.quad(f, 1.0, math.inf, weight="sin", wvar=t, limit=500)[0]
    return head + tail
