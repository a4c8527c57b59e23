"""Spatially homogeneous Gaussian noise: covariance kernels, spectral measures
and finite spectral realizations of the (mollified) noise field.

Conventions: ``F phi(xi) = int exp(-i xi.x) phi(x) dx`` and ``gamma = F mu``.
Every measure here is symmetric, so ``gamma(x) = int cos(xi.x) mu(dxi)``.
The mollified noise ``W_eps(x) = W(p_eps(x - .))`` has covariance
``int exp(-eps |xi|^2) cos(xi.(x-y)) mu(dxi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import special

from ._quad import power_singular_quad

SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi}  # |S^{d-1}|


class InfiniteVarianceError(ValueError):
    pass


def _check_dim(dim: int) -> int:
    if dim not in (1, 2):
        raise ValueError(f"only d = 1, 2 are supported, got {dim}")
    return int(dim)


def as_points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to an array of shape ``(..., dim)``."""
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != dim:
        raise ValueError(f"expected points with last axis {dim}, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# measure variants


@dataclass(frozen=True)
class Riesz:
    """``gamma(x) = c |x|^-alpha``; ``mu(dxi) = c kappa_{d,alpha} |xi|^(alpha-d) dxi``.

    ``c`` scales the covariance kernel.  The spectral density carries the
    exact Fourier constant so that ``gamma = F mu`` holds as an identity.
    """

    alpha: float
    dim: int = 1
    c: float = 1.0

    def __post_init__(self):
        _check_dim(self.dim)
        if not 0.0 < self.alpha < self.dim:
            raise ValueError(f"Riesz kernel needs 0 < alpha < d, got alpha={self.alpha}, d={self.dim}")
        if self.c <= 0:
            raise ValueError("Riesz constant c must be positive")

    @property
    def total_mass(self) -> float:
        return math.inf

    @property
    def spectral_constant(self) -> float:
        d, a = self.dim, self.alpha
        return self.c * special.gamma((d - a) / 2) / (math.pi ** (d / 2) * 2.0**a * special.gamma(a / 2))

    def spectral_density(self, r):
        return self.spectral_constant * np.asarray(r, dtype=float) ** (self.alpha - self.dim)

    def gamma(self, x) -> np.ndarray:
        r = np.linalg.norm(as_points(x, self.dim), axis=-1)
        with np.errstate(divide="ignore"):
            return np.where(r > 0, self.c * r ** (-self.alpha), np.inf)

    def radial_integral(self, f: Callable[[float], float], cutoff: float = math.inf) -> float:
        """``int_{|xi| <= cutoff} f(|xi|) mu(dxi)``."""
        pref = SPHERE_AREA[self.dim] * self.spectral_constant
        value, _ = power_singular_quad(f, self.alpha, cutoff)
        return pref * value

    def smoothed_covariance(self, z, eps: float) -> np.ndarray:
        if eps <= 0:
            raise InfiniteVarianceError("infinite variance: Riesz noise needs eps > 0")
        z = as_points(z, self.dim)
        rr = np.sum(z * z, axis=-1)
        a = self.alpha
        # int r^(a-1) exp(-eps r^2) {cos(rz) | J0(r|z|)} dr in closed form
        b = 0.5 if self.dim == 1 else 1.0
        base = 0.5 * special.gamma(a / 2) * eps ** (-a / 2)
        return SPHERE_AREA[self.dim] * self.spectral_constant * base * special.hyp1f1(a / 2, b, -rr / (4 * eps))

    def sample_radii(self, eps: float, size: int, rng: np.random.Generator) -> np.ndarray:
        # radial law of exp(-eps r^2) r^(alpha-1): eps r^2 ~ Gamma(alpha/2)
        if eps <= 0:
            raise InfiniteVarianceError("infinite variance: Riesz noise needs eps > 0")
        return np.sqrt(rng.gamma(self.alpha / 2, 1.0, size=size) / eps)


@dataclass(frozen=True)
class GaussianDensity:
    """``mu = total_mass * N(0, bandwidth^2 I_d)``; smooth noise with finite mass."""

    total_mass: float
    bandwidth: float
    dim: int = 1

    def __post_init__(self):
        _check_dim(self.dim)
        if self.total_mass <= 0 or self.bandwidth <= 0:
            raise ValueError("GaussianDensity needs positive total_mass and bandwidth")

    def spectral_density(self, r):
        b, d = self.bandwidth, self.dim
        r = np.asarray(r, dtype=float)
        return self.total_mass * (2 * math.pi * b * b) ** (-d / 2) * np.exp(-r * r / (2 * b * b))

    def gamma(self, x) -> np.ndarray:
        x = as_points(x, self.dim)
        return self.total_mass * np.exp(-0.5 * self.bandwidth**2 * np.sum(x * x, axis=-1))

    def radial_integral(self, f: Callable[[float], float], cutoff: float = math.inf) -> float:
        b, d = self.bandwidth, self.dim
        pref = SPHERE_AREA[d] * self.total_mass * (2 * math.pi * b * b) ** (-d / 2)
        value, _ = power_singular_quad(lambda r: f(r) * math.exp(-r * r / (2 * b * b)), d, cutoff)
        return pref * value

    def smoothed_covariance(self, z, eps: float) -> np.ndarray:
        z = as_points(z, self.dim)
        s = 1.0 + 2.0 * eps * self.bandwidth**2
        return self.total_mass * s ** (-self.dim / 2) * np.exp(-0.5 * self.bandwidth**2 * np.sum(z * z, axis=-1) / s)

    def sample_radii(self, eps: float, size: int, rng: np.random.Generator) -> np.ndarray:
        sd = self.bandwidth / math.sqrt(1.0 + 2.0 * eps * self.bandwidth**2)
        g = rng.standard_normal((size, self.dim)) * sd
        return np.linalg.norm(g, axis=-1)


@dataclass(frozen=True)
class SpectralAtoms:
    """Finite symmetric spectral measure ``sum_j w_j delta_{xi_j}``.

    Stored as tuples so instances are hashable; ``freqs``/``weights_array``
    give numpy views.  Every atom ``xi != 0`` must have its mirror ``-xi``
    with the same weight.
    """

    frequencies: tuple
    weights: tuple
    space_dim: int | None = None  # only needed for the empty (zero-mass) measure
    _modes: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size == 0:
            if self.space_dim is None:
                raise ValueError("an empty atom list needs space_dim")
            _check_dim(self.space_dim)
            object.__setattr__(self, "frequencies", ())
            object.__setattr__(self, "weights", ())
            object.__setattr__(self, "_modes", ())
            return
        freqs = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        if freqs.ndim == 1:
            freqs = freqs[:, None]
        if freqs.shape[0] != w.shape[0]:
            raise ValueError("frequencies and weights must have equal length")
        _check_dim(freqs.shape[1])
        if self.space_dim is not None and self.space_dim != freqs.shape[1]:
            raise ValueError("space_dim disagrees with the frequency dimension")
        object.__setattr__(self, "space_dim", int(freqs.shape[1]))
        if np.any(w <= 0):
            raise ValueError("atom weights must be strictly positive")
        object.__setattr__(self, "frequencies", tuple(map(tuple, freqs.tolist())))
        object.__setattr__(self, "weights", tuple(w.tolist()))
        object.__setattr__(self, "_modes", self._pair_atoms(freqs, w))

    @staticmethod
    def _pair_atoms(freqs, w):
        used = np.zeros(len(w), dtype=bool)
        modes = []
        for i in range(len(w)):
            if used[i]:
                continue
            used[i] = True
            if np.all(freqs[i] == 0):
                modes.append((tuple(freqs[i]), float(w[i])))
                continue
            match = np.flatnonzero(~used & np.all(np.isclose(freqs, -freqs[i], rtol=1e-12, atol=1e-12), axis=1))
            if match.size == 0 or not math.isclose(w[match[0]], w[i], rel_tol=1e-12):
                raise ValueError(f"atom {freqs[i].tolist()} has no mirror atom of equal weight; mu must be symmetric")
            used[match[0]] = True
            modes.append((tuple(freqs[i]), 2.0 * float(w[i])))
        return tuple(modes)

    @classmethod
    def symmetric(cls, frequencies, weights) -> "SpectralAtoms":
        """Build from one representative per mirror pair; weights are per atom."""
        f = np.atleast_1d(np.asarray(frequencies, dtype=float))
        if f.ndim == 1:
            f = f[:, None]
        w = np.asarray(weights, dtype=float).ravel()
        nonzero = np.any(f != 0, axis=1)
        return cls(np.concatenate([f, -f[nonzero]]), np.concatenate([w, w[nonzero]]))

    @property
    def dim(self) -> int:
        return self.space_dim

    @property
    def freqs(self) -> np.ndarray:
        return np.asarray(self.frequencies, dtype=float).reshape(-1, self.space_dim)

    @property
    def weights_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def modes(self):
        """One ``(frequency, variance)`` entry per mirror pair."""
        return self._modes

    def gamma(self, x) -> np.ndarray:
        x = as_points(x, self.dim)
        return np.cos(x @ self.freqs.T) @ self.weights_array

    def spectral_sum(self, f) -> float:
        r = np.linalg.norm(self.freqs, axis=1)
        return math.fsum(w * f(ri) for w, ri in zip(self.weights, r))

    def radial_integral(self, f, cutoff: float = math.inf) -> float:
        return self.spectral_sum(lambda r: f(r) if r <= cutoff else 0.0)

    def smoothed_covariance(self, z, eps: float) -> np.ndarray:
        z = as_points(z, self.dim)
        f = self.freqs
        w = self.weights_array * np.exp(-eps * np.sum(f * f, axis=1))
        return np.cos(z @ f.T) @ w


SpectralMeasure = Union[Riesz, SpectralAtoms, GaussianDensity]

ATOM_FIXTURE = SpectralAtoms(((math.pi,), (-math.pi,)), (0.5, 0.5))


def zero_measure(dim: int = 1) -> SpectralAtoms:
    """The zero-mass measure: the noise vanishes identically."""
    return SpectralAtoms((), (), space_dim=dim)


# ---------------------------------------------------------------------------
# operations


def gamma_eval(m: SpectralMeasure, x) -> np.ndarray:
    """Covariance kernel at ``x``; ``inf`` at the Riesz singularity."""
    out = m.gamma(x)
    return float(out) if np.ndim(out) == 0 else out


def pair_covariance(m: SpectralMeasure, eps: float, z) -> np.ndarray:
    """``(p_{2eps} * gamma)(z) = int exp(-eps|xi|^2) cos(xi.z) mu(dxi)``."""
    return m.smoothed_covariance(z, eps)


def mollified_variance(m: SpectralMeasure, eps: float) -> float:
    """``E|W_eps(x)|^2 = int exp(-eps|xi|^2) mu(dxi)``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0 and math.isinf(getattr(m, "total_mass", math.inf)):
        raise InfiniteVarianceError("infinite variance: eps = 0 needs a finite spectral measure")
    return m.radial_integral(lambda r: math.exp(-eps * r * r))


def condition_c_constant(m: SpectralMeasure, cutoff: float) -> float:
    """Truncated ``int_{|xi|<=cutoff} (1+|xi|^2)^(-1/2) mu(dxi)``."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    return m.radial_integral(lambda r: 1.0 / math.sqrt(1.0 + r * r), cutoff)


def condition_d_constant(m: SpectralMeasure, cutoff: float) -> float:
    """Truncated ``int_{|xi|<=cutoff} (1+|xi|^2)^(-1) mu(dxi)``."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    return m.radial_integral(lambda r: 1.0 / (1.0 + r * r), cutoff)


@dataclass(frozen=True, eq=False)
class NoiseSample:
    """``W(x) = sum_k sigma_k exp(-eps|xi_k|^2/2) (a_k cos(xi_k.x) + b_k sin(xi_k.x))``."""

    epsilon: float
    frequencies: np.ndarray  # (K, d)
    amplitudes: np.ndarray  # (K,)
    gauss_cos: np.ndarray
    gauss_sin: np.ndarray
    seed: int | None = None

    @property
    def dim(self) -> int:
        return self.frequencies.shape[1]

    @property
    def effective_amplitudes(self) -> np.ndarray:
        f = self.frequencies
        return self.amplitudes * np.exp(-0.5 * self.epsilon * np.sum(f * f, axis=1))

    def with_gaussians(self, gauss_cos, gauss_sin) -> "NoiseSample":
        return NoiseSample(
            self.epsilon,
            self.frequencies,
            self.amplitudes,
            np.asarray(gauss_cos, dtype=float),
            np.asarray(gauss_sin, dtype=float),
            self.seed,
        )


def sample_noise(m: SpectralMeasure, eps: float, n_freq: int = 256, rng_seed: int = 0) -> NoiseSample:
    """Draw one spectral realization of the mollified noise.

    Atoms give one mode per mirror pair (exact covariance).  Continuous
    measures are importance sampled from ``exp(-eps|xi|^2) mu(dxi)``
    normalized, with ``sigma_k^2 exp(-eps|xi_k|^2) = C_{mu,eps} / n_freq``.
    """
    rng = np.random.default_rng(rng_seed)
    if isinstance(m, SpectralAtoms):
        freqs = np.array([f for f, _ in m.modes], dtype=float).reshape(-1, m.dim)
        amps = np.sqrt(np.array([v for _, v in m.modes], dtype=float))
    else:
        if n_freq < 1:
            raise ValueError("n_freq must be >= 1")
        mass = mollified_variance(m, eps)
        if not mass > 0:
            raise ValueError("zero normalization mass")
        radii = m.sample_radii(eps, n_freq, rng)
        if m.dim == 1:
            dirs = rng.choice([-1.0, 1.0], size=(n_freq, 1))
        else:
            phi = rng.uniform(0, 2 * math.pi, n_freq)
            dirs = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        freqs = radii[:, None] * dirs
        amps = math.sqrt(mass / n_freq) * np.exp(0.5 * eps * radii**2)
    k = freqs.shape[0]
    a = rng.standard_normal(k)
    b = rng.standard_normal(k)
    return NoiseSample(float(eps), freqs, amps, a, b, rng_seed)


def noise_eval(s: NoiseSample, x) -> np.ndarray:
    """Evaluate a noise realization at points ``x`` (shape ``(..., d)``)."""
    x = as_points(x, s.dim)
    phase = x @ s.frequencies.T
    amp = s.effective_amplitudes
    return np.cos(phase) @ (amp * s.gauss_cos) + np.sin(phase) @ (amp * s.gauss_sin)


def constant_noise(value: float, dim: int = 1) -> NoiseSample:
    """The spatially constant field ``W = value`` (a single zero-frequency mode)."""
    return NoiseSample(0.0, np.zeros((1, dim)), np.ones(1), np.array([float(value)]), np.zeros(1))


# ---------------------------------------------------------------------------
# serialization (used by the CLI config)


def measure_to_dict(m: SpectralMeasure) -> dict:
    if isinstance(m, Riesz):
        return {"kind": "riesz", "alpha": m.alpha, "dim": m.dim, "c": m.c}
    if isinstance(m, GaussianDensity):
        return {"kind": "gaussian", "total_mass": m.total_mass, "bandwidth": m.bandwidth, "dim": m.dim}
    return {"kind": "atoms", "frequencies": [list(f) for f in m.frequencies], "weights": list(m.weights), "dim": m.dim}


def _parse_number(v) -> float:
    """Numbers, or strings such as ``"pi"``, ``"-pi"``, ``"0.5*pi"``."""
    if isinstance(v, (int, float)):
        return float(v)
    s = str(v).replace(" ", "").lower()
    if s.endswith("pi"):
        head = s[:-2].rstrip("*")
        if head in ("", "+"):
            return math.pi
        if head == "-":
            return -math.pi
        return float(head) * math.pi
    return float(s)


def measure_from_dict(d: dict) -> SpectralMeasure:
    kind = d.get("kind")
    if kind == "riesz":
        return Riesz(float(d["alpha"]), int(d.get("dim", 1)), float(d.get("c", 1.0)))
    if kind == "gaussian":
        return GaussianDensity(float(d["total_mass"]), float(d["bandwidth"]), int(d.get("dim", 1)))
    if kind == "atoms":
        freqs = [[_parse_number(c) for c in (f if isinstance(f, list) else [f])] for f in d["frequencies"]]
        dim = d.get("dim")
        return SpectralAtoms(freqs, [_parse_number(w) for w in d["weights"]], space_dim=None if dim is None else int(dim))
    raise ValueError(f"unknown measure kind {kind!r}")
