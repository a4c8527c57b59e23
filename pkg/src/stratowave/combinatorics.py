"""Pairings, the product-formula term structure, and Gaussian moments.

A product of ``n`` first-order Wiener integrals expands into terms indexed
by ``(k, J, {I_1..I_k})``: ``J`` keeps ``n - 2k`` indices as a Wiener
integral of order ``n - 2k`` and the ``k`` pairs ``I_i = {l_i, m_i}``
contract into covariances.  The ``J = {}`` terms are the perfect matchings
that Isserlis' theorem sums over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

MAX_ENUMERATION_N = 14
_BATCH_ENUMERATION_N = 12

Pair = tuple[int, int]


@dataclass(frozen=True)
class StratoTerm:
    """One ``(k, J, pairs)`` term; pairs in normal form ``l_i < m_i``, ``l_1 < ... < l_k``."""

    n: int
    k: int
    J: tuple[int, ...]
    pairs: tuple[Pair, ...]

    def __post_init__(self):
        if len(self.J) != self.n - 2 * self.k or len(self.pairs) != self.k:
            raise ValueError("inconsistent StratoTerm sizes")
        covered = sorted(list(self.J) + [i for p in self.pairs for i in p])
        if covered != list(range(1, self.n + 1)):
            raise ValueError("J and the pairs must partition {1..n}")
        if any(l >= m for l, m in self.pairs) or list(self.pairs) != sorted(self.pairs):
            raise ValueError("pairs are not in normal form")

    @property
    def chaos_level(self) -> int:
        return self.n - 2 * self.k


# the k = n/2, J = {} special case
PairPartition = tuple[Pair, ...]


def _pairings(items: tuple) -> Iterable[tuple]:
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        for tail in _pairings(rest[:i] + rest[i + 1 :]):
            yield ((first, other),) + tail


def enumerate_pair_partitions(indices: Iterable[int]) -> list[PairPartition]:
    """All perfect matchings of ``indices``, each in normal form, no duplicates."""
    items = tuple(sorted(indices))
    if len(items) % 2:
        raise ValueError(f"cannot pair an odd number ({len(items)}) of indices")
    if len(set(items)) != len(items):
        raise ValueError("indices must be distinct")
    if len(items) > MAX_ENUMERATION_N:
        raise ValueError(f"enumeration capped at {MAX_ENUMERATION_N} indices")
    return list(_pairings(items))


def double_factorial_odd(n: int) -> int:
    """``(2k)! / (2^k k!)`` for ``n = 2k``: the number of perfect matchings."""
    if n % 2:
        return 0
    k = n // 2
    return math.factorial(n) // (2**k * math.factorial(k))


def involution_number(n: int) -> int:
    """Partial pairings of ``n`` points: ``a(n) = a(n-1) + (n-1) a(n-2)``."""
    a, b = 1, 1  # a(0), a(1)
    if n == 0:
        return 1
    for m in range(2, n + 1):
        a, b = b, b + (m - 1) * a
    return b


def term_count(n: int, k: int) -> int:
    """``C(n, 2k) (2k)! / (2^k k!)``."""
    return math.comb(n, 2 * k) * double_factorial_odd(2 * k)


def enumerate_strato_terms(n: int) -> list[StratoTerm]:
    """Every term of the product formula for ``n`` factors, grouped by ``k``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > MAX_ENUMERATION_N:
        raise ValueError(f"exhaustive enumeration is capped at n = {MAX_ENUMERATION_N}")
    full = tuple(range(1, n + 1))
    terms = []
    for k in range(n // 2 + 1):
        for J in combinations(full, n - 2 * k):
            rest = tuple(i for i in full if i not in J)
            for pairs in _pairings(rest):
                terms.append(StratoTerm(n, k, J, pairs))
    return terms


def census(n: int) -> list[int]:
    """Per-``k`` term counts, ``k = 0..n//2``, taken from the enumeration."""
    counts = [0] * (n // 2 + 1)
    for term in enumerate_strato_terms(n):
        counts[term.k] += 1
    return counts


# ---------------------------------------------------------------------------
# Gaussian moments


@lru_cache(maxsize=None)
def pairing_index_array(n: int) -> np.ndarray:
    """Perfect matchings of ``0..n-1`` as an int array ``(count, n/2, 2)``."""
    pairs = list(_pairings(tuple(range(n))))
    return np.array(pairs, dtype=np.intp).reshape(len(pairs), n // 2, 2)


def _validate_cov(cov) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(cov).max(initial=0.0))):
        raise ValueError("covariance must be symmetric")
    return cov


def _hafnian_dp(cov: np.ndarray) -> float:
    """Sum over perfect matchings by memoised recursion on the remaining set."""
    n = cov.shape[0]
    memo: dict[int, float] = {0: 1.0}

    def rec(mask: int) -> float:
        if mask in memo:
            return memo[mask]
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        total = 0.0
        m = rest
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            if cov[i, j] != 0.0:
                total += cov[i, j] * rec(rest & ~(1 << j))
        memo[mask] = total
        return total

    return rec((1 << n) - 1)


def isserlis_expectation(cov) -> float:
    """``E[Z_1 ... Z_n]`` for a centred Gaussian vector with covariance ``cov``.

    Polynomial in ``cov``; positive semi-definiteness is not required.
    """
    cov = _validate_cov(cov)
    n = cov.shape[0]
    if n % 2:
        return 0.0
    if n == 0:
        return 1.0
    if n <= _BATCH_ENUMERATION_N:
        return float(isserlis_batch(cov[None])[0])
    return _hafnian_dp(cov)


def isserlis_batch(covs) -> np.ndarray:
    """Vectorised ``isserlis_expectation`` over a stack ``(P, n, n)``."""
    covs = np.asarray(covs, dtype=float)
    P, n = covs.shape[0], covs.shape[1]
    if n % 2:
        return np.zeros(P)
    if n == 0:
        return np.ones(P)
    if n > _BATCH_ENUMERATION_N:
        return np.array([_hafnian_dp(c) for c in covs])
    idx = pairing_index_array(n)  # (M, n/2, 2)
    # entries (P, M, n/2), product over pairs, sum over matchings
    vals = covs[:, idx[..., 0], idx[..., 1]]
    return vals.prod(axis=-1).sum(axis=-1)


def hermite_eval(n: int, x):
    """Probabilists' Hermite polynomial ``He_n(x)``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if n == 0:
        return prev if prev.ndim else float(prev)
    for m in range(1, n):
        prev, cur = cur, x * cur - m * prev
    return cur if cur.ndim else float(cur)


def partial_pairing_weight(
    term: StratoTerm,
    gamma_at: Callable[[int, int], float],
    gaussians: Callable[[int], float] | Sequence[float],
) -> float:
    """``prod_i gamma_at(l_i, m_i) * prod_{j in J} g_j`` for one term.

    ``gaussians`` is either a callable or a sequence indexed by ``j - 1``.
    """
    g = gaussians if callable(gaussians) else (lambda j: gaussians[j - 1])
    out = 1.0
    for l, m in term.pairs:
        out *= gamma_at(l, m)
    for j in term.J:
        out *= g(j)
    return out
