"""Binomial-type coefficient sequences.

Everything here is built from the ratio recurrence for ``|binom(alpha, n)|``
rather than from gamma-function quotients, so arrays of several million
terms can be produced without overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError

#: Upper bound on truncation lengths, to keep memory bounded.
DEFAULT_MAX_TERMS = 10**7


def check_exponent(value: float, name: str = "mu") -> float:
    value = float(value)
    if not (0.0 < value <= 1.0) or math.isnan(value):
        raise DomainError(f"{name} must be in (0,1], got {value!r}")
    return value


def check_terms(n_terms: int, max_terms: int | None = None, minimum: int = 1) -> int:
    if max_terms is None:
        max_terms = DEFAULT_MAX_TERMS
    if int(n_terms) != n_terms:
        raise DomainError(f"number of terms must be an integer, got {n_terms!r}")
    n_terms = int(n_terms)
    if n_terms < minimum:
        raise DomainError(f"number of terms must be >= {minimum}, got {n_terms}")
    if n_terms > max_terms:
        raise DomainError(f"number of terms {n_terms} exceeds the cap {max_terms}")
    return n_terms


@dataclass(frozen=True, eq=False)
class SibuyaWeights:
    """Sibuya probabilities ``w[n-1] = |binom(alpha, n)|`` for ``n = 1..N``."""

    alpha: float
    n_terms: int
    w: np.ndarray

    @cached_property
    def cumulative(self) -> np.ndarray:
        """Running sums, i.e. the Sibuya CDF ``F_1..F_N``."""
        return np.cumsum(self.w)

    def __getitem__(self, n: int) -> float:
        """One-based access, ``weights[n] == w_n``."""
        if not 1 <= n <= self.n_terms:
            raise IndexError(n)
        return float(self.w[n - 1])


@dataclass(frozen=True, eq=False)
class SignedPmf:
    """Truncated signed coefficient sequence ``p_0..p_N`` of a partial coin."""

    mu: float
    n_terms: int
    p: np.ndarray

    def __len__(self) -> int:
        return len(self.p)


def sibuya_weights(alpha: float, n_terms: int, *, max_terms: int | None = None) -> SibuyaWeights:
    """Absolute binomial coefficients ``|binom(alpha, n)|``, ``n = 1..n_terms``.

    Uses ``w_1 = alpha`` and ``w_{n+1} = w_n * (1 - (alpha + 1)/(n + 1))``.
    For ``alpha = 1`` the sequence is ``(1, 0, 0, ...)``.
    """
    alpha = check_exponent(alpha, "alpha")
    n_terms = check_terms(n_terms, max_terms)
    n = np.arange(1, n_terms, dtype=np.float64)
    ratios = 1.0 - (alpha + 1.0) / (n + 1.0)
    w = np.empty(n_terms)
    w[0] = alpha
    np.cumprod(ratios, out=w[1:])
    w[1:] *= alpha
    w.flags.writeable = False
    return SibuyaWeights(alpha, n_terms, w)


def alternating_signs(n_terms: int) -> np.ndarray:
    """``(-1)**(n+1)`` for ``n = 1..n_terms``: +1, -1, +1, ..."""
    signs = np.ones(n_terms)
    signs[1::2] = -1.0
    return signs


def partial_coin_pmf(mu: float, n_terms: int, *, max_terms: int | None = None) -> SignedPmf:
    """Coefficients of ``((1 + x)/2)**mu`` up to ``x**n_terms``.

    ``p_0 = 2**-mu`` and ``p_n = 2**-mu * binom(mu, n)``; the ``2**-mu``
    factor scales every term, otherwise the series would not sum to one.
    """
    weights = sibuya_weights(mu, n_terms, max_terms=max_terms)
    scale = 2.0 ** (-weights.alpha)
    p = np.empty(n_terms + 1)
    p[0] = scale
    p[1:] = scale * alternating_signs(n_terms) * weights.w
    p.flags.writeable = False
    return SignedPmf(weights.alpha, n_terms, p)


def catalan_pmf(n_terms: int) -> SignedPmf:
    """Half-coin coefficients from Catalan numbers, ``p_0..p_N``.

    ``p_n = (-1)**(n-1) * sqrt(2) * C_{n-1} / 4**n`` with ``C_{-1} = -1/2``.
    The quotient ``C_{n-1}/4**n`` is carried directly through the Catalan
    recurrence ``C_n = C_{n-1} * 2(2n-1)/(n+1)`` so it never overflows.
    """
    n_terms = check_terms(n_terms, minimum=0)
    p = np.empty(n_terms + 1)
    p[0] = -math.sqrt(2.0) * -0.5
    scaled = 0.25  # C_0 / 4**1
    for n in range(1, n_terms + 1):
        p[n] = (1.0 if n % 2 else -1.0) * math.sqrt(2.0) * scaled
        # C_n / 4**(n+1) from C_{n-1} / 4**n
        scaled *= 2.0 * (2 * n - 1) / (n + 1) / 4.0
    p.flags.writeable = False
    return SignedPmf(0.5, n_terms, p)


def signed_sums(pmf: SignedPmf) -> tuple[float, float]:
    """Return ``(sum(p), sum(|p|))`` over the truncation."""
    return math.fsum(pmf.p), math.fsum(np.abs(pmf.p))
