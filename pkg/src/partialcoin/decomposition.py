"""Nonnegative pairs ``(g, h)`` with ``f * g = h`` for partial coins.

For the fair partial coin ``f(x) = ((1 + x)/2)**mu`` the pair is

* ``g(x) = (1 - (1 - x)**mu) x**k``, a shifted Sibuya distribution, and
* ``h(x) = 2**-mu ((1 + x)**mu - (1 - x**2)**mu) x**k``.

The coefficient of ``x**m`` in ``(1 + x)**mu - (1 - x**2)**mu`` is ``w_m`` for
odd ``m`` and ``w_n - w_{2n}`` for ``m = 2n``, with ``w`` the Sibuya weights.
Since ``w`` is strictly decreasing for ``mu < 1`` all of them are positive.

Biased coins ``(a + b x)**mu`` with ``a > b`` use the same construction with
``x`` rescaled by ``b/a``; the resulting distributions are defective with
total mass ``c = 1 - ((a - b)/a)**mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from . import coefficients
from .coefficients import (
    SignedPmf,
    alternating_signs,
    check_exponent,
    check_terms,
    partial_coin_pmf,
    sibuya_weights,
)
from .errors import ConfigurationError, DomainError

#: Tolerance on ``a + b == 1`` for a biased coin.
SUM_TOLERANCE = 1e-12

# Above this length verify_product switches from direct to FFT convolution.
_DIRECT_CONVOLUTION_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class NonnegPmf:
    """Truncated nonnegative distribution on ``support_offset, support_offset + 1, ...``.

    ``total_mass`` is the mass of the untruncated distribution: 1 for the
    fair construction, the defect ``c`` for biased coins.
    """

    support_offset: int
    probs: np.ndarray
    total_mass: float = 1.0

    def __len__(self) -> int:
        return len(self.probs)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.support_offset, self.support_offset + len(self.probs))


@dataclass(frozen=True)
class BiasedCoinSpec:
    """A biased partial coin ``(a + b x)**mu`` with ``a >= b``.

    Use :meth:`normalized` to build one from raw inputs in either order;
    ``swapped`` records that ``a`` and ``b`` were exchanged, which flips the
    meaning of the simulated outcome.
    """

    a: float
    b: float
    mu: float
    swapped: bool = False

    def __post_init__(self):
        check_exponent(self.mu)
        for name in ("a", "b"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise DomainError(f"{name} must be in (0,1), got {value!r}")
        if abs(self.a + self.b - 1.0) > SUM_TOLERANCE:
            raise DomainError(f"a + b must equal 1, got {self.a + self.b!r}")
        if self.a < self.b:
            raise DomainError("a must not be smaller than b; use BiasedCoinSpec.normalized")

    @classmethod
    def normalized(cls, a: float, b: float, mu: float) -> BiasedCoinSpec:
        a, b = float(a), float(b)
        if a < b:
            return cls(b, a, mu, swapped=True)
        return cls(a, b, mu)

    @property
    def is_fair(self) -> bool:
        return self.a == self.b

    @property
    def ratio(self) -> float:
        return self.b / self.a


@dataclass(frozen=True, eq=False)
class Decomposition:
    f: SignedPmf
    g: NonnegPmf
    h: NonnegPmf
    shift: int


def _doubled_cap(max_terms: int | None) -> int:
    # h needs Sibuya weights up to twice the truncation length.
    return 2 * (coefficients.DEFAULT_MAX_TERMS if max_terms is None else max_terms)


def check_shift(shift: int) -> int:
    if int(shift) != shift or shift < -1:
        raise DomainError(f"shift must be an integer >= -1, got {shift!r}")
    return int(shift)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _difference_coefficients(w: np.ndarray, n_terms: int) -> np.ndarray:
    """Coefficients of ``x**1..x**N`` in ``(1 + x)**mu - (1 - x**2)**mu``.

    ``w`` must hold the Sibuya weights up to index ``2N``.
    """
    m = np.arange(1, n_terms + 1)
    q = np.empty(n_terms)
    odd = m % 2 == 1
    q[odd] = w[m[odd] - 1]
    half = m[~odd] // 2
    q[~odd] = w[half - 1] - w[2 * half - 1]
    return q


def build_g(mu: float, shift: int, n_terms: int, *, max_terms: int | None = None) -> NonnegPmf:
    """Shifted Sibuya distribution; ``w_n`` sits at support value ``shift + n``."""
    shift = check_shift(shift)
    weights = sibuya_weights(mu, n_terms, max_terms=max_terms)
    return NonnegPmf(shift + 1, weights.w, 1.0)


def build_h(mu: float, shift: int, n_terms: int, *, max_terms: int | None = None) -> NonnegPmf:
    shift = check_shift(shift)
    n_terms = check_terms(n_terms, max_terms)
    weights = sibuya_weights(mu, 2 * n_terms, max_terms=_doubled_cap(max_terms))
    q = _difference_coefficients(weights.w, n_terms)
    q *= 2.0 ** (-weights.alpha)
    return NonnegPmf(shift + 1, _frozen(q), 1.0)


def defect_mass(spec: BiasedCoinSpec) -> float:
    """Total mass ``c = 1 - ((a - b)/a)**mu`` of the biased ``g`` and ``h``."""
    return -math.expm1(spec.mu * math.log1p(-spec.ratio))


def _geometric_factors(ratio: float, n_terms: int) -> np.ndarray:
    return ratio ** np.arange(1, n_terms + 1, dtype=np.float64)


def _require_biased(spec: BiasedCoinSpec) -> None:
    if spec.is_fair:
        raise ConfigurationError("a == b is the fair partial coin; use the unbiased construction")


def biased_coin_pmf(spec: BiasedCoinSpec, n_terms: int, *, max_terms: int | None = None) -> SignedPmf:
    """Coefficients of ``(a + b x)**mu`` up to ``x**n_terms``."""
    weights = sibuya_weights(spec.mu, n_terms, max_terms=max_terms)
    scale = spec.a**spec.mu
    p = np.empty(n_terms + 1)
    p[0] = scale
    p[1:] = scale * alternating_signs(n_terms) * weights.w * _geometric_factors(spec.ratio, n_terms)
    return SignedPmf(spec.mu, n_terms, _frozen(p))


def build_biased_g(
    spec: BiasedCoinSpec, shift: int, n_terms: int, *, max_terms: int | None = None
) -> NonnegPmf:
    """Coefficients of ``(1 - a**-mu (a - b x)**mu) x**k``: ``w_n (b/a)**n``."""
    _require_biased(spec)
    shift = check_shift(shift)
    weights = sibuya_weights(spec.mu, n_terms, max_terms=max_terms)
    probs = weights.w * _geometric_factors(spec.ratio, n_terms)
    return NonnegPmf(shift + 1, _frozen(probs), defect_mass(spec))


def build_biased_h(
    spec: BiasedCoinSpec, shift: int, n_terms: int, *, max_terms: int | None = None
) -> NonnegPmf:
    """Coefficients of ``((a + b x)**mu - a**-mu (a**2 - b**2 x**2)**mu) x**k``."""
    _require_biased(spec)
    shift = check_shift(shift)
    n_terms = check_terms(n_terms, max_terms)
    weights = sibuya_weights(spec.mu, 2 * n_terms, max_terms=_doubled_cap(max_terms))
    q = _difference_coefficients(weights.w, n_terms)
    q *= spec.a**spec.mu * _geometric_factors(spec.ratio, n_terms)
    return NonnegPmf(shift + 1, _frozen(q), defect_mass(spec))


def decompose(mu: float, shift: int = -1, n_terms: int = 100_000) -> Decomposition:
    """Matched ``(f, g, h)`` for the fair partial coin."""
    return Decomposition(
        f=partial_coin_pmf(mu, n_terms),
        g=build_g(mu, shift, n_terms),
        h=build_h(mu, shift, n_terms),
        shift=shift,
    )


def decompose_biased(spec: BiasedCoinSpec, shift: int = -1, n_terms: int = 100_000) -> Decomposition:
    return Decomposition(
        f=biased_coin_pmf(spec, n_terms),
        g=build_biased_g(spec, shift, n_terms),
        h=build_biased_h(spec, shift, n_terms),
        shift=shift,
    )


def product_residual(d: Decomposition) -> np.ndarray:
    """``h - f*g`` on every coefficient of ``h`` that the truncation determines."""
    n = len(d.g)
    if len(d.h) != n:
        raise ConfigurationError(f"g has {n} terms but h has {len(d.h)}")
    if d.g.support_offset != d.h.support_offset or d.g.support_offset != d.shift + 1:
        raise ConfigurationError("g and h must both start at shift + 1")
    if len(d.f) < n:
        raise ConfigurationError(f"f needs at least {n} coefficients, has {len(d.f)}")
    f = np.asarray(d.f.p[:n])
    g = np.asarray(d.g.probs)
    if n <= _DIRECT_CONVOLUTION_LIMIT:
        fg = np.convolve(f, g)[:n]
    else:
        fg = fftconvolve(f, g)[:n]
    return d.h.probs - fg


def verify_product(d: Decomposition, tol: float = 1e-12) -> bool:
    """True iff the truncated product ``f*g`` matches ``h`` within ``tol``."""
    return bool(np.max(np.abs(product_residual(d))) <= tol)
