"""The Sibuya distribution: PMF, CDF and two independent samplers.

``Y`` is the index of the first success in independent Bernoulli trials
where trial ``k`` succeeds with probability ``alpha/k``.  Its mean is
infinite for every ``0 < alpha < 1``; the tail decays like
``k**-alpha / Gamma(1 - alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import poch

from .coefficients import SibuyaWeights
from .errors import DomainError, TailOverflow

#: Default trial cap for :func:`sample_direct`.
DEFAULT_K_MAX = 10**9


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0,1), got {alpha!r}")
    return alpha


def _check_k(k: int) -> int:
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k!r}")
    return int(k)


def pmf(alpha: float, k: int) -> float:
    """``P(Y = k)`` via ``p_1 = alpha``, ``p_{k+1} = p_k (k - alpha)/(k + 1)``."""
    alpha = _check_alpha(alpha)
    k = _check_k(k)
    j = np.arange(1, k, dtype=np.float64)
    return alpha * float(np.prod((j - alpha) / (j + 1.0)))


def tail(alpha: float, k: int) -> float:
    """``P(Y > k) = prod_{j<=k} (j - alpha)/j``."""
    alpha = _check_alpha(alpha)
    k = _check_k(k)
    j = np.arange(1, k + 1, dtype=np.float64)
    return float(np.prod((j - alpha) / j))


def cdf(alpha: float, k: int) -> float:
    """``P(Y <= k)``, computed as one minus the tail product."""
    return 1.0 - tail(alpha, k)


def cdf_closed_form(alpha: float, k: int) -> float:
    """``1 - Gamma(k - alpha + 1) / (k Gamma(k) Gamma(1 - alpha))``.

    Only used to cross-check :func:`cdf`.  The ratio ``Gamma(k + 1 - alpha)/Gamma(k)``
    is a Pochhammer symbol; differencing ``lgamma`` values instead loses
    about ``1e-9`` to cancellation near ``k = 10**6``.
    """
    alpha = _check_alpha(alpha)
    k = _check_k(k)
    return 1.0 - poch(k, 1.0 - alpha) / (k * math.gamma(1.0 - alpha))


def sample_direct(alpha: float, rng: np.random.Generator, k_max: int = DEFAULT_K_MAX) -> int:
    """Run Bernoulli(alpha/k) trials until the first success and return ``k``.

    Raises :class:`TailOverflow` when trial ``k_max`` fails.  The expected
    number of trials is infinite, so keep ``k_max`` small in bulk use.
    """
    alpha = _check_alpha(alpha)
    for k in range(1, k_max + 1):
        if rng.random() < alpha / k:
            return k
    raise TailOverflow(k_max)


def sample_direct_many(
    alpha: float, rng: np.random.Generator, size: int, k_max: int = DEFAULT_K_MAX
) -> np.ndarray:
    """Vectorised :func:`sample_direct`; draws that overflow ``k_max`` are ``-1``."""
    alpha = _check_alpha(alpha)
    out = np.full(size, -1, dtype=np.int64)
    alive = np.arange(size)
    k = 1
    while alive.size and k <= k_max:
        hit = rng.random(alive.size) < alpha / k
        out[alive[hit]] = k
        alive = alive[~hit]
        k += 1
    return out


def sample_invcdf(weights: SibuyaWeights, u: float) -> int | None:
    """Smallest ``k`` with ``F_k >= u``; ``None`` if ``u`` exceeds ``F_N``."""
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must be in (0,1), got {u!r}")
    idx = int(np.searchsorted(weights.cumulative, u, side="left"))
    if idx == weights.n_terms:
        return None
    return idx + 1


@dataclass(frozen=True)
class SibuyaDist:
    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha)

    def pmf(self, k: int) -> float:
        return pmf(self.alpha, k)

    def cdf(self, k: int) -> float:
        return cdf(self.alpha, k)

    def sample(self, rng: np.random.Generator, k_max: int = DEFAULT_K_MAX) -> int:
        return sample_direct(self.alpha, rng, k_max)
