"""Comonotone inverse-CDF coupling of the ``(g, h)`` pair.

A single uniform ``u`` is pushed through both quantile functions and the
flip is ``H^-1(u) - G^-1(u)``.  When the CDFs interlace,
``H(m) <= G(m) <= H(m + 1)`` for every ``m``, that difference is always 0
or 1 and its mean is ``sum_m (G(m) - H(m))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .decomposition import NonnegPmf
from .errors import ConfigurationError, DomainError, InterlacingError

#: Marker used in integer arrays for a draw beyond the defined CDF range.
#: Support values are never negative because the shift is at least -1.
TAIL = -1

#: Slack allowed in the interlacing inequalities for rounding in the cumulative sums.
INTERLACING_ATOL = 1e-12


class TailPolicy(enum.Enum):
    """What to do with a uniform that falls beyond a truncated or defective CDF."""

    ZERO_DIFFERENCE = "zero"
    """Report the policy value for that flip and count a tail event."""
    REDRAW = "redraw"
    """Reject the uniform and draw again; samples the conditional law instead."""


@dataclass(frozen=True, eq=False)
class Cdf:
    support_offset: int
    values: np.ndarray
    total_mass: float = 1.0

    def __len__(self) -> int:
        return len(self.values)

    @property
    def last(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class CoupledSample:
    """One coupled draw.  ``g_val``/``h_val`` are ``None`` for a tail event.

    Under :attr:`TailPolicy.REDRAW` a tail sample has ``f = None``: the
    caller is expected to draw a fresh uniform.
    """

    u: float
    g_val: int | None
    h_val: int | None
    f: int | None
    tail: bool


def cdf_from_pmf(pmf: NonnegPmf) -> Cdf:
    values = np.cumsum(pmf.probs)
    values.flags.writeable = False
    return Cdf(pmf.support_offset, values, pmf.total_mass)


def _check_u(u: float) -> None:
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must be in (0,1), got {u!r}")


def invert(cdf: Cdf, u: float) -> int | None:
    """Smallest support value ``v`` with ``CDF(v) >= u``, or ``None`` past the end."""
    _check_u(u)
    idx = int(np.searchsorted(cdf.values, u, side="left"))
    if idx == len(cdf.values):
        return None
    return cdf.support_offset + idx


def invert_many(cdf: Cdf, u: np.ndarray) -> np.ndarray:
    """Vectorised :func:`invert`; tail draws come back as :data:`TAIL`."""
    u = np.asarray(u, dtype=np.float64)
    if u.size and not (np.all(u > 0.0) and np.all(u < 1.0)):
        raise DomainError("uniforms must lie in (0,1)")
    idx = np.searchsorted(cdf.values, u, side="left")
    return np.where(idx == len(cdf.values), TAIL, idx + cdf.support_offset)


def _check_pair(G: Cdf, H: Cdf) -> None:
    if G.support_offset != H.support_offset:
        raise ConfigurationError(
            f"support offsets differ: G starts at {G.support_offset}, H at {H.support_offset}"
        )
    if len(G) != len(H):
        raise ConfigurationError(f"truncations differ: G has {len(G)} terms, H has {len(H)}")


def coupled_flip(G: Cdf, H: Cdf, u: float, policy: TailPolicy = TailPolicy.ZERO_DIFFERENCE) -> CoupledSample:
    _check_pair(G, H)
    g_val = invert(G, u)
    h_val = invert(H, u)
    if g_val is None or h_val is None:
        f = 0 if policy is TailPolicy.ZERO_DIFFERENCE else None
        return CoupledSample(u, g_val, h_val, f, True)
    return CoupledSample(u, g_val, h_val, h_val - g_val, False)


def coupled_flips(G: Cdf, H: Cdf, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised coupling.

    Returns ``(g_val, h_val, diff, tail)``; ``diff`` is zero wherever
    ``tail`` is set, and the inverses there may be :data:`TAIL`.
    """
    _check_pair(G, H)
    g_val = invert_many(G, u)
    h_val = invert_many(H, u)
    tail = (g_val == TAIL) | (h_val == TAIL)
    diff = np.where(tail, 0, h_val - g_val)
    return g_val, h_val, diff, tail


def interlacing_check(G: Cdf, H: Cdf, atol: float = INTERLACING_ATOL) -> bool:
    """True iff ``H(m) <= G(m) <= H(m + 1)`` wherever both sides are defined."""
    if G.support_offset != H.support_offset or len(G) != len(H):
        return False
    g, h = G.values, H.values
    return bool(np.all(h <= g + atol) and np.all(g[:-1] <= h[1:] + atol))


def exact_flip_probability(
    G: Cdf, H: Cdf, policy: TailPolicy = TailPolicy.ZERO_DIFFERENCE
) -> float:
    """Exact mean of the coupled flip over ``u ~ U(0,1)``.

    Under zero-difference the flip is 1 exactly on ``(H(m), G(m)]`` for
    ``m < N - 1``; on the last interval ``H^-1`` is already a tail event.
    Under redraw the same measure is conditioned on ``u <= H(N - 1)``.
    """
    _check_pair(G, H)
    if not interlacing_check(G, H):
        raise InterlacingError("G and H do not interlace; the flip is not a Bernoulli variable")
    g, h = G.values, H.values
    p = math.fsum(g[:-1] - h[:-1])
    if policy is TailPolicy.REDRAW:
        return p / min(G.last, H.last)
    return p
