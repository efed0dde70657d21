"""Seeded experiment runners for single, paired and biased partial coins.

Random numbers
--------------
Every run is split into chunks of :data:`CHUNK_SIZE` flips.  Chunk ``j`` of
coin ``i`` draws from its own Philox-4x64 stream whose 128-bit key is
``mix64(seed) << 64 | i << 32 | j``, where ``mix64`` is the SplitMix64
finalizer.  Each raw 64-bit word ``x`` becomes the uniform
``((x >> 12) + 0.5) * 2**-52``; with 52 bits the largest value is
``1 - 2**-53``, so the result is never 0 or 1.  Results are merged
in chunk order, so the thread count never changes the output.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coefficients import check_exponent, check_terms
from .coupling import (
    TAIL,
    Cdf,
    TailPolicy,
    cdf_from_pmf,
    coupled_flips,
    exact_flip_probability,
)
from .decomposition import (
    BiasedCoinSpec,
    check_shift,
    build_biased_g,
    build_biased_h,
    build_g,
    build_h,
)
from .errors import DomainError

CHUNK_SIZE = 1 << 14
DEFAULT_TERMS = 100_000
DEFAULT_SHIFT = -1

_MASK64 = (1 << 64) - 1
# Redraw is pointless when almost every uniform lands in the tail.
_MIN_ACCEPTANCE = 1e-6


def mix64(x: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit mixer."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def check_seed(seed: int) -> int:
    if int(seed) != seed or not 0 <= seed <= _MASK64:
        raise DomainError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def words_to_uniform(raw: np.ndarray) -> np.ndarray:
    return ((raw >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0**-52


class UniformStream:
    """Uniforms on the open interval (0, 1) from one derived Philox stream."""

    def __init__(self, seed: int, coin: int = 0, chunk: int = 0):
        key = (mix64(check_seed(seed)) << 64) | (coin << 32) | chunk
        self._bits = np.random.Philox(key=key)

    def draw(self, n: int) -> np.ndarray:
        return words_to_uniform(self._bits.random_raw(n))


@dataclass(frozen=True)
class CoinSpec:
    mu: float
    n_terms: int = DEFAULT_TERMS
    shift: int = DEFAULT_SHIFT
    tail_policy: TailPolicy = TailPolicy.ZERO_DIFFERENCE

    def __post_init__(self):
        check_exponent(self.mu)
        check_terms(self.n_terms)
        check_shift(self.shift)
        object.__setattr__(self, "tail_policy", TailPolicy(self.tail_policy))


@dataclass(frozen=True)
class RunSummary:
    n_flips: int
    counts: dict[int, int]
    expectation: float
    tail_events: int
    exact_probability: float
    seed: int


@dataclass(frozen=True, eq=False)
class FlipTrace:
    """Per-flip records.  ``g_val``/``h_val`` hold :data:`TAIL` for tail draws."""

    index: np.ndarray
    u: np.ndarray
    g_val: np.ndarray
    h_val: np.ndarray
    f: np.ndarray
    tail: np.ndarray
    seed: int
    exact_probability: float
    outcomes: tuple[int, ...] = (0, 1)

    def __len__(self) -> int:
        return len(self.f)


@dataclass
class _ChunkResult:
    u: np.ndarray
    g_val: np.ndarray
    h_val: np.ndarray
    f: np.ndarray
    tail: np.ndarray


@dataclass(frozen=True)
class _CoinSampler:
    """A ready-to-flip coupled pair plus the rule that turns a difference into an outcome."""

    G: Cdf
    H: Cdf
    policy: TailPolicy
    complement: bool = False  # report 1 - diff, with tails counting as 1
    exact: float = field(init=False)

    def __post_init__(self):
        if self.policy is TailPolicy.REDRAW and min(self.G.last, self.H.last) < _MIN_ACCEPTANCE:
            raise DomainError("tail mass too large for the redraw policy")
        p = exact_flip_probability(self.G, self.H, self.policy)
        object.__setattr__(self, "exact", 1.0 - p if self.complement else p)

    def flip_chunk(self, stream: UniformStream, n: int) -> _ChunkResult:
        u = stream.draw(n)
        g_val, h_val, diff, tail = coupled_flips(self.G, self.H, u)
        hit_tail = tail.copy()
        if self.policy is TailPolicy.REDRAW:
            pending = np.flatnonzero(tail)
            while pending.size:
                u[pending] = stream.draw(pending.size)
                g_val[pending], h_val[pending], diff[pending], tail[pending] = coupled_flips(
                    self.G, self.H, u[pending]
                )
                pending = pending[tail[pending]]
        if self.complement:
            f = np.where(tail, 1, 1 - diff)
        else:
            f = diff
        return _ChunkResult(u, g_val, h_val, f.astype(np.int64), hit_tail)


def _chunk_sizes(n_flips: int) -> list[int]:
    full, rest = divmod(n_flips, CHUNK_SIZE)
    return [CHUNK_SIZE] * full + ([rest] if rest else [])


def _check_flips(n_flips: int) -> int:
    if int(n_flips) != n_flips or n_flips < 1:
        raise DomainError(f"number of flips must be a positive integer, got {n_flips!r}")
    return int(n_flips)


def _map_chunks(fn, n_flips: int, threads: int) -> list:
    jobs = list(enumerate(_chunk_sizes(n_flips)))
    if threads <= 1 or len(jobs) == 1:
        return [fn(j, n) for j, n in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _tally(values: np.ndarray, outcomes: tuple[int, ...]) -> Counter:
    counts = Counter({v: 0 for v in outcomes})
    vals, freq = np.unique(values, return_counts=True)
    counts.update(dict(zip(vals.tolist(), freq.tolist())))
    return counts


def _summary(counts: Counter, total: int, n_flips: int, tail_events: int, exact: float, seed: int) -> RunSummary:
    return RunSummary(
        n_flips=n_flips,
        counts=dict(sorted(counts.items())),
        expectation=total / n_flips,
        tail_events=tail_events,
        exact_probability=exact,
        seed=seed,
    )


def _run(sampler: _CoinSampler, n_flips: int, seed: int, trace: bool, threads: int):
    n_flips = _check_flips(n_flips)
    seed = check_seed(seed)
    outcomes = (0, 1)

    def work(j, n):
        res = sampler.flip_chunk(UniformStream(seed, 0, j), n)
        part = (_tally(res.f, outcomes), int(res.f.sum()), int(res.tail.sum()))
        return part, (res if trace else None)

    results = _map_chunks(work, n_flips, threads)
    counts, total, tails = Counter(), 0, 0
    for (c, t, k), _ in results:
        counts.update(c)
        total += t
        tails += k
    summary = _summary(counts, total, n_flips, tails, sampler.exact, seed)
    if not trace:
        return summary, None
    chunks = [res for _, res in results]
    flip_trace = FlipTrace(
        index=np.arange(n_flips),
        u=np.concatenate([c.u for c in chunks]),
        g_val=np.concatenate([c.g_val for c in chunks]),
        h_val=np.concatenate([c.h_val for c in chunks]),
        f=np.concatenate([c.f for c in chunks]),
        tail=np.concatenate([c.tail for c in chunks]),
        seed=seed,
        exact_probability=sampler.exact,
        outcomes=outcomes,
    )
    return summary, flip_trace


def _single_sampler(spec: CoinSpec) -> _CoinSampler:
    g = build_g(spec.mu, spec.shift, spec.n_terms)
    h = build_h(spec.mu, spec.shift, spec.n_terms)
    return _CoinSampler(cdf_from_pmf(g), cdf_from_pmf(h), spec.tail_policy)


def run_single(
    spec: CoinSpec, n_flips: int, seed: int, *, trace: bool = False, threads: int = 1
) -> tuple[RunSummary, FlipTrace | None]:
    """Flip one partial coin ``n_flips`` times.

    Returns the summary and, when ``trace`` is set, the per-flip records.
    """
    return _run(_single_sampler(spec), n_flips, seed, trace, threads)


def run_pair(spec1: CoinSpec, spec2: CoinSpec, n_flips: int, seed: int, *, threads: int = 1) -> RunSummary:
    """Flip two independent partial coins together; each outcome is 0, 1 or 2.

    The coins use disjoint stream families (coin index 0 and 1), so they are
    independent.  ``exact_probability`` is the exact expected sum.
    """
    n_flips = _check_flips(n_flips)
    seed = check_seed(seed)
    samplers = (_single_sampler(spec1), _single_sampler(spec2))
    outcomes = (0, 1, 2)

    def work(j, n):
        first = samplers[0].flip_chunk(UniformStream(seed, 0, j), n)
        second = samplers[1].flip_chunk(UniformStream(seed, 1, j), n)
        f = first.f + second.f
        return _tally(f, outcomes), int(f.sum()), int((first.tail | second.tail).sum())

    counts, total, tails = Counter(), 0, 0
    for c, t, k in _map_chunks(work, n_flips, threads):
        counts.update(c)
        total += t
        tails += k
    exact = samplers[0].exact + samplers[1].exact
    return _summary(counts, total, n_flips, tails, exact, seed)


def run_biased(
    spec: BiasedCoinSpec,
    n_flips: int,
    seed: int,
    *,
    n_terms: int = DEFAULT_TERMS,
    shift: int = DEFAULT_SHIFT,
    tail_policy: TailPolicy = TailPolicy.ZERO_DIFFERENCE,
    trace: bool = False,
    threads: int = 1,
) -> tuple[RunSummary, FlipTrace | None]:
    """Flip a biased partial coin ``(a + b x)**mu``.

    With ``a > b`` the outcome is ``H^-1 - G^-1`` (tail -> 0).  If the raw
    inputs had ``a < b`` the ``BiasedCoinSpec`` is stored swapped and the outcome is
    ``1 - (H^-1 - G^-1)`` (tail -> 1).  ``a == b`` is the fair partial coin.
    """
    if spec.is_fair:
        return run_single(CoinSpec(spec.mu, n_terms, shift, tail_policy), n_flips, seed, trace=trace, threads=threads)
    n_terms = check_terms(n_terms)
    g = build_biased_g(spec, shift, n_terms)
    h = build_biased_h(spec, shift, n_terms)
    sampler = _CoinSampler(cdf_from_pmf(g), cdf_from_pmf(h), TailPolicy(tail_policy), complement=spec.swapped)
    return _run(sampler, n_flips, seed, trace, threads)


def summarize(trace: FlipTrace) -> RunSummary:
    """Rebuild a :class:`RunSummary` from per-flip records."""
    if len(trace) == 0:
        raise DomainError("cannot summarize an empty trace")
    n = len(trace)
    return _summary(
        _tally(trace.f, trace.outcomes),
        int(trace.f.sum()),
        n,
        int(trace.tail.sum()),
        trace.exact_probability,
        trace.seed,
    )


def monte_carlo_bound(p: float, n: int, sigmas: float = 4.0) -> float:
    """``sigmas`` standard errors of a Bernoulli(p) mean over ``n`` flips."""
    return sigmas * math.sqrt(p * (1.0 - p) / n)


__all__ = [
    "CHUNK_SIZE",
    "TAIL",
    "CoinSpec",
    "FlipTrace",
    "RunSummary",
    "UniformStream",
    "mix64",
    "monte_carlo_bound",
    "run_biased",
    "run_pair",
    "run_single",
    "summarize",
]
