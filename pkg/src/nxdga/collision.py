"""Probability that ``n`` uniform draws from ``L`` words repeat one word ``t`` times.

``p_t_collision`` evaluates the Diaconis-Mosteller style approximation

    p = 1 - exp(-L**(1 - t) * (n * exp(-n / (L t)) * (1 - n / (L (t + 1)))**(-1/t))**t / t!)

in log space. Two exact regimes override it: ``n < t`` (no t-fold repeat is
possible, p = 0) and ``n > (t - 1) L`` (pigeonhole, p = 1). Past
``n >= L (t + 1)`` the formula is undefined and the result saturates at 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Tuple

import numpy as np


class InvalidParams(ValueError):
    pass


@dataclass(frozen=True)
class CollisionParams:
    """``k = len(sizes)`` dictionaries of the given sizes, strike threshold ``t``."""

    sizes: Tuple[int, ...]
    t: int = 2

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if not sizes:
            raise InvalidParams("need at least one dictionary")
        if any(s < 1 for s in sizes):
            raise InvalidParams("dictionary sizes must be >= 1")
        if int(self.t) != self.t or self.t < 2:
            raise InvalidParams("t must be an integer >= 2")

    @property
    def k(self) -> int:
        return len(self.sizes)


class CollisionEstimate(NamedTuple):
    p: float
    saturated: bool


class AnyDictionary(NamedTuple):
    sum_form: float
    product_form: float


class OracleResult(NamedTuple):
    p: float
    stderr: float


def _check(L, n, t):
    if int(L) != L or L < 1:
        raise InvalidParams(f"L must be a positive integer, got {L!r}")
    if int(n) != n or n < 0:
        raise InvalidParams(f"n must be a non-negative integer, got {n!r}")
    if int(t) != t or t < 2:
        raise InvalidParams(f"t must be an integer >= 2, got {t!r}")


def p_t_collision(L: int, n: int, t: int, *, full: bool = False):
    """Approximate probability of a ``t``-fold repeat in ``n`` draws from ``L`` words.

    With ``full=True`` returns a :class:`CollisionEstimate` whose ``saturated``
    flag marks results forced to 1 outside the approximation's range.
    """
    _check(L, n, t)
    if n < t:
        est = CollisionEstimate(0.0, False)
    elif n > (t - 1) * L or n >= L * (t + 1):
        est = CollisionEstimate(1.0, True)
    else:
        log_rate = ((1 - t) * math.log(L)
                    + t * (math.log(n) - n / (L * t))
                    - math.log1p(-n / (L * (t + 1)))
                    - math.lgamma(t + 1))
        p = -math.expm1(-math.exp(log_rate))
        est = CollisionEstimate(min(max(p, 0.0), 1.0), False)
    return est if full else est.p


def p_any_dictionary(params: CollisionParams, n: int) -> AnyDictionary:
    """t-collision probability across independent dictionaries.

    ``sum_form`` is the plain sum of per-dictionary probabilities, clamped to 1;
    ``product_form`` is ``1 - prod(1 - p_i)``.
    """
    ps = [p_t_collision(L, n, params.t) for L in params.sizes]
    total = min(sum(ps), 1.0)
    miss = 1.0
    for p in ps:
        miss *= 1.0 - p
    return AnyDictionary(total, 1.0 - miss)


def n_for_probability(L: int, t: int, p_target: float) -> int:
    """Smallest ``n`` with ``p_t_collision(L, n, t) >= p_target`` (binary search)."""
    _check(L, 0, t)
    if not 0.0 < p_target < 1.0:
        raise InvalidParams("p_target must lie strictly between 0 and 1")
    lo, hi = t, (t - 1) * L + 1  # p(hi) == 1 by pigeonhole
    while lo < hi:
        mid = (lo + hi) // 2
        if p_t_collision(L, mid, t) >= p_target:
            hi = mid
        else:
            lo = mid + 1
    return lo


def _first_hit(draws: np.ndarray, t: int) -> np.ndarray:
    """Per row, 1-based draw index at which some value first occurs ``t`` times (0 = never)."""
    trials, n = draws.shape
    if n < t:
        return np.zeros(trials, dtype=np.int64)
    order = np.argsort(draws, axis=1, kind="stable")
    sv = np.take_along_axis(draws, order, axis=1)
    # in a stable sort a value's occurrences sit together in draw order, so an
    # element equal to the one t-1 places before it is at least its t-th occurrence
    hit = sv[:, t - 1:] == sv[:, :n - t + 1]
    pos = np.where(hit, order[:, t - 1:], n)
    first = pos.min(axis=1) + 1
    first[first > n] = 0
    return first


def stopping_times(params: CollisionParams, n_max: int, trials: int, seed: int,
                   chunk: int = 20_000) -> np.ndarray:
    """Record index (1-based) of the first t-collision in each simulated run.

    Each record draws one word from every dictionary. Runs with no collision
    within ``n_max`` records report 0. Chunks draw from independent child
    streams of ``seed``; output is deterministic for a fixed ``(seed, chunk)``.
    """
    if trials < 1:
        raise InvalidParams("trials must be >= 1")
    if n_max < 0:
        raise InvalidParams("n_max must be >= 0")
    out = np.zeros(trials, dtype=np.int64)
    n_chunks = -(-trials // chunk)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    for c, ss in enumerate(streams):
        rng = np.random.Generator(np.random.PCG64(ss))
        lo = c * chunk
        size = min(chunk, trials - lo)
        best = np.zeros(size, dtype=np.int64)
        for L in params.sizes:
            dtype = np.int16 if L < 2 ** 15 else np.int64
            draws = rng.integers(0, L, size=(size, n_max), dtype=dtype)
            first = _first_hit(draws, params.t)
            take = (first > 0) & ((best == 0) | (first < best))
            best[take] = first[take]
        out[lo:lo + size] = best
    return out


def monte_carlo_oracle(params: CollisionParams, n: int, trials: int, seed: int) -> OracleResult:
    """Empirical probability that ``n`` records contain a t-collision in some dictionary."""
    if int(n) != n or n < 0:
        raise InvalidParams("n must be a non-negative integer")
    first = stopping_times(params, int(n), trials, seed)
    p = float(np.mean(first > 0))
    return OracleResult(p, math.sqrt(p * (1.0 - p) / trials))


def monte_carlo_curve(params: CollisionParams, n_max: int, trials: int,
                      seed: int) -> np.ndarray:
    """Empirical P(collision within n records) for n = 0..n_max from one simulation."""
    first = stopping_times(params, n_max, trials, seed)
    hits = np.bincount(first[first > 0], minlength=n_max + 1)
    return np.cumsum(hits) / trials


def exact_birthday(L: int, n: int) -> float:
    """Exact P(some repeat) for ``n`` draws from ``L`` equiprobable words."""
    _check(L, n, 2)
    if n > L:
        return 1.0
    miss = 1.0
    for i in range(n):
        miss *= 1.0 - i / L
    return 1.0 - miss


def plan_table(L: int, t_values: Sequence[int], p_target: float):
    """Rows ``(L, t, n, p)`` giving the smallest n reaching ``p_target`` per threshold."""
    rows = []
    for t in t_values:
        n = n_for_probability(L, t, p_target)
        rows.append((L, t, n, p_t_collision(L, n, t)))
    return rows
