"""SU-selecting algorithm and order statistics of selected SUs' rates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .channel import OnOffChannel, RateChain, p00, p01, stationary
from .errors import InsufficientCandidatesError, InvalidParameterError


@dataclass(frozen=True)
class CandidateSu:
    id: Hashable
    tau: float
    used_channel: OnOffChannel
    rate: float = 1.0

    def __post_init__(self):
        if self.tau < 0:
            raise InvalidParameterError("tau must be non-negative")
        if not self.rate > 0:
            raise InvalidParameterError("rate must be positive")


@dataclass(frozen=True)
class SelectionResult:
    chosen: tuple
    score: dict
    descending: bool


def _check_count(candidates, count):
    if count < 1:
        raise InvalidParameterError("count must be positive")
    if count > len(candidates):
        raise InsufficientCandidatesError(f"need {count} cooperators, only {len(candidates)} candidates")


def select_time_invariant(candidates: Sequence[CandidateSu], count: int) -> SelectionResult:
    """Pick the ``count`` SUs whose channels most likely turned busy.

    Ranked by descending P01(tau); ties go to the smaller id.
    """
    _check_count(candidates, count)
    score = {c.id: p01(c.used_channel, c.tau) for c in candidates}
    ranked = sorted(candidates, key=lambda c: (-score[c.id], c.id))
    return SelectionResult(tuple(c.id for c in ranked[:count]), score, True)


def select_time_varying(candidates: Sequence[CandidateSu], count: int) -> SelectionResult:
    """Pick the ``count`` SUs with the smallest expected forgone rate P00(tau)*R."""
    _check_count(candidates, count)
    score = {c.id: p00(c.used_channel, c.tau) * c.rate for c in candidates}
    ranked = sorted(candidates, key=lambda c: (score[c.id], c.id))
    return SelectionResult(tuple(c.id for c in ranked[:count]), score, False)


def _binomial_upper_tail(n: int, k: int, prob: float) -> float:
    return sum(math.comb(n, i) * prob**i * (1.0 - prob) ** (n - i) for i in range(k, n + 1))


def order_stat_rate_pmf(k: int, K: int, pi) -> np.ndarray:
    """Distribution of the k-th smallest of K i.i.d. draws over rate indices.

    ``k`` is 1-based.  Uses P{X_(k) <= R_n} = P{at least k draws <= R_n}.
    """
    if not 1 <= k <= K:
        raise InvalidParameterError(f"rank must satisfy 1 <= k <= K, got k={k}, K={K}")
    pi = np.asarray(pi, dtype=float)
    cdf = np.minimum(np.cumsum(pi), 1.0)
    at_most = np.array([_binomial_upper_tail(K, k, F) for F in cdf])
    at_most[-1] = 1.0
    return np.diff(np.concatenate(([0.0], at_most)))


def expected_selected_rate(k: int, K: int, rc: RateChain) -> float:
    """Mean rate of the SU holding rank ``k`` among ``K`` (ascending rate)."""
    pmf = order_stat_rate_pmf(k, K, stationary(rc))
    return float(np.dot(pmf, rc.rates))
