"""Licensed-channel models: ON/OFF primary-user occupancy and FSMC data rates.

A licensed channel alternates between ON (primary user present) and OFF
(free for secondary users) with exponentially distributed sojourns.  Its
data rate evolves as a finite-state Markov chain that makes one transition
every ``dwell`` seconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateChainError, InvalidParameterError

ON = True
OFF = False

_ROW_TOL = 1e-12


@dataclass(frozen=True)
class OnOffChannel:
    """Two-state continuous-time occupancy process.

    Attributes:
        mu_on: rate parameter of the ON sojourn (1/s).
        mu_off: rate parameter of the OFF sojourn (1/s).
    """

    mu_on: float
    mu_off: float

    def __post_init__(self):
        for name in ("mu_on", "mu_off"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidParameterError(f"{name} must be a positive finite rate, got {value!r}")

    @property
    def beta(self) -> float:
        """Total switching rate mu_on + mu_off."""
        return self.mu_on + self.mu_off

    @property
    def mean_off(self) -> float:
        return 1.0 / self.mu_off

    @classmethod
    def from_availability(cls, p: float, mu_off: float) -> "OnOffChannel":
        """Build the channel whose availability is ``p`` for a given OFF rate."""
        if not 0.0 < p < 1.0:
            raise InvalidParameterError(f"availability must lie in (0, 1), got {p!r}")
        return cls(mu_on=mu_off * p / (1.0 - p), mu_off=mu_off)


def availability(ch: OnOffChannel) -> float:
    """Long-run fraction of time the channel is OFF (usable by SUs)."""
    return ch.mu_on / (ch.mu_off + ch.mu_on)


def p01(ch: OnOffChannel, tau: float) -> float:
    """Probability the channel is ON ``tau`` seconds after being seen OFF."""
    if tau < 0:
        raise InvalidParameterError(f"tau must be non-negative, got {tau!r}")
    p = availability(ch)
    return p - p * math.exp(-ch.beta * tau)


def p00(ch: OnOffChannel, tau: float) -> float:
    """Complement of :func:`p01`."""
    return 1.0 - p01(ch, tau)


@dataclass(frozen=True)
class RateChain:
    """Finite-state Markov chain over channel data rates.

    ``rates`` are in bytes/second and strictly increasing; state ``i`` of the
    chain (0-based) carries ``rates[i]``.  One transition happens per
    ``dwell`` seconds.
    """

    rates: tuple[float, ...]
    transition_matrix: np.ndarray = field(compare=False)
    dwell: float = 5e-3

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "rates", rates)
        if not rates:
            raise InvalidParameterError("rate chain needs at least one state")
        if any(r <= 0 for r in rates):
            raise InvalidParameterError("rates must be positive")
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise InvalidParameterError("rates must be strictly increasing")
        P = np.array(self.transition_matrix, dtype=float)
        m = len(rates)
        if P.shape != (m, m):
            raise InvalidParameterError(f"transition matrix must be {m}x{m}, got {P.shape}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1.0)) > _ROW_TOL:
            raise InvalidParameterError("transition matrix must be row-stochastic")
        P.setflags(write=False)
        object.__setattr__(self, "transition_matrix", P)
        if not self.dwell > 0:
            raise InvalidParameterError("dwell must be positive")

    @property
    def size(self) -> int:
        return len(self.rates)

    @property
    def max_rate(self) -> float:
        return self.rates[-1]

    def __eq__(self, other):
        if not isinstance(other, RateChain):
            return NotImplemented
        return (
            self.rates == other.rates
            and self.dwell == other.dwell
            and np.array_equal(self.transition_matrix, other.transition_matrix)
        )

    def __hash__(self):
        return hash((self.rates, self.dwell, self.transition_matrix.tobytes()))


def birth_death_chain(rates, dwell: float = 5e-3, up: float = 0.5) -> RateChain:
    """Rate chain that steps to an adjacent rate each epoch.

    Moves up with probability ``up`` and down otherwise; a move past either
    end of the grid leaves the state unchanged.
    """
    m = len(rates)
    P = np.zeros((m, m))
    if m == 1:
        P[0, 0] = 1.0
    else:
        for i in range(m):
            P[i, min(i + 1, m - 1)] += up
            P[i, max(i - 1, 0)] += 1.0 - up
    return RateChain(tuple(rates), P, dwell)


def constant_chain(rate: float, dwell: float = 5e-3) -> RateChain:
    return RateChain((rate,), np.ones((1, 1)), dwell)


def default_rate_chain() -> RateChain:
    """Ten rates from 0.1 to 1.0 MB/s stepping every 5 ms."""
    return birth_death_chain([0.1e6 * i for i in range(1, 11)], dwell=5e-3)


def stationary(rc: RateChain | np.ndarray) -> np.ndarray:
    """Stationary distribution of the rate chain.

    Solves the balance equations with one equation swapped for the
    normalisation constraint.  A singular system means the chain has more
    than one closed class and no unique answer.
    """
    P = rc.transition_matrix if isinstance(rc, RateChain) else np.asarray(rc, dtype=float)
    m = P.shape[0]
    A = P.T - np.eye(m)
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateChainError("chain has no unique stationary distribution") from exc
    if np.linalg.cond(A) > 1e12 or np.max(np.abs(pi @ P - pi)) > 1e-10 or np.min(pi) < -1e-10:
        raise DegenerateChainError("chain has no unique stationary distribution")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


@dataclass(frozen=True)
class ChannelTrajectory:
    """Piecewise-constant channel path.

    Epoch ``i`` starts at ``times[i]`` and lasts until ``times[i+1]`` (or the
    horizon).  ``occupancy`` is True while ON; ``rate_state`` is 0-based.
    """

    times: np.ndarray
    occupancy: np.ndarray
    rate_state: np.ndarray
    horizon: float

    @property
    def epochs(self) -> list[tuple[float, bool, int]]:
        return list(zip(self.times.tolist(), self.occupancy.tolist(), self.rate_state.tolist()))

    def durations(self) -> np.ndarray:
        return np.diff(np.append(self.times, self.horizon))

    def off_fraction(self) -> float:
        d = self.durations()
        return float(d[~self.occupancy].sum() / self.horizon)

    def sojourns(self, state: bool) -> np.ndarray:
        """Lengths of complete ON (``state=True``) or OFF sojourns.

        The first and last runs are censored by the window and dropped.
        """
        flips = np.flatnonzero(np.diff(self.occupancy.astype(np.int8)) != 0) + 1
        starts = self.times[flips]
        lengths = np.diff(starts)
        kinds = self.occupancy[flips[:-1]]
        return lengths[kinds == state]


def sample_trajectory(ch: OnOffChannel, rc: RateChain, horizon: float, seed: int) -> ChannelTrajectory:
    """Sample an occupancy/rate path on ``[0, horizon)``.

    The initial occupancy and rate state are drawn from their stationary
    laws.  Each rate step and each occupancy switch opens a new epoch.
    """
    if not horizon > 0:
        raise InvalidParameterError("horizon must be positive")
    rng = np.random.default_rng(seed)

    # occupancy switch times
    on = bool(rng.random() >= availability(ch))
    switch_times = []
    states = [on]
    t = 0.0
    state = on
    while True:
        t += rng.exponential(1.0 / (ch.mu_off if state == OFF else ch.mu_on))
        if t >= horizon:
            break
        state = not state
        switch_times.append(t)
        states.append(state)

    # rate steps on the dwell grid
    pi = stationary(rc)
    n_steps = int(math.ceil(horizon / rc.dwell)) - 1
    rate_path = np.empty(n_steps + 1, dtype=np.int64)
    rate_path[0] = rng.choice(rc.size, p=pi)
    if n_steps > 0:
        cdf = np.cumsum(rc.transition_matrix, axis=1)
        u = rng.random(n_steps)
        for i in range(n_steps):
            row = cdf[rate_path[i]]
            rate_path[i + 1] = min(int(np.searchsorted(row, u[i], side="right")), rc.size - 1)
    rate_times = np.arange(n_steps + 1) * rc.dwell

    # merge both event streams
    switch_arr = np.asarray(switch_times, dtype=float)
    times = np.union1d(np.concatenate(([0.0], switch_arr)), rate_times)
    occ_idx = np.searchsorted(switch_arr, times, side="right")
    occupancy = np.asarray(states, dtype=bool)[occ_idx]
    rate_idx = np.searchsorted(rate_times, times, side="right") - 1
    return ChannelTrajectory(times, occupancy, rate_path[rate_idx], float(horizon))
