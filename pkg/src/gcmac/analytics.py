"""Closed-form throughput and sensing-overhead models.

Four regimes are covered: saturated or non-saturated SU traffic, each over
a time-invariant (single rate) or time-varying (FSMC rate) channel.  All
volumes are bytes per discovery cycle; :class:`MetricsReport` also carries
the same figures divided by ``T_r * R_max`` for dimensionless comparison.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .channel import OnOffChannel, RateChain, availability, default_rate_chain, stationary
from .detection import DetectorConfig, fused_pd, fused_pf, pf_single, with_target_pd
from .errors import InvalidParameterError, UnstableQueueError
from .selection import order_stat_rate_pmf

RATE_PMF_POLICIES = ("exact", "paper-literal")
OVERHEAD_MODELS = ("cumulative", "elapsed")


class Regime(enum.Enum):
    SAT_TI = "sat-ti"
    SAT_TV = "sat-tv"
    NONSAT_TI = "nonsat-ti"
    NONSAT_TV = "nonsat-tv"

    @property
    def saturated(self) -> bool:
        return self in (Regime.SAT_TI, Regime.SAT_TV)

    @property
    def time_varying(self) -> bool:
        return self in (Regime.SAT_TV, Regime.NONSAT_TV)

    @classmethod
    def parse(cls, text: str) -> "Regime":
        key = text.lower().replace("x", "-").replace("_", "-")
        for r in cls:
            if r.value == key:
                return r
        raise InvalidParameterError(f"unknown regime {text!r}")


@dataclass(frozen=True)
class TrafficParams:
    """Poisson packet traffic of one SU.

    Give either the offered ``load`` (rho) or the ``arrival_rate`` in
    packets/second; the other follows from the regime's mean service time.
    """

    load: float | None = None
    arrival_rate: float | None = None

    def __post_init__(self):
        if (self.load is None) == (self.arrival_rate is None):
            raise InvalidParameterError("traffic needs exactly one of load or arrival_rate")
        if self.load is not None:
            if self.load < 0:
                raise InvalidParameterError("load must be non-negative")
            if self.load >= 1:
                raise UnstableQueueError(f"traffic load {self.load} must be below 1")
        elif self.arrival_rate < 0:
            raise InvalidParameterError("arrival rate must be non-negative")

    def resolve(self, mean_service: float) -> tuple[float, float]:
        """Return ``(arrival_rate, load)`` for the given mean service time."""
        if self.load is not None:
            return self.load / mean_service, self.load
        rho = self.arrival_rate * mean_service
        if rho >= 1:
            raise UnstableQueueError(f"traffic load {rho:.4g} must be below 1")
        return self.arrival_rate, rho


@dataclass(frozen=True)
class Scenario:
    """Full description of one network configuration.

    ``rate`` is the fixed data rate of the time-invariant case; the
    time-varying case uses ``rate_chain``.  ``pd``/``pf`` are the
    single-SU detection and false-alarm probabilities.
    """

    channels: int = 10
    sus: int = 20
    teams: int = 1
    team_size: int = 1
    channel: OnOffChannel = field(default_factory=lambda: OnOffChannel(0.01, 0.01))
    rate: float = 1e6
    rate_chain: RateChain = field(default_factory=default_rate_chain)
    sense_duration: float = 1e-3
    pd: float = 0.9
    pf: float = 0.1
    pf_threshold: float = 0.05
    pd_threshold: float = 0.9
    traffic: TrafficParams | None = None
    r_use: float | None = None
    packet_length: float = 1000.0
    rate_pmf: str = "exact"
    overhead_model: str = "cumulative"
    detector: DetectorConfig | None = None

    def __post_init__(self):
        if self.channels < 1 or self.sus < 1:
            raise InvalidParameterError("need at least one channel and one SU")
        if not 1 <= self.teams <= self.channels:
            raise InvalidParameterError(f"teams must lie in 1..{self.channels}, got {self.teams}")
        if self.team_size < 1:
            raise InvalidParameterError("team size must be >= 1")
        for name in ("pd", "pf", "pf_threshold", "pd_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameterError(f"{name} must be a probability, got {v!r}")
        if not self.rate > 0 or not self.packet_length > 0:
            raise InvalidParameterError("rate and packet length must be positive")
        if self.sense_duration < 0:
            raise InvalidParameterError("sensing duration must be non-negative")
        if self.rate_pmf not in RATE_PMF_POLICIES:
            raise InvalidParameterError(f"rate_pmf must be one of {RATE_PMF_POLICIES}")
        if self.overhead_model not in OVERHEAD_MODELS:
            raise InvalidParameterError(f"overhead_model must be one of {OVERHEAD_MODELS}")

    @property
    def availability(self) -> float:
        return availability(self.channel)

    @property
    def rounds(self) -> int:
        """Group-sensing rounds needed to cover every channel."""
        return math.ceil(self.channels / self.teams)

    @property
    def cooperators(self) -> int:
        return self.teams * self.team_size

    @property
    def transmission_time(self) -> float:
        """Mean usable transmission time T_r = 1/mu_off."""
        return 1.0 / self.channel.mu_off

    def with_availability(self, p: float) -> "Scenario":
        return replace(self, channel=OnOffChannel.from_availability(p, self.channel.mu_off))

    def with_teams(self, teams: int, team_size: int) -> "Scenario":
        return replace(self, teams=teams, team_size=team_size)

    def time_invariant_twin(self) -> "Scenario":
        """Scenario whose fixed rate equals the single state of a 1-state chain."""
        if self.rate_chain.size != 1:
            raise InvalidParameterError("only a single-state rate chain has a time-invariant twin")
        return replace(self, rate=self.rate_chain.rates[0])


def default_scenario(**overrides) -> Scenario:
    """Reference configuration: 10 channels, mu_off = 1/100, 1 ms sensing, -10 dB SNR.

    The detector threshold is set for single-SU detection probability 0.9
    with N = t_s * f_s = 1000 samples (1 MHz bandwidth); the single-SU
    false-alarm probability follows.
    """
    det = with_target_pd(DetectorConfig.from_snr_db(samples=1000, snr_db=-10.0), 0.9)
    base = Scenario(
        channel=OnOffChannel.from_availability(0.5, 0.01),
        rate=1e6,
        rate_chain=default_rate_chain(),
        pd=0.9,
        pf=pf_single(det),
        detector=det,
        traffic=TrafficParams(load=0.5),
    )
    return replace(base, **overrides)


@dataclass(frozen=True)
class MetricsReport:
    """Throughput, overhead and their difference for one configuration."""

    regime: str
    throughput: float
    overhead: float
    achievable: float
    per_round: tuple[float, ...]
    normalizer: float
    constraints: dict = field(default_factory=dict)
    teams: int = 1
    team_size: int = 1

    @property
    def feasible(self) -> bool:
        return all(self.constraints.values())

    @property
    def normalized(self) -> dict:
        n = self.normalizer
        return {
            "throughput": self.throughput / n,
            "overhead": self.overhead / n,
            "achievable": self.achievable / n,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_round"] = list(self.per_round)
        d["feasible"] = self.feasible
        d["normalized"] = self.normalized
        return d


# --- discovery probabilities -------------------------------------------------


def success_prob(p: float, q: int, pf: float) -> float:
    """Probability one team finds its channel free without a false alarm."""
    return p * (1.0 - fused_pf(q, pf))


def p_av_one(U: int, ps: float) -> float:
    """Probability at least one of ``U`` teams succeeds in a round."""
    if U < 1:
        raise InvalidParameterError("U must be >= 1")
    return sum(math.comb(U, u) * (1.0 - ps) ** (U - u) * ps**u for u in range(1, U + 1))


def p_av_round(ns: int, U: int, ps: float, max_rounds: int | None = None) -> float:
    """Probability the first discovery happens in round ``ns``."""
    if ns < 1 or (max_rounds is not None and ns > max_rounds):
        raise InvalidParameterError(f"round index {ns} out of range")
    a = p_av_one(U, ps)
    return (1.0 - a) ** (ns - 1) * a


def _round_probs(sc: Scenario) -> np.ndarray:
    ps = success_prob(sc.availability, sc.team_size, sc.pf)
    return np.array([p_av_round(ns, sc.teams, ps) for ns in range(1, sc.rounds + 1)])


def _silenced_fraction_integral(ch: OnOffChannel, Ts: float) -> float:
    # integral of P00 over [0, Ts]
    p = availability(ch)
    b = ch.beta
    return (1.0 - p) * Ts + p * (-math.expm1(-b * Ts)) / b


def overhead_per_su_ti(R: float, ch: OnOffChannel, Ts: float) -> float:
    """Data one cooperator forgoes while sensing for ``Ts`` seconds."""
    if Ts < 0:
        raise InvalidParameterError("Ts must be non-negative")
    return R * _silenced_fraction_integral(ch, Ts)


def _round_weight(sc: Scenario, ns: int) -> int:
    return ns if sc.overhead_model == "cumulative" else 1


def _constraints(sc: Scenario) -> dict:
    q = sc.team_size
    return {
        "team-budget": sc.cooperators <= sc.sus,
        "false-alarm": fused_pf(q, sc.pf) <= sc.pf_threshold,
        "detection": fused_pd(q, sc.pd) >= sc.pd_threshold,
    }


def _report(sc: Scenario, regime: Regime, throughput: float, overhead: float, per_round, r_max: float):
    return MetricsReport(
        regime=regime.value,
        throughput=throughput,
        overhead=overhead,
        achievable=throughput - overhead,
        per_round=tuple(float(x) for x in per_round),
        normalizer=sc.transmission_time * r_max,
        constraints=_constraints(sc),
        teams=sc.teams,
        team_size=sc.team_size,
    )


# --- saturation, time-invariant ---------------------------------------------


def _discovery_sum(sc: Scenario, per_round: float) -> float:
    # sum over rounds of P(no discovery before round ns) * per-round payoff
    a = p_av_one(sc.teams, success_prob(sc.availability, sc.team_size, sc.pf))
    total = 0.0
    for ns in range(1, sc.rounds + 1):
        total += (1.0 - a) ** (ns - 1) * per_round
    return float(total)


def throughput_sat_ti(sc: Scenario) -> float:
    a = p_av_one(sc.teams, success_prob(sc.availability, sc.team_size, sc.pf))
    return _discovery_sum(sc, sc.transmission_time * (a * sc.rate))


def overhead_sat_ti(sc: Scenario) -> float:
    probs = _round_probs(sc)
    total = 0.0
    for ns, prob in enumerate(probs, start=1):
        o_k = overhead_per_su_ti(sc.rate, sc.channel, ns * sc.sense_duration)
        total += _round_weight(sc, ns) * prob * sc.cooperators * o_k
    return float(total)


def achievable_sat_ti(sc: Scenario) -> MetricsReport:
    return _report(sc, Regime.SAT_TI, throughput_sat_ti(sc), overhead_sat_ti(sc), _round_probs(sc), sc.rate)


# --- saturation, time-varying -----------------------------------------------


def max_rate_pmf(v: int, pi, policy: str = "exact") -> np.ndarray:
    """Law of the best rate among ``v`` discovered channels, indexed by rate state.

    ``"exact"`` is the distribution of the maximum of ``v`` i.i.d. draws;
    ``"paper-literal"`` keeps the printed product form, which does not sum
    to one once there are three or more rate states.
    """
    if v < 1:
        raise InvalidParameterError("v must be >= 1")
    cdf = np.minimum(np.cumsum(np.asarray(pi, dtype=float)), 1.0)
    below = np.concatenate(([0.0], cdf[:-1]))
    if policy == "exact":
        return cdf**v - below**v
    if policy == "paper-literal":
        return cdf**v * (1.0 - below**v)
    raise InvalidParameterError(f"unknown rate pmf policy {policy!r}")


def p_rate_given_v(v: int, m: int, pi, policy: str = "exact") -> float:
    """Entry ``m`` (0-based rate state) of :func:`max_rate_pmf`."""
    pi = np.asarray(pi, dtype=float)
    if not 0 <= m < pi.size:
        raise InvalidParameterError(f"rate index {m} out of range")
    return float(max_rate_pmf(v, pi, policy)[m])


def _discovered_rate_law(sc: Scenario) -> np.ndarray:
    # sum over v of P(v teams succeed) * P(best rate = R_m | v)
    pi = stationary(sc.rate_chain)
    U = sc.teams
    ps = success_prob(sc.availability, sc.team_size, sc.pf)
    law = np.zeros(pi.size)
    for v in range(1, U + 1):
        law += math.comb(U, v) * (1.0 - ps) ** (U - v) * ps**v * max_rate_pmf(v, pi, sc.rate_pmf)
    return law


def throughput_sat_tv(sc: Scenario) -> float:
    rate_term = float(np.dot(_discovered_rate_law(sc), sc.rate_chain.rates))
    return _discovery_sum(sc, sc.transmission_time * rate_term)


def selected_rank_mean_rate(sc: Scenario) -> float:
    """Mean expected rate of the q*U lowest-rate SUs among K."""
    K = sc.sus
    n = min(sc.cooperators, K)
    pi = stationary(sc.rate_chain)
    mean_pmf = np.mean([order_stat_rate_pmf(k, K, pi) for k in range(1, n + 1)], axis=0)
    return float(np.dot(mean_pmf, sc.rate_chain.rates))


def overhead_sat_tv(sc: Scenario) -> float:
    probs = _round_probs(sc)
    r_sel = selected_rank_mean_rate(sc)
    total = 0.0
    for ns, prob in enumerate(probs, start=1):
        o_k = r_sel * _silenced_fraction_integral(sc.channel, ns * sc.sense_duration)
        total += _round_weight(sc, ns) * prob * sc.cooperators * o_k
    return float(total)


def achievable_sat_tv(sc: Scenario) -> MetricsReport:
    return _report(
        sc, Regime.SAT_TV, throughput_sat_tv(sc), overhead_sat_tv(sc), _round_probs(sc), sc.rate_chain.max_rate
    )


# --- queueing ----------------------------------------------------------------


def mean_queue_md1(rho: float) -> float:
    """Mean number of waiting packets in an M/D/1 queue."""
    if rho < 0:
        raise InvalidParameterError("load must be non-negative")
    if rho >= 1:
        raise UnstableQueueError(f"load {rho} must be below 1")
    return rho**2 / (2.0 * (1.0 - rho))


def mean_queue_mg1(lam: float, service_var: float, rho: float) -> float:
    """Pollaczek-Khinchine mean number of waiting packets.

    ``service_var`` is the variance of the service time; zero gives M/D/1.
    """
    if rho >= 1:
        raise UnstableQueueError(f"load {rho} must be below 1")
    if service_var < 0:
        raise InvalidParameterError("service variance must be non-negative")
    return (lam**2 * service_var + rho**2) / (2.0 * (1.0 - rho))


def service_moments(rc: RateChain, l: float) -> tuple[float, float]:
    """Mean and variance of the packet service time l/R under the stationary law."""
    if not l > 0:
        raise InvalidParameterError("packet length must be positive")
    pi = stationary(rc)
    times = l / np.asarray(rc.rates)
    mean = float(np.dot(pi, times))
    var = float(np.dot(pi, (times - mean) ** 2))
    return mean, var


def _traffic(sc: Scenario) -> TrafficParams:
    if sc.traffic is None:
        raise InvalidParameterError("non-saturation analysis needs traffic parameters")
    return sc.traffic


def queue_length_ti(sc: Scenario) -> float:
    _, rho = _traffic(sc).resolve(sc.packet_length / sc.rate)
    return mean_queue_md1(rho)


def queue_length_tv(sc: Scenario) -> float:
    mean, var = service_moments(sc.rate_chain, sc.packet_length)
    lam, rho = _traffic(sc).resolve(mean)
    return mean_queue_mg1(lam, var, rho)


def _nonsat_terms(sc: Scenario, n_q: float, r_use: float) -> tuple[float, list[float]]:
    l = sc.packet_length
    n_d = min(n_q, sc.transmission_time * r_use / l)
    n_sense = []
    qu = sc.cooperators
    for ns in range(1, sc.rounds + 1):
        Ts = ns * sc.sense_duration
        n_sense.append(min(ns * qu * n_q, qu * Ts * r_use / l))
    return n_d, n_sense


def nonsat_metrics_ti(sc: Scenario) -> MetricsReport:
    r_use = sc.rate if sc.r_use is None else sc.r_use
    n_q = queue_length_ti(sc)
    probs = _round_probs(sc)
    n_d, n_sense = _nonsat_terms(sc, n_q, r_use)
    l = sc.packet_length
    a = p_av_one(sc.teams, success_prob(sc.availability, sc.team_size, sc.pf))
    throughput = _discovery_sum(sc, a * n_d * l)
    overhead = float(sum(p * n * l for p, n in zip(probs, n_sense)))
    return _report(sc, Regime.NONSAT_TI, throughput, overhead, probs, sc.rate)


def stationary_mean_rate(rc: RateChain) -> float:
    return float(np.dot(stationary(rc), rc.rates))


def nonsat_metrics_tv(sc: Scenario) -> MetricsReport:
    r_use = stationary_mean_rate(sc.rate_chain) if sc.r_use is None else sc.r_use
    n_q = queue_length_tv(sc)
    probs = _round_probs(sc)
    n_d, n_sense = _nonsat_terms(sc, n_q, r_use)
    l = sc.packet_length
    law_mass = float(_discovered_rate_law(sc).sum())
    throughput = _discovery_sum(sc, law_mass * n_d * l)
    overhead = float(sum(p * n * l for p, n in zip(probs, n_sense)))
    return _report(sc, Regime.NONSAT_TV, float(throughput), overhead, probs, sc.rate_chain.max_rate)


_EVALUATORS = {
    Regime.SAT_TI: achievable_sat_ti,
    Regime.SAT_TV: achievable_sat_tv,
    Regime.NONSAT_TI: nonsat_metrics_ti,
    Regime.NONSAT_TV: nonsat_metrics_tv,
}


def evaluate(sc: Scenario, regime: Regime | str) -> MetricsReport:
    if isinstance(regime, str):
        regime = Regime.parse(regime)
    return _EVALUATORS[regime](sc)
