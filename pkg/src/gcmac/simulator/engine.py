"""Event loop, radio environment and metrics of the MAC simulation.

Each discovery cycle starts from a fresh stationary draw of the licensed
channels.  All randomness that shapes a cycle (scan order, channel
trajectories, sensing votes, cooperator rates) comes from generators keyed
by ``(seed, cycle index)``, so different sensing schemes run with the same
seed see the same channels in the same cycles.
"""
from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..analytics import Regime, Scenario, TrafficParams, service_moments
from ..channel import OnOffChannel, stationary
from ..detection import fused_pd
from ..errors import InsufficientCandidatesError, InvalidParameterError
from ..selection import CandidateSu, select_time_invariant, select_time_varying
from .fsm import Event, ProtocolViolation, Role, State, SuAgent, step_fsm
from .messages import OVERHEARD, ControlMessage, MsgKind

SOURCE_ID = 0
DEST_ID = 1

# stream tags for per-cycle generators
_SCAN, _CHANNEL, _PAIR_VOTES, _COOP_VOTES, _SU_DRAWS, _TRAFFIC, _MAC, _RESIDUAL = range(8)

_PHASES = {
    State.WAIT_R_CTS: "reservation",
    State.PAIR_SENSING: "reservation",
    State.WAIT_S_CTS: "reservation",
    State.WAIT_FEEDBACK: "sensing",
    State.COOP_SENSING: "sensing",
    State.WAIT_T_CTS: "transmission",
    State.TRANSMITTING: "transmission",
}


class Scheme(enum.Enum):
    GCSS = "gcss"  # U teams of q
    ACSS = "acss"  # one team of every cooperator
    ECSS = "ecss"  # every cooperator alone on its own channel

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidParameterError(f"unknown scheme {value!r}; expected gcss, acss or ecss") from None


class ControlModel(enum.Enum):
    IDEAL = "ideal"
    CONTENDED = "contended"

    @classmethod
    def parse(cls, value) -> "ControlModel":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidParameterError(f"unknown control model {value!r}; expected ideal or contended") from None


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    Attributes:
        max_cycles: stop after this many cooperative discovery cycles
            (cycles in which the pair's own sensing found the channel busy).
        cooperator_state: ``"active"`` treats every recruited cooperator as
            transmitting on an idle channel when recruited; ``"aged"`` lets
            its channel evolve from its last sensing.
        misdetection_fails: a transmission on a channel that is actually
            busy delivers nothing.
        pair_presense: run the source/destination sensing step before
            asking for cooperation.
    """

    scenario: Scenario
    scheme: Scheme = Scheme.GCSS
    seed: int = 0
    sim_horizon: float = 1e9
    max_cycles: int | None = None
    control_model: ControlModel = ControlModel.IDEAL
    regime: Regime = Regime.SAT_TI
    backoff_window: int = 16
    backoff_max: int = 1024
    control_rate: float = 1e6
    control_length: int = 40
    cooperator_state: str = "active"
    misdetection_fails: bool = True
    pair_presense: bool = True
    trace: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        object.__setattr__(self, "control_model", ControlModel.parse(self.control_model))
        if isinstance(self.regime, str):
            object.__setattr__(self, "regime", Regime.parse(self.regime))
        if not self.sim_horizon > 0:
            raise InvalidParameterError("sim_horizon must be positive")
        if self.max_cycles is not None and self.max_cycles < 1:
            raise InvalidParameterError("max_cycles must be positive")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise InvalidParameterError("seed must be a non-negative integer")
        if not 1 <= self.backoff_window <= self.backoff_max:
            raise InvalidParameterError("need 1 <= backoff_window <= backoff_max")
        if not self.control_rate > 0 or self.control_length < 1:
            raise InvalidParameterError("control rate and packet length must be positive")
        if self.cooperator_state not in ("active", "aged"):
            raise InvalidParameterError("cooperator_state must be 'active' or 'aged'")
        if not self.regime.saturated and self.scenario.traffic is None:
            raise InvalidParameterError("non-saturation runs need traffic parameters")
        U, q = self.team_shape
        if U * q > self.scenario.sus:
            raise InvalidParameterError(f"{U} teams of {q} need more than the {self.scenario.sus} available SUs")

    @property
    def team_shape(self) -> tuple[int, int]:
        """(teams, team size) the scheme actually uses."""
        sc = self.scenario
        total = sc.teams * sc.team_size
        if self.scheme is Scheme.ACSS:
            return 1, total
        if self.scheme is Scheme.ECSS:
            return min(sc.channels, total), 1
        return sc.teams, sc.team_size

    @property
    def airtime(self) -> float:
        return self.control_length / self.control_rate


@dataclass(frozen=True)
class SimMetrics:
    """Counters collected over one run.

    Byte counters with a ``_coop`` suffix cover only cooperative cycles,
    the ones the analytic model describes.  ``foregone_bytes`` is what the
    cooperators could physically have sent while silenced;
    ``foregone_bytes_cumulative`` weights each cycle by its number of
    rounds, the accounting of the default overhead model.
    """

    scheme: str
    seed: int
    teams: int
    team_size: int
    cycles: int = 0
    coop_cycles: int = 0
    pair_discoveries: int = 0
    coop_discoveries: int = 0
    failed_cycles: int = 0
    misdetections: int = 0
    false_alarm_misses: int = 0
    collisions: int = 0
    protocol_faults: int = 0
    delivered_bytes: float = 0.0
    delivered_bytes_coop: float = 0.0
    foregone_bytes: float = 0.0
    foregone_bytes_cumulative: float = 0.0
    discovery_rounds: tuple[int, ...] = ()
    busy_decisions: tuple[tuple[int, int, int], ...] = ()
    free_decisions: tuple[tuple[int, int, int], ...] = ()
    phase_time: dict = field(default_factory=dict)
    sim_time: float = 0.0
    control_messages: int = 0
    normalizer: float = 1.0
    overhead_model: str = "cumulative"

    @property
    def per_cycle(self) -> dict:
        """Mean bytes per cooperative cycle."""
        n = max(self.coop_cycles, 1)
        foregone = self.foregone_bytes_cumulative if self.overhead_model == "cumulative" else self.foregone_bytes
        thr = self.delivered_bytes_coop / n
        ovh = foregone / n
        return {"throughput": thr, "overhead": ovh, "achievable": thr - ovh}

    @property
    def normalized(self) -> dict:
        return {k: v / self.normalizer for k, v in self.per_cycle.items()}

    @property
    def phase_shares(self) -> dict:
        total = sum(self.phase_time.values())
        return {k: (v / total if total > 0 else 0.0) for k, v in sorted(self.phase_time.items())}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["discovery_rounds"] = list(self.discovery_rounds)
        d["busy_decisions"] = [list(x) for x in self.busy_decisions]
        d["free_decisions"] = [list(x) for x in self.free_decisions]
        d["per_cycle"] = self.per_cycle
        d["normalized"] = self.normalized
        d["phase_shares"] = self.phase_shares
        return d


class _OnOffProcess:
    """Lazily sampled ON/OFF trajectory; queries must not go back in time."""

    __slots__ = ("on", "t", "t_next", "mean_on", "mean_off", "rng")

    def __init__(self, ch: OnOffChannel, rng, t0: float, on: bool):
        self.mean_on = 1.0 / ch.mu_on
        self.mean_off = 1.0 / ch.mu_off
        self.rng = rng
        self.on = on
        self.t = t0
        self.t_next = t0 + rng.exponential(self.mean_on if on else self.mean_off)

    def _flip(self):
        self.on = not self.on
        self.t_next += self.rng.exponential(self.mean_on if self.on else self.mean_off)

    def at(self, t: float) -> bool:
        while t >= self.t_next:
            self._flip()
        self.t = max(self.t, t)
        return self.on

    def off_time_until(self, t: float) -> float:
        """OFF time between the last query and ``t``; advances to ``t``."""
        total = 0.0
        cur = self.t
        while self.t_next <= t:
            if not self.on:
                total += self.t_next - cur
            cur = self.t_next
            self._flip()
        if not self.on:
            total += t - cur
        self.t = t
        return total


class _QueueSampler:
    """Number of packets waiting in a stationary single-server FIFO queue.

    Draws from queue lengths seen by arrivals of one long simulated path,
    which by Poisson arrivals see the time-average law.
    """

    def __init__(self, lam: float, service, rng, n: int):
        arrivals = np.cumsum(rng.exponential(1.0 / lam, size=n))
        service = np.broadcast_to(np.asarray(service, dtype=float), (n,))
        departures = np.fromiter(
            itertools.accumulate(zip(arrivals, service), lambda d, a_s: max(a_s[0], d) + a_s[1], initial=0.0),
            dtype=float,
            count=n + 1,
        )[1:]
        starts = departures - service
        idx = np.arange(n)
        started = np.minimum(np.searchsorted(starts, arrivals, side="right"), idx)
        waiting = idx - started
        self.lengths = waiting[n // 4 :]

    def draw(self, rng) -> int:
        return int(self.lengths[rng.integers(self.lengths.size)])


def _rng(*key):
    return np.random.default_rng([int(k) for k in key])


class _Run:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        sc = cfg.scenario
        self.sc = sc
        self.tv = cfg.regime.time_varying
        self.U, self.q = cfg.team_shape
        self.airtime = cfg.airtime
        self.sense_time = sc.sense_duration
        self.slot = self.airtime
        self.cts_timeout = 2 * self.airtime + self.slot
        self.ack_timeout = 2 * self.airtime + self.slot
        self.pair_presense = cfg.pair_presense
        self.max_rounds = math.ceil(sc.channels / self.U)
        K = sc.sus
        if cfg.control_model is ControlModel.IDEAL:
            self.feedback_window = (K + 2) * self.airtime
        else:
            self.feedback_window = (cfg.backoff_window + 2) * self.airtime
        self.grouping_timeout = self.feedback_window + (K + 4) * self.airtime
        self.wait_timeout = 1.0 + 2 * sc.channels * (self.sense_time + (K + 4) * self.airtime)
        self.pi = stationary(sc.rate_chain) if self.tv else None
        self.r_max = sc.rate_chain.max_rate if self.tv else sc.rate
        self.normalizer = sc.transmission_time * self.r_max

        self.now = 0.0
        self._seq = itertools.count()
        self._heap: list = []
        self.stop = False
        self.mac_rng = _rng(cfg.seed, _MAC)
        self.trace: list[str] | None = [] if cfg.trace else None
        self._contended = cfg.control_model is ControlModel.CONTENDED
        self._slots: dict[float, int] = {}
        self._collided: set[float] = set()

        self.agents = [SuAgent(SOURCE_ID, Role.SOURCE), SuAgent(DEST_ID, Role.DESTINATION)]
        self.agents += [SuAgent(i, Role.COOPERATOR) for i in range(2, K + 2)]
        self.agents[SOURCE_ID].scratch["dest"] = DEST_ID
        self.epoch = [0] * len(self.agents)

        self.queues = None
        if not cfg.regime.saturated:
            self.queues = self._build_queue(sc.traffic)

        # metric accumulators
        self.m = dict(
            cycles=0, coop_cycles=0, pair_discoveries=0, coop_discoveries=0, failed_cycles=0,
            misdetections=0, false_alarm_misses=0, collisions=0, protocol_faults=0,
            delivered_bytes=0.0, delivered_bytes_coop=0.0, foregone_bytes=0.0,
            foregone_bytes_cumulative=0.0, control_messages=0,
        )
        self.rounds_hist = [0] * self.max_rounds
        self.busy_stats: dict[int, list[int]] = {}
        self.free_stats: dict[int, list[int]] = {}
        self.phase_time: dict[str, float] = {}
        self._phase_since = 0.0
        self.cycle = -1
        self._cycle_open = False

    # --- set-up helpers ------------------------------------------------------

    def _build_queue(self, traffic: TrafficParams) -> _QueueSampler:
        sc = self.sc
        rng = _rng(self.cfg.seed, _TRAFFIC)
        if self.tv:
            mean, _ = service_moments(sc.rate_chain, sc.packet_length)
        else:
            mean = sc.packet_length / sc.rate
        lam, rho = traffic.resolve(mean)
        n = int(min(max(20000, 200 / (1.0 - rho) ** 2), 2_000_000))
        if self.tv:
            rates = np.asarray(sc.rate_chain.rates)[rng.choice(sc.rate_chain.size, size=n, p=self.pi)]
            service = sc.packet_length / rates
        else:
            service = mean
        return _QueueSampler(lam, service, rng, n)

    # --- event plumbing ------------------------------------------------------

    def _push(self, t, kind, a, b=None, c=None):
        heapq.heappush(self._heap, (t, next(self._seq), kind, a, b, c))

    def arm(self, aid: int, name: str, delay: float):
        self._push(self.now + delay, 1, aid, name, self.epoch[aid])

    def send(self, msg: ControlMessage, delay: float):
        self.m["control_messages"] += 1
        t = self.now + delay + self.airtime
        if self._contended and msg.kind is MsgKind.C_CTS:
            # feedback replies that pick the same slot destroy each other
            self._slots[t] = self._slots.get(t, 0) + 1
        self._push(t, 0, msg)

    def _recipients(self, msg: ControlMessage):
        if msg.broadcast or msg.kind in OVERHEARD:
            return [a for a in self.agents if a.id != msg.src]
        return [self.agents[msg.dst]]

    def dispatch(self, agent: SuAgent, event: Event):
        try:
            tr = step_fsm(agent, event, self)
        except ProtocolViolation:
            self.m["protocol_faults"] += 1
            self._reset(agent)
            self._log(agent, event)
            return
        if tr.state is not agent.fsm_state:
            self._set_state(agent, tr.state)
        elif tr.timers:
            # re-arming in place supersedes the timers already running
            self.epoch[agent.id] += 1
        for out in tr.messages:
            self.send(out.message, out.delay)
        for tm in tr.timers:
            self.arm(agent.id, tm.name, tm.delay)
        self._log(agent, event)

    def _set_state(self, agent: SuAgent, state: State):
        if agent.role is Role.SOURCE:
            old = _PHASES.get(agent.fsm_state, "idle")
            self.phase_time[old] = self.phase_time.get(old, 0.0) + (self.now - self._phase_since)
            self._phase_since = self.now
        agent.fsm_state = state
        self.epoch[agent.id] += 1

    def _reset(self, agent: SuAgent):
        self._set_state(agent, State.IDLE)
        self.epoch[agent.id] += 1
        agent.scratch.clear()
        if agent.role is Role.SOURCE:
            agent.scratch["dest"] = DEST_ID
            if self._cycle_open:
                self.end_cycle(False)
            self.arm(agent.id, "start", self.idle_gap())

    def _log(self, agent: SuAgent, event: Event):
        if self.trace is None:
            return
        what = event.message.kind.value if event.kind == "message" else event.timer
        self.trace.append(f"{self.now:.9f}\t{agent.id}\t{agent.fsm_state.value}\t{event.kind}\t{what}")

    def _deliver(self, msg: ControlMessage):
        if self._contended and msg.kind is MsgKind.C_CTS:
            n = self._slots.pop(self.now, 0)
            if n > 1 or self.now in self._collided:
                if n > 1:
                    self.m["collisions"] += 1
                    self._collided.add(self.now)
                return
        ev = Event("message", message=msg)
        for agent in self._recipients(msg):
            self.dispatch(agent, ev)

    def loop(self):
        self.arm(SOURCE_ID, "start", 0.0)
        heap = self._heap
        while heap and not self.stop:
            t, _, kind, a, b, c = heapq.heappop(heap)
            if t > self.cfg.sim_horizon:
                break
            self.now = t
            if kind == 0:
                self._deliver(a)
            elif c == self.epoch[a]:
                self.dispatch(self.agents[a], Event("timer", timer=b))

    # --- per-cycle environment ----------------------------------------------

    def begin_cycle(self) -> int:
        self.cycle += 1
        self._cycle_open = True
        sc = self.sc
        n = self.cycle
        seed = self.cfg.seed
        order = [int(c) for c in _rng(seed, _SCAN, n).permutation(sc.channels)]
        # the pair's own channel is the last one the teams get to
        self.pair_channel = order[-1]
        self.scan = order
        self.cycle_start = self.now
        self._channels: dict[int, _OnOffProcess] = {}
        self._channel_rate: dict[int, float] = {}
        self.pair_rng = _rng(seed, _PAIR_VOTES, n)
        self.vote_rng = _rng(seed, _COOP_VOTES, n)
        self.su_rng = _rng(seed, _SU_DRAWS, n)
        self.coop = False
        self.rounds_used = 0
        self.cycle_foregone = 0.0
        self._coop_procs: dict[int, _OnOffProcess] = {}
        self._coop_rate: dict[int, float] = {}
        self._coop_queue: dict[int, int] = {}
        self._truth: dict[int, bool] = {}
        self.source_queue = self.queues.draw(self.su_rng) if self.queues is not None else None
        return self.pair_channel

    def _channel(self, ch: int) -> _OnOffProcess:
        proc = self._channels.get(ch)
        if proc is None:
            rng = _rng(self.cfg.seed, _CHANNEL, self.cycle, ch)
            on = rng.random() >= self.sc.availability
            proc = _OnOffProcess(self.sc.channel, rng, self.cycle_start, on)
            if self.tv:
                m = rng.choice(self.sc.rate_chain.size, p=self.pi)
                self._channel_rate[ch] = float(self.sc.rate_chain.rates[m])
            else:
                self._channel_rate[ch] = self.sc.rate
            self._channels[ch] = proc
        return proc

    def sense(self, aid: int, ch: int, cooperator: bool = False) -> bool:
        """One SU's vote on channel ``ch`` at the end of its sensing period."""
        busy = self._channel(ch).at(self.now)
        rng = self.vote_rng if cooperator else self.pair_rng
        u = rng.random()
        vote = u < self.sc.pd if busy else u < self.sc.pf
        agent = self.agents[aid]
        agent.last_sense_time = self.now
        if cooperator:
            self._truth[ch] = busy
            proc = self._coop_procs[aid]
            off = proc.off_time_until(self.now)
            self.cycle_foregone += self._forgone(aid, off)
        return vote

    def _forgone(self, aid: int, off: float) -> float:
        rate = self._coop_rate[aid]
        if self.queues is None:
            return rate * off
        # a cooperator with a finite backlog only loses what it had queued
        budget = self._coop_queue[aid] * self.sc.packet_length
        lost = min(budget, rate * off)
        self._coop_queue[aid] -= int(lost // self.sc.packet_length)
        return lost

    def pair_discovery(self, ch: int):
        self.m["pair_discoveries"] += 1

    def begin_cooperation(self):
        self.coop = True
        self.m["coop_cycles"] += 1

    def candidate_info(self, aid: int) -> dict:
        agent = self.agents[aid]
        if aid not in self._coop_rate:
            if self.tv:
                m = self.su_rng.choice(self.sc.rate_chain.size, p=self.pi)
                self._coop_rate[aid] = float(self.sc.rate_chain.rates[m])
            else:
                self._coop_rate[aid] = self.sc.rate
        return {"tau": self.now - agent.last_sense_time, "rate": self._coop_rate[aid]}

    def reply_delay(self, aid: int) -> float:
        if self.cfg.control_model is ControlModel.IDEAL:
            return (aid - 2) * self.airtime
        return int(self.mac_rng.integers(self.cfg.backoff_window)) * self.airtime

    def form_teams(self, candidates: dict):
        need = self.U * self.q
        pool = [CandidateSu(cid, info["tau"], self.sc.channel, info["rate"]) for cid, info in sorted(candidates.items())]
        try:
            picked = (select_time_varying if self.tv else select_time_invariant)(pool, need).chosen
        except InsufficientCandidatesError:
            return None
        return [list(picked[i * self.q : (i + 1) * self.q]) for i in range(self.U)]

    def round_channels(self, r: int) -> list[int]:
        self.rounds_used = r
        self._truth = {}
        return self.scan[(r - 1) * self.U : r * self.U]

    def report_timeout(self, n: int) -> float:
        return self.sense_time + (n + 3) * self.airtime + self.slot

    def report_delay(self, slot: int) -> float:
        # sensing ends one airtime apart per slot, so reports never overlap
        return 0.0

    def start_silence(self, aid: int):
        proc = self._coop_procs.get(aid)
        if proc is None:
            self.candidate_info(aid)
            if self._coop_queue.get(aid) is None and self.queues is not None:
                self._coop_queue[aid] = self.queues.draw(self.su_rng)
            ch = self.sc.channel
            if self.cfg.cooperator_state == "active":
                proc = _OnOffProcess(ch, self.su_rng, self.now, on=False)
            else:
                agent = self.agents[aid]
                proc = _OnOffProcess(ch, self.su_rng, agent.last_sense_time, on=False)
                proc.at(self.now)
            self._coop_procs[aid] = proc
        else:
            proc.at(self.now)

    def round_outcome(self, r: int, decisions: dict, teams):
        size = self.q
        for ch, declared_busy in decisions.items():
            truly_busy = self._truth.get(ch)
            if truly_busy is None:
                continue
            stats = self.busy_stats if truly_busy else self.free_stats
            row = stats.setdefault(size, [0, 0])
            row[0] += 1
            row[1] += int(declared_busy)
            if not truly_busy and declared_busy:
                self.m["false_alarm_misses"] += 1

    def choose_channel(self, free: list[int]) -> int:
        if not self.tv:
            return free[0]
        for ch in free:
            self._channel(ch)
        return max(free, key=lambda c: (self._channel_rate[c], -free.index(c)))

    def cooperative_discovery(self, r: int, ch: int):
        self.discovered_round = r

    def discovery_failed(self):
        self.m["failed_cycles"] += 1

    def begin_transmission(self, ch: int) -> float:
        proc = self._channel(ch)
        busy = proc.at(self.now)
        sc = self.sc
        rate = self._channel_rate[ch]
        if busy:
            self.m["misdetections"] += 1
            if self.cfg.misdetection_fails:
                self._pending_delivery = 0.0
                return sc.packet_length / rate
            # optimistic variant: the collision goes unpunished
            residual = self._residual()
        else:
            # the OFF sojourn is memoryless, so its remainder can come from a
            # per-cycle stream: schemes that pick different free channels in
            # the same cycle then still transmit for the same time
            residual = self._residual()
        duration = residual
        delivered = rate * residual
        if self.source_queue is not None:
            packets = min(self.source_queue, int(delivered // sc.packet_length))
            delivered = packets * sc.packet_length
            duration = min(residual, delivered / rate)
        self._pending_delivery = delivered
        self.arm(DEST_ID, "data_end", duration)
        return duration

    def _residual(self) -> float:
        return float(_rng(self.cfg.seed, _RESIDUAL, self.cycle).exponential(self.sc.transmission_time))

    def end_cycle(self, success: bool):
        if not self._cycle_open:
            return
        self._cycle_open = False
        m = self.m
        m["cycles"] += 1
        delivered = self.__dict__.pop("_pending_delivery", 0.0) if success else 0.0
        m["delivered_bytes"] += delivered
        if self.coop:
            m["delivered_bytes_coop"] += delivered
            m["foregone_bytes"] += self.cycle_foregone
            m["foregone_bytes_cumulative"] += self.rounds_used * self.cycle_foregone
            r = self.__dict__.pop("discovered_round", None)
            if r is not None:
                m["coop_discoveries"] += 1
                self.rounds_hist[r - 1] += 1
            if self.cfg.max_cycles is not None and m["coop_cycles"] >= self.cfg.max_cycles:
                self.stop = True
        self.__dict__.pop("_pending_delivery", None)

    def idle_gap(self) -> float:
        return self.slot

    def backoff_delay(self, retries: int) -> float:
        cfg = self.cfg
        window = min(cfg.backoff_window * 2 ** (retries - 1), cfg.backoff_max)
        return (1 + int(self.mac_rng.integers(window))) * self.slot

    # --- results -------------------------------------------------------------

    def metrics(self) -> SimMetrics:
        self._set_state(self.agents[SOURCE_ID], self.agents[SOURCE_ID].fsm_state)
        return SimMetrics(
            scheme=self.cfg.scheme.value,
            seed=int(self.cfg.seed),
            teams=self.U,
            team_size=self.q,
            discovery_rounds=tuple(self.rounds_hist),
            busy_decisions=tuple((k, *v) for k, v in sorted(self.busy_stats.items())),
            free_decisions=tuple((k, *v) for k, v in sorted(self.free_stats.items())),
            phase_time=dict(sorted(self.phase_time.items())),
            sim_time=self.now,
            normalizer=self.normalizer,
            overhead_model=self.sc.overhead_model,
            **self.m,
        )


def run(cfg: SimConfig, return_trace: bool = False):
    """Simulate until the horizon or the cycle budget is reached.

    Returns the :class:`SimMetrics`, or ``(metrics, trace lines)`` when
    ``return_trace`` is set.  Trace lines are tab separated:
    ``time  agent  state-after  event-kind  message-kind-or-timer``.
    """
    if return_trace and not cfg.trace:
        cfg = replace(cfg, trace=True)
    r = _Run(cfg)
    r.loop()
    metrics = r.metrics()
    if return_trace:
        return metrics, list(r.trace)
    return metrics


def fused_detection_bounds(metrics: SimMetrics, pd: float, sigmas: float = 3.0) -> dict:
    """Empirical team detection frequency against ``fused_pd`` with a binomial band."""
    out = {}
    for q, trials, hits in metrics.busy_decisions:
        expected = fused_pd(q, pd)
        half = sigmas * math.sqrt(expected * (1 - expected) / trials) if trials else float("inf")
        out[q] = {"trials": trials, "frequency": hits / trials if trials else float("nan"),
                  "expected": expected, "half_width": half}
    return out
