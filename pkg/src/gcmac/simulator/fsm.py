"""Per-SU protocol state machines.

:func:`step_fsm` maps (agent, event) to a :class:`Transition`: the next
state, the control messages to emit and the timers to arm.  Everything the
machine needs from the outside world (sensing outcomes, team formation,
channel choice, transmission outcome) is asked of a context object supplied
by the event engine, which keeps this module free of randomness it does not
own.

Timers are cancelled automatically whenever an agent changes state, so a
transition only lists the timers that belong to its new state.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any

from ..detection import majority_decision
from .messages import BROADCAST, ControlMessage, MsgKind


class Role(enum.Enum):
    SOURCE = "source"
    COOPERATOR = "cooperator"
    DESTINATION = "destination"
    IDLE = "idle"


class State(enum.Enum):
    IDLE = "IDLE"
    DEFER = "DEFER"
    BACKOFF = "BACKOFF"
    # source
    WAIT_R_CTS = "WAIT_R_CTS"
    PAIR_SENSING = "PAIR_SENSING"
    WAIT_S_CTS = "WAIT_S_CTS"
    WAIT_FEEDBACK = "WAIT_FEEDBACK"
    COOP_SENSING = "COOP_SENSING"
    WAIT_T_CTS = "WAIT_T_CTS"
    TRANSMITTING = "TRANSMITTING"
    # destination
    WAIT_S_RTS = "WAIT_S_RTS"
    WAIT_COOP = "WAIT_COOP"
    WAIT_T_RTS = "WAIT_T_RTS"
    RECEIVING = "RECEIVING"
    # cooperator
    WAIT_GROUPING = "WAIT_GROUPING"
    SENSING = "SENSING"
    WAIT_NEXT = "WAIT_NEXT"


@dataclass
class SuAgent:
    """One secondary user.

    ``scratch`` holds per-cycle protocol memory (pending candidates, team
    assignment, collected votes); step functions update it in place.
    """

    id: int
    role: Role
    fsm_state: State = State.IDLE
    used_channel: int | None = None
    last_sense_time: float = 0.0
    backlogged: bool = True
    queue: Any = None
    scratch: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Event:
    kind: str  # "message", "timer" or "channel"
    message: ControlMessage | None = None
    timer: str | None = None

    @property
    def label(self) -> str:
        if self.kind == "message":
            return self.message.kind.value
        if self.kind == "timer":
            return f"timer:{self.timer}"
        return "channel"


@dataclass(frozen=True)
class Timer:
    name: str
    delay: float


@dataclass(frozen=True)
class Outgoing:
    message: ControlMessage
    delay: float = 0.0


@dataclass(frozen=True)
class Transition:
    state: State
    messages: tuple[Outgoing, ...] = ()
    timers: tuple[Timer, ...] = ()


class ProtocolViolation(Exception):
    """An agent received an event its current state has no edge for."""

    def __init__(self, agent: SuAgent, event: Event):
        self.agent_id = agent.id
        self.state = agent.fsm_state
        self.event = event.label
        super().__init__(f"agent {agent.id} in {agent.fsm_state.value} cannot handle {event.label}")


def _msg(kind, src, dst, delay=0.0, **payload) -> Outgoing:
    return Outgoing(ControlMessage(kind, src, dst, payload), delay)


def step_fsm(agent: SuAgent, event: Event, ctx) -> Transition:
    """Advance one agent by one event.

    Raises:
        ProtocolViolation: for a message addressed to the agent that its
            current state does not accept.
    """
    handler = _HANDLERS[agent.role]
    result = handler(agent, event, ctx)
    if result is None:
        if event.kind == "message" and event.message.dst == agent.id:
            raise ProtocolViolation(agent, event)
        return Transition(agent.fsm_state, ())  # overheard or stale: no-op
    return result


def _is(event: Event, kind: MsgKind) -> bool:
    return event.kind == "message" and event.message.kind is kind


def _timer(event: Event, name: str) -> bool:
    return event.kind == "timer" and event.timer == name


# --- source ------------------------------------------------------------------


def _backoff(agent: SuAgent, ctx, resume: str, escalate: bool = True) -> Transition:
    agent.scratch["resume"] = resume
    retries = 1
    if escalate:
        agent.scratch["retries"] = retries = agent.scratch.get("retries", 0) + 1
    return Transition(State.BACKOFF, (), (Timer("backoff", ctx.backoff_delay(retries)),))


def _send_r_rts(agent, ctx) -> Transition:
    s = agent.scratch
    return Transition(
        State.WAIT_R_CTS,
        (_msg(MsgKind.R_RTS, agent.id, s["dest"], channel=s["pair_channel"]),),
        (Timer("cts", ctx.cts_timeout),),
    )


def _send_s_rts(agent, ctx) -> Transition:
    s = agent.scratch
    return Transition(
        State.WAIT_S_CTS,
        (_msg(MsgKind.S_RTS, agent.id, s["dest"], channel=s["pair_channel"], busy=s["pair_busy"]),),
        (Timer("cts", ctx.cts_timeout),),
    )


def _send_csr(agent, ctx) -> Transition:
    return Transition(
        State.WAIT_FEEDBACK,
        (_msg(MsgKind.MSG_CSR, agent.id, BROADCAST, channel=agent.scratch["pair_channel"]),),
        (Timer("feedback", ctx.feedback_window),),
    )


def _send_round(agent, ctx) -> Transition:
    s = agent.scratch
    channels = ctx.round_channels(s["round"])
    out = []
    expected = 0
    slot = 0
    for team_idx, channel in enumerate(channels):
        members = tuple(s["teams"][team_idx])
        for m in members:
            # grouping packets go out back to back on the control channel
            out.append(
                _msg(MsgKind.C_RTS, agent.id, m, slot * ctx.airtime, round=s["round"], team=team_idx,
                     channel=channel, members=members, slot=slot)
            )
            slot += 1
        expected += len(members)
    s["assigned"] = {i: ch for i, ch in enumerate(channels)}
    s["votes"] = {i: [] for i in range(len(channels))}
    s["expected"] = expected
    return Transition(State.COOP_SENSING, tuple(out), (Timer("report", ctx.report_timeout(slot)),))


def _send_t_rts(agent, ctx) -> Transition:
    s = agent.scratch
    return Transition(
        State.WAIT_T_CTS,
        (_msg(MsgKind.T_RTS, agent.id, s["dest"], channel=s["channel"]),),
        (Timer("cts", ctx.cts_timeout),),
    )


def _finish_cycle(agent, ctx, success: bool) -> Transition:
    ctx.end_cycle(success)
    dest = agent.scratch.get("dest")
    agent.scratch.clear()
    agent.scratch["dest"] = dest
    return Transition(
        State.IDLE,
        (_msg(MsgKind.ACK, agent.id, BROADCAST, success=success),),
        (Timer("start", ctx.idle_gap()),),
    )


def _source(agent: SuAgent, event: Event, ctx) -> Transition | None:
    st = agent.fsm_state
    s = agent.scratch

    # late feedback and reports are harmless in any state
    if _is(event, MsgKind.C_CTS):
        if st in (State.WAIT_FEEDBACK, State.BACKOFF) and s.get("candidates") is not None:
            s["candidates"][event.message.src] = dict(event.message.payload)
        return Transition(st)
    if _is(event, MsgKind.RESULT) and st is not State.COOP_SENSING:
        return Transition(st)

    if st is State.IDLE:
        if _timer(event, "start"):
            s["pair_channel"] = ctx.begin_cycle()
            s["retries"] = 0
            if not ctx.pair_presense:
                ctx.begin_cooperation()
                s["candidates"] = {}
                return _send_csr(agent, ctx)
            return _send_r_rts(agent, ctx)
        return None

    if st is State.WAIT_R_CTS:
        if _is(event, MsgKind.R_CTS):
            return Transition(State.PAIR_SENSING, (), (Timer("sense", ctx.sense_time),))
        if _timer(event, "cts"):
            return _backoff(agent, ctx, "r_rts")
        return None

    if st is State.PAIR_SENSING:
        if _timer(event, "sense"):
            s["pair_busy"] = ctx.sense(agent.id, s["pair_channel"])
            return _send_s_rts(agent, ctx)
        return None

    if st is State.WAIT_S_CTS:
        if _is(event, MsgKind.S_CTS):
            if event.message.payload["available"]:
                s["channel"] = s["pair_channel"]
                ctx.pair_discovery(s["channel"])
                return _send_t_rts(agent, ctx)
            ctx.begin_cooperation()
            s["candidates"] = {}
            return _send_csr(agent, ctx)
        if _timer(event, "cts"):
            return _backoff(agent, ctx, "s_rts")
        return None

    if st is State.WAIT_FEEDBACK:
        if _timer(event, "feedback"):
            teams = ctx.form_teams(s["candidates"])
            if teams is None:
                return _backoff(agent, ctx, "csr")
            s["teams"] = teams
            s["round"] = 1
            return _send_round(agent, ctx)
        return None

    if st is State.COOP_SENSING:
        if _is(event, MsgKind.RESULT):
            p = event.message.payload
            if p["round"] != s["round"] or p["team"] not in s["votes"]:
                return Transition(st)
            s["votes"][p["team"]].append(p["busy"])
            s["expected"] -= 1
            if s["expected"] > 0:
                return Transition(st)
            return _conclude_round(agent, ctx)
        if _timer(event, "report"):
            return _backoff(agent, ctx, "c_rts")
        return None

    if st is State.WAIT_T_CTS:
        if _is(event, MsgKind.T_CTS):
            duration = ctx.begin_transmission(s["channel"])
            return Transition(State.TRANSMITTING, (), (Timer("ack", duration + ctx.ack_timeout),))
        if _timer(event, "cts"):
            return _backoff(agent, ctx, "t_rts")
        return None

    if st is State.TRANSMITTING:
        if _is(event, MsgKind.ACK) and event.message.dst == agent.id:
            return _finish_cycle(agent, ctx, True)
        if _timer(event, "ack"):
            # the data was lost; a retransmission needs a freshly sensed channel
            return _finish_cycle(agent, ctx, False)
        return None

    if st is State.BACKOFF:
        if _timer(event, "backoff"):
            resume = s.pop("resume")
            if resume == "r_rts":
                return _send_r_rts(agent, ctx)
            if resume == "s_rts":
                return _send_s_rts(agent, ctx)
            if resume == "csr":
                return _send_csr(agent, ctx)
            if resume == "c_rts":
                return _send_round(agent, ctx)
            return _send_t_rts(agent, ctx)
        return None
    return None


def _conclude_round(agent: SuAgent, ctx) -> Transition:
    s = agent.scratch
    free = [s["assigned"][team] for team, votes in sorted(s["votes"].items()) if not majority_decision(votes)]
    ctx.round_outcome(s["round"], {s["assigned"][t]: majority_decision(v) for t, v in s["votes"].items()}, s["teams"])
    if free:
        s["channel"] = ctx.choose_channel(free)
        ctx.cooperative_discovery(s["round"], s["channel"])
        return _send_t_rts(agent, ctx)
    if s["round"] < ctx.max_rounds:
        s["round"] += 1
        return _backoff(agent, ctx, "c_rts", escalate=False)
    ctx.discovery_failed()
    return _finish_cycle(agent, ctx, False)


# --- destination -------------------------------------------------------------


def _destination(agent: SuAgent, event: Event, ctx) -> Transition | None:
    st = agent.fsm_state
    s = agent.scratch
    if _is(event, MsgKind.ACK) and event.message.broadcast:
        return Transition(State.IDLE)
    if _is(event, MsgKind.MSG_CSR) or _is(event, MsgKind.R_CTS):
        return Transition(st)

    if st in (State.IDLE, State.DEFER):
        if _is(event, MsgKind.R_RTS) and event.message.dst == agent.id:
            s["source"] = event.message.src
            s["pair_channel"] = event.message.payload["channel"]
            return Transition(
                State.PAIR_SENSING,
                (_msg(MsgKind.R_CTS, agent.id, event.message.src),),
                (Timer("sense", ctx.airtime + ctx.sense_time),),
            )
        if _is(event, MsgKind.T_RTS):
            # cooperation requested without a pair pre-sensing step
            s["source"] = event.message.src
            s["channel"] = event.message.payload["channel"]
            return Transition(State.RECEIVING, (_msg(MsgKind.T_CTS, agent.id, s["source"], channel=s["channel"]),))
        return None

    if st is State.PAIR_SENSING:
        if _timer(event, "sense"):
            s["own_busy"] = ctx.sense(agent.id, s["pair_channel"])
            return Transition(State.WAIT_S_RTS, (), (Timer("wait", ctx.wait_timeout),))
        if _is(event, MsgKind.R_RTS):
            return Transition(st)
        return None

    if st is State.WAIT_S_RTS:
        if _is(event, MsgKind.S_RTS):
            busy = majority_decision([event.message.payload["busy"], s["own_busy"]])
            reply = _msg(MsgKind.S_CTS, agent.id, s["source"], channel=s["pair_channel"], available=not busy)
            nxt = State.WAIT_COOP if busy else State.WAIT_T_RTS
            return Transition(nxt, (reply,), (Timer("wait", ctx.wait_timeout),))
        if _timer(event, "wait"):
            return Transition(State.IDLE)
        return None

    if st in (State.WAIT_COOP, State.WAIT_T_RTS):
        if _is(event, MsgKind.T_RTS):
            s["channel"] = event.message.payload["channel"]
            return Transition(State.RECEIVING, (_msg(MsgKind.T_CTS, agent.id, s["source"], channel=s["channel"]),))
        if _is(event, MsgKind.S_RTS):
            # retransmitted S-RTS after a lost S-CTS
            busy = majority_decision([event.message.payload["busy"], s["own_busy"]])
            reply = _msg(MsgKind.S_CTS, agent.id, s["source"], channel=s["pair_channel"], available=not busy)
            return Transition(st, (reply,))
        if _timer(event, "wait"):
            return Transition(State.IDLE)
        return None

    if st is State.RECEIVING:
        if _timer(event, "data_end"):
            return Transition(State.IDLE, (_msg(MsgKind.ACK, agent.id, s["source"], success=True),))
        if _is(event, MsgKind.T_RTS):
            return Transition(st, (_msg(MsgKind.T_CTS, agent.id, s["source"], channel=s["channel"]),))
        return None
    return None


# --- cooperator --------------------------------------------------------------


def _cooperator(agent: SuAgent, event: Event, ctx) -> Transition | None:
    st = agent.fsm_state
    s = agent.scratch
    if _is(event, MsgKind.ACK) and event.message.broadcast:
        s.clear()
        return Transition(State.IDLE)

    if st in (State.IDLE, State.DEFER):
        if event.kind == "message" and event.message.kind in (MsgKind.R_RTS, MsgKind.R_CTS):
            return Transition(State.DEFER)
        if _is(event, MsgKind.MSG_CSR):
            return _reply_feedback(agent, event, ctx, origin=st)
        return None

    if st is State.WAIT_GROUPING:
        if _is(event, MsgKind.C_RTS):
            return _start_sensing(agent, event, ctx)
        if _is(event, MsgKind.MSG_CSR):
            return _reply_feedback(agent, event, ctx, origin=s.get("origin", State.IDLE))
        if _timer(event, "grouping"):
            # no grouping information arrived: revert
            return Transition(s.pop("origin", State.IDLE))
        return None

    if st is State.SENSING:
        if _timer(event, "sense"):
            a = s["assignment"]
            busy = ctx.sense(agent.id, a["channel"], cooperator=True)
            report = _msg(MsgKind.RESULT, agent.id, s["source"], ctx.report_delay(a["slot"]),
                          round=a["round"], team=a["team"], channel=a["channel"], busy=busy)
            return Transition(State.WAIT_NEXT, (report,), (Timer("wait", ctx.wait_timeout),))
        return None

    if st is State.WAIT_NEXT:
        if _is(event, MsgKind.C_RTS):
            return _start_sensing(agent, event, ctx)
        if _is(event, MsgKind.MSG_CSR):
            return Transition(st)
        if _timer(event, "wait"):
            s.clear()
            return Transition(State.IDLE)
        return None
    return None


def _reply_feedback(agent, event, ctx, origin) -> Transition:
    s = agent.scratch
    s["origin"] = origin
    s["source"] = event.message.src
    info = ctx.candidate_info(agent.id)
    reply = _msg(MsgKind.C_CTS, agent.id, event.message.src, ctx.reply_delay(agent.id), **info)
    return Transition(State.WAIT_GROUPING, (reply,), (Timer("grouping", ctx.grouping_timeout),))


def _start_sensing(agent, event, ctx) -> Transition:
    s = agent.scratch
    s["assignment"] = dict(event.message.payload)
    s["source"] = event.message.src
    ctx.start_silence(agent.id)
    return Transition(State.SENSING, (), (Timer("sense", ctx.sense_time),))


_HANDLERS = {
    Role.SOURCE: _source,
    Role.DESTINATION: _destination,
    Role.COOPERATOR: _cooperator,
    Role.IDLE: _cooperator,
}
