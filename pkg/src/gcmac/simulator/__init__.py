"""Discrete-event simulation of the group cooperative sensing MAC."""
from .compare import SchemeSummary, compare_schemes
from .engine import ControlModel, Scheme, SimConfig, SimMetrics, run
from .fsm import Event, ProtocolViolation, Role, State, SuAgent, Timer, Transition, step_fsm
from .messages import ControlMessage, MsgKind

__all__ = [
    "ControlMessage",
    "ControlModel",
    "Event",
    "MsgKind",
    "ProtocolViolation",
    "Role",
    "Scheme",
    "SchemeSummary",
    "SimConfig",
    "SimMetrics",
    "State",
    "SuAgent",
    "Timer",
    "Transition",
    "compare_schemes",
    "run",
    "step_fsm",
]
