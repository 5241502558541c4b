"""Control-channel packets exchanged by the MAC protocol."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..errors import InvalidParameterError


class MsgKind(enum.Enum):
    R_RTS = "R-RTS"
    R_CTS = "R-CTS"
    S_RTS = "S-RTS"
    S_CTS = "S-CTS"
    C_RTS = "C-RTS"
    C_CTS = "C-CTS"
    T_RTS = "T-RTS"
    T_CTS = "T-CTS"
    MSG_CSR = "MSG-CSR"
    ACK = "ACK"
    RESULT = "RESULT"


BROADCAST = None

# payload keys each kind must carry
REQUIRED_PAYLOAD = {
    MsgKind.R_RTS: ("channel",),
    MsgKind.R_CTS: (),
    MsgKind.S_RTS: ("channel", "busy"),
    MsgKind.S_CTS: ("channel", "available"),
    MsgKind.C_RTS: ("round", "team", "channel", "members"),
    MsgKind.C_CTS: ("tau", "rate"),
    MsgKind.T_RTS: ("channel",),
    MsgKind.T_CTS: ("channel",),
    MsgKind.MSG_CSR: ("channel",),
    MsgKind.ACK: ("success",),
    MsgKind.RESULT: ("round", "team", "channel", "busy"),
}

# kinds every idle neighbour overhears and defers on
OVERHEARD = frozenset({MsgKind.R_RTS, MsgKind.R_CTS})


@dataclass(frozen=True)
class ControlMessage:
    kind: MsgKind
    src: int
    dst: int | None
    payload: dict = field(default_factory=dict)
    length: int = 40

    def __post_init__(self):
        missing = [k for k in REQUIRED_PAYLOAD[self.kind] if k not in self.payload]
        if missing:
            raise InvalidParameterError(f"{self.kind.value} missing payload fields {missing}")

    @property
    def broadcast(self) -> bool:
        return self.dst is BROADCAST
