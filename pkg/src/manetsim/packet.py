"""Packets and MAC frames shared by the radio and the routing agents."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

BROADCAST = -1

CBR = "cbr"
AODV_CTL = "aodv-ctl"
DSR_CTL = "dsr-ctl"
DSDV_CTL = "dsdv-ctl"

DEFAULT_HOP_LIMIT = 64


@dataclass(slots=True, eq=False)
class Packet:
    uid: int
    ptype: str
    src: int
    dst: int
    size: int
    created: float
    body: Any = None
    hops: int = 0
    extra: int = 0  # routing-header bytes on top of ``size`` (DSR source route)
    route: tuple | None = None
    cursor: int = 0
    salvaged: int = 0
    hop_limit: int = DEFAULT_HOP_LIMIT

    @property
    def is_data(self) -> bool:
        return self.ptype == CBR


@dataclass(slots=True, eq=False)
class Frame:
    packet: Packet
    src: int
    dst: int  # next hop, or BROADCAST
    size: int  # bytes on air, MAC/IP overhead included
    tx_start: float = -1.0
    tx_end: float = -1.0
    retries: int = 0

    @property
    def broadcast(self) -> bool:
        return self.dst == BROADCAST
