from __future__ import annotations

from enum import IntEnum

FLIT_BITS = 32
DEFAULT_PACKET_FLITS = 64


class FlitKind(IntEnum):
    HEAD = 0
    BODY = 1
    TAIL = 2
    HEADTAIL = 3


class Packet:
    __slots__ = ("pid", "src", "dst", "n_flits", "ctrl", "gen", "created", "injected",
                 "delivered", "next_seq", "src_task", "dst_task", "payload")

    def __init__(self, pid, src, dst, n_flits, ctrl=False, created=0, src_task=-1, dst_task=-1,
                 payload=None):
        if n_flits < 1:
            raise ValueError("a packet has at least one flit")
        self.pid = pid
        self.src = src
        self.dst = dst
        self.n_flits = n_flits
        self.ctrl = ctrl
        self.gen = 0  # routing table generation, fixed when the head enters the network
        self.created = created
        self.injected = -1
        self.delivered = -1
        self.next_seq = 0  # next flit sequence number expected at the sink
        self.src_task = src_task
        self.dst_task = dst_task
        self.payload = payload

    def __repr__(self):
        return f"Packet({self.pid}, {self.src}->{self.dst}, {self.n_flits}f{' ctrl' if self.ctrl else ''})"


class Flit:
    __slots__ = ("pkt", "seq", "vc", "nxt", "is_head", "is_tail")

    def __init__(self, pkt: Packet, seq: int):
        self.pkt = pkt
        self.seq = seq
        self.vc = -1
        self.nxt = -1
        self.is_head = seq == 0
        self.is_tail = seq == pkt.n_flits - 1

    @property
    def kind(self) -> FlitKind:
        if self.is_head and self.is_tail:
            return FlitKind.HEADTAIL
        if self.is_head:
            return FlitKind.HEAD
        return FlitKind.TAIL if self.is_tail else FlitKind.BODY

    def __repr__(self):
        return f"Flit(p{self.pkt.pid}#{self.seq} {self.kind.name})"


def packet_flits(pkt: Packet) -> list[Flit]:
    return [Flit(pkt, i) for i in range(pkt.n_flits)]
