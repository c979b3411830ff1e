"""Token-passing access to the single shared wireless channel."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from ..errors import ProtocolViolation
from ..topology import WirelessChannel
from .flit import FLIT_BITS

DEFAULT_MAX_HOLD = 1000


@dataclass(frozen=True)
class TokenState:
    """The circulating token. Ring order is the position in ``ring``."""
    ring: tuple[int, ...]
    holder: int
    prev_wi: int
    hold_cycles_remaining: int
    max_hold: int = DEFAULT_MAX_HOLD

    @property
    def next_wi(self) -> int:
        i = self.ring.index(self.holder)
        return self.ring[(i + 1) % len(self.ring)]


def initial_token(ring: Sequence[int], max_hold: int = DEFAULT_MAX_HOLD) -> TokenState:
    if not ring:
        raise ValueError("token ring needs at least one wireless interface")
    ring = tuple(ring)
    return TokenState(ring, ring[0], ring[-1], max_hold, max_hold)


def token_advance(tok: TokenState) -> TokenState:
    """Hand the token to the next WI in ring order."""
    return replace(tok, holder=tok.next_wi, prev_wi=tok.holder,
                   hold_cycles_remaining=tok.max_hold)


def token_tick(tok: TokenState, release: bool) -> TokenState:
    """One cycle of ownership: pass on voluntary release or when the hold time runs out."""
    remaining = tok.hold_cycles_remaining - 1
    if release or remaining <= 0:
        return token_advance(tok)
    return replace(tok, hold_cycles_remaining=remaining)


@dataclass(frozen=True)
class Transmission:
    flit_index: int
    start: int
    end: int  # first cycle after the flit is fully received
    dst: int | None  # None for broadcast


def wireless_transmit(tok: TokenState, sender: int, n_flits: int, start_cycle: int,
                      channel: WirelessChannel | None = None, dst: int | None = None,
                      flit_bits: int = FLIT_BITS) -> list[Transmission]:
    """Back-to-back schedule for ``n_flits`` sent by ``sender`` starting at ``start_cycle``."""
    if sender != tok.holder:
        raise ProtocolViolation(f"WI {sender} transmitted while WI {tok.holder} holds the token")
    channel = channel or WirelessChannel()
    per_flit = channel.cycles_for_bits(flit_bits)
    out, t = [], start_cycle
    for i in range(n_flits):
        out.append(Transmission(i, t, t + per_flit, dst))
        t += per_flit
    return out


def channel_occupancy(schedule: Sequence[Transmission]) -> int:
    return sum(tr.end - tr.start for tr in schedule)
