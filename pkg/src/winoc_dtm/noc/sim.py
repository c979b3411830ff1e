"""Cycle-accurate wormhole NoC with virtual channels and a token-passed wireless channel.

Timing model
------------
Every switch output port is a three-slot pipeline (input arbitration,
routing/switch traversal, output arbitration).  A flit that wins arbitration
at cycle c enters the first slot, reaches the last slot at c+2 and lands in
the downstream input buffer at c+3.  Flow control is credit based: a flit is
only admitted to a pipeline once a downstream buffer slot has been reserved
for it, so it never blocks the flits of other VCs behind it and nothing is
dropped.  A flit that reaches its destination switch is handed straight to the
attached core.  Wireless hops add the channel serialisation time (5 cycles for
a 32-bit flit at 16 Gb/s and 2.5 GHz) and are only started by the token holder.

Data VCs 0-2 follow the forwarding table.  VC 3 is an escape lane routed in
dimension order over wired links only: a head flit that cannot get a table
VC may drop into it, and stays there until delivery.  The control VC also uses
dimension-order routing.  Shortest-path trees on a mesh with wireless
shortcuts have cyclic channel dependencies, and the escape lane is what keeps
wormhole switching deadlock free on them.

Each cycle runs three phases in a fixed order, so traces are reproducible:
transfer (pipelines advance, flits land, wireless sends), injection (cores push
flits into their local port), allocation (VC allocation and round-robin
input/output arbitration move flits from buffers into pipelines).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..errors import ProtocolViolation
from ..routing import DistanceVectorState, build_channels, cost_matrix
from ..topology import Kind, Topology
from .flit import FLIT_BITS, Flit, Packet
from .wireless import DEFAULT_MAX_HOLD, initial_token, token_tick

N_DATA_VCS = 4
ESCAPE_VC = 3
CTRL_VC = 4
N_VCS = 5
LOCAL = 0
PIPELINE_DEPTH = 3
TABLE_VCS = tuple(range(ESCAPE_VC))


@dataclass(frozen=True)
class NocParams:
    buffer_depth: int = 2
    wireless_buffer_depth: int = 8
    max_hold: int = DEFAULT_MAX_HOLD
    flit_bits: int = FLIT_BITS
    record_transmissions: bool = False


class UtilizationStats:
    """Accumulators for one utilization window."""

    def __init__(self, n_switches: int, n_links: int, start: int = 0):
        self.n_switches = n_switches
        self.n_links = n_links
        self.reset(start)

    def reset(self, start: int) -> None:
        self.start = start
        self.core_busy = np.zeros(self.n_switches)
        self.switch_occ = np.zeros(self.n_switches)
        self.link_flits = np.zeros(self.n_links)
        self.wireless_busy = 0
        self.control_busy = 0


class Network:
    def __init__(self, topo: Topology, routing: DistanceVectorState | np.ndarray | None = None,
                 params: NocParams | None = None):
        self.topo = topo
        self.p = params or NocParams()
        n = topo.n_switches
        self.n = n
        self.cycle = 0
        # ports: 0 = local core, then wired neighbours in ascending order, then wireless
        self.port_nbr: list[list[int]] = []
        self.port_of: list[dict[int, int]] = []
        self.wport: list[int] = []
        self.port_link: list[list[int]] = []
        for s in range(n):
            nbrs = sorted(int(x) for x in topo.wired_neighbors[s])
            self.port_nbr.append([-1] + nbrs)
            self.port_of.append({nb: i + 1 for i, nb in enumerate(nbrs)})
            self.port_link.append([-1] + [topo.link_index[(s, nb)] for nb in nbrs])
            self.wport.append(len(nbrs) + 1 if topo.is_wi(s) else -1)
        self.n_ports = [len(self.port_nbr[s]) + (self.wport[s] >= 0) for s in range(n)]
        self.depth = [[self.p.wireless_buffer_depth if i == self.wport[s] else self.p.buffer_depth
                       for i in range(self.n_ports[s]) for _ in range(N_VCS)] for s in range(n)]
        self.buf = [[deque() for _ in range(self.n_ports[s] * N_VCS)] for s in range(n)]
        self.owner: list[list[Packet | None]] = [[None] * (self.n_ports[s] * N_VCS) for s in range(n)]
        self.route: list[list[tuple | None]] = [[None] * (self.n_ports[s] * N_VCS) for s in range(n)]
        self.reserved = [[0] * (self.n_ports[s] * N_VCS) for s in range(n)]
        self.pipe: list[list[list[Flit | None]]] = [
            [[None, None, None] for _ in range(self.n_ports[s])] for s in range(n)]
        self.rr_in = [[0] * self.n_ports[s] for s in range(n)]
        self.rr_out = [[0] * self.n_ports[s] for s in range(n)]
        self.resident = [0] * n  # flits held in buffers and pipelines
        self.buffered = [0] * n
        self.piped = [0] * n
        self.capacity = np.array([sum(self.depth[s]) + PIPELINE_DEPTH * self.n_ports[s]
                                  for s in range(n)], dtype=float)
        self._xy_tables()
        # sources
        self.src_q: list[deque[Packet]] = [deque() for _ in range(n)]
        self.src_cur: list[tuple[Packet, int, int] | None] = [None] * n
        self.src_pending = 0
        # wireless
        wis = list(topo.wireless_interfaces)
        self.token = initial_token(wis, self.p.max_hold) if wis else None
        self.channel_free_at = 0
        self.ser_cycles = topo.channel.cycles_for_bits(self.p.flit_bits)
        self.w_inflight: dict[int, list[tuple[int, int, Flit]]] = {}
        self.n_w_inflight = 0
        self.bcast_q: dict[int, deque] = {w: deque() for w in wis}
        self.bcast_pending = 0
        self.transmissions: list[tuple[int, int, int, bool]] = []  # (start, end, sender, control)
        self.control_flits_sent = 0
        self.control_channel_cycles = 0
        # routing
        self.tables: dict[int, tuple[list, list]] = {}
        self.gen = 0
        if routing is not None:
            self.set_routing(routing)
        # accounting
        self.next_pid = 0
        self.injected_flits = 0
        self.delivered_flits = 0
        self.delivered_packets = 0
        self.order_violations = 0
        self.escape_heads = 0
        self.latencies: list[int] = []
        self.on_deliver = None
        self.stats = UtilizationStats(n, topo.n_links)
        self.core_load = np.zeros(n)
        self._load_since = 0

    def _xy_tables(self) -> None:
        w = self.topo.grid_w
        n = self.n
        self.xy_nh = [[s] * n for s in range(n)]
        self.xy_port = [[-1] * n for s in range(n)]
        for s in range(n):
            sx, sy = s % w, s // w
            for d in range(n):
                if d == s:
                    continue
                dx, dy = d % w, d // w
                if dx != sx:
                    h = s + (1 if dx > sx else -1)
                else:
                    h = s + (w if dy > sy else -w)
                self.xy_nh[s][d] = h
                self.xy_port[s][d] = self.port_of[s][h]

    # -- routing ---------------------------------------------------------------
    def set_routing(self, routing: DistanceVectorState | np.ndarray, generation: int | None = None,
                    costs: np.ndarray | None = None) -> None:
        """Install a forwarding table for packets injected from now on."""
        if isinstance(routing, DistanceVectorState):
            nh = routing.old
            ch = routing.channels
            costs = routing.costs if costs is None else costs
        else:
            nh = np.asarray(routing)
            ch = build_channels(self.topo)
            costs = np.ones(len(ch), dtype=np.int64) if costs is None else costs
        generation = self.gen + 1 if generation is None else generation
        _, cid = cost_matrix(ch, costs)
        n = self.n
        ports = [[-1] * n for _ in range(n)]
        for s in range(n):
            for d in range(n):
                h = int(nh[s, d])
                if h == s:
                    continue
                c = int(cid[s, h])
                if c < 0:
                    raise ValueError(f"next hop {h} is not adjacent to switch {s}")
                ports[s][d] = self.wport[s] if ch.link[c] < 0 else self.port_of[s][h]
        self.tables[generation] = (np.asarray(nh).tolist(), ports)
        self.gen = generation
        self._gc_tables()

    def _gc_tables(self) -> None:
        live = {self.gen}
        for s in range(self.n):
            for q in self.buf[s]:
                live.update(f.pkt.gen for f in q)
            for pl in self.pipe[s]:
                live.update(f.pkt.gen for f in pl if f is not None)
            if self.src_cur[s] is not None:
                live.add(self.src_cur[s][0].gen)
        for lst in self.w_inflight.values():
            live.update(f.pkt.gen for _, _, f in lst)
        for g in list(self.tables):
            if g not in live:
                del self.tables[g]

    # -- injection ---------------------------------------------------------------
    def inject_packet(self, src: int, dst: int, n_flits: int, ctrl: bool = False,
                      src_task: int = -1, dst_task: int = -1, payload=None) -> Packet:
        if src == dst:
            raise ValueError("source and destination switch coincide")
        if not self.tables:
            raise ValueError("no forwarding table installed")
        pkt = Packet(self.next_pid, src, dst, n_flits, ctrl, self.cycle, src_task, dst_task, payload)
        self.next_pid += 1
        self.src_q[src].append(pkt)
        self.src_pending += 1
        return pkt

    def broadcast_control(self, wi: int, n_flits: int) -> None:
        """Queue ``n_flits`` single-flit broadcasts at WI ``wi`` (sent when it holds the token)."""
        if wi not in self.bcast_q:
            raise ValueError(f"switch {wi} has no wireless interface")
        for _ in range(n_flits):
            self.bcast_q[wi].append(self.cycle)
        self.bcast_pending += n_flits

    def set_core_loads(self, loads: np.ndarray) -> None:
        self._integrate_load()
        self.core_load = np.asarray(loads, dtype=float).copy()

    def _integrate_load(self) -> None:
        dtc = self.cycle - self._load_since
        if dtc > 0:
            self.stats.core_busy += self.core_load * dtc
        self._load_since = self.cycle

    # -- main loop ---------------------------------------------------------------
    def run(self, cycles: int) -> None:
        for _ in range(cycles):
            self.step()

    def step(self) -> None:
        self._transfer()
        if self.src_pending:
            self._inject()
        self._allocate()
        occ = self.stats.switch_occ
        for s, r in enumerate(self.resident):
            if r:
                occ[s] += r
        self.cycle += 1

    def idle(self) -> bool:
        return (self.src_pending == 0 and sum(self.resident) == 0 and self.n_w_inflight == 0
                and self.bcast_pending == 0)

    def in_flight_flits(self) -> int:
        """Flits injected into a switch and not yet delivered."""
        return sum(self.resident) + self.n_w_inflight

    # phase 1 ---------------------------------------------------------------
    def _transfer(self) -> None:
        now = self.cycle
        arrivals = self.w_inflight.pop(now, None)
        if arrivals:
            for tgt, slot, f in arrivals:
                self.n_w_inflight -= 1
                if slot < 0:
                    self._deliver(f)
                else:
                    self.reserved[tgt][slot] -= 1
                    self.buf[tgt][slot].append(f)
                    self.resident[tgt] += 1
                    self.buffered[tgt] += 1
        tok = self.token
        holder = tok.holder if tok is not None else -1
        if tok is not None and now >= self.channel_free_at and self.bcast_q[holder]:
            self.bcast_q[holder].popleft()
            self.bcast_pending -= 1
            self._occupy_channel(holder, now, control=True)
        link_flits = self.stats.link_flits
        for s in range(self.n):
            if not self.piped[s]:
                continue
            pipes = self.pipe[s]
            wp = self.wport[s]
            nbrs = self.port_nbr[s]
            for o in range(1, self.n_ports[s]):
                pl = pipes[o]
                f = pl[2]
                if f is not None:
                    if o == wp:
                        if s == holder and now >= self.channel_free_at:
                            self._send_wireless(s, f, now)
                            pl[2] = None
                            self.resident[s] -= 1
                            self.piped[s] -= 1
                    else:
                        nb = nbrs[o]
                        if f.pkt.dst == nb:
                            self._deliver(f)
                        else:
                            slot = self.port_of[nb][s] * N_VCS + f.vc
                            self.reserved[nb][slot] -= 1
                            self.buf[nb][slot].append(f)
                            self.resident[nb] += 1
                            self.buffered[nb] += 1
                        link_flits[self.port_link[s][o]] += 1
                        pl[2] = None
                        self.resident[s] -= 1
                        self.piped[s] -= 1
                if pl[2] is None:
                    pl[2], pl[1], pl[0] = pl[1], pl[0], None
                elif pl[1] is None:
                    pl[1], pl[0] = pl[0], None
        if tok is not None:
            if now < self.channel_free_at:
                self.stats.wireless_busy += 1
            wp = self.wport[holder]
            release = (now >= self.channel_free_at and not self.bcast_q[holder]
                       and (wp < 0 or all(x is None for x in self.pipe[holder][wp])))
            self.token = token_tick(tok, release)

    def _occupy_channel(self, sender: int, now: int, control: bool = False) -> int:
        if self.token is None or self.token.holder != sender:
            raise ProtocolViolation(f"WI {sender} transmitted without the token")
        if now < self.channel_free_at:
            raise ProtocolViolation(f"WI {sender} transmitted on a busy channel")
        end = now + self.ser_cycles
        self.channel_free_at = end
        if control:
            self.control_flits_sent += 1
            self.control_channel_cycles += self.ser_cycles
            self.stats.control_busy += self.ser_cycles
        if self.p.record_transmissions:
            self.transmissions.append((now, end, sender, control))
        return end

    def _send_wireless(self, s: int, f: Flit, now: int) -> None:
        tgt = f.nxt
        slot = -1 if f.pkt.dst == tgt else self.wport[tgt] * N_VCS + f.vc
        end = self._occupy_channel(s, now)
        self.w_inflight.setdefault(end, []).append((tgt, slot, f))
        self.n_w_inflight += 1

    def _deliver(self, f: Flit) -> None:
        pkt = f.pkt
        if f.seq != pkt.next_seq:
            self.order_violations += 1
        pkt.next_seq = f.seq + 1
        self.delivered_flits += 1
        if f.is_tail:
            pkt.delivered = self.cycle
            self.delivered_packets += 1
            self.latencies.append(self.cycle - pkt.created)
            if self.on_deliver is not None:
                self.on_deliver(pkt)

    # phase 2 ---------------------------------------------------------------
    def _inject(self) -> None:
        for s in range(self.n):
            cur = self.src_cur[s]
            if cur is None:
                if not self.src_q[s]:
                    continue
                pkt = self.src_q[s][0]
                own = self.owner[s]  # local port owns slots 0..4
                if pkt.ctrl:
                    vc = CTRL_VC if own[CTRL_VC] is None else -1
                else:
                    vc = next((v for v in range(N_DATA_VCS) if own[v] is None), -1)
                if vc < 0:
                    continue
                self.src_q[s].popleft()
                own[vc] = pkt
                pkt.gen = self.gen
                pkt.injected = self.cycle
                cur = (pkt, 0, vc)
            pkt, seq, vc = cur
            q = self.buf[s][vc]
            if len(q) >= self.depth[s][vc]:
                self.src_cur[s] = cur
                continue
            q.append(Flit(pkt, seq))
            self.resident[s] += 1
            self.buffered[s] += 1
            self.injected_flits += 1
            seq += 1
            if seq == pkt.n_flits:
                self.src_cur[s] = None
                self.src_pending -= 1
            else:
                self.src_cur[s] = (pkt, seq, vc)

    # phase 3 ---------------------------------------------------------------
    def _head_route(self, s: int, v: int, pkt: Packet, pipes) -> tuple | None:
        """(out port, out vc, next switch, downstream slot) for a head flit, or None if blocked."""
        d = pkt.dst
        if v < ESCAPE_VC:
            nh_t, port_t = self.tables[pkt.gen]
            nh = nh_t[s][d]
            o = port_t[s][d]
            if pipes[o][0] is None:
                if nh == d:
                    return o, -1, nh, -1
                base = self._in_port(nh, s, o) * N_VCS
                own = self.owner[nh]
                for ov in TABLE_VCS:
                    if own[base + ov] is None:
                        return o, ov, nh, base + ov
            ov = ESCAPE_VC
        else:
            ov = v
        nh = self.xy_nh[s][d]
        o = self.xy_port[s][d]
        if pipes[o][0] is not None:
            return None
        if nh == d:
            return o, -1, nh, -1
        slot = self.port_of[nh][s] * N_VCS + ov
        if self.owner[nh][slot] is not None:
            return None
        return o, ov, nh, slot

    def _allocate(self) -> None:
        for s in range(self.n):
            if not self.buffered[s]:
                continue
            nports = self.n_ports[s]
            bufs = self.buf[s]
            routes = self.route[s]
            pipes = self.pipe[s]
            rr_in = self.rr_in[s]
            requests: dict[int, list] = {}
            for p in range(nports):
                base = p * N_VCS
                start = rr_in[p]
                for k in range(N_VCS):
                    v = (start + k) % N_VCS
                    slot = base + v
                    q = bufs[slot]
                    if not q:
                        continue
                    r = routes[slot]
                    if r is None:
                        r = self._head_route(s, v, q[0].pkt, pipes)
                        if r is None:
                            continue
                        fresh = True
                    else:
                        if pipes[r[0]][0] is not None:
                            continue
                        dslot = r[3]
                        if dslot >= 0:
                            nh = r[2]
                            if len(self.buf[nh][dslot]) + self.reserved[nh][dslot] >= self.depth[nh][dslot]:
                                continue
                        fresh = False
                    requests.setdefault(r[0], []).append((p, v, r, fresh))
                    break
            for o, reqs in requests.items():
                if len(reqs) == 1:
                    p, v, r, fresh = reqs[0]
                else:
                    ptr = self.rr_out[s][o]
                    p, v, r, fresh = min(reqs, key=lambda q: (q[0] - ptr) % nports)
                slot = p * N_VCS + v
                _, ov, nh, dslot = r
                if fresh:
                    if dslot >= 0:
                        self.owner[nh][dslot] = bufs[slot][0].pkt
                        if ov == ESCAPE_VC and v < ESCAPE_VC:
                            self.escape_heads += 1
                    routes[slot] = r
                if dslot >= 0:
                    self.reserved[nh][dslot] += 1
                f = bufs[slot].popleft()
                f.vc = ov
                f.nxt = nh
                pipes[o][0] = f
                self.buffered[s] -= 1
                self.piped[s] += 1
                if f.is_tail:
                    routes[slot] = None
                    self.owner[s][slot] = None
                rr_in[p] = (v + 1) % N_VCS
                self.rr_out[s][o] = (p + 1) % nports

    def _in_port(self, nb: int, s: int, o: int) -> int:
        return self.wport[nb] if o == self.wport[s] else self.port_of[nb][s]

    # -- utilization ---------------------------------------------------------------
    def collect_utilization(self, window_end: int | None = None) -> np.ndarray:
        """Close the current window and return the 240-entry utilization vector."""
        window_end = self.cycle if window_end is None else window_end
        if window_end != self.cycle:
            raise ValueError("collect_utilization must be called at the window boundary")
        self._integrate_load()
        st = self.stats
        span = max(window_end - st.start, 1)
        t = self.topo
        u = np.zeros(t.n_components)
        u[t.slice(Kind.CORE)] = np.clip(st.core_busy / span, 0.0, 1.0)
        u[t.slice(Kind.SWITCH)] = np.clip(st.switch_occ / (span * self.capacity), 0.0, 1.0)
        u[t.slice(Kind.LINK)] = np.clip(st.link_flits / (2.0 * span), 0.0, 1.0)
        self.last_wireless_busy = st.wireless_busy / span
        self.last_control_busy = st.control_busy
        st.reset(window_end)
        return u
