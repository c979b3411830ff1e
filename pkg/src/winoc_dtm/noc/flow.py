"""Analytic utilization estimate: route the expected traffic matrix over a forwarding table.

Used by the experiment engine for long thermal runs, where stepping every NoC
cycle would take hours.  Link utilization is exact in expectation.  Switch
occupancy uses a residence-time estimate (buffer wait behind the worm plus
the three pipeline slots, stretched by an M/D/1 queueing factor on the outgoing channel),
which the tests calibrate against the cycle-accurate simulator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..routing import Channels, cost_matrix
from ..topology import Kind, Topology
from .sim import PIPELINE_DEPTH

BASE_RESIDENCE = 3 + PIPELINE_DEPTH  # buffer wait behind the worm, then the pipeline


@dataclass(frozen=True)
class FlowResult:
    u: np.ndarray  # 240-entry utilization vector
    wireless_load: float  # fraction of channel time the data would need
    channel_load: np.ndarray  # flits/cycle per directed channel


@dataclass(frozen=True, eq=False)
class FlowModel:
    topo: Topology
    channels: Channels
    capacity: np.ndarray  # buffer + pipeline slots per switch
    wireless_cycles_per_flit: int

    @classmethod
    def build(cls, topo: Topology, channels: Channels, buffer_depth: int = 2,
              wireless_buffer_depth: int = 8, n_vcs: int = 5) -> "FlowModel":
        cap = np.zeros(topo.n_switches)
        for s in range(topo.n_switches):
            n_wired = len(topo.wired_neighbors[s])
            ports = 1 + n_wired
            slots = ports * n_vcs * buffer_depth
            if topo.is_wi(s):
                ports += 1
                slots += n_vcs * wireless_buffer_depth
            cap[s] = slots + PIPELINE_DEPTH * ports
        return cls(topo, channels, cap, topo.channel.cycles_for_bits(32))

    def channel_loads(self, next_hop: np.ndarray, costs: np.ndarray, flit_rates: np.ndarray) -> np.ndarray:
        """Flits per cycle on each directed channel for a switch-to-switch flit-rate matrix."""
        n = self.topo.n_switches
        _, cid = cost_matrix(self.channels, costs)
        load = np.zeros(len(self.channels))
        # push each destination's demand down its next-hop tree, farthest sources first
        for d in range(n):
            col = flit_rates[:, d].astype(float).copy()
            if not col.any():
                continue
            nh = next_hop[:, d]
            depth = np.zeros(n, dtype=int)
            for s in range(n):
                v, k = s, 0
                while v != d:
                    v = nh[v]
                    k += 1
                    if k > n:
                        raise ValueError("forwarding table has a loop")
                depth[s] = k
            for s in np.argsort(-depth, kind="stable"):
                if s == d or col[s] == 0:
                    continue
                h = nh[s]
                load[cid[s, h]] += col[s]
                if h != d:
                    col[h] += col[s]
        return load

    def utilization(self, next_hop: np.ndarray, costs: np.ndarray, flit_rates: np.ndarray,
                    core_busy: np.ndarray) -> FlowResult:
        topo = self.topo
        ch = self.channels
        load = self.channel_loads(next_hop, costs, flit_rates)
        wired = ~ch.wireless
        link_flits = np.zeros(topo.n_links)
        np.add.at(link_flits, ch.link[wired], load[wired])
        w_load = float(load[ch.wireless].sum()) * self.wireless_cycles_per_flit
        # residence of forwarded flits at each switch
        rho = np.where(wired, load, 0.0)
        rho = np.where(ch.wireless, w_load, rho)
        rho = np.minimum(rho, 0.95)
        stretch = BASE_RESIDENCE + rho / (2.0 * (1.0 - rho)) * np.where(ch.wireless, self.wireless_cycles_per_flit, 1)
        occ = np.zeros(topo.n_switches)
        np.add.at(occ, ch.src, load * stretch)
        u_sw = occ / self.capacity
        u = np.zeros(topo.n_components)
        u[topo.slice(Kind.CORE)] = np.clip(core_busy, 0.0, 1.0)
        u[topo.slice(Kind.SWITCH)] = np.clip(u_sw, 0.0, 1.0)
        u[topo.slice(Kind.LINK)] = np.clip(link_flits / 2.0, 0.0, 1.0)
        return FlowResult(u, w_load, load)
