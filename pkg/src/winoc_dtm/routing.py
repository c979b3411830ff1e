"""Temperature-aware distance-vector routing with old/new forwarding tables.

Costs live on directed channels (wired links in both directions plus every
ordered pair of wireless interfaces).  A hot link or switch adds a fixed penalty
to the channels touching it; nothing is ever removed, so the fabric stays
connected.  While a recomputation is in flight, data keeps using the old table;
the new one takes over at the scheduled switchover cycle.
"""
from __future__ import annotations

import csv
import heapq
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .topology import Kind, Topology

log = logging.getLogger(__name__)

INF = np.iinfo(np.int64).max // 4
SWITCHOVER_DELAY = 600
DEFAULT_CADENCE = 10
DEFAULT_PENALTY = 100


@dataclass(frozen=True, eq=False)
class Channels:
    """Directed channels of the fabric. Wired channels come first."""
    src: np.ndarray
    dst: np.ndarray
    link: np.ndarray  # link id, -1 for wireless
    n_switches: int

    @property
    def wireless(self) -> np.ndarray:
        return self.link < 0

    def __len__(self) -> int:
        return len(self.src)


def build_channels(topo: Topology) -> Channels:
    src, dst, link = [], [], []
    for i, (a, b) in enumerate(topo.links):
        src += [int(a), int(b)]
        dst += [int(b), int(a)]
        link += [i, i]
    for a in topo.wireless_interfaces:
        for b in topo.wireless_interfaces:
            if a != b:
                src.append(a)
                dst.append(b)
                link.append(-1)
    return Channels(np.array(src), np.array(dst), np.array(link), topo.n_switches)


@dataclass(frozen=True, eq=False)
class LinkCostMap:
    base: np.ndarray  # per channel, >= 1
    penalty: int = DEFAULT_PENALTY
    hot_switches: frozenset[int] = frozenset()
    hot_links: frozenset[int] = frozenset()

    def costs(self, ch: Channels) -> np.ndarray:
        c = self.base.copy()
        if not self.hot_switches and not self.hot_links:
            return c
        hot = np.array([(int(l) in self.hot_links) or (int(s) in self.hot_switches)
                        or (int(d) in self.hot_switches)
                        for s, d, l in zip(ch.src, ch.dst, ch.link)])
        return c + self.penalty * hot


def base_costs(ch: Channels) -> LinkCostMap:
    return LinkCostMap(np.ones(len(ch), dtype=np.int64))


def costs_from_status(ch: Channels, topo: Topology, status_bits: np.ndarray,
                      penalty: int = DEFAULT_PENALTY, base: np.ndarray | None = None) -> LinkCostMap:
    bits = np.asarray(status_bits, dtype=bool)
    hot_sw = frozenset(np.flatnonzero(bits[topo.slice(Kind.SWITCH)]).tolist())
    hot_ln = frozenset(np.flatnonzero(bits[topo.slice(Kind.LINK)]).tolist())
    b = np.ones(len(ch), dtype=np.int64) if base is None else base
    return LinkCostMap(b, penalty, hot_sw, hot_ln)


def cost_matrix(ch: Channels, costs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per switch pair: cheapest channel cost and its channel id (-1 if none).

    Between two adjacent WIs the wired channel wins a cost tie.
    """
    n = ch.n_switches
    cm = np.full((n, n), INF, dtype=np.int64)
    cid = np.full((n, n), -1, dtype=np.int64)
    for i in range(len(ch)):
        s, d, c = ch.src[i], ch.dst[i], int(costs[i])
        if c < 1:
            raise ConfigurationError("channel costs must be >= 1")
        if c < cm[s, d]:
            cm[s, d], cid[s, d] = c, i
    return cm, cid


def next_hops(cm: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """Forwarding table from distances: lowest-index neighbour on a cheapest path."""
    n = len(cm)
    total, nbr = _relax(cm, dist)
    pick = np.argmin(total, axis=2)  # neighbours are sorted, so ties go to the lowest index
    nh = np.take_along_axis(nbr, pick, axis=1)
    nh[np.arange(n), np.arange(n)] = np.arange(n)
    return nh


def _neighbours(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per switch, its out-neighbours in ascending order padded to a common width, and the costs."""
    n = len(cm)
    has = cm < INF
    width = max(1, int(has.sum(axis=1).max()))
    # stable sort puts real neighbours first, each group in index order
    nbr = np.argsort(~has, axis=1, kind="stable")[:, :width]
    cost = np.take_along_axis(cm, nbr, axis=1)
    cost[~np.take_along_axis(has, nbr, axis=1)] = INF
    return nbr, cost


def _relax(cm: np.ndarray, dist: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """total[s, d, j] = cost to neighbour j of s plus its distance to d, saturating at INF."""
    nbr, cost = _neighbours(cm)
    total = cost[:, None, :] + dist[nbr].transpose(0, 2, 1)
    return np.minimum(total, INF), nbr


def dijkstra_oracle(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs distances (dist[s, d]) and per-destination next-hop trees."""
    n = len(cm)
    dist = np.full((n, n), INF, dtype=np.int64)
    preds = [np.flatnonzero(cm[:, v] < INF) for v in range(n)]
    for d in range(n):
        # shortest paths *to* d: search the reversed graph from d
        dd = dist[:, d]
        dd[d] = 0
        heap = [(0, d)]
        done = np.zeros(n, dtype=bool)
        while heap:
            du, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for s in preds[u]:
                nd = du + cm[s, u]
                if nd < dd[s]:
                    dd[s] = nd
                    heapq.heappush(heap, (int(nd), int(s)))
    if (dist >= INF).any():
        raise ConfigurationError("topology is disconnected")
    return dist, next_hops(cm, dist)


def is_tree(nh: np.ndarray) -> bool:
    """True if following next hops from every source reaches each destination without a cycle."""
    n = len(nh)
    for d in range(n):
        state = np.zeros(n, dtype=np.int8)  # 0 unknown, 1 on stack, 2 reaches d
        state[d] = 2
        for s in range(n):
            path = []
            v = s
            while state[v] == 0:
                state[v] = 1
                path.append(v)
                v = nh[v, d]
            if state[v] == 1:
                return False
            for p in path:
                state[p] = 2
    return True


@dataclass
class ConvergenceRecord:
    trigger_cycle: int
    rounds: int
    cycles_to_fixpoint: int


@dataclass
class DistanceVectorState:
    topo: Topology
    channels: Channels
    costs: np.ndarray  # per channel, in force for the current computation
    cm: np.ndarray
    dist: np.ndarray  # current estimates of the new computation
    old: np.ndarray  # forwarding table used by data
    new: np.ndarray  # forwarding table being built
    generation: int = 0  # bumps at every switchover
    cadence: int = DEFAULT_CADENCE
    trigger_cycle: int | None = None
    switchover_cycle: int | None = None
    rounds: int = 0
    converged: bool = True
    log: list[ConvergenceRecord] = field(default_factory=list)

    @property
    def active(self) -> np.ndarray:
        return self.old

    @property
    def in_progress(self) -> bool:
        return self.switchover_cycle is not None

    def route_dump(self) -> str:
        n = self.topo.n_switches
        lines = ["# next hop table (rows: switch, columns: destination)"]
        lines.append("switch," + ",".join(str(d) for d in range(n)))
        for s in range(n):
            lines.append(f"{s}," + ",".join(str(int(x)) for x in self.old[s]))
        return "\n".join(lines) + "\n"


def write_convergence_log(path, state: DistanceVectorState) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trigger_cycle", "rounds", "cycles_to_fixpoint"])
        for r in state.log:
            w.writerow([r.trigger_cycle, r.rounds, r.cycles_to_fixpoint])


def _fresh_dist(n: int) -> np.ndarray:
    d = np.full((n, n), INF, dtype=np.int64)
    np.fill_diagonal(d, 0)
    return d


def init_routes(topo: Topology, cost_map: LinkCostMap | None = None,
                cadence: int = DEFAULT_CADENCE) -> DistanceVectorState:
    ch = build_channels(topo)
    cost_map = cost_map or base_costs(ch)
    costs = cost_map.costs(ch)
    cm, _ = cost_matrix(ch, costs)
    n = topo.n_switches
    state = DistanceVectorState(topo, ch, costs, cm, _fresh_dist(n), np.zeros((n, n), np.int64),
                                np.zeros((n, n), np.int64), cadence=cadence)
    changed = True
    while changed:
        changed = _exchange(state)
        if state.rounds > n + 1 and changed:
            raise ConfigurationError("topology is disconnected")
    if (state.dist >= INF).any():
        raise ConfigurationError("topology is disconnected")
    state.new = next_hops(cm, state.dist)
    state.old = state.new.copy()
    state.rounds = 0
    return state


def _exchange(state: DistanceVectorState) -> bool:
    adv = state.dist  # what every neighbour advertised last round
    new = _relax(state.cm, adv)[0].min(axis=2)
    np.fill_diagonal(new, 0)
    new = np.minimum(new, adv)  # estimates only come down after a reset
    changed = not np.array_equal(new, adv)
    state.dist = new
    state.rounds += 1
    return changed


def dv_exchange_step(state: DistanceVectorState) -> DistanceVectorState:
    """One synchronous round of advertisements and Bellman-Ford relaxation."""
    if state.converged:
        return state
    changed = _exchange(state)
    state.new = next_hops(state.cm, state.dist)
    if not changed and not (state.dist >= INF).any():
        state.converged = True
        state.log.append(ConvergenceRecord(state.trigger_cycle, state.rounds,
                                           state.rounds * state.cadence))
    return state


def trigger_reroute(state: DistanceVectorState, status_bits: np.ndarray, trigger_cycle: int,
                    penalty: int = DEFAULT_PENALTY) -> DistanceVectorState:
    bits = np.asarray(status_bits, dtype=bool)
    topo = state.topo
    if not (bits[topo.slice(Kind.SWITCH)].any() or bits[topo.slice(Kind.LINK)].any()):
        return state
    cost_map = costs_from_status(state.channels, topo, bits, penalty)
    state.costs = cost_map.costs(state.channels)
    state.cm, _ = cost_matrix(state.channels, state.costs)
    state.dist = _fresh_dist(topo.n_switches)
    state.rounds = 0
    state.converged = False
    state.trigger_cycle = trigger_cycle
    state.switchover_cycle = trigger_cycle + SWITCHOVER_DELAY
    return state


def run_to_fixpoint(state: DistanceVectorState, max_rounds: int = 10_000) -> DistanceVectorState:
    while not state.converged and state.rounds < max_rounds:
        dv_exchange_step(state)
    return state


def advance(state: DistanceVectorState, now_cycle: int) -> DistanceVectorState:
    """Run every advertisement round due by ``now_cycle`` and switch over when scheduled."""
    if state.trigger_cycle is None or state.switchover_cycle is None:
        return state
    due = (now_cycle - state.trigger_cycle) // state.cadence
    while not state.converged and state.rounds < due:
        dv_exchange_step(state)
    if now_cycle >= state.switchover_cycle:
        switchover(state, now_cycle)
    return state


def switchover(state: DistanceVectorState, now_cycle: int) -> DistanceVectorState:
    if state.switchover_cycle is None:
        return state
    if now_cycle < state.switchover_cycle:
        raise ValueError(f"switchover at {now_cycle} before scheduled {state.switchover_cycle}")
    if not state.converged:
        log.warning("switchover at cycle %d before the distance vectors reached a fixpoint "
                    "(%d rounds so far)", now_cycle, state.rounds)
    state.old = state.new.copy()
    state.generation += 1
    state.switchover_cycle = None
    return state
