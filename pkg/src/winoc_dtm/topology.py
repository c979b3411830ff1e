"""Wired mesh plus wireless overlay, with the component numbering used everywhere else.

Components are flattened in the order cores, switches, links.  For the default
8x8 grid that gives 64 + 64 + 112 = 240 components, one per input register of the
predictor hardware.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import ConfigurationError


class Kind(IntEnum):
    CORE = 0
    SWITCH = 1
    LINK = 2


@dataclass(frozen=True, order=True)
class ComponentId:
    kind: Kind
    index: int


@dataclass(frozen=True)
class WirelessChannel:
    data_rate: float = 16e9  # bits/s
    range_mm: float = 20.0
    clock_hz: float = 2.5e9

    def cycles_for_bits(self, bits: int) -> int:
        """Serialization time on the shared channel, in switch clock cycles."""
        if bits <= 0:
            return 0
        bits_per_cycle = self.data_rate / self.clock_hz
        return int(np.ceil(bits / bits_per_cycle - 1e-12))


@dataclass(frozen=True, eq=False)
class Topology:
    grid_w: int
    grid_h: int
    die: tuple[float, float]
    positions: np.ndarray  # (n_switches, 2) in mm
    links: np.ndarray  # (n_links, 2) switch endpoints, a < b
    link_lengths: np.ndarray  # mm
    wireless_interfaces: tuple[int, ...] = ()
    channel: WirelessChannel = field(default_factory=WirelessChannel)

    @property
    def n_switches(self) -> int:
        return self.grid_w * self.grid_h

    @property
    def n_cores(self) -> int:
        return self.n_switches

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_components(self) -> int:
        return self.n_cores + self.n_switches + self.n_links

    # -- component numbering -------------------------------------------------
    def offset(self, kind: Kind) -> int:
        return (0, self.n_cores, self.n_cores + self.n_switches)[kind]

    def count(self, kind: Kind) -> int:
        return (self.n_cores, self.n_switches, self.n_links)[kind]

    def flatten(self, c: ComponentId) -> int:
        if not 0 <= c.index < self.count(c.kind):
            raise IndexError(f"{c.kind.name.lower()} index {c.index} out of range")
        return self.offset(c.kind) + c.index

    def unflatten(self, i: int) -> ComponentId:
        if not 0 <= i < self.n_components:
            raise IndexError(f"component {i} out of range")
        for kind in (Kind.LINK, Kind.SWITCH, Kind.CORE):
            if i >= self.offset(kind):
                return ComponentId(kind, i - self.offset(kind))
        raise AssertionError("unreachable")

    def slice(self, kind: Kind) -> slice:
        o = self.offset(kind)
        return slice(o, o + self.count(kind))

    @cached_property
    def component_kinds(self) -> np.ndarray:
        kinds = np.empty(self.n_components, dtype=np.int8)
        for k in Kind:
            kinds[self.slice(k)] = k
        return kinds

    # -- geometry helpers ----------------------------------------------------
    def coord(self, s: int) -> tuple[int, int]:
        return s % self.grid_w, s // self.grid_w

    def switch_at(self, x: int, y: int) -> int:
        return y * self.grid_w + x

    @cached_property
    def link_index(self) -> dict[tuple[int, int], int]:
        """(a, b) -> link id, for both orientations."""
        idx = {}
        for i, (a, b) in enumerate(self.links):
            idx[(int(a), int(b))] = i
            idx[(int(b), int(a))] = i
        return idx

    @cached_property
    def wired_neighbors(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n_switches)]
        for a, b in self.links:
            nbrs[a].append(int(b))
            nbrs[b].append(int(a))
        return tuple(tuple(sorted(n)) for n in nbrs)

    def is_wi(self, s: int) -> bool:
        return s in self._wi_set

    @cached_property
    def _wi_set(self) -> frozenset[int]:
        return frozenset(self.wireless_interfaces)

    @cached_property
    def hop_matrix(self) -> np.ndarray:
        return _hop_matrix(self.n_switches, self.links, self.wireless_interfaces)

    def average_hop_count(self) -> float:
        n = self.n_switches
        return float(self.hop_matrix.sum() / (n * (n - 1)))

    def with_wireless(self, wis: Iterable[int]) -> "Topology":
        wis = tuple(int(w) for w in wis)
        if len(set(wis)) != len(wis):
            raise ConfigurationError("wireless interface switches must be distinct")
        for w in wis:
            if not 0 <= w < self.n_switches:
                raise ConfigurationError(f"wireless interface switch {w} out of range")
        return Topology(self.grid_w, self.grid_h, self.die, self.positions, self.links,
                        self.link_lengths, wis, self.channel)

    def dump(self) -> str:
        """Readable component listing (positions in mm)."""
        lines = [f"# topology {self.grid_w}x{self.grid_h} die={self.die[0]}x{self.die[1]}mm "
                 f"components={self.n_components} wis={list(self.wireless_interfaces)}"]
        lines.append("component_id,kind,index,x_mm,y_mm,length_mm,endpoints")
        for i in range(self.n_components):
            c = self.unflatten(i)
            if c.kind == Kind.LINK:
                a, b = self.links[c.index]
                mid = (self.positions[a] + self.positions[b]) / 2
                lines.append(f"{i},link,{c.index},{mid[0]:.3f},{mid[1]:.3f},"
                             f"{self.link_lengths[c.index]:.3f},{a}-{b}")
            else:
                x, y = self.positions[c.index]
                tag = "core" if c.kind == Kind.CORE else ("switch_wi" if self.is_wi(c.index) else "switch")
                lines.append(f"{i},{tag},{c.index},{x:.3f},{y:.3f},,")
        return "\n".join(lines) + "\n"


def _hop_matrix(n: int, links: np.ndarray, wis: Sequence[int]) -> np.ndarray:
    rows = list(links[:, 0]) + list(links[:, 1])
    cols = list(links[:, 1]) + list(links[:, 0])
    for a in wis:
        for b in wis:
            if a != b:
                rows.append(a)
                cols.append(b)
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    d = shortest_path(adj, method="D", unweighted=True)
    if np.isinf(d).any():
        raise ConfigurationError("topology is disconnected")
    return d.astype(np.int64)


def build_mesh(grid_w: int = 8, grid_h: int = 8, die: tuple[float, float] = (20.0, 20.0),
               channel: WirelessChannel | None = None) -> Topology:
    if grid_w < 2 or grid_h < 2:
        raise ConfigurationError("grid_w >= 2 and grid_h >= 2 required")
    pitch_x = die[0] / grid_w
    pitch_y = die[1] / grid_h
    pos = np.array([((x + 0.5) * pitch_x, (y + 0.5) * pitch_y)
                    for y in range(grid_h) for x in range(grid_w)])
    links, lengths = [], []
    for y in range(grid_h):
        for x in range(grid_w):
            s = y * grid_w + x
            if x + 1 < grid_w:
                links.append((s, s + 1))
                lengths.append(pitch_x)
            if y + 1 < grid_h:
                links.append((s, s + grid_w))
                lengths.append(pitch_y)
    return Topology(grid_w, grid_h, (float(die[0]), float(die[1])), pos,
                    np.array(links, dtype=np.int64), np.array(lengths),
                    (), channel or WirelessChannel())


def place_wireless_overlay(topo: Topology, k: int) -> Topology:
    """Greedy WI placement: each pick minimises the mean all-pairs hop count.

    Ties (which include every candidate for the first pick, since one WI adds
    no shortcut) fall back to the smallest total wired distance to all other
    switches, then to the lowest switch index.
    """
    n = topo.n_switches
    if not 1 <= k <= n:
        raise ConfigurationError(f"wireless interface count must be in 1..{n}, got {k}")
    wired = _hop_matrix(n, topo.links, ())
    closeness = wired.sum(axis=1)
    chosen: list[int] = []
    for _ in range(k):
        best, best_key = -1, None
        for s in range(n):
            if s in chosen:
                continue
            hops = _hop_matrix(n, topo.links, chosen + [s]).sum()
            key = (int(hops), int(closeness[s]), s)
            if best_key is None or key < best_key:
                best, best_key = s, key
        chosen.append(best)
    return topo.with_wireless(sorted(chosen))


def hop_distance(topo: Topology, a: int, b: int) -> int:
    return int(topo.hop_matrix[a, b])


def default_topology(grid_w: int = 8, grid_h: int = 8, n_wi: int = 4,
                     die: tuple[float, float] = (20.0, 20.0)) -> Topology:
    topo = build_mesh(grid_w, grid_h, die)
    if n_wi:
        topo = place_wireless_overlay(topo, n_wi)
    return topo
