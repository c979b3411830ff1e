"""Synthetic and trace-driven packet sources.

Endpoints are *tasks*, not cores: the task map decides where a task runs, so
reallocating a task moves its traffic with it.  Trace files use the same
convention (a trace recorded with task i on core i).
"""
from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator

import numpy as np

from ..errors import ConfigurationError
from .flit import DEFAULT_PACKET_FLITS


class Pattern(str, Enum):
    UNIFORM = "uniform"
    HOTSPOT = "hotspot"
    TRANSPOSE = "transpose"
    TRACE = "trace"


@dataclass(frozen=True)
class TrafficSource:
    pattern: Pattern = Pattern.UNIFORM
    injection_rate: float = 0.001  # packets / cycle / task
    seed: int = 0
    packet_flits: int = DEFAULT_PACKET_FLITS
    hotspot_targets: tuple[int, ...] = ()
    hotspot_bias: float = 0.5
    trace_path: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.injection_rate <= 1.0:
            raise ConfigurationError("injection_rate must be in [0, 1]")
        if self.packet_flits < 1:
            raise ConfigurationError("packet_flits must be >= 1")
        if self.pattern == Pattern.HOTSPOT and not self.hotspot_targets:
            raise ConfigurationError("hotspot pattern needs at least one target")
        if not 0.0 <= self.hotspot_bias <= 1.0:
            raise ConfigurationError("hotspot_bias must be in [0, 1]")
        if self.pattern == Pattern.TRACE:
            if not self.trace_path or not Path(self.trace_path).is_file():
                raise ConfigurationError(f"trace file not found: {self.trace_path}")


@dataclass(frozen=True)
class Workload:
    """Per-task compute load (fraction of busy core cycles)."""
    base_load: float = 0.35
    hot_load: float = 1.0
    hot_tasks: tuple[int, ...] = ()

    def loads(self, n_tasks: int) -> np.ndarray:
        out = np.full(n_tasks, self.base_load)
        for t in self.hot_tasks:
            out[t] = self.hot_load
        return out


def read_trace(path: str | Path) -> list[tuple[int, int, int, int]]:
    """Rows of (cycle, src_core, dst_core, packet_flits), sorted by cycle."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            if rec[0].strip() == "cycle":
                continue
            try:
                cyc, src, dst, n = (int(x) for x in rec[:4])
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{lineno}: bad trace row {rec!r}") from exc
            if cyc < 0 or src < 0 or dst < 0 or n < 1:
                raise ConfigurationError(f"{path}:{lineno}: negative field in trace row")
            rows.append((cyc, src, dst, n))
    rows.sort(key=lambda r: r[0])
    return rows


def write_trace(path: str | Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "src_core", "dst_core", "packet_flits"])
        w.writerows(rows)


def destination_weights(src: TrafficSource, n_tasks: int, grid_w: int) -> np.ndarray:
    """Row-stochastic matrix of destination probabilities (zero rows for silent tasks)."""
    w = np.zeros((n_tasks, n_tasks))
    if src.pattern == Pattern.UNIFORM:
        w[:] = 1.0 / (n_tasks - 1)
        np.fill_diagonal(w, 0.0)
    elif src.pattern == Pattern.TRANSPOSE:
        for t in range(n_tasks):
            d = _transpose(t, grid_w, n_tasks)
            if d is not None:
                w[t, d] = 1.0
    elif src.pattern == Pattern.HOTSPOT:
        for t in range(n_tasks):
            others = [d for d in range(n_tasks) if d != t]
            targets = [d for d in src.hotspot_targets if d != t]
            w[t, others] += (1.0 - src.hotspot_bias) / len(others) if targets else 1.0 / len(others)
            if targets:
                w[t, targets] += src.hotspot_bias / len(targets)
    else:
        raise ValueError("trace traffic has no fixed destination distribution")
    return w


def _transpose(t: int, grid_w: int, n_tasks: int) -> int | None:
    x, y = t % grid_w, t // grid_w
    if y >= grid_w or x == y:
        return None
    d = x * grid_w + y
    return d if d < n_tasks else None


def rate_matrix(src: TrafficSource, n_tasks: int, grid_w: int) -> np.ndarray:
    """Expected packets per cycle from task i to task j (synthetic patterns)."""
    w = destination_weights(src, n_tasks, grid_w)
    active = w.sum(axis=1) > 0
    return src.injection_rate * w * active[:, None]


class TrafficGenerator:
    """Deterministic event stream of (cycle, src_task, dst_task, n_flits)."""

    def __init__(self, src: TrafficSource, n_tasks: int, grid_w: int):
        self.src = src
        self.n_tasks = n_tasks
        self.rng = np.random.default_rng(src.seed)
        self._heap: list[tuple[int, int]] = []
        self._trace: list[tuple[int, int, int, int]] = []
        self._trace_pos = 0
        if src.pattern == Pattern.TRACE:
            self._trace = read_trace(src.trace_path)
            for _, a, b, _n in self._trace:
                if a >= n_tasks or b >= n_tasks:
                    raise ConfigurationError(f"trace endpoint out of range (n_tasks={n_tasks})")
        else:
            self._weights = destination_weights(src, n_tasks, grid_w)
            self._cum = np.cumsum(self._weights, axis=1)
            if src.injection_rate > 0:
                for t in range(n_tasks):
                    if self._weights[t].sum() > 0:
                        heapq.heappush(self._heap, (self._gap() - 1, t))

    def _gap(self) -> int:
        return int(self.rng.geometric(self.src.injection_rate))

    def events(self, start: int, end: int) -> Iterator[tuple[int, int, int, int]]:
        """Events with start <= cycle < end. Calls must cover consecutive ranges."""
        if self.src.pattern == Pattern.TRACE:
            tr = self._trace
            while self._trace_pos < len(tr) and tr[self._trace_pos][0] < end:
                row = tr[self._trace_pos]
                self._trace_pos += 1
                if row[0] >= start and row[1] != row[2]:
                    yield row
            return
        heap = self._heap
        while heap and heap[0][0] < end:
            cyc, t = heapq.heappop(heap)
            row = self._cum[t]
            d = int(np.searchsorted(row, self.rng.random() * row[-1], side="right"))
            d = min(d, self.n_tasks - 1)
            heapq.heappush(heap, (cyc + self._gap(), t))
            if cyc >= start and d != t:
                yield cyc, t, d, self.src.packet_flits

    def counts(self, start: int, end: int) -> np.ndarray:
        """Packets (flit-weighted) from task i to task j in [start, end)."""
        c = np.zeros((self.n_tasks, self.n_tasks))
        for _, a, b, n in self.events(start, end):
            c[a, b] += n
        return c
