"""Proactive thermal management: window-based choice between task reallocation and rerouting.

At every decision instant the predictor looks one window ahead.  Hot cores
trigger a reallocation (highest-power tasks onto the coolest cores).  Hot
switches or links alone trigger temperature-aware rerouting, unless a second
window peek shows the cores heading over the threshold anyway, in which case
reallocating now avoids flipping between the two actions.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .routing import DistanceVectorState, trigger_reroute
from .topology import Kind, Topology

PredictFn = Callable[[np.ndarray, int, np.ndarray], np.ndarray]  # (u, horizon steps, t0) -> temps

TS_BITS = 26  # timestamp carried across the TIMESTAMP payload (16) and ts_low (10)
N_STATUS_SEGMENTS = 15
SEGMENT_BITS = 16


class Variant(str, Enum):
    OFF = "off"
    COMBINED = "combined"
    REROUTE_ONLY = "reroute_only"


@dataclass(frozen=True)
class DtmConfig:
    t_th: float = 68.0
    window: int = 100_000  # cycles, equal to the prediction interval
    cycles_per_step: int = 25_000
    variant: Variant = Variant.COMBINED
    migration_cost: int = 5_000  # cycles a migrating task is paused
    max_migrations: int = 16  # per decision
    penalty: int = 100  # cost multiplier on flagged channels
    rank_by: str = "temperature"  # "temperature" (window-end) or "delta"

    def __post_init__(self):
        if self.window <= 0 or self.cycles_per_step <= 0:
            raise ConfigurationError("window and cycles_per_step must be > 0")
        if self.window % self.cycles_per_step:
            raise ConfigurationError("window must be a whole number of thermal steps")
        if self.rank_by not in ("temperature", "delta"):
            raise ConfigurationError("rank_by must be 'temperature' or 'delta'")
        if self.max_migrations < 1 or self.migration_cost < 0:
            raise ConfigurationError("max_migrations >= 1 and migration_cost >= 0 required")
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def window_steps(self) -> int:
        return self.window // self.cycles_per_step


class DecisionKind(str, Enum):
    NONE = "none"
    REALLOCATE = "reallocate"
    REROUTE = "reroute"


@dataclass(frozen=True, eq=False)
class DtmDecision:
    kind: DecisionKind
    cycle: int = 0
    migrations: tuple[tuple[int, int], ...] = ()  # (task, new core)
    status_bits: np.ndarray | None = None
    predicted: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == DecisionKind.REALLOCATE and self.status_bits is not None:
            raise AssertionError("a decision carries either migrations or status bits")
        if self.kind == DecisionKind.REROUTE and self.migrations:
            raise AssertionError("a decision carries either migrations or status bits")

    def flagged(self) -> list[int]:
        return [] if self.status_bits is None else np.flatnonzero(self.status_bits).tolist()

    def __eq__(self, other) -> bool:
        if not isinstance(other, DtmDecision):
            return NotImplemented
        sb_eq = (self.status_bits is None and other.status_bits is None) or (
            self.status_bits is not None and other.status_bits is not None
            and np.array_equal(self.status_bits, other.status_bits))
        return (self.kind == other.kind and self.cycle == other.cycle
                and tuple(self.migrations) == tuple(other.migrations) and sb_eq)


NO_ACTION = DecisionKind.NONE


# -- task map ---------------------------------------------------------------


class TaskMap:
    """Bijection between tasks and cores."""

    def __init__(self, core_of: Sequence[int]):
        core_of = np.asarray(core_of, dtype=np.int64)
        if sorted(core_of.tolist()) != list(range(len(core_of))):
            raise ValueError("task map must be a permutation")
        self.core_of = core_of.copy()
        self.task_on = np.empty_like(self.core_of)
        self.task_on[self.core_of] = np.arange(len(core_of))

    @classmethod
    def identity(cls, n: int) -> "TaskMap":
        return cls(np.arange(n))

    def __len__(self) -> int:
        return len(self.core_of)

    def copy(self) -> "TaskMap":
        return TaskMap(self.core_of)

    def swap_tasks(self, a: int, b: int) -> None:
        ca, cb = self.core_of[a], self.core_of[b]
        self.core_of[a], self.core_of[b] = cb, ca
        self.task_on[ca], self.task_on[cb] = b, a

    def move(self, task: int, core: int) -> int | None:
        """Put ``task`` on ``core`` by swapping with its occupant; returns the displaced task."""
        other = int(self.task_on[core])
        if other == task:
            return None
        self.swap_tasks(task, other)
        return other

    def is_bijective(self) -> bool:
        return (sorted(self.core_of.tolist()) == list(range(len(self)))
                and np.array_equal(self.task_on[self.core_of], np.arange(len(self))))


def task_power(taskmap: TaskMap, core_util: np.ndarray, p_dyn: float) -> np.ndarray:
    """Per-task power estimate from the utilization of the core each task ran on."""
    return np.asarray(core_util, dtype=float)[taskmap.core_of] * p_dyn


def ftt_pairing(power: np.ndarray, core_key: np.ndarray) -> np.ndarray:
    """Target core per task: rank-i task by power (desc) onto rank-i core by key (asc)."""
    power = np.asarray(power, dtype=float)
    core_key = np.asarray(core_key, dtype=float)
    tasks = np.lexsort((np.arange(len(power)), -power))
    cores = np.lexsort((np.arange(len(core_key)), core_key))
    target = np.empty(len(power), dtype=np.int64)
    target[tasks] = cores
    return target


def ftt_reallocate(taskmap: TaskMap, core_key: np.ndarray, power: np.ndarray,
                   max_migrations: int | None = None) -> list[tuple[int, int]]:
    """Changed (task, new core) pairs in task-rank order, highest power first."""
    target = ftt_pairing(power, core_key)
    order = np.lexsort((np.arange(len(power)), -np.asarray(power, dtype=float)))
    out = [(int(t), int(target[t])) for t in order if target[t] != taskmap.core_of[t]]
    return out if max_migrations is None else out[:max_migrations]


def apply_migrations(taskmap: TaskMap, migrations: Sequence[tuple[int, int]]) -> set[int]:
    """Apply swap-moves in order; returns every task that changed core."""
    moved: set[int] = set()
    for task, core in migrations:
        other = taskmap.move(task, core)
        if other is not None:
            moved.update((task, other))
    return moved


# -- decision ---------------------------------------------------------------


def sliding_window_decide(predict_fn: PredictFn, u: np.ndarray, t0: np.ndarray, cfg: DtmConfig,
                          topo: Topology, cycle: int = 0, taskmap: TaskMap | None = None,
                          power: np.ndarray | None = None) -> DtmDecision:
    if cfg.variant == Variant.OFF:
        return DtmDecision(NO_ACTION, cycle)
    w = cfg.window_steps
    pred = np.asarray(predict_fn(u, w, t0), dtype=float)
    hot = pred > cfg.t_th
    cores = topo.slice(Kind.CORE)
    if cfg.variant == Variant.REROUTE_ONLY:
        if not hot.any():
            return DtmDecision(NO_ACTION, cycle, predicted=pred)
        return DtmDecision(DecisionKind.REROUTE, cycle, status_bits=hot, predicted=pred)
    realloc = bool(hot[cores].any())
    if not realloc and hot.any():
        ahead = np.asarray(predict_fn(u, 2 * w, t0), dtype=float)
        realloc = bool((ahead[cores] > cfg.t_th).any())
    if not hot.any():
        return DtmDecision(NO_ACTION, cycle, predicted=pred)
    if not realloc:
        bits = hot.copy()
        bits[cores] = False
        return DtmDecision(DecisionKind.REROUTE, cycle, status_bits=bits, predicted=pred)
    if taskmap is None or power is None:
        return DtmDecision(DecisionKind.REALLOCATE, cycle, predicted=pred)
    key = pred[cores] if cfg.rank_by == "temperature" else pred[cores] - np.asarray(t0)[cores]
    migs = ftt_reallocate(taskmap, key, power, cfg.max_migrations)
    if not migs:
        return DtmDecision(NO_ACTION, cycle, predicted=pred)
    return DtmDecision(DecisionKind.REALLOCATE, cycle, tuple(migs), predicted=pred)


# -- control messages ---------------------------------------------------------------


class MsgType(IntEnum):
    REROUTE_TRIGGER = 0
    REALLOC_TRIGGER = 1
    STATUS_SEGMENT = 2
    TIMESTAMP = 3


@dataclass(frozen=True)
class ControlFlit:
    """One 32-bit flit: type[31:30] seq[29:26] payload[25:10] ts_low[9:0]."""
    msg_type: MsgType
    seq: int
    payload: int
    ts_low: int

    def __post_init__(self):
        if not (0 <= self.seq < 16 and 0 <= self.payload < 1 << 16 and 0 <= self.ts_low < 1 << 10):
            raise ValueError("control flit field out of range")

    def pack(self) -> int:
        return (int(self.msg_type) << 30) | (self.seq << 26) | (self.payload << 10) | self.ts_low

    @classmethod
    def unpack(cls, word: int) -> "ControlFlit":
        if not 0 <= word < 1 << 32:
            raise ValueError("not a 32-bit word")
        return cls(MsgType(word >> 30), (word >> 26) & 0xF, (word >> 10) & 0xFFFF, word & 0x3FF)


def encode_control(decision: DtmDecision, timestamp: int | None = None) -> list[int]:
    """32-bit words for a decision.  Timestamps are carried modulo 2**26 cycles."""
    ts = decision.cycle if timestamp is None else timestamp
    ts %= 1 << TS_BITS
    lo, hi = ts & 0x3FF, ts >> 10
    if decision.kind == DecisionKind.NONE:
        return []
    words = []
    if decision.kind == DecisionKind.REROUTE:
        bits = np.zeros(N_STATUS_SEGMENTS * SEGMENT_BITS, dtype=bool)
        sb = np.asarray(decision.status_bits, dtype=bool)
        if len(sb) > len(bits):
            raise ValueError("status vector longer than the segment budget")
        bits[:len(sb)] = sb
        for i in range(N_STATUS_SEGMENTS):
            seg = bits[i * SEGMENT_BITS:(i + 1) * SEGMENT_BITS]
            payload = int(np.dot(seg, 1 << np.arange(SEGMENT_BITS)))
            words.append(ControlFlit(MsgType.STATUS_SEGMENT, i, payload, lo).pack())
        words.append(ControlFlit(MsgType.TIMESTAMP, 0, hi, lo).pack())
        words.append(ControlFlit(MsgType.REROUTE_TRIGGER, 0, int(sb.sum()) & 0xFFFF, lo).pack())
        return words
    words.append(ControlFlit(MsgType.TIMESTAMP, 0, hi, lo).pack())
    for i, (task, core) in enumerate(decision.migrations):
        if not (0 <= task < 256 and 0 <= core < 256):
            raise ValueError("task and core ids must fit in 8 bits")
        words.append(ControlFlit(MsgType.REALLOC_TRIGGER, i % 16, (task << 8) | core, lo).pack())
    return words


def decode_control(words: Sequence[int], n_components: int = 240) -> DtmDecision:
    if not words:
        return DtmDecision(NO_ACTION, 0)
    flits = [ControlFlit.unpack(w) for w in words]
    ts_flits = [f for f in flits if f.msg_type == MsgType.TIMESTAMP]
    if len(ts_flits) != 1:
        raise ValueError("a control message carries exactly one timestamp flit")
    cycle = (ts_flits[0].payload << 10) | ts_flits[0].ts_low
    if any(f.msg_type == MsgType.REROUTE_TRIGGER for f in flits):
        segs = sorted((f for f in flits if f.msg_type == MsgType.STATUS_SEGMENT), key=lambda f: f.seq)
        if [f.seq for f in segs] != list(range(N_STATUS_SEGMENTS)):
            raise ValueError("missing status segments")
        bits = np.zeros(N_STATUS_SEGMENTS * SEGMENT_BITS, dtype=bool)
        for f in segs:
            bits[f.seq * SEGMENT_BITS:(f.seq + 1) * SEGMENT_BITS] = (f.payload >> np.arange(SEGMENT_BITS)) & 1
        return DtmDecision(DecisionKind.REROUTE, cycle, status_bits=bits[:n_components])
    migs = tuple((f.payload >> 8, f.payload & 0xFF) for f in flits if f.msg_type == MsgType.REALLOC_TRIGGER)
    return DtmDecision(DecisionKind.REALLOCATE, cycle, migs)


# -- applying decisions ---------------------------------------------------------------


@dataclass
class ManagedSystem:
    """The state a decision acts on: task placement, routing and migration pauses."""
    taskmap: TaskMap
    routing: DistanceVectorState
    paused_until: np.ndarray  # per task, cycle at which it resumes
    penalty: int = 100
    migration_cost: int = 5_000

    @classmethod
    def create(cls, taskmap: TaskMap, routing: DistanceVectorState, penalty: int = 100,
               migration_cost: int = 5_000) -> "ManagedSystem":
        return cls(taskmap, routing, np.zeros(len(taskmap), dtype=np.int64), penalty, migration_cost)


def apply_decision(system: ManagedSystem, decision: DtmDecision) -> ManagedSystem:
    if decision.kind == DecisionKind.REALLOCATE:
        moved = apply_migrations(system.taskmap, decision.migrations)
        for t in moved:
            system.paused_until[t] = max(system.paused_until[t], decision.cycle + system.migration_cost)
    elif decision.kind == DecisionKind.REROUTE:
        trigger_reroute(system.routing, decision.status_bits, decision.cycle, system.penalty)
    return system


# -- event log ---------------------------------------------------------------


@dataclass
class DtmEvent:
    cycle: int
    kind: DecisionKind
    flagged: list[int] = field(default_factory=list)
    migrations: list[tuple[int, int]] = field(default_factory=list)
    peak_before: float = float("nan")
    control_flits: int = 0


EVENT_COLUMNS = ["cycle", "decision_kind", "flagged_components", "migrations", "peak_temp_before",
                 "control_flits"]


def write_event_log(path: str | Path, events: Sequence[DtmEvent]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_COLUMNS)
        for e in events:
            w.writerow([e.cycle, e.kind.value, " ".join(map(str, e.flagged)),
                        " ".join(f"{t}:{c}" for t, c in e.migrations), f"{e.peak_before:.4f}",
                        e.control_flits])
