"""End-to-end runs: warm the chip up, then co-simulate traffic, temperature, prediction and DTM.

Each thermal step covers ``cycles_per_step`` NoC cycles.  The NoC side either
runs cycle by cycle (``mode="cycle"``) or is replaced by the flow estimate
(``mode="flow"``, the default), which routes the expected traffic matrix over
the active forwarding table.  Every ``window`` cycles the predictor looks
ahead from the current temperatures and the DTM decision is applied.
"""
from __future__ import annotations

import hashlib
import json
import platform
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .ann.inference import predict as float_predict
from .ann.io import load_model
from .ann.network import AnnModel
from .ann.quantized import (QuantizedModel, build_quantized, quantize_horizon, quantize_inputs,
                            quantized_rise)
from .dtm import (DecisionKind, DtmConfig, DtmDecision, DtmEvent, ManagedSystem, TaskMap, Variant,
                  apply_decision, encode_control, sliding_window_decide, task_power)
from .errors import ConfigurationError, ProtocolViolation
from .noc.flow import FlowModel
from .noc.sim import PIPELINE_DEPTH, Network, NocParams
from .noc.traffic import Pattern, TrafficGenerator, TrafficSource, Workload, rate_matrix
from .routing import DistanceVectorState, advance, build_channels, init_routes
from .thermal import (PowerConstants, RcThermalModel, ThermalConstants, ThermalState, build_rc_model,
                      power_from_utilization, thermal_step, warmup)
from .topology import Kind, Topology, build_mesh, default_topology

HOT_TASKS = (27, 28, 35, 36)  # the four centre tiles of the default 8x8 grid


def hotspot_traffic(injection_rate: float = 2.5e-5, seed: int = 0, packet_flits: int = 64,
                    targets: tuple[int, ...] = HOT_TASKS) -> TrafficSource:
    return TrafficSource(Pattern.HOTSPOT, injection_rate, seed, packet_flits, targets, 0.5)


def hotspot_workload(hot: tuple[int, ...] = HOT_TASKS) -> Workload:
    return Workload(base_load=0.3, hot_load=1.0, hot_tasks=hot)


@dataclass(frozen=True)
class ExperimentConfig:
    grid_w: int = 8
    grid_h: int = 8
    n_wi: int = 4
    wi_positions: tuple[int, ...] | None = None
    thermal: ThermalConstants = ThermalConstants()
    power: PowerConstants = PowerConstants()
    traffic: TrafficSource = field(default_factory=hotspot_traffic)
    workload: Workload = field(default_factory=hotspot_workload)
    dtm: DtmConfig = DtmConfig()
    duration: int = 2_000_000  # cycles after warmup
    warmup_peak: float = 60.0
    mode: str = "flow"
    predictor: str = "quantized"  # or "float"
    model_path: str | None = None
    seed: int = 0
    noc: NocParams = NocParams()
    record_u: bool = False

    def __post_init__(self):
        if self.grid_w < 2 or self.grid_h < 2:
            raise ConfigurationError("grid_w >= 2 and grid_h >= 2 required")
        if self.duration < 0:
            raise ConfigurationError("duration must be >= 0")
        if self.duration % self.thermal.cycles_per_step:
            raise ConfigurationError("duration must be a whole number of thermal steps")
        if self.mode not in ("flow", "cycle"):
            raise ConfigurationError("mode must be 'flow' or 'cycle'")
        if self.predictor not in ("quantized", "float"):
            raise ConfigurationError("predictor must be 'quantized' or 'float'")
        if self.dtm.cycles_per_step != self.thermal.cycles_per_step:
            raise ConfigurationError("dtm and thermal step lengths differ")
        if self.dtm.t_th <= self.thermal.t_ambient:
            raise ConfigurationError("t_th must exceed the ambient temperature")
        if self.model_path is not None and not Path(self.model_path).is_file():
            raise ConfigurationError(f"model file not found: {self.model_path}")

    def topology(self) -> Topology:
        if self.wi_positions is not None:
            return build_mesh(self.grid_w, self.grid_h).with_wireless(self.wi_positions)
        return default_topology(self.grid_w, self.grid_h, self.n_wi)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["dtm"]["variant"] = self.dtm.variant.value
        d["traffic"]["pattern"] = self.traffic.pattern.value
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.as_dict(), sort_keys=True, default=str).encode()).hexdigest()


@dataclass
class RunReport:
    cycles: np.ndarray  # cycle at the end of each thermal step, 0 = post-warmup start
    peak: np.ndarray  # peak temperature at those instants
    decisions: list[str]  # decision kind per step ("" when no decision instant)
    events: list[DtmEvent]
    latency_mean: float  # cycles; simulated in cycle mode, estimated in flow mode
    latencies: np.ndarray  # per packet (cycle mode only)
    throughput: float  # delivered flits per cycle
    control_flits: list[int]  # per prediction interval
    control_channel_cycles: list[int]
    clock_hz: float
    t_final: np.ndarray
    u_series: list[np.ndarray] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    @property
    def triggers(self) -> int:
        return sum(1 for e in self.events if e.kind != DecisionKind.NONE)

    def trigger_counts(self) -> dict[str, int]:
        out = {k.value: 0 for k in DecisionKind if k != DecisionKind.NONE}
        for e in self.events:
            if e.kind != DecisionKind.NONE:
                out[e.kind.value] += 1
        return out

    def control_bandwidth_bps(self, window: int) -> float:
        """Average control payload rate over the run, in bits per second."""
        if not self.control_flits:
            return 0.0
        bits = 32 * sum(self.control_flits)
        return bits / (len(self.control_flits) * window / self.clock_hz)

    def deadline_slack(self, window: int) -> int:
        """Channel cycles left in the tightest interval after its control broadcast."""
        return window - max(self.control_channel_cycles, default=0)


def make_predictor(cfg: ExperimentConfig, model: AnnModel | None):
    if model is None:
        if cfg.model_path is None:
            raise ConfigurationError("DTM needs a trained model (model_path)")
        model = load_model(cfg.model_path)
    if cfg.predictor == "float":
        return lambda u, h, t0: float_predict(model, u, h, t0)
    qm: QuantizedModel = build_quantized(model)

    def predict(u, h, t0):
        rise, _ = quantized_rise(qm, quantize_inputs(np.clip(u, 0.0, 1.0)), quantize_horizon(h))
        return np.asarray(t0) + rise[0]
    return predict


def _nearest_wi(topo: Topology, core: int) -> int:
    wis = list(topo.wireless_interfaces)
    if not wis:
        return -1
    hops = topo.hop_matrix
    return min(wis, key=lambda w: (hops[core, w], w))


class _FlowNoc:
    """Flow-mode stand-in for the cycle simulator, with a cache over identical inputs."""

    def __init__(self, cfg: ExperimentConfig, topo: Topology):
        self.cfg = cfg
        self.topo = topo
        self.ch = build_channels(topo)
        self.flow = FlowModel.build(topo, self.ch, cfg.noc.buffer_depth, cfg.noc.wireless_buffer_depth)
        n = topo.n_switches
        src = cfg.traffic
        if src.pattern == Pattern.TRACE:
            raise ConfigurationError("trace traffic needs mode='cycle'")
        self.task_rates = rate_matrix(src, n, topo.grid_w) * src.packet_flits  # flits/cycle
        self._cache: dict = {}
        self.lat_num = 0.0
        self.lat_den = 0.0
        self.delivered = 0.0

    def step(self, routing: DistanceVectorState, taskmap: TaskMap, active: np.ndarray,
             loads: np.ndarray, cycles: int) -> np.ndarray:
        key = (routing.generation, taskmap.core_of.tobytes(), active.tobytes())
        hit = self._cache.get(key)
        if hit is None:
            n = self.topo.n_switches
            rates = self.task_rates * active[:, None]
            f = np.zeros((n, n))
            c = taskmap.core_of
            f[np.ix_(c, c)] = rates
            busy = np.zeros(n)
            busy[c] = loads * active
            res = self.flow.utilization(routing.old, routing.costs, f, busy)
            total = float(f.sum())
            ser = self.flow.wireless_cycles_per_flit
            rho = np.where(self.ch.wireless, res.wireless_load, res.channel_load)
            rho = np.minimum(rho, 0.95)
            service = np.where(self.ch.wireless, ser, 1)
            delay = PIPELINE_DEPTH + np.where(self.ch.wireless, ser, 0) + rho / (2 * (1 - rho)) * service
            lat = (float(res.channel_load @ delay) / total + self.cfg.traffic.packet_flits) if total else 0.0
            hit = (res.u, lat, total)
            if len(self._cache) > 256:
                self._cache.clear()
            self._cache[key] = hit
        u, lat, total = hit
        pk = total / self.cfg.traffic.packet_flits * cycles
        self.lat_num += lat * pk
        self.lat_den += pk
        self.delivered += total * cycles
        return u


class _CycleNoc:
    def __init__(self, cfg: ExperimentConfig, topo: Topology, routing: DistanceVectorState):
        self.cfg = cfg
        self.net = Network(topo, routing, cfg.noc)
        self.gen = TrafficGenerator(cfg.traffic, topo.n_switches, topo.grid_w)
        self.installed = routing.generation

    def step(self, routing: DistanceVectorState, taskmap: TaskMap, paused_until: np.ndarray,
             loads: np.ndarray, start: int, end: int, active: np.ndarray) -> np.ndarray:
        net = self.net
        busy = np.zeros(len(loads))
        busy[taskmap.core_of] = loads * active
        net.set_core_loads(busy)
        for cyc, a, b, n in self.gen.events(start, end):
            self._run_until(cyc, routing)
            if paused_until[a] > cyc:
                continue
            net.inject_packet(int(taskmap.core_of[a]), int(taskmap.core_of[b]), n, src_task=a, dst_task=b)
        self._run_until(end, routing)
        return net.collect_utilization()

    def _run_until(self, cyc: int, routing: DistanceVectorState) -> None:
        net = self.net
        while net.cycle < cyc:
            sw = routing.switchover_cycle
            stop = cyc if sw is None or sw <= net.cycle or sw >= cyc else sw
            net.run(stop - net.cycle)
            if sw is not None and net.cycle >= sw:
                advance(routing, net.cycle)
            if routing.generation != self.installed:
                net.set_routing(routing, generation=routing.generation + 1)
                self.installed = routing.generation


def run(cfg: ExperimentConfig, model: AnnModel | None = None) -> RunReport:
    topo = cfg.topology()
    rc: RcThermalModel = build_rc_model(topo, cfg.thermal, cfg.power)
    state: ThermalState = warmup(rc, cfg.warmup_peak)
    dcfg = cfg.dtm
    dtm_on = dcfg.variant != Variant.OFF
    predict_fn = make_predictor(cfg, model) if dtm_on else None
    routing = init_routes(topo)
    n_tasks = topo.n_switches
    system = ManagedSystem.create(TaskMap.identity(n_tasks), routing, dcfg.penalty, dcfg.migration_cost)
    loads = cfg.workload.loads(n_tasks)
    cps = cfg.thermal.cycles_per_step
    n_steps = cfg.duration // cps
    every = dcfg.window_steps
    ser = topo.channel.cycles_for_bits(cfg.noc.flit_bits)
    scheduler_wi = _nearest_wi(topo, 0)
    p_dyn = cfg.power.core.p_dyn

    noc = _FlowNoc(cfg, topo) if cfg.mode == "flow" else _CycleNoc(cfg, topo, routing)
    cycles = [0]
    peak = [state.peak]
    decisions = [""]
    events: list[DtmEvent] = []
    ctrl_flits: list[int] = []  # per prediction interval
    ctrl_cycles: list[int] = []
    u_series: list[np.ndarray] = []
    window_u: list[np.ndarray] = []
    sent_base = busy_base = 0

    for k in range(n_steps):
        start, end = k * cps, (k + 1) * cps
        # share of the step each task is running (migrating tasks are paused)
        active = np.clip((end - np.maximum(system.paused_until, start)) / cps, 0.0, 1.0)
        if cfg.mode == "flow":
            sw = routing.switchover_cycle
            if sw is not None and sw < end:
                frac_old = max(sw - start, 0) / cps
                u_old = noc.step(routing, system.taskmap, active, loads, sw - start)
                advance(routing, end)
                u_new = noc.step(routing, system.taskmap, active, loads, end - sw)
                u = frac_old * u_old + (1 - frac_old) * u_new
            else:
                u = noc.step(routing, system.taskmap, active, loads, cps)
        else:
            u = noc.step(routing, system.taskmap, system.paused_until, loads, start, end, active)
        if cfg.record_u:
            u_series.append(u)
        window_u.append(u)
        state = thermal_step(state, rc, power_from_utilization(u, rc.kinds, rc.power))
        cycles.append(end)
        peak.append(state.peak)
        kind = ""
        if (k + 1) % every == 0:
            uw = np.mean(window_u, axis=0)
            window_u = []
            if cfg.mode == "cycle":
                # control traffic carried on the channel during the interval just closed
                net = noc.net
                ctrl_flits.append(net.control_flits_sent - sent_base)
                ctrl_cycles.append(net.control_channel_cycles - busy_base)
                sent_base, busy_base = net.control_flits_sent, net.control_channel_cycles
            kind = DecisionKind.NONE.value
            if dtm_on:
                core_util = uw[topo.slice(Kind.CORE)]
                power = task_power(system.taskmap, core_util, p_dyn)
                dec: DtmDecision = sliding_window_decide(predict_fn, uw, state.t, dcfg, topo, end,
                                                         system.taskmap, power)
                words = encode_control(dec, end)
                apply_decision(system, dec)
                events.append(DtmEvent(end, dec.kind, dec.flagged(), list(dec.migrations),
                                       state.peak, len(words)))
                kind = dec.kind.value
                if cfg.mode == "flow":
                    # the broadcast occupies the channel during the next interval
                    ctrl_flits.append(len(words))
                    ctrl_cycles.append(len(words) * ser)
                if ctrl_cycles and ctrl_cycles[-1] > dcfg.window:
                    raise ProtocolViolation(f"control broadcast of {ctrl_cycles[-1]} cycles overruns the "
                                            f"{dcfg.window}-cycle interval")
                if cfg.mode == "cycle" and words and scheduler_wi >= 0:
                    noc.net.broadcast_control(scheduler_wi, len(words))
        decisions.append(kind)

    if cfg.mode == "flow":
        lat = noc.lat_num / noc.lat_den if noc.lat_den else 0.0
        lats = np.zeros(0)
        thr = noc.delivered / cfg.duration if cfg.duration else 0.0
    else:
        lats = np.asarray(noc.net.latencies, dtype=float)
        lat = float(lats.mean()) if len(lats) else 0.0
        thr = noc.net.delivered_flits / cfg.duration if cfg.duration else 0.0
    return RunReport(np.asarray(cycles), np.asarray(peak), decisions, events, lat, lats, thr,
                     ctrl_flits, ctrl_cycles, cfg.thermal.clock_hz, state.t.copy(), u_series,
                     manifest(cfg))


def manifest(cfg: ExperimentConfig) -> dict:
    return {"config_sha256": cfg.digest(), "seed": cfg.seed, "traffic_seed": cfg.traffic.seed,
            "version": __version__, "python": platform.python_version(),
            "numpy": np.__version__}


def compare(base: ExperimentConfig, variants: dict[str, DtmConfig],
            model: AnnModel | None = None) -> dict[str, RunReport]:
    """Run ``base`` once per DTM setting; everything but the DTM settings is shared."""
    out = {}
    for name, d in variants.items():
        out[name] = run(replace(base, dtm=d), model)
    lengths = {len(r.peak) for r in out.values()}
    if len(lengths) > 1:
        raise ValueError("variant runs have mismatched durations")
    return out


def steady_peak(cfg: ExperimentConfig) -> float:
    """Steady-state peak temperature of the undisturbed workload (no DTM), from the flow estimate."""
    from .thermal import steady_state
    topo = cfg.topology()
    rc = build_rc_model(topo, cfg.thermal, cfg.power)
    noc = _FlowNoc(cfg, topo)
    n = topo.n_switches
    u = noc.step(init_routes(topo), TaskMap.identity(n), np.ones(n), cfg.workload.loads(n), 0)
    return steady_state(rc, power_from_utilization(u, rc.kinds, rc.power)).peak


__all__ = ["ExperimentConfig", "RunReport", "run", "compare", "manifest", "hotspot_traffic",
           "hotspot_workload", "HOT_TASKS", "steady_peak"]
