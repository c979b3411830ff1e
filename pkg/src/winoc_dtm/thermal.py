"""Utilization -> power -> temperature, using a lumped RC network over the components.

Every component is one thermal node with a capacitance and a vertical resistance
to ambient.  Lateral resistances join a switch to its core and to each of its
links.  Stepping is explicit Euler; the step interval is a whole number of NoC
cycles so the simulator can hand over averaged utilization once per step.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from .errors import ConfigurationError, ModelError
from .topology import Kind, Topology


@dataclass(frozen=True)
class ClassPower:
    p_leak: float
    p_dyn: float


@dataclass(frozen=True)
class PowerConstants:
    core: ClassPower = ClassPower(0.3, 1.2)
    switch: ClassPower = ClassPower(0.08, 0.9)
    link: ClassPower = ClassPower(0.01, 0.45)

    def for_kind(self, kind: Kind) -> ClassPower:
        return (self.core, self.switch, self.link)[kind]


@dataclass(frozen=True)
class ClassThermal:
    c: float  # J/degC
    r_v: float  # degC/W to ambient


@dataclass(frozen=True)
class ThermalConstants:
    core: ClassThermal = ClassThermal(2.0e-5, 40.0)
    switch: ClassThermal = ClassThermal(4.0e-5, 20.0)
    link: ClassThermal = ClassThermal(2.0e-5, 40.0)
    r_lateral: float = 30.0
    t_ambient: float = 45.0
    dt: float = 10e-6
    cycles_per_step: int = 25_000
    clock_hz: float = 2.5e9

    def for_kind(self, kind: Kind) -> ClassThermal:
        return (self.core, self.switch, self.link)[kind]


@dataclass(frozen=True, eq=False)
class PowerProfile:
    p: np.ndarray


@dataclass(frozen=True, eq=False)
class ThermalState:
    t: np.ndarray
    t_ambient: float = 45.0

    @property
    def peak(self) -> float:
        return float(np.max(self.t))


@dataclass(frozen=True, eq=False)
class RcThermalModel:
    c: np.ndarray
    r_vertical: np.ndarray
    g_lateral: sparse.csr_matrix  # symmetric conductances (1/r) between adjacent nodes
    dt: float
    cycles_per_step: int
    t_ambient: float = 45.0
    kinds: np.ndarray | None = None
    power: PowerConstants = field(default_factory=PowerConstants)

    @property
    def n(self) -> int:
        return len(self.c)

    def conductance_matrix(self) -> np.ndarray:
        """G such that heat flow out of the nodes is G @ (t - t_amb)."""
        lat = self.g_lateral.toarray()
        return np.diag(1.0 / self.r_vertical + lat.sum(axis=1)) - lat

    def step_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """(A, b) with theta' = A @ theta + b * p, theta = t - t_amb."""
        if getattr(self, "_cache", None) is None:
            k = self.dt / self.c
            a = np.eye(self.n) - k[:, None] * self.conductance_matrix()
            object.__setattr__(self, "_cache", (a, k))
        return self._cache

    def stability_margin(self) -> float:
        """min_i c_i / sum_j g_ij divided by dt; must exceed 1."""
        gsum = 1.0 / self.r_vertical + np.asarray(self.g_lateral.sum(axis=1)).ravel()
        return float(np.min(self.c / gsum) / self.dt)

    @property
    def time_constants(self) -> np.ndarray:
        """Thermal time constants of the network in steps (eigen-decomposition)."""
        g = self.conductance_matrix()
        lam = np.linalg.eigvals(g / self.c[:, None]).real
        return np.sort(1.0 / lam) / self.dt


def build_rc_model(topo: Topology, consts: ThermalConstants | None = None,
                   power: PowerConstants | None = None) -> RcThermalModel:
    consts = consts or ThermalConstants()
    n = topo.n_components
    kinds = topo.component_kinds
    c = np.array([consts.for_kind(Kind(k)).c for k in kinds], dtype=float)
    rv = np.array([consts.for_kind(Kind(k)).r_v for k in kinds], dtype=float)
    if (c <= 0).any() or (rv <= 0).any() or consts.r_lateral <= 0:
        raise ConfigurationError("capacitances and resistances must be positive")
    rows, cols = [], []
    core0, sw0, ln0 = topo.offset(Kind.CORE), topo.offset(Kind.SWITCH), topo.offset(Kind.LINK)
    for s in range(topo.n_switches):
        rows.append(core0 + s)
        cols.append(sw0 + s)
    for i, (a, b) in enumerate(topo.links):
        for s in (a, b):
            rows.append(ln0 + i)
            cols.append(sw0 + int(s))
    g = sparse.coo_matrix((np.full(len(rows), 1.0 / consts.r_lateral), (rows, cols)), shape=(n, n))
    g = (g + g.T).tocsr()
    model = RcThermalModel(c, rv, g, consts.dt, consts.cycles_per_step, consts.t_ambient,
                           kinds.copy(), power or PowerConstants())
    margin = model.stability_margin()
    if margin <= 1.0:
        raise ConfigurationError(
            f"explicit Euler unstable: dt={consts.dt} exceeds min c/sum(g)={margin * consts.dt:.3g}")
    return model


def power_from_utilization(u: np.ndarray, kinds: np.ndarray,
                           consts: PowerConstants | None = None) -> PowerProfile:
    consts = consts or PowerConstants()
    u = np.asarray(u, dtype=float)
    if u.shape[0] != len(kinds):
        raise ValueError(f"utilization has {u.shape[0]} entries, expected {len(kinds)}")
    if (u < 0).any() or (u > 1).any():
        raise ValueError("utilization entries must lie in [0, 1]")
    leak = np.array([consts.for_kind(Kind(k)).p_leak for k in range(3)])[kinds]
    dyn = np.array([consts.for_kind(Kind(k)).p_dyn for k in range(3)])[kinds]
    if u.ndim == 2:
        leak, dyn = leak[:, None], dyn[:, None]
    return PowerProfile(leak + u * dyn)


def thermal_step(state: ThermalState, model: RcThermalModel, power: PowerProfile) -> ThermalState:
    a, k = model.step_matrices()
    theta = state.t - model.t_ambient
    p = power.p
    if theta.ndim == 2 and p.ndim == 1:
        p = p[:, None]
    kk = k if theta.ndim == 1 else k[:, None]
    return ThermalState(model.t_ambient + a @ theta + kk * p, model.t_ambient)


def run_steps(state: ThermalState, model: RcThermalModel, power: PowerProfile, steps: int) -> ThermalState:
    for _ in range(steps):
        state = thermal_step(state, model, power)
    return state


def steady_state(model: RcThermalModel, power: PowerProfile) -> ThermalState:
    g = model.conductance_matrix()
    try:
        theta = np.linalg.solve(g, power.p)
    except np.linalg.LinAlgError as exc:
        raise ModelError("singular conductance matrix") from exc
    residual = g @ theta - power.p
    if np.max(np.abs(residual)) > 1e-9:
        # one refinement pass; the system is tiny and well conditioned
        theta = theta - np.linalg.solve(g, residual)
        residual = g @ theta - power.p
        if np.max(np.abs(residual)) > 1e-9:
            raise ModelError(f"steady-state residual {np.max(np.abs(residual)):.3g} W too large")
    return ThermalState(model.t_ambient + theta, model.t_ambient)


def warmup(model: RcThermalModel, target_peak: float) -> ThermalState:
    """Scale the all-busy steady-state rise so the hottest component sits at ``target_peak``."""
    if target_peak < model.t_ambient:
        raise ConfigurationError(
            f"warmup target {target_peak} degC is below ambient {model.t_ambient} degC")
    n = model.n
    if target_peak == model.t_ambient:
        return ThermalState(np.full(n, model.t_ambient), model.t_ambient)
    full = steady_state(model, power_from_utilization(np.ones(n), model.kinds, model.power))
    rise = full.t - model.t_ambient
    alpha = (target_peak - model.t_ambient) / rise.max()
    return ThermalState(model.t_ambient + alpha * rise, model.t_ambient)


def baseline_state(model: RcThermalModel) -> ThermalState:
    """Steady state of an idle chip (leakage only)."""
    return steady_state(model, power_from_utilization(np.zeros(model.n), model.kinds, model.power))


def with_constants(model: RcThermalModel, **changes) -> RcThermalModel:
    out = replace(model, **changes)
    object.__setattr__(out, "_cache", None)
    return out
