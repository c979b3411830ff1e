"""Integer emulation of the predictor hardware.

Inputs sit in a bank of 8-bit registers (0..255 for 0..100 % utilization, and
the log-compressed horizon).  Weights are signed fixed point
(16 bits, 10 fraction bits by default).  Neurons are time-multiplexed over a
small pool of MAC units with 32-bit saturating accumulators, the sigmoid comes
from a 1352-entry 8-bit table over [-8, 8], and a comparator checks each
predicted temperature against an entry of a 48-entry threshold table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, HorizonRangeError
from .dataset import H_MAX, decode_horizon, encode_horizon
from .network import AnnModel, StreamSpec, sigmoid


@dataclass(frozen=True)
class QuantFormat:
    input_bits: int = 8
    weight_bits: int = 16
    frac_bits: int = 10
    act_bits: int = 8
    acc_bits: int = 32
    lut_entries: int = 1352
    lut_range: float = 8.0
    threshold_entries: int = 48
    threshold_base: int = 40  # degC held by threshold entry 0, 1 degC per entry
    mac_units: int = 10
    clock_hz: float = 2.5e9
    pipeline_overhead: int = 4  # register staging, two LUT lookups, comparator

    def __post_init__(self):
        if not 2 <= self.frac_bits < self.weight_bits <= 32:
            raise ConfigurationError("need 2 <= frac_bits < weight_bits <= 32")
        if self.mac_units < 1 or self.lut_entries < 2:
            raise ConfigurationError("mac_units >= 1 and lut_entries >= 2 required")

    @property
    def in_max(self) -> int:
        return (1 << self.input_bits) - 1

    @property
    def act_max(self) -> int:
        return (1 << self.act_bits) - 1

    @property
    def w_min(self) -> int:
        return -(1 << (self.weight_bits - 1))

    @property
    def w_max(self) -> int:
        return (1 << (self.weight_bits - 1)) - 1

    @property
    def acc_min(self) -> int:
        return -(1 << (self.acc_bits - 1))

    @property
    def acc_max(self) -> int:
        return (1 << (self.acc_bits - 1)) - 1


def quantize(w: np.ndarray, fmt: QuantFormat) -> tuple[np.ndarray, int]:
    """Round to the fixed-point grid and saturate; returns (codes, number saturated)."""
    q = np.round(np.asarray(w, dtype=float) * (1 << fmt.frac_bits))
    sat = int(np.count_nonzero((q < fmt.w_min) | (q > fmt.w_max)))
    return np.clip(q, fmt.w_min, fmt.w_max).astype(np.int64), sat


def dequantize(q: np.ndarray, fmt: QuantFormat) -> np.ndarray:
    return np.asarray(q, dtype=float) / (1 << fmt.frac_bits)


def activation_lut(fmt: QuantFormat) -> np.ndarray:
    x = np.linspace(-fmt.lut_range, fmt.lut_range, fmt.lut_entries)
    return np.round(sigmoid(x) * fmt.act_max).astype(np.uint8 if fmt.act_bits <= 8 else np.uint16)


def threshold_lut(fmt: QuantFormat) -> np.ndarray:
    return (fmt.threshold_base + np.arange(fmt.threshold_entries)).astype(np.uint8)


def quantize_inputs(u: np.ndarray, fmt: QuantFormat | None = None) -> np.ndarray:
    fmt = fmt or QuantFormat()
    u = np.asarray(u, dtype=float)
    if (u < 0).any() or (u > 1).any():
        raise ValueError("utilization entries must lie in [0, 1]")
    return np.round(u * fmt.in_max).astype(np.int64)


def quantize_horizon(steps, fmt: QuantFormat | None = None, rounding: str = "ceil") -> np.ndarray:
    """Horizon in thermal steps -> 8-bit code.  ``ceil`` never shortens the look-ahead."""
    fmt = fmt or QuantFormat()
    h = np.asarray(steps, dtype=float)
    if (h < 0).any() or (h > H_MAX).any():
        raise HorizonRangeError(f"horizon must lie in [0, {H_MAX}] steps")
    x = encode_horizon(h) * fmt.in_max
    x = np.ceil(x - 1e-9) if rounding == "ceil" else np.round(x)
    return x.astype(np.int64)


def dequantize_inputs(u8: np.ndarray, fmt: QuantFormat | None = None) -> np.ndarray:
    fmt = fmt or QuantFormat()
    return np.asarray(u8, dtype=float) / fmt.in_max


def dequantize_horizon(h8, fmt: QuantFormat | None = None) -> np.ndarray:
    fmt = fmt or QuantFormat()
    return decode_horizon(np.asarray(h8, dtype=float) / fmt.in_max)


@dataclass(eq=False)
class QuantizedModel:
    fmt: QuantFormat
    n_in: int
    streams: tuple[StreamSpec, ...]
    w1: np.ndarray  # int codes (hidden, n_in + 1), bias last
    w2: list[np.ndarray]
    act_lut: np.ndarray
    thr_lut: np.ndarray
    saturated_weights: int = 0

    @property
    def n_hidden(self) -> int:
        return sum(s.hidden for s in self.streams)

    @property
    def n_out(self) -> int:
        return sum(s.n_out for s in self.streams)

    @property
    def n_weights(self) -> int:
        return self.w1.size + sum(w.size for w in self.w2)

    def total_macs(self) -> int:
        """One MAC per weight, bias included (it is accumulated as weight x 1)."""
        return self.n_weights

    def latency_cycles(self) -> int:
        return math.ceil(self.total_macs() / self.fmt.mac_units) + self.fmt.pipeline_overhead

    def latency_seconds(self) -> float:
        return self.latency_cycles() / self.fmt.clock_hz

    def schedule_makespan(self) -> int:
        """Cycles when whole neurons are dealt round-robin to the MAC units, layer by layer."""
        total = 0
        layers = [[self.n_in + 1] * self.n_hidden,
                  [s.hidden + 1 for s in self.streams for _ in range(s.n_out)]]
        for fan_ins in layers:
            load = [0] * self.fmt.mac_units
            for k, f in enumerate(fan_ins):
                load[k % self.fmt.mac_units] += f
            total += max(load)
        return total + self.fmt.pipeline_overhead

    def threshold_index(self, t_th: float) -> int:
        idx = int(round(t_th)) - self.fmt.threshold_base
        if abs(t_th - round(t_th)) > 1e-9 or not 0 <= idx < len(self.thr_lut):
            lo, hi = self.fmt.threshold_base, self.fmt.threshold_base + len(self.thr_lut) - 1
            raise ConfigurationError(f"threshold {t_th} degC is not an entry of the threshold table "
                                     f"(integers {lo}..{hi})")
        return idx


def build_quantized(model: AnnModel, fmt: QuantFormat | None = None) -> QuantizedModel:
    fmt = fmt or QuantFormat()
    if model.activation != "sigmoid":
        raise ConfigurationError("only sigmoid models map onto the activation table")
    w1, sat = quantize(model.w1, fmt)
    w2 = []
    for w in model.w2:
        q, s = quantize(w, fmt)
        w2.append(q)
        sat += s
    return QuantizedModel(fmt, model.n_in, model.streams, w1, w2, activation_lut(fmt),
                          threshold_lut(fmt), sat)


@dataclass
class QuantizedResult:
    temps: np.ndarray  # predicted temperatures, degC
    status: np.ndarray  # bool, temps > threshold
    latency_cycles: int
    diagnostics: dict = field(default_factory=dict)


def _saturate(acc: np.ndarray, fmt: QuantFormat, diag: dict, key: str) -> np.ndarray:
    over = (acc > fmt.acc_max) | (acc < fmt.acc_min)
    n = int(np.count_nonzero(over))
    if n:
        diag[key] = diag.get(key, 0) + n
    return np.clip(acc, fmt.acc_min, fmt.acc_max)


def quantized_rise(qm: QuantizedModel, u8: np.ndarray, h8) -> tuple[np.ndarray, dict]:
    """Predicted temperature rise (degC) for 8-bit inputs; batch over the leading axis."""
    fmt = qm.fmt
    u8 = np.atleast_2d(np.asarray(u8, dtype=np.int64))
    h8 = np.broadcast_to(np.asarray(h8, dtype=np.int64), (len(u8),))
    if (u8 < 0).any() or (u8 > fmt.in_max).any() or (h8 < 0).any() or (h8 > fmt.in_max).any():
        raise ValueError("register inputs must be unsigned 8-bit codes")
    diag: dict = {}
    x = np.concatenate([u8, h8[:, None]], axis=1)  # the register bank
    one = fmt.in_max  # a bias input is "1.0" on the input scale
    acc = x @ qm.w1[:, :-1].T + qm.w1[:, -1] * one
    acc = _saturate(acc, fmt, diag, "hidden_saturations")
    s = fmt.in_max * (1 << fmt.frac_bits)
    n = fmt.lut_entries - 1
    # nearest table entry to z = acc / s on [-range, range]
    num = (acc + int(fmt.lut_range) * s) * n
    idx = (2 * num + int(2 * fmt.lut_range) * s) // (int(4 * fmt.lut_range) * s)
    clipped = int(np.count_nonzero((idx < 0) | (idx > n)))
    if clipped:
        diag["lut_clamped"] = clipped
    a8 = qm.act_lut[np.clip(idx, 0, n)].astype(np.int64)
    out = np.empty((len(u8), qm.n_out), dtype=np.int64)
    h0 = o0 = 0
    for st, w in zip(qm.streams, qm.w2):
        acc2 = a8[:, h0:h0 + st.hidden] @ w[:, :-1].T + w[:, -1] * fmt.act_max
        out[:, o0:o0 + st.n_out] = _saturate(acc2, fmt, diag, "output_saturations")
        h0 += st.hidden
        o0 += st.n_out
    rise = out / float(fmt.act_max * (1 << fmt.frac_bits))
    return rise, diag


def quantized_predict(qm: QuantizedModel, u8: np.ndarray, h8, t0: np.ndarray,
                      t_th: float = 68.0) -> QuantizedResult:
    """Predicted temperatures, status bits and modelled latency for one or more input vectors."""
    single = np.asarray(u8).ndim == 1
    rise, diag = quantized_rise(qm, u8, h8)
    temps = np.asarray(t0, dtype=float) + rise
    thr = float(qm.thr_lut[qm.threshold_index(t_th)])
    status = temps > thr
    if single:
        temps, status = temps[0], status[0]
    if qm.saturated_weights:
        diag["saturated_weights"] = qm.saturated_weights
    return QuantizedResult(temps, status, qm.latency_cycles(), diag)
