"""INI configuration with typed, validated keys and ``section.key=value`` overrides.

Sections mirror the modules.  Unknown sections or keys are rejected, every
value is type-checked and range-checked, and the effective configuration can
be echoed back as a complete file that reproduces the run.
"""
from __future__ import annotations

import configparser
import io
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .ann.quantized import QuantFormat
from .ann.train import TrainHyper
from .dtm import DtmConfig, Variant
from .engine import HOT_TASKS, ExperimentConfig
from .errors import ConfigurationError
from .noc.sim import NocParams
from .noc.traffic import Pattern, TrafficSource, Workload
from .thermal import ClassPower, ClassThermal, PowerConstants, ThermalConstants


def _ints(text: str) -> tuple[int, ...]:
    text = text.strip()
    return tuple(int(x) for x in text.replace(",", " ").split()) if text else ()


def _opt_str(text: str) -> str | None:
    return text.strip() or None


def _opt_ints(text: str) -> tuple[int, ...] | None:
    return None if text.strip() in ("", "auto") else _ints(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, tuple):
        return " ".join(str(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""


def _pos(v) -> bool:
    return v > 0


def _nonneg(v) -> bool:
    return v >= 0


def _unit(v) -> bool:
    return 0.0 <= v <= 1.0


_T, _P = ThermalConstants(), PowerConstants()
_H = TrainHyper()
_D = DtmConfig()
_N = NocParams()

SCHEMA: dict[str, dict[str, Key]] = {
    "topology": {
        "grid_w": Key(int, 8, lambda v: v >= 2, ">= 2"),
        "grid_h": Key(int, 8, lambda v: v >= 2, ">= 2"),
        "n_wi": Key(int, 4, _nonneg, ">= 0"),
        "wi_positions": Key(_opt_ints, None, None, "switch ids or 'auto'"),
    },
    "thermal": {
        "core_c": Key(float, _T.core.c, _pos, "> 0"),
        "core_r_v": Key(float, _T.core.r_v, _pos, "> 0"),
        "switch_c": Key(float, _T.switch.c, _pos, "> 0"),
        "switch_r_v": Key(float, _T.switch.r_v, _pos, "> 0"),
        "link_c": Key(float, _T.link.c, _pos, "> 0"),
        "link_r_v": Key(float, _T.link.r_v, _pos, "> 0"),
        "r_lateral": Key(float, _T.r_lateral, _pos, "> 0"),
        "t_ambient": Key(float, _T.t_ambient),
        "dt": Key(float, _T.dt, _pos, "> 0"),
        "cycles_per_step": Key(int, _T.cycles_per_step, _pos, "> 0"),
        "clock_hz": Key(float, _T.clock_hz, _pos, "> 0"),
    },
    "power": {
        "core_p_leak": Key(float, _P.core.p_leak, _nonneg, ">= 0"),
        "core_p_dyn": Key(float, _P.core.p_dyn, _nonneg, ">= 0"),
        "switch_p_leak": Key(float, _P.switch.p_leak, _nonneg, ">= 0"),
        "switch_p_dyn": Key(float, _P.switch.p_dyn, _nonneg, ">= 0"),
        "link_p_leak": Key(float, _P.link.p_leak, _nonneg, ">= 0"),
        "link_p_dyn": Key(float, _P.link.p_dyn, _nonneg, ">= 0"),
    },
    "traffic": {
        "pattern": Key(str, "hotspot", lambda v: v in {p.value for p in Pattern},
                       "one of uniform, hotspot, transpose, trace"),
        "injection_rate": Key(float, 2.5e-5, _unit, "in [0, 1]"),
        "packet_flits": Key(int, 64, _pos, ">= 1"),
        "hotspot_targets": Key(_ints, HOT_TASKS),
        "hotspot_bias": Key(float, 0.5, _unit, "in [0, 1]"),
        "trace_path": Key(_opt_str, None),
        "seed": Key(_opt_str, None, None, "integer or empty (derived from the root seed)"),
    },
    "workload": {
        "base_load": Key(float, 0.3, _unit, "in [0, 1]"),
        "hot_load": Key(float, 1.0, _unit, "in [0, 1]"),
        "hot_tasks": Key(_ints, HOT_TASKS),
    },
    "noc": {
        "buffer_depth": Key(int, _N.buffer_depth, _pos, ">= 1"),
        "wireless_buffer_depth": Key(int, _N.wireless_buffer_depth, _pos, ">= 1"),
        "max_hold": Key(int, _N.max_hold, _pos, ">= 1"),
    },
    "dtm": {
        "variant": Key(str, _D.variant.value, lambda v: v in {x.value for x in Variant},
                       "one of off, combined, reroute_only"),
        "t_th": Key(float, _D.t_th),
        "window": Key(int, _D.window, _pos, "> 0"),
        "migration_cost": Key(int, _D.migration_cost, _nonneg, ">= 0"),
        "max_migrations": Key(int, _D.max_migrations, _pos, ">= 1"),
        "penalty": Key(int, _D.penalty, _pos, ">= 1"),
        "rank_by": Key(str, _D.rank_by, lambda v: v in ("temperature", "delta"),
                       "one of temperature, delta"),
    },
    "experiment": {
        "duration": Key(int, 2_000_000, _nonneg, ">= 0"),
        "warmup_peak": Key(float, 60.0),
        "mode": Key(str, "flow", lambda v: v in ("flow", "cycle"), "one of flow, cycle"),
        "predictor": Key(str, "quantized", lambda v: v in ("quantized", "float"),
                         "one of quantized, float"),
        "model_path": Key(_opt_str, None),
        "seed": Key(int, 0),
        "record_u": Key(_bool, False),
    },
    "dataset": {
        "n_scenarios": Key(int, 250, _pos, ">= 1"),
        "steps": Key(int, 3000, _pos, ">= 1"),
        "seed": Key(_opt_str, None, None, "integer or empty (derived from the root seed)"),
    },
    "train": {
        "lr": Key(float, _H.lr, _pos, "> 0"),
        "epochs": Key(int, _H.epochs, _nonneg, ">= 0"),
        "batch": Key(int, _H.batch, _pos, ">= 1"),
        "init_scale": Key(float, _H.init_scale, _pos, "> 0"),
        "momentum": Key(float, _H.momentum, lambda v: 0 <= v < 1, "in [0, 1)"),
        "lr_decay": Key(float, _H.lr_decay, lambda v: 0 < v <= 1, "in (0, 1]"),
        "weight_decay": Key(float, _H.weight_decay, _nonneg, ">= 0"),
        "seed": Key(_opt_str, None, None, "integer or empty (derived from the root seed)"),
    },
    "quant": {
        "weight_bits": Key(int, 16, lambda v: 4 <= v <= 16, "in [4, 16]"),
        "frac_bits": Key(int, 10, lambda v: v >= 2, ">= 2"),
        "mac_units": Key(int, 10, _pos, ">= 1"),
    },
}


def derive_seed(root: int, label: str) -> int:
    """Independent per-subsystem seed from the root seed and a fixed label."""
    ss = np.random.SeedSequence([root & 0xFFFFFFFF, zlib.crc32(label.encode())])
    return int(ss.generate_state(1)[0])


class Settings:
    """Validated values for every section and key."""

    def __init__(self, values: dict[str, dict[str, Any]]):
        self.values = values

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def get(self, dotted: str) -> Any:
        sec, key = dotted.split(".", 1)
        return self.values[sec][key]

    # seeds -----------------------------------------------------------------
    def seed(self, section: str) -> int:
        raw = self.values[section].get("seed")
        return derive_seed(self.values["experiment"]["seed"], section) if raw is None else int(raw)

    # builders ---------------------------------------------------------------
    def thermal(self) -> ThermalConstants:
        t = self.values["thermal"]
        return ThermalConstants(ClassThermal(t["core_c"], t["core_r_v"]),
                                ClassThermal(t["switch_c"], t["switch_r_v"]),
                                ClassThermal(t["link_c"], t["link_r_v"]), t["r_lateral"],
                                t["t_ambient"], t["dt"], t["cycles_per_step"], t["clock_hz"])

    def power(self) -> PowerConstants:
        p = self.values["power"]
        return PowerConstants(ClassPower(p["core_p_leak"], p["core_p_dyn"]),
                              ClassPower(p["switch_p_leak"], p["switch_p_dyn"]),
                              ClassPower(p["link_p_leak"], p["link_p_dyn"]))

    def traffic(self) -> TrafficSource:
        t = self.values["traffic"]
        return TrafficSource(Pattern(t["pattern"]), t["injection_rate"], self.seed("traffic"),
                             t["packet_flits"], t["hotspot_targets"], t["hotspot_bias"],
                             t["trace_path"])

    def dtm(self) -> DtmConfig:
        d = self.values["dtm"]
        return DtmConfig(d["t_th"], d["window"], self.values["thermal"]["cycles_per_step"],
                         Variant(d["variant"]), d["migration_cost"], d["max_migrations"],
                         d["penalty"], d["rank_by"])

    def hyper(self) -> TrainHyper:
        t = self.values["train"]
        return TrainHyper(lr=t["lr"], epochs=t["epochs"], batch=t["batch"],
                          init_scale=t["init_scale"], seed=self.seed("train"),
                          momentum=t["momentum"], lr_decay=t["lr_decay"],
                          weight_decay=t["weight_decay"])

    def quant(self) -> QuantFormat:
        q = self.values["quant"]
        return QuantFormat(weight_bits=q["weight_bits"], frac_bits=q["frac_bits"],
                           mac_units=q["mac_units"])

    def experiment(self) -> ExperimentConfig:
        topo, e, w, n = (self.values[s] for s in ("topology", "experiment", "workload", "noc"))
        try:
            return ExperimentConfig(
                grid_w=topo["grid_w"], grid_h=topo["grid_h"], n_wi=topo["n_wi"],
                wi_positions=topo["wi_positions"], thermal=self.thermal(), power=self.power(),
                traffic=self.traffic(), workload=Workload(w["base_load"], w["hot_load"], w["hot_tasks"]),
                dtm=self.dtm(), duration=e["duration"], warmup_peak=e["warmup_peak"], mode=e["mode"],
                predictor=e["predictor"], model_path=e["model_path"], seed=e["seed"],
                noc=NocParams(n["buffer_depth"], n["wireless_buffer_depth"], n["max_hold"]),
                record_u=e["record_u"])
        except ConfigurationError:
            raise
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    # echo -------------------------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for sec, keys in self.values.items():
            cp[sec] = {k: _fmt(v) for k, v in keys.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _resolve(section: str | None, key: str) -> tuple[str, str]:
    if section is not None:
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigurationError(f"unknown key {section}.{key}")
        return section, key
    hits = [s for s, keys in SCHEMA.items() if key in keys]
    if not hits:
        raise ConfigurationError(f"unknown key {key}")
    if len(hits) > 1:
        raise ConfigurationError(f"ambiguous key {key}: use one of "
                                 + ", ".join(f"{s}.{key}" for s in hits))
    return hits[0], key


def _convert(section: str, key: str, text: str) -> Any:
    spec = SCHEMA[section][key]
    try:
        v = spec.parse(text)
    except ValueError as exc:
        raise ConfigurationError(f"{section}.{key}: cannot parse {text!r} ({exc})") from exc
    if spec.check is not None and not spec.check(v):
        raise ConfigurationError(f"{section}.{key} = {text.strip()!r} violates {key} {spec.rule}")
    if spec.rule.startswith("integer or empty") and v is not None:
        try:
            v = int(v)
        except ValueError as exc:
            raise ConfigurationError(f"{section}.{key}: expected an integer, got {v!r}") from exc
    return v


def parse_config(path: str | Path | None = None, overrides: list[str] | tuple[str, ...] = ()) -> Settings:
    """Defaults, then the file, then ``key=value`` or ``section.key=value`` overrides."""
    values = {s: {k: spec.default for k, spec in keys.items()} for s, keys in SCHEMA.items()}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigurationError(f"config file not found: {p}")
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(p.read_text())
        except configparser.Error as exc:
            raise ConfigurationError(f"{p}: {exc}") from exc
        for sec in cp.sections():
            for key, text in cp[sec].items():
                s, k = _resolve(sec, key)
                values[s][k] = _convert(s, k, text)
    for ov in overrides:
        if "=" not in ov:
            raise ConfigurationError(f"override {ov!r} is not key=value")
        lhs, text = ov.split("=", 1)
        lhs = lhs.strip()
        sec, key = lhs.split(".", 1) if "." in lhs else (None, lhs)
        s, k = _resolve(sec, key)
        values[s][k] = _convert(s, k, text)
    return Settings(values)
