"""Training data from the RC oracle: hold a random utilization vector, record the temperature rise."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, ModelError
from ..thermal import RcThermalModel, baseline_state, power_from_utilization, thermal_step

H_MAX = 3000  # longest trained horizon, in thermal steps
H_KNEE = 10.0  # steps; the horizon input is logarithmic beyond this


def encode_horizon(h) -> np.ndarray:
    """Horizon in steps -> [0, 1].  Log-compressed so the fast transient gets most of the range."""
    h = np.asarray(h, dtype=float)
    return np.log1p(h / H_KNEE) / np.log1p(H_MAX / H_KNEE)


def decode_horizon(x) -> np.ndarray:
    return H_KNEE * np.expm1(np.asarray(x, dtype=float) * np.log1p(H_MAX / H_KNEE))
MAGIC = b"WDTMDAT1"


@dataclass(eq=False)
class TrainingDataset:
    u: np.ndarray  # (n_scenarios, n_components)
    dt: np.ndarray  # (n_scenarios, steps, n_components) float32, rise after h = 1..steps
    seed: int = 0
    val_fraction: float = 0.2

    @property
    def n_scenarios(self) -> int:
        return len(self.u)

    @property
    def steps(self) -> int:
        return self.dt.shape[1]

    @property
    def n_components(self) -> int:
        return self.u.shape[1]

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        """Scenario indices (train, validation); the split is by scenario, seeded."""
        n = self.n_scenarios
        n_val = int(round(n * self.val_fraction)) if n > 1 else 0
        order = np.random.default_rng([self.seed, 80_20]).permutation(n)
        return np.sort(order[n_val:]), np.sort(order[:n_val])

    def target(self, sc: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Rise for scenario indices ``sc`` at horizons ``h`` (h = 0 gives zeros)."""
        out = np.zeros((len(sc), self.n_components), dtype=np.float64)
        m = h > 0
        out[m] = self.dt[sc[m], h[m] - 1]
        return out


def generate_training_data(model: RcThermalModel, n_scenarios: int = 250, steps: int = 3000,
                           seed: int = 0, u: np.ndarray | None = None,
                           chunk: int = 50) -> TrainingDataset:
    """Uniform random utilizations held constant; the oracle runs from the idle steady state."""
    if n_scenarios < 1 or steps < 1:
        raise ConfigurationError("n_scenarios and steps must be >= 1")
    n = model.n
    if u is None:
        u = np.random.default_rng(seed).random((n_scenarios, n))
    else:
        u = np.asarray(u, dtype=float).reshape(n_scenarios, n)
    base = baseline_state(model)
    dt = np.empty((n_scenarios, steps, n), dtype=np.float32)
    for a in range(0, n_scenarios, chunk):
        b = min(a + chunk, n_scenarios)
        power = power_from_utilization(u[a:b].T, model.kinds, model.power)
        state = type(base)(np.repeat(base.t[:, None], b - a, axis=1), base.t_ambient)
        for h in range(steps):
            state = thermal_step(state, model, power)
            dt[a:b, h] = (state.t - base.t[:, None]).T
    return TrainingDataset(u, dt, seed)


def save_dataset(path: str | Path, data: TrainingDataset) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIqd", data.n_scenarios, data.steps, data.n_components,
                             data.seed, data.val_fraction))
        fh.write(np.ascontiguousarray(data.u, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(data.dt, dtype="<f4").tobytes())


def load_dataset(path: str | Path) -> TrainingDataset:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ModelError(f"{path}: not a dataset file")
        head = fh.read(28)
        if len(head) != 28:
            raise ModelError(f"{path}: truncated dataset header")
        n, steps, comps, seed, vf = struct.unpack("<IIIqd", head)
        raw_u = fh.read(8 * n * comps)
        raw_dt = fh.read(4 * n * steps * comps)
        if len(raw_u) != 8 * n * comps or len(raw_dt) != 4 * n * steps * comps or fh.read(1):
            raise ModelError(f"{path}: dataset size does not match its header")
        u = np.frombuffer(raw_u, dtype="<f8").reshape(n, comps).copy()
        dt = np.frombuffer(raw_dt, dtype="<f4")
        return TrainingDataset(u, dt.reshape(n, steps, comps).astype(np.float32), seed, vf)
