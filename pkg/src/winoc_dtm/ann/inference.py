"""Float inference: predicted temperatures for a utilization vector held over a horizon."""
from __future__ import annotations

import numpy as np

from ..errors import HorizonRangeError
from .dataset import H_MAX, encode_horizon
from .network import AnnModel, forward


def predict_rise(model: AnnModel, u: np.ndarray, horizon_steps) -> np.ndarray:
    """Predicted temperature change per component; ``u`` may be batched over the leading axis."""
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    h = np.broadcast_to(np.asarray(horizon_steps, dtype=float), (len(u),))
    if (h < 0).any() or (h > H_MAX).any():
        raise HorizonRangeError(f"horizon must lie in [0, {H_MAX}] thermal steps")
    if u.shape[1] != model.n_in - 1:
        raise ValueError(f"expected {model.n_in - 1} utilizations, got {u.shape[1]}")
    _, y = forward(model, np.concatenate([u, encode_horizon(h)[:, None]], axis=1))
    return y[0] if single else y


def predict(model: AnnModel, u: np.ndarray, horizon_steps, t0: np.ndarray) -> np.ndarray:
    """t0 plus the predicted change after ``horizon_steps`` thermal steps."""
    return np.asarray(t0, dtype=float) + predict_rise(model, u, horizon_steps)
