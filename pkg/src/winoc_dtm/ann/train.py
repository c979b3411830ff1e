"""Mini-batch SGD (with momentum) on the mean squared error of the temperature rise."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError
from .dataset import TrainingDataset, decode_horizon, encode_horizon
from .network import (DEFAULT_STREAMS, AnnModel, _forward_from_pre, init_model, loss_and_grads,
                      uncenter)

log = logging.getLogger(__name__)

INPUT_CENTER = 0.5


@dataclass(frozen=True)
class TrainHyper:
    lr: float = 2.0
    epochs: int = 8
    batch: int = 256
    init_scale: float = 0.1
    seed: int = 0
    momentum: float = 0.9
    lr_decay: float = 0.8  # per epoch
    # share of each batch whose horizons are uniform over the horizon input, not over steps
    short_fraction: float = 0.5
    grad_clip: float = 10.0
    weight_decay: float = 1e-5  # L2 on non-bias weights
    # share of each batch built as a*u1 + b*u2 (a, b >= 0, a + b <= 1) of two scenarios;
    # the oracle's rise from the idle state is linear in u, so the label is a*dT1 + b*dT2
    mix_fraction: float = 0.5
    # keep every weight representable in the default 16-bit, 10-fraction-bit format
    weight_limit: float | None = 31.0


@dataclass
class TrainReport:
    baseline_rmse: float
    best_rmse: float
    best_epoch: int
    history: list[tuple[int, float, float]] = field(default_factory=list)  # (epoch, train loss, val rmse)
    seconds: float = 0.0


def fit_arrays(model: AnnModel, x: np.ndarray, y: np.ndarray, lr: float = 0.5, epochs: int = 1000,
               batch: int | None = None, momentum: float = 0.9, seed: int = 0) -> list[float]:
    """Plain mini-batch SGD on dense arrays (small problems and sanity checks)."""
    rng = np.random.default_rng(seed)
    n = len(x)
    batch = batch or n
    vel = [np.zeros_like(p) for p in model.params()]
    losses = []
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for a in range(0, n, batch):
            idx = order[a:a + batch]
            loss, grads = loss_and_grads(model, x[idx], y[idx])
            if not math.isfinite(loss):
                raise TrainingError("loss is not finite", {"loss": loss})
            for p, v, g in zip(model.params(), vel, grads):
                v *= momentum
                v -= lr * g
                p += v
            total += loss * len(idx)
        losses.append(total / n)
    return losses


def _sample(data: TrainingDataset, scen: np.ndarray, rng, hyper: TrainHyper, size: int):
    sc = scen[rng.integers(len(scen), size=size)]
    steps = data.steps
    h = rng.integers(1, steps + 1, size=size)
    n_short = int(size * hyper.short_fraction)
    if n_short:
        top = encode_horizon(steps)
        h[:n_short] = np.rint(decode_horizon(rng.random(n_short) * top)).astype(int)
    x = np.empty((size, data.n_components + 1))
    x[:, :-1] = data.u[sc]
    x[:, -1] = encode_horizon(h)
    y = data.target(sc, h)
    m = np.flatnonzero(rng.random(size) < hyper.mix_fraction)
    n_mix = len(m)
    if n_mix:
        sc2 = scen[rng.integers(len(scen), size=n_mix)]
        a = rng.random(n_mix)
        b = rng.random(n_mix) * (1.0 - a)
        x[m, :-1] = a[:, None] * x[m, :-1] + b[:, None] * data.u[sc2]
        y[m] = a[:, None] * y[m] + b[:, None] * data.target(sc2, h[m])
    return x - INPUT_CENTER, y


def evaluate_rmse(model: AnnModel, data: TrainingDataset, scen: np.ndarray | None = None,
                  h_chunk: int = 250) -> float:
    """RMSE over every (scenario, horizon 1..steps, component) of the given scenarios."""
    if scen is None:
        scen = np.arange(data.n_scenarios)
    if len(scen) == 0:
        return float("nan")
    w1 = model.w1
    base = data.u[scen] @ w1[:, :-2].T + w1[:, -1]  # (S, H)
    sq, count = 0.0, 0
    for a in range(1, data.steps + 1, h_chunk):
        hs = np.arange(a, min(a + h_chunk, data.steps + 1))
        z = base[:, None, :] + encode_horizon(hs)[None, :, None] * w1[:, -2]
        _, y = _forward_from_pre(model, z.reshape(-1, z.shape[-1]))
        t = data.dt[scen][:, hs - 1].reshape(-1, data.n_components)
        d = y - t
        sq += float(np.sum(d * d))
        count += d.size
    return math.sqrt(sq / count)


def train(data: TrainingDataset, hyper: TrainHyper | None = None, streams=DEFAULT_STREAMS,
          progress=None) -> tuple[AnnModel, TrainReport]:
    """Train on the scenario split of ``data``; returns the model with the best validation RMSE.

    Optimisation runs in centred coordinates (inputs and sigmoid outputs shifted
    by -0.5), where the weights are initialised; the returned model has the
    shifts folded back into its biases.
    """
    hyper = hyper or TrainHyper()
    if data.n_scenarios < 1:
        raise TrainingError("empty dataset")
    t_start = time.perf_counter()
    tr, va = data.split()
    if len(va) == 0:
        va = tr
    model = init_model(data.n_components + 1, streams, hyper.init_scale, hyper.seed,
                       activation="centered_sigmoid")
    best = uncenter(model, INPUT_CENTER)
    base = evaluate_rmse(best, data, va)
    report = TrainReport(base, base, 0)
    rng = np.random.default_rng([hyper.seed, 1])
    vel = [np.zeros_like(p) for p in model.params()]
    steps_per_epoch = max(1, (len(tr) * data.steps) // hyper.batch)
    lr = hyper.lr
    for epoch in range(1, hyper.epochs + 1):
        running, last = 0.0, float("nan")
        for step in range(steps_per_epoch):
            x, y = _sample(data, tr, rng, hyper, hyper.batch)
            loss, grads = loss_and_grads(model, x, y)
            if not math.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}, step {step}",
                                    {"epoch": epoch, "step": step, "lr": lr, "last_loss": last,
                                     "max_weight": float(max(np.abs(p).max() for p in model.params()))})
            norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
            scale = min(1.0, hyper.grad_clip / norm) if norm > 0 else 1.0
            for p, v, g in zip(model.params(), vel, grads):
                v *= hyper.momentum
                v -= (lr * scale) * g
                if hyper.weight_decay:
                    v[:, :-1] -= (lr * hyper.weight_decay) * p[:, :-1]
                p += v
                if hyper.weight_limit is not None:
                    np.clip(p, -hyper.weight_limit, hyper.weight_limit, out=p)
            running += loss
            last = loss
        plain = uncenter(model, INPUT_CENTER)
        rmse = evaluate_rmse(plain, data, va)
        report.history.append((epoch, running / steps_per_epoch, rmse))
        log.info("epoch %d: train mse %.4f, validation rmse %.4f", epoch, running / steps_per_epoch, rmse)
        if progress is not None:
            progress(epoch, running / steps_per_epoch, rmse)
        if not math.isfinite(rmse):
            raise TrainingError(f"validation rmse not finite at epoch {epoch}", {"epoch": epoch})
        if rmse < report.best_rmse:
            report.best_rmse, report.best_epoch = rmse, epoch
            best = plain
        lr *= hyper.lr_decay
    report.seconds = time.perf_counter() - t_start
    best.meta.update(val_rmse=report.best_rmse, epochs=hyper.epochs, seed=hyper.seed)
    return best, report
