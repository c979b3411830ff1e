"""Multi-stream feedforward network: one shared input vector, independent hidden/output streams.

Each stream has its own sigmoid hidden layer fed by every input, and a linear
output layer that only sees that stream's hidden units.  Weight matrices carry
the bias as their last column.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError

ACTIVATIONS = ("sigmoid", "identity", "centered_sigmoid")


@dataclass(frozen=True)
class StreamSpec:
    name: str
    hidden: int
    n_out: int


DEFAULT_STREAMS = (StreamSpec("cores", 250, 64), StreamSpec("switches", 50, 64),
                   StreamSpec("links", 100, 112))


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))  # overflow-free logistic


@dataclass(eq=False)
class AnnModel:
    n_in: int
    streams: tuple[StreamSpec, ...]
    w1: np.ndarray  # (total hidden, n_in + 1)
    w2: list[np.ndarray]  # per stream (n_out, hidden + 1)
    activation: str = "sigmoid"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {ACTIVATIONS}")
        if self.w1.shape != (self.n_hidden, self.n_in + 1):
            raise ConfigurationError(f"w1 shape {self.w1.shape} != {(self.n_hidden, self.n_in + 1)}")
        for st, w in zip(self.streams, self.w2):
            if w.shape != (st.n_out, st.hidden + 1):
                raise ConfigurationError(f"stream {st.name}: w2 shape {w.shape} mismatch")

    @property
    def n_hidden(self) -> int:
        return sum(s.hidden for s in self.streams)

    @property
    def n_out(self) -> int:
        return sum(s.n_out for s in self.streams)

    @property
    def n_weights(self) -> int:
        return self.w1.size + sum(w.size for w in self.w2)

    def hidden_slices(self) -> list[slice]:
        out, a = [], 0
        for s in self.streams:
            out.append(slice(a, a + s.hidden))
            a += s.hidden
        return out

    def output_slices(self) -> list[slice]:
        out, a = [], 0
        for s in self.streams:
            out.append(slice(a, a + s.n_out))
            a += s.n_out
        return out

    def act(self, z: np.ndarray) -> np.ndarray:
        if self.activation == "sigmoid":
            return sigmoid(z)
        if self.activation == "centered_sigmoid":
            return 0.5 * np.tanh(0.5 * z)
        return z

    def act_grad(self, a: np.ndarray) -> np.ndarray:
        if self.activation == "sigmoid":
            return a * (1.0 - a)
        if self.activation == "centered_sigmoid":
            return (0.5 + a) * (0.5 - a)
        return np.ones_like(a)

    # parameters as a flat vector (used by gradient checking and the optimizer)
    def params(self) -> list[np.ndarray]:
        return [self.w1, *self.w2]

    def copy(self) -> "AnnModel":
        return AnnModel(self.n_in, self.streams, self.w1.copy(), [w.copy() for w in self.w2],
                        self.activation, dict(self.meta))


def init_model(n_in: int = 241, streams=DEFAULT_STREAMS, init_scale: float = 0.1,
               seed: int = 0, activation: str = "sigmoid") -> AnnModel:
    """Weights drawn uniformly from [-init_scale, init_scale]."""
    streams = tuple(streams)
    rng = np.random.default_rng(seed)
    n_hidden = sum(s.hidden for s in streams)
    w1 = rng.uniform(-init_scale, init_scale, (n_hidden, n_in + 1))
    w2 = [rng.uniform(-init_scale, init_scale, (s.n_out, s.hidden + 1)) for s in streams]
    return AnnModel(n_in, streams, w1, w2, activation)


def center(model: AnnModel, offset: float = 0.5) -> AnnModel:
    """Same function, rewritten for inputs shifted by -offset and sigmoid outputs shifted by -0.5.

    Training in these coordinates is far better conditioned; ``uncenter`` folds the
    shifts back into the biases.
    """
    if model.activation != "sigmoid":
        raise ValueError("only sigmoid models can be centred")
    w1 = model.w1.copy()
    w1[:, -1] += offset * w1[:, :-1].sum(axis=1)
    w2 = []
    for w in model.w2:
        w = w.copy()
        w[:, -1] += 0.5 * w[:, :-1].sum(axis=1)
        w2.append(w)
    return AnnModel(model.n_in, model.streams, w1, w2, "centered_sigmoid", dict(model.meta))


def uncenter(model: AnnModel, offset: float = 0.5) -> AnnModel:
    if model.activation != "centered_sigmoid":
        raise ValueError("model is not in centred coordinates")
    w1 = model.w1.copy()
    w1[:, -1] -= offset * w1[:, :-1].sum(axis=1)
    w2 = []
    for w in model.w2:
        w = w.copy()
        w[:, -1] -= 0.5 * w[:, :-1].sum(axis=1)
        w2.append(w)
    return AnnModel(model.n_in, model.streams, w1, w2, "sigmoid", dict(model.meta))


def forward(model: AnnModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(hidden activations, outputs) for a batch x of shape (B, n_in)."""
    z = x @ model.w1[:, :-1].T + model.w1[:, -1]
    return _forward_from_pre(model, z)


def _forward_from_pre(model: AnnModel, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = model.act(z)
    y = np.empty((len(z), model.n_out))
    for hs, os_, w in zip(model.hidden_slices(), model.output_slices(), model.w2):
        y[:, os_] = a[:, hs] @ w[:, :-1].T + w[:, -1]
    return a, y


def _backward_to_hidden(model: AnnModel, a: np.ndarray, dy: np.ndarray) -> tuple[list, np.ndarray]:
    """Output-layer gradients and the gradient wrt hidden pre-activations."""
    g2 = []
    dz = np.empty_like(a)
    for hs, os_, w in zip(model.hidden_slices(), model.output_slices(), model.w2):
        d = dy[:, os_]
        ah = a[:, hs]
        g = np.empty_like(w)
        g[:, :-1] = d.T @ ah
        g[:, -1] = d.sum(axis=0)
        g2.append(g)
        dz[:, hs] = d @ w[:, :-1]
    dz *= model.act_grad(a)
    return g2, dz


def loss_and_grads(model: AnnModel, x: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Loss mean((y_hat - y)^2) over every sample and output, and its gradients."""
    a, yh = forward(model, x)
    diff = yh - y
    n = diff.size
    loss = float(np.sum(diff * diff) / n)
    dy = 2.0 * diff / n
    g2, dz = _backward_to_hidden(model, a, dy)
    g1 = np.empty_like(model.w1)
    g1[:, :-1] = dz.T @ x
    g1[:, -1] = dz.sum(axis=0)
    return loss, [g1, *g2]


def gradient_check(model: AnnModel, x: np.ndarray, y: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between backprop and central finite differences."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    _, grads = loss_and_grads(model, x, y)
    worst = 0.0
    for p, g in zip(model.params(), grads):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + eps
            lp, _ = loss_and_grads(model, x, y)
            p[i] = old - eps
            lm, _ = loss_and_grads(model, x, y)
            p[i] = old
            num = (lp - lm) / (2 * eps)
            denom = max(abs(num), abs(g[i]), 1e-8)
            worst = max(worst, abs(num - g[i]) / denom)
    return worst
