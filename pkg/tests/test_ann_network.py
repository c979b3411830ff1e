import numpy as np
import pytest
from hypothesis import given, strategies as st

from winoc_dtm.ann.network import (DEFAULT_STREAMS, AnnModel, StreamSpec, center, forward,
                                   gradient_check, init_model, loss_and_grads, uncenter)
from winoc_dtm.ann.train import fit_arrays
from winoc_dtm.errors import ConfigurationError


def test_default_architecture():
    m = init_model()
    assert m.n_in == 241
    assert m.n_hidden == 400
    assert [s.hidden for s in m.streams] == [250, 50, 100]
    assert [s.n_out for s in m.streams] == [64, 64, 112]
    assert m.w1.shape == (400, 242)
    assert m.n_weights == 400 * 242 + 64 * 251 + 64 * 51 + 112 * 101 == 127_440


def test_init_range_and_determinism():
    a, b = init_model(seed=3, init_scale=0.05), init_model(seed=3, init_scale=0.05)
    assert np.array_equal(a.w1, b.w1)
    assert np.abs(a.w1).max() <= 0.05


def test_shape_validation():
    m = init_model(4, (StreamSpec("a", 2, 1),))
    with pytest.raises(ConfigurationError):
        AnnModel(4, m.streams, m.w1[:, :-1], m.w2)
    with pytest.raises(ConfigurationError):
        AnnModel(4, m.streams, m.w1, m.w2, activation="relu")


def test_forward_by_hand():
    m = init_model(2, (StreamSpec("a", 2, 1),), seed=1)
    x = np.array([[0.3, -0.2]])
    h = 1 / (1 + np.exp(-(x @ m.w1[:, :2].T + m.w1[:, 2])))
    y = h @ m.w2[0][:, :2].T + m.w2[0][:, 2]
    a, out = forward(m, x)
    assert np.allclose(a, h) and np.allclose(out, y)


def test_stream_isolation():
    m = init_model(seed=2)
    x = np.random.default_rng(0).random((5, 241))
    _, y = forward(m, x)
    m2 = m.copy()
    hs = m2.hidden_slices()
    m2.w1[hs[1]] = 0
    m2.w1[hs[2]] = 0
    m2.w2[1][:] = 0
    m2.w2[2][:] = 0
    _, y2 = forward(m2, x)
    cores = m.output_slices()[0]
    assert np.array_equal(y[:, cores], y2[:, cores])


def small_net(seed):
    r = np.random.default_rng(seed)
    streams = (StreamSpec("a", int(r.integers(1, 3)), 1), StreamSpec("b", 1, 1))
    return init_model(3, streams, init_scale=1.0, seed=seed), r


def test_gradient_check_50_nets():
    worst = 0.0
    for seed in range(50):
        m, r = small_net(seed)
        assert m.n_weights <= 20
        worst = max(worst, gradient_check(m, r.normal(size=(4, 3)), r.normal(size=(4, 2))))
    assert worst <= 1e-4


def test_linear_net_closed_form():
    m = init_model(2, (StreamSpec("a", 2, 1),), init_scale=1.0, seed=4, activation="identity")
    r = np.random.default_rng(0)
    x, y = r.normal(size=(6, 2)), r.normal(size=(6, 1))
    _, grads = loss_and_grads(m, x, y)
    # closed form: output layer of a linear model is linear regression on the hidden values
    h = x @ m.w1[:, :2].T + m.w1[:, 2]
    resid = h @ m.w2[0][:, :2].T + m.w2[0][:, 2] - y
    g2 = 2 / resid.size * np.concatenate([resid.T @ h, resid.sum(0, keepdims=True).T], axis=1)
    assert np.allclose(grads[1], g2, atol=1e-10)
    d = 2 / resid.size * resid @ m.w2[0][:, :2]
    g1 = np.concatenate([d.T @ x, d.sum(0)[:, None]], axis=1)
    assert np.allclose(grads[0], g1, atol=1e-10)


def test_zero_weights_zero_input():
    m = init_model(2, (StreamSpec("a", 2, 1),), init_scale=0.0)
    x, y = np.zeros((1, 2)), np.array([[0.7]])
    _, g = loss_and_grads(m, x, y)
    assert not g[0][:, :2].any()  # input weights see a zero input
    assert gradient_check(m, x, y) <= 1e-4


def test_xor_toy_learns():
    x = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], float)
    y = np.array([[0], [1], [1], [0]], float)
    m = init_model(2, (StreamSpec("o", 2, 1),), init_scale=1.0, seed=0)
    losses = fit_arrays(m, x, y, lr=0.5, epochs=5000)
    assert losses[-1] < 1e-2


@given(st.integers(0, 1000))
def test_center_roundtrip(seed):
    m = init_model(5, (StreamSpec("a", 3, 2), StreamSpec("b", 2, 1)), init_scale=1.0, seed=seed)
    x = np.random.default_rng(seed).random((4, 5))
    c = center(m)
    _, y = forward(m, x)
    _, yc = forward(c, x - 0.5)
    assert np.allclose(y, yc, atol=1e-10)
    back = uncenter(c)
    assert np.allclose(back.w1, m.w1) and all(np.allclose(a, b) for a, b in zip(back.w2, m.w2))


def test_default_streams_constant():
    assert sum(s.n_out for s in DEFAULT_STREAMS) == 240
