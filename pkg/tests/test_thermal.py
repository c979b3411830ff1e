import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import sparse

from winoc_dtm.errors import ConfigurationError
from winoc_dtm.thermal import (ClassThermal, PowerConstants, PowerProfile, RcThermalModel,
                               ThermalConstants, ThermalState, build_rc_model, power_from_utilization,
                               run_steps, steady_state, thermal_step, warmup)
from winoc_dtm.topology import Kind, build_mesh, default_topology


@pytest.fixture(scope="module")
def model():
    return build_rc_model(default_topology())


def small_model(c, rv, g, dt=1e-3, t_amb=45.0):
    n = len(c)
    return RcThermalModel(np.asarray(c, float), np.asarray(rv, float), sparse.csr_matrix(np.asarray(g, float)),
                          dt, 1, t_amb, np.zeros(n, dtype=int), PowerConstants())


def test_power_examples(model):
    k = model.kinds
    p0 = power_from_utilization(np.zeros(240), k).p
    assert np.allclose(p0[k == Kind.CORE], 0.3)
    assert np.allclose(p0[k == Kind.SWITCH], 0.08)
    assert np.allclose(p0[k == Kind.LINK], 0.01)
    p1 = power_from_utilization(np.ones(240), k).p
    assert np.allclose(p1[k == Kind.CORE], 1.5)
    assert np.allclose(p1[k == Kind.LINK], 0.46)
    u = np.zeros(240)
    u[5] = 0.5
    assert power_from_utilization(u, k).p[5] == pytest.approx(0.9)


def test_power_rejects_bad_input(model):
    with pytest.raises(ValueError):
        power_from_utilization(np.full(240, 1.1), model.kinds)
    with pytest.raises(ValueError):
        power_from_utilization(np.zeros(10), model.kinds)


def test_lateral_adjacency(model):
    topo = default_topology()
    g = model.g_lateral.toarray()
    assert np.allclose(g, g.T)
    assert (g >= 0).all()
    # each core touches only its switch; each link its two switches
    assert (np.count_nonzero(g[topo.slice(Kind.CORE)], axis=1) == 1).all()
    assert (np.count_nonzero(g[topo.slice(Kind.LINK)], axis=1) == 2).all()
    sw = topo.slice(Kind.SWITCH)
    assert np.count_nonzero(g[sw][:, sw]) == 0


def test_stability_checked_at_build():
    with pytest.raises(ConfigurationError):
        build_rc_model(build_mesh(4, 4), ThermalConstants(dt=1.0))
    assert build_rc_model(default_topology()).stability_margin() > 1


def test_ambient_fixed_point(model):
    s = ThermalState(np.full(240, 45.0))
    out = thermal_step(s, model, PowerProfile(np.zeros(240)))
    assert np.array_equal(out.t, s.t)


def test_single_node_first_order():
    c, rv, p = 2e-3, 10.0, 1.5
    m = small_model([c], [rv], [[0.0]], dt=1e-4)
    steps = int(round(5 * rv * c / m.dt))
    s = run_steps(ThermalState(np.array([45.0])), m, PowerProfile(np.array([p])), steps)
    target = 45.0 + p * rv
    assert abs(s.t[0] - target) <= 0.01 * p * rv
    # the explicit-Euler closed form (1 - dt/(r c))^k as an exact oracle
    exact = target - p * rv * (1 - m.dt / (rv * c)) ** steps
    assert s.t[0] == pytest.approx(exact, abs=1e-9)
    assert steady_state(m, PowerProfile(np.array([p]))).t[0] == pytest.approx(target, abs=1e-12)


def test_symmetric_pair_stays_equal():
    m = small_model([1e-3, 1e-3], [5.0, 5.0], [[0, 0.1], [0.1, 0]])
    s = ThermalState(np.array([50.0, 50.0]))
    p = PowerProfile(np.array([0.7, 0.7]))
    for _ in range(50):
        s = thermal_step(s, m, p)
        assert s.t[0] == s.t[1]


def test_step_formula_by_hand():
    m = small_model([1e-3, 2e-3, 1e-3], [5.0, 4.0, 8.0], [[0, 0.5, 0], [0.5, 0, 0.25], [0, 0.25, 0]])
    t = np.array([50.0, 47.0, 60.0])
    p = np.array([0.2, 0.0, 1.0])
    out = thermal_step(ThermalState(t), m, PowerProfile(p)).t
    g = m.g_lateral.toarray()
    expect = [t[i] + m.dt / m.c[i] * (p[i] - (t[i] - 45) / m.r_vertical[i]
                                       - sum(g[i, j] * (t[i] - t[j]) for j in range(3))) for i in range(3)]
    assert np.allclose(out, expect, atol=1e-12)


def test_steady_state_matches_iteration(model):
    p = power_from_utilization(np.full(240, 0.6), model.kinds)
    ss = steady_state(model, p)
    it = run_steps(ThermalState(np.full(240, 45.0)), model, p, 3000)
    assert np.max(np.abs(ss.t - it.t)) < 0.01
    g = model.conductance_matrix()
    assert np.max(np.abs(g @ (ss.t - 45.0) - p.p)) <= 1e-9
    # conservation: all heat leaves vertically
    out = ((ss.t - 45.0) / model.r_vertical).sum()
    assert out == pytest.approx(p.p.sum(), rel=1e-6)


def test_zero_power_steady_is_ambient(model):
    assert np.allclose(steady_state(model, PowerProfile(np.zeros(240))).t, 45.0)


@pytest.mark.parametrize("target", [60.0, 68.0])
def test_warmup_hits_target(model, target):
    s = warmup(model, target)
    assert target - 0.1 <= s.peak <= target + 0.1
    assert (s.t >= 45.0).all()


def test_warmup_ambient_and_below(model):
    assert np.allclose(warmup(model, 45.0).t, 45.0)
    with pytest.raises(ConfigurationError):
        warmup(model, 40.0)


def test_time_constants_in_tuned_range(model):
    tau = model.time_constants
    assert 5 < tau.min() and tau.max() < 200


def rand_model(seed, n=4):
    r = np.random.default_rng(seed)
    g = np.triu(r.uniform(0, 0.3, (n, n)) * (r.random((n, n)) < 0.6), 1)
    g = g + g.T
    return small_model(r.uniform(5e-3, 2e-2, n), r.uniform(2, 20, n), g, dt=1e-4)


@given(st.integers(0, 10_000))
def test_monotone_steady_state(seed):
    m = rand_model(seed)
    r = np.random.default_rng(seed + 1)
    p = r.uniform(0, 2, m.n)
    q = p + r.uniform(0, 1, m.n)
    assert (steady_state(m, PowerProfile(q)).t >= steady_state(m, PowerProfile(p)).t - 1e-12).all()


@given(st.integers(0, 10_000), st.floats(-2, 2), st.floats(-2, 2))
def test_step_is_affine(seed, a, b):
    m = small_model(*_three(seed), dt=1e-4)
    r = np.random.default_rng(seed)
    t1, t2 = r.uniform(45, 80, (2, 3))
    p1, p2 = r.uniform(0, 2, (2, 3))

    def f(t, p):
        return thermal_step(ThermalState(45.0 + t), m, PowerProfile(p)).t - 45.0

    lhs = f(a * (t1 - 45) + b * (t2 - 45), a * p1 + b * p2)
    rhs = a * f(t1 - 45, p1) + b * f(t2 - 45, p2)
    assert np.allclose(lhs, rhs, atol=1e-9)


def _three(seed):
    r = np.random.default_rng(seed)
    g = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]) * r.uniform(0.05, 0.3)
    return r.uniform(5e-3, 2e-2, 3), r.uniform(2, 20, 3), g


@given(st.integers(0, 10_000))
def test_maximum_principle(seed):
    m = rand_model(seed)
    t = np.random.default_rng(seed).uniform(45, 90, m.n)
    out = thermal_step(ThermalState(t), m, PowerProfile(np.zeros(m.n))).t
    assert out.max() <= t.max() + 1e-12
    assert out.min() >= min(45.0, t.min()) - 1e-12


def test_class_constants_lookup():
    tc = ThermalConstants()
    assert tc.for_kind(Kind.SWITCH) == ClassThermal(4e-5, 20.0)
