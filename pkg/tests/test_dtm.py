import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from winoc_dtm.dtm import (DecisionKind, DtmConfig, DtmDecision, DtmEvent, ManagedSystem, TaskMap,
                           Variant, apply_decision, apply_migrations, decode_control, encode_control,
                           ftt_pairing, ftt_reallocate, sliding_window_decide, task_power,
                           write_event_log, EVENT_COLUMNS)
from winoc_dtm.errors import ConfigurationError
from winoc_dtm.routing import init_routes
from winoc_dtm.topology import Kind, default_topology

TOPO = default_topology()
CORES = TOPO.slice(Kind.CORE)
SW0 = TOPO.offset(Kind.SWITCH)
LN0 = TOPO.offset(Kind.LINK)


# -- FTT -----------------------------------------------------------------------
def test_ftt_two_task_example():
    # hot task 0 (5 W) sits on the heating core 0; core 1 is cooling
    tm = TaskMap([0, 1])
    migs = ftt_reallocate(tm, np.array([3.0, -1.0]), np.array([5.0, 1.0]))
    # enumerate both assignments: the rank-paired one puts 5 W on the -1 core
    best = min(itertools.permutations(range(2)),
               key=lambda p: [(-[5.0, 1.0][t], [3.0, -1.0][p[t]]) for t in range(2)])
    assert best == (1, 0)
    assert migs == [(0, 1), (1, 0)]
    moved = apply_migrations(tm, migs[:1])  # one swap realises both moves
    assert moved == {0, 1} and list(tm.core_of) == [1, 0]


def test_ftt_two_task_under_delta_rank():
    cfg = DtmConfig(t_th=68, rank_by="delta")
    t0 = np.full(240, 50.0)
    pred = t0.copy()
    pred[0], pred[1] = 69.0, 49.0  # core 0 heats +19, core 1 cools -1
    pred[2:64] = 50.0
    power = np.zeros(64)
    power[0], power[1] = 5.0, 1.0
    d = sliding_window_decide(lambda u, h, t: pred, np.zeros(240), t0, cfg, TOPO,
                              taskmap=TaskMap.identity(64), power=power)
    assert d.kind == DecisionKind.REALLOCATE
    assert d.migrations[0] == (0, 1)


def test_ftt_identical_keys_no_migrations():
    tm = TaskMap.identity(8)
    power = np.arange(8, 0, -1, dtype=float)
    assert ftt_reallocate(tm, np.zeros(8), power) == []


def sort_zip_oracle(power, key):
    tasks = sorted(range(len(power)), key=lambda t: (-power[t], t))
    cores = sorted(range(len(key)), key=lambda c: (key[c], c))
    return dict(zip(tasks, cores))


@pytest.mark.parametrize("seed", range(5))
def test_ftt_matches_sort_zip(seed):
    r = np.random.default_rng(seed)
    power = r.integers(0, 5, 64).astype(float)  # ties on purpose
    key = r.integers(-3, 3, 64).astype(float)
    target = ftt_pairing(power, key)
    oracle = sort_zip_oracle(power.tolist(), key.tolist())
    assert all(target[t] == c for t, c in oracle.items())
    tm = TaskMap(r.permutation(64))
    migs = ftt_reallocate(tm, key, power)
    apply_migrations(tm, migs)
    assert all(tm.core_of[t] == c for t, c in oracle.items())
    assert tm.is_bijective()


def test_ftt_determinism_and_cap():
    r = np.random.default_rng(3)
    power, key = r.random(64), r.random(64)
    a = ftt_reallocate(TaskMap.identity(64), key, power, max_migrations=16)
    b = ftt_reallocate(TaskMap.identity(64), key, power, max_migrations=16)
    assert a == b and len(a) == 16
    # highest-power tasks come first
    assert [t for t, _ in a] == list(np.argsort(-power, kind="stable")[:16])


@given(st.permutations(list(range(12))), st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)),
                                                 max_size=20))
def test_taskmap_stays_bijective(perm, moves):
    tm = TaskMap(perm)
    apply_migrations(tm, moves)
    assert tm.is_bijective()
    for t, c in moves[-1:]:
        assert tm.core_of[t] == c


@given(st.permutations(list(range(10))), st.lists(st.floats(0, 5), min_size=10, max_size=10),
       st.lists(st.floats(-5, 5), min_size=10, max_size=10))
def test_reallocation_idempotent(perm, power, key):
    tm = TaskMap(perm)
    migs = ftt_reallocate(tm, np.array(key), np.array(power))
    once = tm.copy()
    apply_migrations(once, migs)
    twice = once.copy()
    apply_migrations(twice, migs)
    assert np.array_equal(once.core_of, twice.core_of)


def test_taskmap_rejects_non_permutation():
    with pytest.raises(ValueError):
        TaskMap([0, 0, 1])


def test_task_power_estimate():
    tm = TaskMap([1, 0])
    assert np.allclose(task_power(tm, np.array([0.5, 1.0]), 1.2), [1.2, 0.6])


# -- sliding window ----------------------------------------------------------------
def fixed(pred_w, pred_2w=None):
    def fn(u, h, t0):
        return pred_2w if (pred_2w is not None and h == 8) else pred_w
    return fn


def base_pred(v=60.0):
    return np.full(240, v)


def test_core_hot_reallocates():
    p = base_pred()
    p[12] = 69.0
    d = sliding_window_decide(fixed(p), np.zeros(240), base_pred(55), DtmConfig(), TOPO,
                              taskmap=TaskMap.identity(64), power=np.linspace(1, 0, 64))
    assert d.kind == DecisionKind.REALLOCATE and d.status_bits is None and d.migrations


def test_link_hot_reroutes():
    p = base_pred()
    p[LN0 + 30] = 70.0
    d = sliding_window_decide(fixed(p, base_pred()), np.zeros(240), base_pred(55), DtmConfig(), TOPO)
    assert d.kind == DecisionKind.REROUTE and d.flagged() == [LN0 + 30] and not d.migrations


def test_switch_hot_but_cores_cross_later_reallocates():
    p = base_pred()
    p[:64] = np.linspace(60, 50, 64)  # so the ranking moves tasks
    p[SW0 + 5] = 70.0
    later = base_pred()
    later[3] = 68.5
    d = sliding_window_decide(fixed(p, later), np.zeros(240), base_pred(55), DtmConfig(), TOPO,
                              taskmap=TaskMap.identity(64), power=np.linspace(1, 0, 64))
    assert d.kind == DecisionKind.REALLOCATE


def test_nothing_hot_none():
    d = sliding_window_decide(fixed(base_pred()), np.zeros(240), base_pred(), DtmConfig(), TOPO)
    assert d.kind == DecisionKind.NONE


def test_variants():
    p = base_pred()
    p[7] = 70.0
    off = sliding_window_decide(fixed(p), np.zeros(240), base_pred(), DtmConfig(variant="off"), TOPO)
    assert off.kind == DecisionKind.NONE
    ro = sliding_window_decide(fixed(p), np.zeros(240), base_pred(), DtmConfig(variant="reroute_only"), TOPO)
    assert ro.kind == DecisionKind.REROUTE and ro.flagged() == [7]


@given(st.sets(st.integers(0, 239), max_size=6), st.sets(st.integers(0, 239), max_size=6),
       st.sampled_from(list(Variant)))
def test_exactly_one_action(hot_w, hot_2w, variant):
    cfg = DtmConfig(variant=variant)
    pw, p2w = np.linspace(60, 50, 240), base_pred()
    pw[list(hot_w)] = 70.0
    p2w[list(hot_2w)] = 70.0
    d = sliding_window_decide(fixed(pw, p2w), np.zeros(240), base_pred(), cfg, TOPO,
                              taskmap=TaskMap.identity(64), power=np.linspace(1, 0, 64))
    assert not (d.migrations and d.status_bits is not None)
    if d.kind == DecisionKind.REROUTE and variant == Variant.COMBINED:
        assert not d.status_bits[CORES].any()


def test_decision_invariant_enforced():
    with pytest.raises(AssertionError):
        DtmDecision(DecisionKind.REALLOCATE, 0, ((0, 1),), status_bits=np.zeros(240, bool))


def test_config_validation():
    for kw in ({"window": 0}, {"window": 30_000}, {"rank_by": "x"}, {"max_migrations": 0}):
        with pytest.raises(ConfigurationError):
            DtmConfig(**kw)
    assert DtmConfig().window_steps == 4


# -- control messages ---------------------------------------------------------------
def test_reroute_message_is_17_flits():
    bits = np.zeros(240, bool)
    bits[[70, 130, 239]] = True
    words = encode_control(DtmDecision(DecisionKind.REROUTE, 123_456, status_bits=bits))
    assert len(words) == 17 and all(0 <= w < 2 ** 32 for w in words)
    assert len(words) * 32 == 544


def test_none_encodes_empty():
    assert encode_control(DtmDecision(DecisionKind.NONE, 5)) == []


def test_realloc_one_flit_per_migration():
    d = DtmDecision(DecisionKind.REALLOCATE, 99, ((3, 7), (7, 3), (63, 0)))
    words = encode_control(d)
    assert len(words) == 4
    assert decode_control(words) == d


@given(st.lists(st.booleans(), min_size=240, max_size=240), st.integers(0, 2 ** 26 - 1))
def test_reroute_roundtrip(bits, cycle):
    d = DtmDecision(DecisionKind.REROUTE, cycle, status_bits=np.array(bits))
    assert decode_control(encode_control(d)) == d


@given(st.lists(st.tuples(st.integers(0, 63), st.integers(0, 63)), min_size=1, max_size=16),
       st.integers(0, 2 ** 26 - 1))
def test_realloc_roundtrip(migs, cycle):
    d = DtmDecision(DecisionKind.REALLOCATE, cycle, tuple(migs))
    assert decode_control(encode_control(d)) == d


def test_timestamp_wraps():
    d = DtmDecision(DecisionKind.REALLOCATE, 2 ** 26 + 5, ((1, 2),))
    assert decode_control(encode_control(d)).cycle == 5


def test_decode_rejects_missing_segment():
    bits = np.zeros(240, bool)
    words = encode_control(DtmDecision(DecisionKind.REROUTE, 1, status_bits=bits))
    with pytest.raises(ValueError):
        decode_control(words[1:])


# -- applying decisions ---------------------------------------------------------------
def test_apply_reallocate_pauses_and_remaps():
    sys_ = ManagedSystem.create(TaskMap.identity(64), init_routes(TOPO), migration_cost=5000)
    apply_decision(sys_, DtmDecision(DecisionKind.REALLOCATE, 100_000, ((0, 5),)))
    assert sys_.taskmap.core_of[0] == 5 and sys_.taskmap.core_of[5] == 0
    assert sys_.paused_until[0] == 105_000 and sys_.paused_until[5] == 105_000
    assert sys_.paused_until[1] == 0


def test_apply_reroute_triggers_dvr():
    sys_ = ManagedSystem.create(TaskMap.identity(64), init_routes(TOPO))
    bits = np.zeros(240, bool)
    bits[LN0 + 3] = True
    apply_decision(sys_, DtmDecision(DecisionKind.REROUTE, 200_000, status_bits=bits))
    assert sys_.routing.switchover_cycle == 200_600


def test_event_log(tmp_path):
    p = tmp_path / "events.csv"
    write_event_log(p, [DtmEvent(100_000, DecisionKind.REROUTE, [130], [], 67.5, 17)])
    lines = p.read_text().splitlines()
    assert lines[0].split(",") == EVENT_COLUMNS
    assert lines[1] == "100000,reroute,130,,67.5000,17"
