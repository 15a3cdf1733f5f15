import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import u_gen, u_hi, u_lo
from fairshare.cmdp import (allowed_actions, build_instance, efficient_actions, efficient_case,
                            transition_step)
from fairshare.errors import ActionNotAllowed, BatteryOutOfRange, InstanceTooLarge
from fairshare.netgen import UserModel, build_joint_chain


def test_allowed_examples():
    assert set(allowed_actions((1, -1), 0, 2)) == {(0, 0), (1, 0), (1, -1)}
    for b_max in (0, 1, 5):
        assert allowed_actions((-1, -1), 0, b_max) == [(0, 0)]
    assert allowed_actions((1, 1), 3, 3) == [(0, 0)]


def test_allowed_order_is_lexicographic():
    acts = allowed_actions((1, -1, 1), 1, 2)
    assert acts == sorted(acts)


def test_level_out_of_range():
    with pytest.raises(BatteryOutOfRange):
        allowed_actions((1,), 3, 2)


def test_efficient_examples():
    assert efficient_actions((1, -1), 1, 2) == [(1, -1)]
    assert set(efficient_actions((1, 1), 1, 2)) == {(1, 0), (0, 1)}
    assert set(efficient_actions((-1, -1), 1, 2)) == {(-1, 0), (0, -1)}
    assert efficient_case((1, -1), 1, 2) == "E1"
    assert efficient_case((1, 1), 1, 2) == "E2"
    assert efficient_case((-1, -1), 1, 2) == "E3"


xs = st.lists(st.integers(-2, 2), min_size=1, max_size=3)


@given(xs, st.integers(0, 4), st.integers(0, 4))
def test_efficient_subset_and_successor(x, b, extra):
    b_max = b + extra
    eff = efficient_actions(x, b, b_max)
    assert eff
    assert set(eff) <= set(allowed_actions(x, b, b_max))
    target = min(max(b + sum(x), 0), b_max)
    for a in eff:
        assert b + sum(a) == target
        # demanders are never served less than possible, generators never curtailed needlessly
        for ai, xi in zip(a, x):
            assert (0 <= ai <= xi) if xi >= 0 else (xi <= ai <= 0)


@given(xs, st.integers(0, 4), st.integers(0, 4))
def test_efficient_minimises_stage_cost_then_storage(x, b, extra):
    # among allowed actions, efficient ones minimise lost load and then maximise stored energy
    b_max = b + extra
    allowed = allowed_actions(x, b, b_max)

    def key(a):
        lost = sum(ai - xi for ai, xi in zip(a, x) if xi < 0)
        return (lost, -(b + sum(a)))

    best = min(key(a) for a in allowed)
    assert set(efficient_actions(x, b, b_max)) == {a for a in allowed if key(a) == best}


def test_instance_sizes(gen_chain):
    inst = build_instance(gen_chain, 2, "full")
    assert inst.n_states == 6
    s = inst.state_index(gen_chain.index_of((-1,)), 0)
    assert len(inst.pairs_of(s)) == 1
    two = build_joint_chain([u_hi(), u_lo()])
    eff = build_instance(two, 12, "efficient")
    assert eff.n_states == 52
    s = eff.state_index(two.index_of((1, 1)), 11)
    assert len(eff.pairs_of(s)) == 2


def test_pair_count_equals_action_sets():
    two = build_joint_chain([u_hi(), u_lo()])
    inst = build_instance(two, 4, "full")
    assert inst.n_states == 20
    expected = sum(len(allowed_actions(x, b, 4)) for x in two.states.tolist() for b in range(5))
    assert inst.n_pairs == expected


def test_zero_capacity(gen_chain):
    inst = build_instance(gen_chain, 0, "full")
    assert inst.n_states == 2
    assert all(len(inst.pairs_of(s)) == 1 for s in range(2))
    two = build_instance(build_joint_chain([u_gen(), u_gen()]), 0)
    assert two.n_states == 4


def test_negative_capacity(gen_chain):
    with pytest.raises(BatteryOutOfRange):
        build_instance(gen_chain, -1)


def test_size_cap():
    ch = build_joint_chain([u_gen()] * 3)
    with pytest.raises(InstanceTooLarge):
        build_instance(ch, 50, size_cap=100)


def test_costs():
    two = build_joint_chain([u_hi(), u_lo()])
    inst = build_instance(two, 2)
    s = inst.state_index(two.index_of((-1, -1)), 1)
    assert inst.cost_of(s, (-1, 0)) == 1.0
    assert inst.cost_of(s, (0, 0)) == 2.0
    for p in range(inst.n_pairs):
        x, _ = inst.state(inst.pair_state[p])
        a = inst.pair_action[p]
        assert inst.cost[p] == sum(ai - xi for ai, xi in zip(a, x) if xi < 0)


def test_transition_step(gen_chain):
    inst = build_instance(gen_chain, 2)
    s = inst.state_index(gen_chain.index_of((1,)), 0)
    out = transition_step(inst, s, (1,))
    assert out[inst.state_index(0, 1)] == pytest.approx(0.6)
    assert out[inst.state_index(1, 1)] == pytest.approx(0.4)
    assert out.sum() == pytest.approx(1.0)
    stay = transition_step(inst, s, (0,))
    assert stay[inst.state_index(0, 0)] + stay[inst.state_index(1, 0)] == pytest.approx(1.0)
    with pytest.raises(ActionNotAllowed):
        transition_step(inst, s, (-1,))


def test_state_roundtrip(hi_lo):
    inst = build_instance(hi_lo, 3)
    for s in range(inst.n_states):
        x, b = inst.state(s)
        assert inst.state_index(hi_lo.index_of(x), b) == s


def test_action_sets_match_enumeration():
    users = [UserModel((2, -1), np.array([[0.5, 0.5], [0.3, 0.7]])), u_gen()]
    ch = build_joint_chain(users)
    inst = build_instance(ch, 3, "full")
    for s in range(inst.n_states):
        x, b = inst.state(s)
        got = [tuple(a) for a in inst.pair_action[inst.pairs_of(s)].tolist()]
        want = [a for a in itertools.product(*[range(min(0, v), max(0, v) + 1) for v in x])
                if 0 <= b + sum(a) <= 3]
        assert got == sorted(want)
