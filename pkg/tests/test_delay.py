from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from augsched.checker import assess, check_connectivity, check_loop_freedom
from augsched.delay import DelayConfig, apply_offsets, delay_optimize
from augsched.greedy import greedy_all
from augsched.netmodel import TOL
from support import random_instance, random_schedule


def test_demo_one_round_delay_removes_congestion(demo):
    out = delay_optimize(demo, greedy_all(demo), DelayConfig(threshold=1))
    assert out.offsets == (0, 1)
    assert assess(demo, out).summary == (1.0, 0.0, 3, True)


def test_additive_objective_makes_the_same_move(demo):
    out = delay_optimize(demo, greedy_all(demo), DelayConfig(1, "add"))
    assert out.offsets == (0, 1)


def test_zero_threshold_is_identity(demo):
    sched = greedy_all(demo)
    assert delay_optimize(demo, sched, DelayConfig(threshold=0)) == sched


def test_optimal_schedule_is_left_alone(demo):
    sched = greedy_all(demo).with_offsets((0, 1))
    assert delay_optimize(demo, sched, DelayConfig(threshold=3)) == sched


def test_apply_offsets():
    sched = greedy_all(random_instance(random.Random(3), n=5, k=3))
    assert apply_offsets(sched, {}) == sched
    moved = apply_offsets(sched, {1: 2})
    assert moved.offsets[1] == 2 and moved.rounds == sched.rounds
    with pytest.raises(ValueError):
        apply_offsets(sched, {0: -1})


@pytest.mark.parametrize("kwargs", [{"threshold": -1}, {"objective": "max"}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        DelayConfig(**kwargs)


@given(st.randoms(use_true_random=False), st.integers(3, 7), st.integers(1, 4), st.integers(0, 3))
def test_delay_never_hurts(rng, n, k, threshold):
    inst = random_instance(rng, n=n, k=k)
    before = random_schedule(rng, inst)
    after = delay_optimize(inst, before, DelayConfig(threshold))
    assert after.rounds == before.rounds
    assert all(0 <= a - b <= threshold for a, b in zip(after.offsets, before.offsets))
    assert after.horizon <= before.horizon + threshold
    assert assess(inst, after).alpha_min <= assess(inst, before).alpha_min + TOL
    assert check_loop_freedom(inst, after) and check_connectivity(inst, after)


@given(st.randoms(use_true_random=False), st.integers(0, 3))
def test_shifts_preserve_loop_freedom(rng, shift):
    inst = random_instance(rng, n=6, k=3)
    sched = random_schedule(rng, inst)
    moved = apply_offsets(sched, {0: sched.offsets[0] + shift})
    assert bool(check_loop_freedom(inst, moved)) == bool(check_loop_freedom(inst, sched))
