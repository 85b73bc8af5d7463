from __future__ import annotations

import itertools

import pytest
from hypothesis import assume, given, settings, strategies as st

from augsched.checker import assess
from augsched.exact import SearchBudget, optimal_rounds
from augsched.hardness import (
    Cnf3,
    GadgetParams,
    assignment_from_schedule,
    build_additive,
    build_multiplicative,
    read_dimacs,
    schedule_from_assignment,
    write_dimacs,
    write_roles,
)
from augsched.netmodel import read_instance, validate_instance, write_instance
from support import random_cnf

TWO_CLAUSES = Cnf3.build(2, [(1, 2, 2), (-1, -1, 2)])


def satisfying(cnf):
    for bits in itertools.product((False, True), repeat=cnf.num_vars):
        asg = dict(enumerate(bits, start=1))
        if cnf.satisfied_by(asg) is None:
            return asg
    return None


@pytest.mark.parametrize("eps, root", [(0.25, 3), (0.2, 3), (0.1, 6), (0.3, 2)])
def test_gadget_scale(eps, root):
    p = GadgetParams(eps)
    assert (p.sqrt_a, p.a, p.unit) == (root, root * root, float(root * root))


def test_param_validation():
    with pytest.raises(ValueError):
        GadgetParams(0.4)
    with pytest.raises(ValueError):
        GadgetParams(0.25, "max")
    assert GadgetParams(0.5, "add").augmentation(3.0) == (1.0, 0.5)


def test_cnf_build_and_dimacs():
    cnf = Cnf3.build(3, [(1, -1, 2), (1, 2, -3)])
    assert cnf.clauses == ((1, 2, -3),) and cnf.dropped == 1
    assert cnf.used_vars() == [1, 2, 3]
    assert cnf.satisfied_by({1: False, 2: False, 3: True}) == 0
    text = "c tiny\np cnf 2 2\n1 2 2 0\n-1 -1\n2 0\n"
    assert read_dimacs(text) == TWO_CLAUSES
    assert write_dimacs(TWO_CLAUSES) == "p cnf 2 2\n1 2 2 0\n-1 -1 2 0\n"
    for bad in ("1 2 3 0\n", "p cnf 2 1\n1 2 0\n", "p cnf 2 1\n1 2 2\n", "p dnf 2 1\n"):
        with pytest.raises(ValueError):
            read_dimacs(bad)


def test_multiplicative_gadget_shape():
    g = build_multiplicative(TWO_CLAUSES, 0.25)
    net = g.instance.network
    assert (net.n, net.m, g.instance.k, net.cmax) == (32, 57, 9, 108.0)
    assert g.augmentation == (1.75, 0.0)
    assert validate_instance(g.instance) == []
    assert read_instance(write_instance(g.instance)) == g.instance
    # the last ladder flow is the blocking one
    assert g.flow_roles == {
        0: ("true",), 1: ("false",),
        2: ("ladder", 0), 3: ("ladder", 1), 4: ("ladder", 2), 5: ("ladder", 3),
        6: ("clause", 1), 7: ("clause", 2), 8: ("clause", 3),
    }
    assert g.flow("ladder", 3) == 5


def test_additive_gadget_shape():
    g = build_additive(TWO_CLAUSES, 0.25)
    net = g.instance.network
    assert (net.n, net.m, g.instance.k, net.cmax) == (26, 45, 6, 3.0)
    assert g.augmentation == (1.0, 0.75)
    assert write_roles(g).startswith("# variant add epsilon 0.25\n[nodes]\nbin blocking-in\n")


@pytest.mark.parametrize("build, horizon", [(build_multiplicative, 8), (build_additive, 5)])
def test_forward_schedule_round_trips(build, horizon):
    g = build(TWO_CLAUSES, 0.25)
    sched = schedule_from_assignment(g, {1: True, 2: True})
    assert sched.horizon == horizon
    rep = assess(g.instance, sched)
    assert rep.is_valid(*g.augmentation) and rep.connected
    back = assignment_from_schedule(g, sched)
    assert TWO_CLAUSES.satisfied_by(back) is None


def test_falsifying_assignment_is_rejected():
    g = build_multiplicative(TWO_CLAUSES, 0.25)
    with pytest.raises(ValueError, match="clause"):
        schedule_from_assignment(g, {1: True, 2: False})


def test_sequence_assignment_is_accepted():
    g = build_additive(TWO_CLAUSES, 0.25)
    assert schedule_from_assignment(g, [True, True]) == schedule_from_assignment(g, {1: True, 2: True})


def test_contradiction_has_no_schedule():
    cnf = Cnf3.build(1, [(1, 1, 1), (-1, -1, -1)])
    g = build_multiplicative(cnf, 0.25)
    budget = SearchBudget(max_nodes_per_pair=40, max_pairs=20, max_horizon=8, timeout=120)
    assert optimal_rounds(g.instance, *g.augmentation, budget).status == "infeasible"


@settings(max_examples=25)
@given(st.randoms(use_true_random=False), st.sampled_from(["mult", "add"]))
def test_any_satisfying_assignment_round_trips(rng, variant):
    cnf = random_cnf(rng)
    assume(cnf.clauses)
    asg = satisfying(cnf)
    assume(asg is not None)
    g = (build_multiplicative if variant == "mult" else build_additive)(cnf, 0.25)
    sched = schedule_from_assignment(g, asg)
    rep = assess(g.instance, sched)
    assert rep.is_valid(*g.augmentation) and rep.connected
    back = assignment_from_schedule(g, sched)
    assert cnf.satisfied_by(back) is None
    assert schedule_from_assignment(g, back) == schedule_from_assignment(g, back)
