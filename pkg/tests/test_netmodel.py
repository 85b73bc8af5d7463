from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from augsched.netmodel import (
    FlowPair,
    Instance,
    InstanceFormatError,
    InstanceSemanticError,
    Network,
    UpdateSchedule,
    format_number,
    make_instance,
    read_instance,
    read_schedule,
    validate_instance,
    validate_schedule,
    write_instance,
    write_schedule,
)
from support import random_instance, random_schedule

DEMO_DOC = """\
[nodes]
a
b
c
s
t
[edges]
a t 1
b t 1
c t 1
s a 1
s b 1
s c 1
[pairs]
0 s t 1 | s a t | s b t
1 s t 1 | s c t | s a t
"""


def detour_pair() -> FlowPair:
    return FlowPair.from_nodes(0, ["s", "a", "b", "t"], ["s", "b", "c", "t"], 1)


def test_derived_node_sets():
    p = detour_pair()
    assert p.old_only == {"a"}
    assert p.new_only == {"c"}
    assert p.changing_nodes == {"s", "b", "c", "a"}
    assert p.anchor == {"a": "s"}
    assert p.branching == {"s", "b"}
    assert p.merging == {"b", "t"}
    assert not p.trivial


def test_identical_paths_are_trivial():
    p = FlowPair.from_nodes(0, ["s", "a", "t"], ["s", "a", "t"], 2)
    assert p.trivial
    assert p.changing_nodes == frozenset()


def test_demo_document_is_frozen(demo):
    assert write_instance(demo) == DEMO_DOC
    assert read_instance(DEMO_DOC) == demo


def test_network_cmax():
    net = Network(frozenset("abc"), {("a", "b"): 2.0, ("b", "c"): 7.5})
    assert net.cmax == 7.5
    assert (net.n, net.m) == (3, 2)


def test_validate_reports_capacity_overflow():
    inst = make_instance([("s", "t", 1)], [("s t", "s t", 1), ("s t", "s t", 1)])
    assert any("exceed capacity" in v for v in validate_instance(inst))


def test_validate_rejects_non_simple_and_missing_edges():
    inst = make_instance([("s", "a", 1), ("a", "t", 1)], [(["s", "a", "s", "t"], ["s", "a", "t"], 1)])
    problems = validate_instance(inst)
    assert any("not simple" in v for v in problems)
    assert any("not in network" in v for v in problems)


def test_bad_capacity_is_reported():
    inst = make_instance([("s", "t", math.nan)], [("s t", "s t", 1)])
    assert any("capacity must be positive" in v for v in validate_instance(inst))


@pytest.mark.parametrize(
    "doc, error",
    [
        ("a\n[nodes]\n", InstanceFormatError),
        ("[bogus]\n", InstanceFormatError),
        ("[nodes]\ns\nt\n[edges]\ns t\n", InstanceSemanticError),
        ("[nodes]\ns\nt\n[edges]\ns t x\n", InstanceFormatError),
        ("[nodes]\ns\nt\n[edges]\ns t 1\n[pairs]\n0 s t 1 | s t\n", InstanceFormatError),
        ("[nodes]\ns\nt\n[edges]\ns t 1\n[pairs]\n0 s t 2 | s t | s t\n", InstanceSemanticError),
        ("[nodes]\ns\ns\n", InstanceSemanticError),
    ],
)
def test_malformed_documents(doc, error):
    with pytest.raises(error):
        read_instance(doc)


def test_format_error_carries_line_number():
    with pytest.raises(InstanceFormatError) as info:
        read_instance("[nodes]\ns\n[edges]\ns t x\n")
    assert info.value.line == 4


def test_schedule_document_round_trip(demo):
    sched = UpdateSchedule(((frozenset({"b", "s"}), frozenset({"a"})), (frozenset({"a", "s"}), frozenset({"c"}))), (0, 1))
    doc = write_schedule(sched, demo)
    assert doc == "# horizon 3\n[schedule]\n0 0 | b s | a\n1 1 | a s | c\n"
    assert read_schedule(doc, demo) == sched
    assert validate_schedule(demo, sched) == []


def test_schedule_validation_catches_missing_and_duplicate(demo):
    sched = UpdateSchedule(((frozenset({"s"}), frozenset({"s"})), ()))
    problems = validate_schedule(demo, sched)
    assert any("updated twice" in v for v in problems)
    assert any("never updated" in v for v in problems)


def test_from_global_extracts_offsets():
    sched = UpdateSchedule.from_global([[set(), {"s"}, set(), {"a"}, set()], [], [{"x"}]])
    assert sched.offsets == (1, 0, 0)
    assert sched.rounds[0] == (frozenset({"s"}), frozenset(), frozenset({"a"}))
    assert sched.horizon == 4
    assert sched.update_round(0) == {"s": 2, "a": 4}
    assert sched.updated_by(0, 3) == {"s"}


def test_negative_offset_rejected():
    with pytest.raises(ValueError):
        UpdateSchedule(((),), (-1,))


@pytest.mark.parametrize("x, text", [(1.0, "1"), (2.5, "2.5"), (1 / 3, "0.3333333333333333"), (-4.0, "-4")])
def test_format_number(x, text):
    assert format_number(x) == text
    assert float(text) == x


@given(st.randoms(use_true_random=False), st.integers(2, 7), st.integers(1, 3))
def test_documents_round_trip(rng, n, k):
    inst = random_instance(rng, n=n, k=k)
    assert validate_instance(inst) == []
    again = read_instance(write_instance(inst))
    assert write_instance(again) == write_instance(inst)
    assert isinstance(again, Instance)
    sched = random_schedule(rng, inst)
    assert validate_schedule(inst, sched) == []
    assert read_schedule(write_schedule(sched, inst), inst) == sched
