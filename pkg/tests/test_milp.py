from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from augsched import milp
from augsched.checker import assess
from augsched.exact import SearchBudget, optimal_rounds
from augsched.greedy import greedy_all
from augsched.netmodel import make_instance
from support import random_instance

SOLVERS = milp.available_solvers()
needs_solver = pytest.mark.skipif(not SOLVERS, reason="no MILP solver installed")


def detour():
    edges = [("s", "a", 1), ("a", "t", 1), ("s", "b", 1), ("b", "t", 1)]
    return make_instance(edges, [("s a t", "s b t", 1)])


def test_plain_inventory_for_one_detour():
    m = milp.encode(detour(), "rounds", horizon=2, options=milp.BASIC_OPTIONS)
    counts = {s: m.symbol_count(s) for s in "x y g f L U o".split()}
    assert counts == {"x": 6, "y": 12, "g": 8, "f": 8, "L": 8, "U": 8, "o": 8}
    assert m.tags() == {
        "UpdateOnce": 3, "OldFlow": 2, "UpdatedFlow": 2, "MaxRoute": 6,
        "old-edge-update": 4, "update-edge-update": 4, "Trans1": 8, "Trans2": 8,
        "level": 8, "notFork": 6, "notJoin": 6, "isFork": 2, "isJoin": 4,
        "ValidFlows": 8, "FlowSource": 2, "FlowTerminal": 2, "flow-all": 4,
        "CapacityCheck": 8,
    }


def test_default_model_swaps_flow_rows_for_reachability():
    m = milp.encode(detour(), "rounds", horizon=2)
    tags = m.tags()
    for tag in ("Reach", "CoReach", "Carried", "TransUpper", "AfterReach"):
        assert tags[tag] == 8
    assert tags["OldOnlyAfter"] == 2 and tags["AfterRoute"] == 2
    assert "flow-all" not in tags and "isFork" not in tags
    assert m.symbol_count("L") == 0


def test_default_horizon_and_objectives(demo):
    assert milp.encode(demo).horizon == 2 * (5 - 1)
    a = milp.encode(demo, "alpha", rounds=3)
    assert a.objective == (("alpha", 1.0),) and a.variables["alpha"].lb == 1.0
    b = milp.encode(demo, "beta", rounds=3, alpha=1.5)
    assert b.objective == (("beta", 1.0),) and b.alpha == 1.5


@pytest.mark.parametrize(
    "kwargs",
    [
        {"mode": "minmax"},
        {"mode": "alpha"},
        {"mode": "alpha", "rounds": 99},
        {"mode": "rounds", "horizon": 0},
        {"mode": "rounds", "alpha": 0.5},
        {"mode": "beta", "rounds": 2, "alpha": 0.9},
    ],
)
def test_encode_rejects_bad_arguments(demo, kwargs):
    with pytest.raises(ValueError):
        milp.encode(demo, **kwargs)


def test_encode_rejects_invalid_instance():
    inst = make_instance([("s", "t", 1)], [("s t", "s t", 5)])
    with pytest.raises(ValueError):
        milp.encode(inst)


@given(
    st.sampled_from(sorted(milp._EDGE_SYMBOLS | milp._NODE_SYMBOLS)),
    st.integers(0, 50),
    st.text(min_size=1, max_size=8),
    st.text(min_size=1, max_size=8),
    st.integers(0, 20),
)
def test_variable_names_round_trip(symbol, r, v, w, i):
    key = (v, w) if symbol in milp._EDGE_SYMBOLS else v
    name = milp.var_name(symbol, r, key, i)
    assert all(ch.isalnum() or ch in "._" for ch in name)
    assert milp.parse_name(name) == (symbol, r, key, i)


def test_export_is_deterministic_lp(demo):
    text = milp.export(milp.encode(demo, "rounds", horizon=3))
    assert text == milp.export(milp.encode(demo, "rounds", horizon=3))
    lines = text.splitlines()
    assert lines[:3] == ["\\ mode rounds horizon 3", "Minimize", " obj: R"]
    assert lines[-1] == "End"
    for section in ("Subject To", "Bounds", "General", "Binary"):
        assert section in lines
    assert " 0 <= R <= 3" in lines


def test_export_of_detour_starts_with_update_rows():
    text = milp.export(milp.encode(detour(), "rounds", horizon=2))
    assert text.splitlines()[4:7] == [
        " UpdateOnce.0: x_1_a_0 + x_2_a_0 = 1",
        " UpdateOnce.1: x_1_b_0 + x_2_b_0 = 1",
        " UpdateOnce.2: x_1_s_0 + x_2_s_0 = 1",
    ]


def _values_for(model, schedule):
    values = {}
    for name in model.variables:
        if name.startswith("x_"):
            _, r, v, i = milp.parse_name(name)
            values[name] = 1.0 if schedule.update_round(i).get(v) == r else 0.0
    return values


@given(st.randoms(use_true_random=False), st.integers(3, 6), st.integers(1, 3))
def test_decode_recovers_update_rounds(rng, n, k):
    inst = random_instance(rng, n=n, k=k)
    sched = greedy_all(inst)
    model = milp.encode(inst, "rounds", horizon=max(1, min(sched.horizon, k * (n - 1))))
    out = milp.decode(model, milp.MilpSolution("optimal", 0.0, _values_for(model, sched)))
    assert out == milp.decode(model, milp.MilpSolution("optimal", 0.0, _values_for(model, out)))
    assert [out.update_round(i) for i in range(k)] == [sched.update_round(i) for i in range(k)]


def test_decode_rejects_fractional_and_unsolved(demo):
    model = milp.encode(demo, "rounds", horizon=2)
    name = next(n for n in model.variables if n.startswith("x_"))
    with pytest.raises(milp.MilpError):
        milp.decode(model, milp.MilpSolution("optimal", 1.0, {name: 0.5}))
    with pytest.raises(milp.MilpError):
        milp.decode(model, milp.MilpSolution("infeasible"))


def test_parse_solution_formats():
    sol = milp.parse_solution("status optimal\nobjective 3\nR 3\nx_1_s_0 1\n")
    assert sol == milp.MilpSolution("optimal", 3.0, {"R": 3.0, "x_1_s_0": 1.0})
    assert milp.parse_solution("status timeout\nobjective none\n").objective is None
    with pytest.raises(milp.MilpError):
        milp.parse_solution("objective 3\n")
    cbc = milp._parse_cbc("Optimal - objective value 3.00000000\n      0 R   3   0\n      1 x_1_s_0   1   0\n")
    assert cbc == milp.MilpSolution("optimal", 3.0, {"R": 3.0, "x_1_s_0": 1.0})
    assert milp._parse_cbc("Infeasible - objective value 0\n").status == "infeasible"
    assert milp._parse_cbc("Stopped on time - objective value 4\n").status == "timeout"


def test_missing_solver_command_is_reported(demo):
    with pytest.raises(milp.SolverMissing):
        milp.solve_external(milp.export(milp.encode(demo, "rounds", horizon=2)), "no-such-solver {model} {solution}")


@needs_solver
@pytest.mark.parametrize("solver", SOLVERS)
def test_demo_objectives_with_solver(demo, solver):
    sol, sched = milp.solve(milp.encode(demo, "rounds"), solver)
    assert (sol.status, sol.objective) == ("optimal", 3.0)
    assert sched.horizon == 3 and assess(demo, sched).is_valid(1.0, 0.0)
    sol, sched = milp.solve(milp.encode(demo, "alpha", rounds=2), solver)
    assert sol.objective == pytest.approx(2.0, abs=1e-6)
    sol, _ = milp.solve(milp.encode(demo, "beta", rounds=2), solver)
    assert sol.objective == pytest.approx(1.0, abs=1e-6)


@needs_solver
def test_plain_model_undercounts_demo(demo):
    sol, sched = milp.solve(milp.encode(demo, "rounds", options=milp.BASIC_OPTIONS), SOLVERS[0])
    assert sol.objective == 2.0
    rep = assess(demo, sched)
    assert not (rep.connected and rep.is_valid(1.0, 0.0))


@needs_solver
@given(st.randoms(use_true_random=False))
def test_solver_agrees_with_exact_on_small_instances(rng):
    inst = random_instance(rng, n=5, k=2, maxlen=3)
    if all(p.trivial for p in inst.pairs):
        return
    ref = optimal_rounds(inst, 1.0, 0.0, SearchBudget(max_nodes_per_pair=12, max_horizon=8))
    sol, sched = milp.solve(milp.encode(inst, "rounds", horizon=8), SOLVERS[0], time_limit=60)
    if not ref.feasible:
        assert sol.status == "infeasible"
        return
    assert sol.objective == ref.value
    rep = assess(inst, sched)
    assert rep.is_valid(1.0, 0.0) and rep.connected
