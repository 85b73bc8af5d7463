from __future__ import annotations

import random
import statistics

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from augsched.cli import bundled_topologies
from augsched.netmodel import validate_instance, write_instance
from augsched.workload import (
    TopologyError,
    WorkloadConfig,
    build_instance,
    erase_loops,
    generate_pairs,
    ingest_topology,
    is_oversized,
    segment_path,
    uniform_open,
    utilization,
)

BUNDLED = dict(bundled_topologies())


def graphml(edges, nodes=()) -> str:
    g = nx.Graph()
    g.add_nodes_from(nodes)
    g.add_edges_from(edges)
    return "\n".join(nx.generate_graphml(g))


def test_ingest_doubles_links_and_drops_self_loops():
    doc = graphml([("a", "b"), ("b", "c"), ("c", "a"), ("c", "c")])
    net = ingest_topology(doc)
    assert net.nodes == {"a", "b", "c"}
    assert net.m == 6
    assert ("b", "a") in net.capacity and ("c", "c") not in net.capacity


@pytest.mark.parametrize(
    "doc",
    [
        graphml([("a", "b"), ("b", "c")]),
        graphml([("a", "b"), ("b", "c"), ("c", "a"), ("x", "y")]),
        graphml([]),
        "<graphml><broken",
    ],
    ids=["tree", "disconnected", "empty", "malformed"],
)
def test_unusable_topologies(doc):
    with pytest.raises(TopologyError):
        ingest_topology(doc)


def test_bundled_corpus():
    assert len(BUNDLED) == 12
    sizes = {name: ingest_topology(doc).n for name, doc in BUNDLED.items()}
    assert sizes["abilene"] == 11 and sizes["nsfnet"] == 14 and sizes["petersen"] == 10
    assert max(sizes.values()) <= 15
    assert not any(is_oversized(ingest_topology(doc), 15) for doc in BUNDLED.values())
    assert is_oversized(ingest_topology(BUNDLED["nsfnet"]), 10)


@pytest.mark.parametrize(
    "walk, erased",
    [
        ("sabt", "sabt"),
        ("sabcbt", "sabt"),
        ("sabcast", "st"),
        ("sabwbat", "sat"),
    ],
)
def test_erase_loops(walk, erased):
    assert "".join(erase_loops(list(walk))) == erased


def test_segment_path_follows_weights():
    net = ingest_topology(graphml([("s", "a"), ("a", "t"), ("s", "b"), ("b", "t"), ("a", "b")]))
    w = {e: 1.0 for e in net.capacity}
    w[("s", "a")] = 10.0
    assert segment_path(net, w, "s", "t", None) == ["s", "b", "t"]
    assert segment_path(net, w, "s", "t", "a") == ["s", "b", "a", "t"]


def test_uniform_open_stays_inside():
    rng = random.Random(0)
    assert all(1 < uniform_open(rng, 1, 1 + 1e-12) < 1 + 1e-12 for _ in range(100))


def test_config_validation():
    for bad in ({"growth_factor": 1.0}, {"pair_count": 0}, {"weights": "x"}, {"waypoint_mode": "x"},
                {"weight_range": (5, 1)}, {"baseline_count": 0}):
        with pytest.raises(ValueError):
            WorkloadConfig(**bad)


def test_same_waypoint_mode():
    net = ingest_topology(BUNDLED["petersen"])
    pairs = generate_pairs(net, WorkloadConfig(pair_count=20, waypoint_mode="same"), random.Random(1))
    assert all(old[0] == s and old[-1] == t and new[0] == s and new[-1] == t for s, t, old, new in pairs)


def test_abilene_seed_is_reproducible():
    net = ingest_topology(BUNDLED["abilene"])
    cfg = WorkloadConfig(pair_count=10)
    a = write_instance(build_instance(net, cfg, seed=4))
    assert a == write_instance(build_instance(net, cfg, seed=4))
    assert a != write_instance(build_instance(net, cfg, seed=5))


@settings(max_examples=30)
@given(
    st.sampled_from(sorted(BUNDLED)),
    st.integers(0, 10_000),
    st.integers(1, 12),
    st.sampled_from(["shared", "per-pair"]),
    st.sampled_from(["independent", "same"]),
)
def test_generated_instances_are_valid_and_tight(name, seed, k, weights, mode):
    net = ingest_topology(BUNDLED[name])
    cfg = WorkloadConfig(pair_count=k, weights=weights, waypoint_mode=mode)
    inst = build_instance(net, cfg, seed=seed)
    assert validate_instance(inst) == []
    assert inst.k == k
    # every demand is frozen: one more growth step overloads old or new routing
    assert utilization(inst) > 1 / cfg.growth_factor - 1e-9


def test_utilization_of_bundled_corpus_is_high():
    us = [utilization(build_instance(ingest_topology(doc), WorkloadConfig(pair_count=10), seed=s))
          for doc in BUNDLED.values() for s in range(3)]
    assert min(us) > 0.9


def test_mean_utilization_falls_with_growth_factor():
    means = []
    for g in (1.05, 1.1, 1.2, 1.5, 2.0):
        cfg = WorkloadConfig(pair_count=10, growth_factor=g)
        means.append(statistics.mean(
            utilization(build_instance(ingest_topology(doc), cfg, seed=s)) for doc in BUNDLED.values() for s in range(3)
        ))
    assert means == sorted(means, reverse=True)
