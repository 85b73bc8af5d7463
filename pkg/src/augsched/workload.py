"""Synthetic workloads on real topologies.

Pipeline: read a GraphML topology, route flow pairs along waypoint segment
paths, size link capacities from a separate set of baseline flows, then grow
the experimental demands multiplicatively in round-robin order until every
pair is blocked by either its old or its updated path.

All randomness comes from one ``random.Random`` seeded by the caller, so a
fixed seed reproduces an instance bit for bit.
"""

from __future__ import annotations

import math
import random
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass

import networkx as nx

from .netmodel import TOL, Edge, FlowPair, Instance, Network, validate_instance


class TopologyError(ValueError):
    """The topology document cannot be used for experiments."""


@dataclass(frozen=True)
class WorkloadConfig:
    pair_count: int = 250
    weight_range: tuple[float, float] = (1.0, 100.0)
    baseline_demand_range: tuple[float, float] = (10.0, 20.0)
    growth_factor: float = 1.1
    rng_seed: int = 0
    weights: str = "shared"  # or "per-pair"
    waypoint_mode: str = "independent"  # or "same"
    baseline_count: int | None = None

    def __post_init__(self) -> None:
        if self.growth_factor <= 1:
            raise ValueError("growth factor must exceed 1")
        if self.pair_count < 1:
            raise ValueError("need at least one pair")
        for lo, hi in (self.weight_range, self.baseline_demand_range):
            if not 0 < lo < hi:
                raise ValueError("ranges must be positive and nonempty")
        if self.weights not in ("shared", "per-pair"):
            raise ValueError(f"unknown weight mode {self.weights!r}")
        if self.waypoint_mode not in ("independent", "same"):
            raise ValueError(f"unknown waypoint mode {self.waypoint_mode!r}")
        if self.baseline_count is not None and self.baseline_count < 1:
            raise ValueError("baseline count must be positive")


def uniform_open(rng: random.Random, lo: float, hi: float) -> float:
    """Uniform draw from the open interval (lo, hi)."""
    while True:
        x = rng.uniform(lo, hi)
        if lo < x < hi:
            return x


def ingest_topology(document: str) -> Network:
    """Directed network from a GraphML document; capacities are left as NaN.

    Every undirected link becomes two directed edges. Self-loops, parallel
    links and isolated nodes are dropped.
    """
    try:
        g = nx.parse_graphml(document)
    except Exception as exc:  # the parser raises a variety of XML errors
        raise TopologyError(f"cannot parse topology: {exc}") from exc
    und = nx.Graph()
    for v, w in g.edges():
        if v != w:
            und.add_edge(str(v), str(w))
    if und.number_of_nodes() == 0:
        raise TopologyError("topology has no links")
    if not nx.is_connected(und):
        raise TopologyError("topology is disconnected")
    if nx.is_tree(und):
        raise TopologyError("topology is a tree")
    cap = {}
    for v, w in sorted(und.edges()):
        cap[(v, w)] = math.nan
        cap[(w, v)] = math.nan
    return Network(frozenset(und.nodes()), cap)


def is_oversized(network: Network, max_nodes: int = 100) -> bool:
    return network.n > max_nodes


def _digraph(network: Network, weights: dict[Edge, float]) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(sorted(network.nodes))
    for e in sorted(network.capacity):
        g.add_edge(*e, weight=weights[e])
    return g


def draw_weights(network: Network, config: WorkloadConfig, rng: random.Random) -> dict[Edge, float]:
    lo, hi = config.weight_range
    return {e: uniform_open(rng, lo, hi) for e in sorted(network.capacity)}


def erase_loops(nodes: Sequence[str]) -> list[str]:
    """Chronological loop erasure: cut back to the first visit of a node."""
    out: list[str] = []
    where: dict[str, int] = {}
    for v in nodes:
        if v in where:
            cut = where[v]
            for u in out[cut + 1:]:
                del where[u]
            del out[cut + 1:]
        else:
            where[v] = len(out)
            out.append(v)
    return out


def segment_path(
    network: Network,
    weights: dict[Edge, float],
    s: str,
    t: str,
    waypoint: str | None,
    graph: nx.DiGraph | None = None,
) -> list[str]:
    """Shortest s-waypoint path followed by the shortest waypoint-t path."""
    g = graph if graph is not None else _digraph(network, weights)
    try:
        if waypoint is None:
            return nx.dijkstra_path(g, s, t)
        first = nx.dijkstra_path(g, s, waypoint)
        second = nx.dijkstra_path(g, waypoint, t)
    except nx.NetworkXNoPath as exc:
        raise TopologyError(f"no path from {s} to {t} via {waypoint}") from exc
    return erase_loops(first + second[1:])


def generate_pairs(
    network: Network, config: WorkloadConfig, rng: random.Random, count: int | None = None
) -> list[tuple[str, str, list[str], list[str]]]:
    """``count`` (default ``config.pair_count``) random (s, t, old, new) pairs."""
    nodes = sorted(network.nodes)
    count = config.pair_count if count is None else count
    shared = None
    if config.weights == "shared":
        shared = _digraph(network, draw_weights(network, config, rng))
    out = []
    for _ in range(count):
        g = shared if shared is not None else _digraph(network, draw_weights(network, config, rng))
        s, t = rng.sample(nodes, 2)
        others = [v for v in nodes if v not in (s, t)]
        if others:
            w_old = rng.choice(others)
            w_new = w_old if config.waypoint_mode == "same" else rng.choice(others)
        else:
            w_old = w_new = None
        old = segment_path(network, {}, s, t, w_old, g)
        new = segment_path(network, {}, s, t, w_new, g)
        out.append((s, t, old, new))
    return out


def set_capacities(
    network: Network,
    baseline_pairs: Sequence[tuple[str, str, list[str], list[str]]],
    config: WorkloadConfig,
    rng: random.Random,
) -> Network:
    """Capacity of an edge = total baseline demand routed over it.

    Old and updated baseline routes count separately. Edges no baseline
    route uses get the smallest baseline demand.
    """
    lo, hi = config.baseline_demand_range
    load: dict[Edge, float] = defaultdict(float)
    demands = []
    for _, _, old, new in baseline_pairs:
        d = uniform_open(rng, lo, hi)
        demands.append(d)
        for path in (old, new):
            for e in zip(path, path[1:]):
                load[e] += d
    floor = min(demands) if demands else lo
    cap = {e: (load[e] if load[e] > 0 else floor) for e in sorted(network.capacity)}
    return network.with_capacities(cap)


def _path_loads(pairs: Sequence[FlowPair], demand: Sequence[float], which: str) -> dict[Edge, float]:
    load: dict[Edge, float] = defaultdict(float)
    for p, d in zip(pairs, demand):
        for e in p.old_path if which == "old" else p.new_path:
            load[e] += d
    return load


def grow_demands(instance: Instance, config: WorkloadConfig) -> Instance:
    """Slow-start demand growth.

    Every demand starts at 1; if even that overloads a link, all demands
    start at the largest common value that fits. Pairs are then visited
    round-robin and multiplied by the growth factor until the multiplication
    would overload either the all-old or the all-new routing, at which point
    the pair is frozen.
    """
    pairs = instance.pairs
    cap = instance.network.capacity
    g = config.growth_factor
    start = 1.0
    for which in ("old", "new"):
        for e, x in _path_loads(pairs, [1.0] * len(pairs), which).items():
            start = min(start, cap[e] / x)
    demand = [start] * len(pairs)
    loads = {w: _path_loads(pairs, demand, w) for w in ("old", "new")}
    frozen = [False] * len(pairs)
    while not all(frozen):
        for i, p in enumerate(pairs):
            if frozen[i]:
                continue
            extra = demand[i] * (g - 1)
            fits = all(
                loads[w][e] + extra <= cap[e] + TOL
                for w, path in (("old", p.old_path), ("new", p.new_path))
                for e in path
            )
            if not fits:
                frozen[i] = True
                continue
            demand[i] *= g
            for w, path in (("old", p.old_path), ("new", p.new_path)):
                for e in path:
                    loads[w][e] += extra
    return Instance(instance.network, tuple(p.with_demand(d) for p, d in zip(pairs, demand)))


def utilization(instance: Instance) -> float:
    """Mean over pairs of the busiest link on its old or updated route.

    Each entry is that link's load divided by its capacity, under the all-old
    or all-new routing respectively.
    """
    if not instance.pairs:
        return 0.0
    cap = instance.network.capacity
    loads = {w: _path_loads(instance.pairs, [p.demand for p in instance.pairs], w) for w in ("old", "new")}
    per_pair = []
    for p in instance.pairs:
        per_pair.append(
            max(
                max(loads["old"][e] / cap[e] for e in p.old_path),
                max(loads["new"][e] / cap[e] for e in p.new_path),
            )
        )
    return sum(per_pair) / len(per_pair)


def build_instance(network: Network, config: WorkloadConfig, seed: int | None = None) -> Instance:
    """Full pipeline for one topology and one seed."""
    rng = random.Random(config.rng_seed if seed is None else seed)
    pairs = generate_pairs(network, config, rng)
    baseline = generate_pairs(network, config, rng, config.baseline_count or config.pair_count)
    net = set_capacities(network, baseline, config, rng)
    flows = tuple(FlowPair.from_nodes(i, old, new, 1.0) for i, (_, _, old, new) in enumerate(pairs))
    inst = grow_demands(Instance(net, flows), config)
    problems = validate_instance(inst)
    if problems:
        raise AssertionError("generated instance is invalid: " + problems[0])
    return inst
