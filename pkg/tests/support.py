"""Shared instance builders for the test suite."""

from __future__ import annotations

import random
from collections import defaultdict

from augsched.checker import check_connectivity, check_loop_freedom
from augsched.greedy import greedy_pair
from augsched.netmodel import Instance, UpdateSchedule, make_instance

DEMO_EDGES = [("s", "a", 1), ("a", "t", 1), ("s", "b", 1), ("b", "t", 1), ("s", "c", 1), ("c", "t", 1)]
DEMO_PAIRS = [("s a t", "s b t", 1), ("s c t", "s a t", 1)]


def demo_instance() -> Instance:
    """Two unit flows: one leaves a for b while the other moves from c onto a."""
    return make_instance(DEMO_EDGES, DEMO_PAIRS)


def random_instance(
    rng: random.Random, n: int = 6, k: int = 2, maxlen: int = 4, dmax: int = 3
) -> Instance:
    """Random simple old/new paths on n nodes, capacities tight for both routings."""
    nodes = [f"v{i}" for i in range(n)]
    pairs = []
    for _ in range(k):
        s, t = rng.sample(nodes, 2)
        rest = [v for v in nodes if v not in (s, t)]

        def path():
            return [s] + rng.sample(rest, rng.randint(0, min(maxlen, len(rest)))) + [t]

        pairs.append((path(), path(), rng.randint(1, dmax)))
    old: dict = defaultdict(float)
    new: dict = defaultdict(float)
    for o, nw, d in pairs:
        for e in zip(o, o[1:]):
            old[e] += d
        for e in zip(nw, nw[1:]):
            new[e] += d
    edges = [(v, w, max(old[(v, w)], new[(v, w)])) for (v, w) in sorted(set(old) | set(new))]
    return make_instance(edges, pairs, nodes)


def random_pair_rounds(rng: random.Random, instance: Instance, pos: int, tries: int = 20):
    """Random loop-free, connected rounds for one pair; falls back to greedy."""
    p = instance.pairs[pos]
    movable = sorted(p.changing_nodes - p.old_only)
    if not movable:
        return ()
    single = Instance(instance.network, (p,))
    for _ in range(tries):
        m = rng.randint(1, len(movable))
        rounds = [set() for _ in range(m + 1)]
        for v in movable:
            rounds[rng.randrange(m)].add(v)
        when = {v: r for r, u in enumerate(rounds) for v in u}
        for v, anchor in p.anchor.items():
            rounds[when[anchor] + 1].add(v)
        while rounds and not rounds[-1]:
            rounds.pop()
        cand = tuple(frozenset(u) for u in rounds)
        sched = UpdateSchedule((cand,))
        if check_loop_freedom(single, sched) and check_connectivity(single, sched):
            return cand
    return tuple(greedy_pair(p))


def random_schedule(rng: random.Random, instance: Instance, max_offset: int = 2) -> UpdateSchedule:
    """Loop-free schedule with random per-pair rounds and start offsets."""
    rounds = tuple(random_pair_rounds(rng, instance, pos) for pos in range(instance.k))
    offsets = tuple(rng.randint(0, max_offset) for _ in rounds)
    return UpdateSchedule(rounds, offsets)


def random_cnf(rng: random.Random, max_vars: int = 4, max_clauses: int = 5):
    """Random 3-CNF with literals drawn over at most ``max_vars`` variables."""
    from augsched.hardness import Cnf3

    n = rng.randint(1, max_vars)
    clauses = []
    for _ in range(rng.randint(1, max_clauses)):
        clauses.append(tuple(rng.choice((1, -1)) * rng.randint(1, n) for _ in range(3)))
    return Cnf3.build(n, clauses)


ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, verdict: str, detail: str) -> None:
    """Remember one acceptance verdict for the end-of-run summary."""
    ACCEPTANCE[criterion] = f"criterion {criterion}: {verdict}  {detail}"
