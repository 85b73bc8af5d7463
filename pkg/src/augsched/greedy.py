"""Congestion-oblivious greedy loop-free scheduling, one pair at a time."""

from __future__ import annotations

from collections import defaultdict

from .netmodel import Edge, FlowPair, Instance, UpdateSchedule


def _reaches(adj: dict[str, set[str]], start: str, goal: str) -> bool:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        if v == goal:
            return True
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return False


def greedy_pair(pair: FlowPair) -> list[frozenset[str]]:
    """Rounds of node updates for a single pair.

    Each round scans the not-yet-active updated edges nearest-terminal first
    and accepts an edge when its head does not already reach its tail in the
    active set. Old edges whose tail switched are retired at the end of the
    round. Old-only nodes drop their rule one round after their anchor.
    """
    if pair.trivial:
        return []
    hops = {e: len(pair.new_path) - 1 - k for k, e in enumerate(pair.new_path)}
    pending: list[Edge] = sorted(pair.new_edges - pair.old_edges, key=hops.__getitem__)
    adj: dict[str, set[str]] = defaultdict(set)
    for v, w in pair.old_path:
        adj[v].add(w)
    rounds: list[set[str]] = []
    while pending:
        accepted: set[str] = set()
        rest = []
        for v, w in pending:
            if _reaches(adj, w, v):
                rest.append((v, w))
                continue
            adj[v].add(w)
            accepted.add(v)
        if not accepted:
            raise RuntimeError(f"greedy stalled on pair {pair.index}")
        for v in accepted:
            old = pair.old_next.get(v)
            if old is not None and (v, old) not in pair.new_edges:
                adj[v].discard(old)
        rounds.append(accepted)
        pending = rest
    when = {v: r for r, nodes in enumerate(rounds) for v in nodes}
    for v, anchor in pair.anchor.items():
        r = when[anchor] + 1
        while len(rounds) <= r:
            rounds.append(set())
        rounds[r].add(v)
    return [frozenset(u) for u in rounds]


def greedy_all(instance: Instance) -> UpdateSchedule:
    return UpdateSchedule(tuple(tuple(greedy_pair(p)) for p in instance.pairs))
