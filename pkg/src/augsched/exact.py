"""Exhaustive optimal scheduling for desk-scale instances.

The search works per pair on *core* nodes, the changing nodes that switch to
a new outgoing edge. Old-only nodes carry no traffic once their anchor has
switched, so their removal is placed in the round right after the anchor;
this only matters for the round count, where an anchor updating in the last
round forces one extra round.

A per-pair schedule over a horizon R is summarised by its *footprint*: for
every round the set of congestion-relevant edges it loads. Pairs are then
combined by depth-first search over footprints with vectorised capacity
checks, forward checking and memoised dead ends.
"""

from __future__ import annotations

import itertools
import time
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .checker import active_edges, carried_edges, find_cycle
from .netmodel import TOL, Edge, FlowPair, Instance, UpdateSchedule


class BudgetExceeded(RuntimeError):
    """The instance or the search is larger than the configured budget."""


@dataclass(frozen=True)
class SearchBudget:
    max_nodes_per_pair: int = 10
    max_pairs: int = 3
    max_horizon: int = 8
    timeout: float | None = None

    def __post_init__(self) -> None:
        if min(self.max_nodes_per_pair, self.max_pairs, self.max_horizon) <= 0:
            raise ValueError("budget limits must be positive")
        if self.timeout is not None and self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class ExactResult:
    status: str  # "optimal" or "infeasible"
    value: float | None = None
    schedule: UpdateSchedule | None = None

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


class _Clock:
    def __init__(self, timeout: float | None):
        self.deadline = None if timeout is None else time.monotonic() + timeout
        self.ticks = 0

    def check(self) -> None:
        self.ticks += 1
        if self.deadline is not None and self.ticks % 64 == 0:
            if time.monotonic() > self.deadline:
                raise BudgetExceeded("search timed out")


class PairSpace:
    """Valid per-round transitions of one pair between sets of updated core nodes."""

    def __init__(self, pair: FlowPair, relevant: frozenset[Edge]):
        self.pair = pair
        self.core = frozenset(pair.changing_nodes - pair.old_only)
        self.anchors = frozenset(pair.anchor.values())
        # nodes whose new next hop must already hold a rule when they switch
        self.feeds = {
            u: pair.new_next[u] for u in self.core if pair.new_next[u] in pair.new_only
        }
        self.relevant = relevant
        self._trans: dict[frozenset, list[tuple[frozenset, frozenset]]] = {}
        self._seqs: dict[tuple[frozenset, int], dict[tuple, tuple]] = {}

    def transitions(self, before: frozenset) -> list[tuple[frozenset, frozenset]]:
        """(after, loaded relevant edges) for every valid round starting at ``before``."""
        if before in self._trans:
            return self._trans[before]
        p = self.pair
        rest = sorted(self.core - before)
        e_before = active_edges(p, before)
        out = []
        for size in range(len(rest) + 1):
            for add in itertools.combinations(rest, size):
                after = before | frozenset(add)
                if any(u in after and w not in after for u, w in self.feeds.items()):
                    continue
                e_after = active_edges(p, after)
                if not _routes(p, e_after):
                    continue
                during = e_before | e_after
                if add and find_cycle(during) is not None:
                    continue
                out.append((after, carried_edges(p, during) & self.relevant))
        self._trans[before] = out
        return out

    def sequences(self, state: frozenset, k: int) -> dict[tuple, tuple]:
        """Footprint sequence -> witness state sequence over exactly k rounds."""
        key = (state, k)
        if key in self._seqs:
            return self._seqs[key]
        if k == 0:
            res = {(): ()} if state == self.core else {}
        else:
            res = {}
            for after, fp in self.transitions(state):
                if k == 1 and (after - state) & self.anchors:
                    continue
                for suf, wit in self.sequences(after, k - 1).items():
                    res.setdefault((fp,) + suf, (after,) + wit)
        self._seqs[key] = res
        return res

    def min_rounds(self, limit: int) -> int | None:
        for k in range(0, limit + 1):
            if self.sequences(frozenset(), k):
                return k
        return None

    def to_rounds(self, witness: tuple) -> list[set[str]]:
        """Per-global-round update sets for a witness state sequence."""
        rounds = []
        prev: frozenset = frozenset()
        for st in witness:
            rounds.append(set(st - prev))
            prev = st
        when = {v: r for r, nodes in enumerate(rounds) for v in nodes}
        for v, a in self.pair.anchor.items():
            rounds[when[a] + 1].add(v)
        return rounds


def _routes(pair: FlowPair, edges: frozenset[Edge]) -> bool:
    nxt = dict(edges)
    v = pair.source
    for _ in range(len(nxt) + 1):
        if v == pair.terminal:
            return True
        if v not in nxt:
            return False
        v = nxt[v]
    return v == pair.terminal


def _users(instance: Instance) -> dict[Edge, list[int]]:
    users: dict[Edge, list[int]] = defaultdict(list)
    for pos, p in enumerate(instance.pairs):
        for e in p.all_edges:
            users[e].append(pos)
    return users


def _relevant_edges(instance: Instance, alpha: float, beta: float) -> frozenset[Edge]:
    """Edges that could ever exceed ``alpha*c + beta`` if every user loaded them."""
    cap = instance.network.capacity
    out = set()
    for e, us in _users(instance).items():
        if sum(instance.pairs[i].demand for i in us) > alpha * cap[e] + beta + TOL:
            out.add(e)
    return frozenset(out)


def _check_budget(instance: Instance, budget: SearchBudget) -> None:
    if instance.k > budget.max_pairs:
        raise BudgetExceeded(f"{instance.k} pairs exceed budget of {budget.max_pairs}")
    for p in instance.pairs:
        if len(p.changing_nodes) > budget.max_nodes_per_pair:
            raise BudgetExceeded(
                f"pair {p.index} has {len(p.changing_nodes)} updating nodes"
            )


def _identical(a: FlowPair, b: FlowPair) -> bool:
    return a.old_path == b.old_path and a.new_path == b.new_path and a.demand == b.demand


def _components(instance: Instance, relevant: frozenset[Edge]) -> list[list[int]]:
    parent = list(range(instance.k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e, us in _users(instance).items():
        if e in relevant:
            for u in us[1:]:
                parent[find(u)] = find(us[0])
    groups: dict[int, list[int]] = defaultdict(list)
    for i in range(instance.k):
        groups[find(i)].append(i)
    return sorted(groups.values())


def _pareto(mat: np.ndarray) -> np.ndarray:
    """Indices of rows not dominated by (elementwise <=) another distinct row."""
    order = np.argsort(mat.sum(axis=1), kind="stable")
    kept: list[int] = []
    for c in order:
        if kept and np.any(np.all(mat[kept] <= mat[c], axis=1)):
            continue
        kept.append(int(c))
    return np.array(sorted(kept), dtype=int)


class _Search:
    """Joint feasibility of a group of pairs at fixed horizon and augmentation.

    Footprints that load a superset of another candidate's edges in every
    round are dropped, since lower loads never hurt. The search then picks
    the pair with the fewest remaining options first and memoises dead
    (assigned pairs, load) states.
    """

    def __init__(self, instance, spaces, group, relevant, alpha, beta, clock):
        self.instance = instance
        self.spaces = spaces
        cap = instance.network.capacity
        self.edges = sorted(
            e for e in relevant if any(e in instance.pairs[i].all_edges for i in group)
        )
        self.eidx = {e: j for j, e in enumerate(self.edges)}
        self.limit = np.array([alpha * cap[e] + beta + TOL for e in self.edges])
        self.group = sorted(group)
        self.clock = clock

    def feasible(self, R: int):
        inst = self.instance
        E = len(self.edges)
        mats, wits = [], []
        for i in self.group:
            seqs = self.spaces[i].sequences(frozenset(), R)
            if not seqs:
                return None
            items = sorted(seqs.items(), key=lambda kv: sorted(map(sorted, kv[0])))
            mat = np.zeros((len(items), R * E))
            for c, (fp, _) in enumerate(items):
                for r, edges in enumerate(fp):
                    for e in edges:
                        mat[c, r * E + self.eidx[e]] = inst.pairs[i].demand
            keep = _pareto(mat)
            mats.append(mat[keep])
            wits.append([items[c][1] for c in keep])
        limit = np.tile(self.limit, R)
        n = len(self.group)
        # identical pairs are assigned in order with non-decreasing choices
        prev_twin = [None] * n
        for d in range(1, n):
            for e in range(d - 1, -1, -1):
                if _identical(inst.pairs[self.group[d]], inst.pairs[self.group[e]]):
                    prev_twin[d] = e
                    break
        dead: set = set()
        choice: dict[int, int] = {}

        def options(d, load):
            ok = np.nonzero(np.all(mats[d] + load <= limit, axis=1))[0]
            t = prev_twin[d]
            return ok[ok >= choice[t]] if t is not None else ok

        def dfs(load):
            self.clock.check()
            if len(choice) == n:
                return True
            bounds = tuple(
                choice[prev_twin[d]] for d in range(n)
                if d not in choice and prev_twin[d] in choice
            )
            key = (frozenset(choice), bounds, load.tobytes())
            if key in dead:
                return False
            best = None
            for d in range(n):
                if d in choice:
                    continue
                t = prev_twin[d]
                if t is not None and t not in choice:
                    continue
                opts = options(d, load)
                if len(opts) == 0:
                    dead.add(key)
                    return False
                if best is None or len(opts) < len(best[1]):
                    best = (d, opts)
            d, opts = best
            for c in opts:
                choice[d] = int(c)
                if dfs(load + mats[d][c]):
                    return True
                del choice[d]
            dead.add(key)
            return False

        if not dfs(np.zeros(R * E)):
            return None
        return {self.group[d]: wits[d][choice[d]] for d in range(n)}


def segments(pair: FlowPair) -> list[FlowPair]:
    """Split a pair at cut junctions into independently schedulable pieces.

    A node on both paths is a cut junction when no node precedes it on one
    path and follows it on the other. No pair edge crosses a cut junction, so
    cycles, routes and carried edges of the pieces combine independently.
    Pieces whose two paths coincide are kept: they carry a constant load.
    """
    old, new = pair.old_nodes, pair.new_nodes
    pos_new = {v: j for j, v in enumerate(new)}
    cuts = []
    for i, v in enumerate(old):
        j = pos_new.get(v)
        if j is None:
            continue
        before = set(old[:i]) | set(new[:j])
        after = set(old[i + 1:]) | set(new[j + 1:])
        if not before & after:
            cuts.append((i, j))
    out = []
    for (i0, j0), (i1, j1) in zip(cuts, cuts[1:]):
        o, n = old[i0:i1 + 1], new[j0:j1 + 1]
        out.append(FlowPair.from_nodes(len(out), o, n, pair.demand))
    return out


class _Problem:
    """Instance split into segments, with the map back to the original pairs."""

    def __init__(self, instance: Instance, alpha: float, beta: float):
        self.instance = instance
        self.relevant = _relevant_edges(instance, alpha, beta)
        self.alpha, self.beta = alpha, beta
        owner, pieces = [], []
        for pos, p in enumerate(instance.pairs):
            for seg in segments(p):
                owner.append(pos)
                pieces.append(FlowPair(len(pieces), seg.source, seg.terminal,
                                       seg.old_path, seg.new_path, seg.demand))
        self.owner = owner
        self.virtual = Instance(instance.network, tuple(pieces))
        self.spaces = [PairSpace(p, self.relevant) for p in pieces]

    def lower_bound(self, limit: int) -> int | None:
        lb = 0
        for sp in self.spaces:
            m = sp.min_rounds(limit)
            if m is None:
                return None
            lb = max(lb, m)
        return lb

    def schedule(self, R: int, clock: _Clock) -> UpdateSchedule | None:
        v = self.virtual
        chosen: dict[int, tuple] = {}
        for group in _components(v, self.relevant):
            res = _Search(v, self.spaces, group, self.relevant, self.alpha, self.beta, clock).feasible(R)
            if res is None:
                return None
            chosen.update(res)
        plan: list[list[set[str]]] = [[set() for _ in range(R)] for _ in self.instance.pairs]
        for idx, sp in enumerate(self.spaces):
            for r, nodes in enumerate(sp.to_rounds(chosen[idx])):
                plan[self.owner[idx]][r] |= nodes
        return UpdateSchedule.from_global(plan)


def optimal_rounds(
    instance: Instance,
    alpha: float = 1.0,
    beta: float = 0.0,
    budget: SearchBudget = SearchBudget(),
) -> ExactResult:
    """Smallest horizon admitting a loop-free (alpha, beta)-valid schedule."""
    _check_budget(instance, budget)
    clock = _Clock(budget.timeout)
    prob = _Problem(instance, alpha, beta)
    lb = prob.lower_bound(budget.max_horizon)
    if lb is None:
        return ExactResult("infeasible")
    # feasibility is monotone in R: idling in the final state is always valid
    best = prob.schedule(lb, clock)
    if best is not None:
        return ExactResult("optimal", lb, best)
    hi = budget.max_horizon
    if hi <= lb:
        return ExactResult("infeasible")
    best = prob.schedule(hi, clock)
    if best is None:
        return ExactResult("infeasible")
    lo = lb + 1
    while lo < hi:
        mid = (lo + hi) // 2
        sched = prob.schedule(mid, clock)
        if sched is None:
            lo = mid + 1
        else:
            hi, best = mid, sched
    return ExactResult("optimal", hi, best)


def _subset_sums(values: list[float]) -> set[float]:
    sums = {0.0}
    for v in values:
        sums |= {s + v for s in sums}
    return sums


def _candidate_levels(instance: Instance, additive: bool) -> list[float]:
    cap = instance.network.capacity
    levels = {0.0 if additive else 1.0}
    for e, us in _users(instance).items():
        for s in _subset_sums([instance.pairs[i].demand for i in us]):
            levels.add(s - cap[e] if additive else s / cap[e])
    floor = 0.0 if additive else 1.0
    return sorted(x for x in levels if x >= floor)


def _optimal_augmentation(instance, R, budget, additive):
    _check_budget(instance, budget)
    clock = _Clock(budget.timeout)
    levels = _candidate_levels(instance, additive)

    def attempt(x):
        a, b = (1.0, x) if additive else (x, 0.0)
        prob = _Problem(instance, a, b)
        lb = prob.lower_bound(R)
        return None if lb is None else prob.schedule(R, clock)

    top = attempt(levels[-1])
    if top is None:
        return ExactResult("infeasible")
    lo, hi, best = 0, len(levels) - 1, top
    while lo < hi:
        mid = (lo + hi) // 2
        s = attempt(levels[mid])
        if s is None:
            lo = mid + 1
        else:
            hi, best = mid, s
    return ExactResult("optimal", levels[lo], best)


def optimal_alpha(
    instance: Instance, R: int, budget: SearchBudget = SearchBudget()
) -> ExactResult:
    """Minimum multiplicative augmentation over loop-free schedules of R rounds."""
    return _optimal_augmentation(instance, R, budget, additive=False)


def optimal_beta(
    instance: Instance, R: int, budget: SearchBudget = SearchBudget()
) -> ExactResult:
    """Minimum additive augmentation over loop-free schedules of R rounds."""
    return _optimal_augmentation(instance, R, budget, additive=True)


def _walk(pair: FlowPair, updated: frozenset[str]) -> list[Edge]:
    """Edges traversed from the source under an instantaneous forwarding state."""
    path = []
    v, seen = pair.source, {pair.source}
    while v != pair.terminal:
        w = pair.new_next.get(v) if v in updated else pair.old_next.get(v)
        if w is None:
            break
        path.append((v, w))
        if w in seen:
            break
        seen.add(w)
        v = w
    return path


def interleaving_oracle(
    instance: Instance, schedule: UpdateSchedule, round: int, max_events: int = 8
) -> dict[Edge, float]:
    """Maximum instantaneous per-edge load over every ordering of a round's updates.

    Each prefix of an ordering is a subset of the round's update events and
    every subset is a prefix of some ordering, so enumerating subsets covers
    all interleavings.
    """
    events = []
    base = []
    for pos, p in enumerate(instance.pairs):
        base.append(schedule.updated_by(pos, round - 1))
        done = schedule.updated_by(pos, round)
        events += [(pos, v) for v in sorted(done - base[pos])]
    if len(events) > max_events:
        raise BudgetExceeded(f"{len(events)} simultaneous updates exceed {max_events}")
    best: dict[Edge, float] = defaultdict(float)
    for mask in range(1 << len(events)):
        extra = defaultdict(set)
        for b, (pos, v) in enumerate(events):
            if mask >> b & 1:
                extra[pos].add(v)
        load: dict[Edge, float] = defaultdict(float)
        for pos, p in enumerate(instance.pairs):
            for e in _walk(p, base[pos] | extra[pos]):
                load[e] += p.demand
        for e, x in load.items():
            if x > best[e]:
                best[e] = x
    return dict(best)
