"""Loop freedom, connectivity and worst-case congestion of update schedules.

Within a round the node updates of a pair happen in arbitrary order, so an
edge is considered active *during* round r if it is active after round r-1
or after round r. A pair loads an edge during round r iff the edge lies on
some source-to-terminal route of the during-round digraph, i.e. it is
reachable from the source and reaches the terminal. For a branching node
updating in round r this counts both branches up to the merging node.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable
from dataclasses import dataclass, field

from .netmodel import TOL, Edge, FlowPair, Instance, UpdateSchedule, format_number


class LoopError(ValueError):
    """Load is undefined because the transient forwarding graph has a cycle."""


@dataclass(frozen=True)
class TransientState:
    index: int
    round: int
    active_after: frozenset[Edge]
    active_during: frozenset[Edge]


def active_edges(pair: FlowPair, updated: Iterable[str]) -> frozenset[Edge]:
    """Edges of ``pair`` forwarding traffic once ``updated`` nodes have switched."""
    updated = set(updated)
    shared = pair.old_edges & pair.new_edges
    new = {e for e in pair.new_edges - shared if e[0] in updated}
    old = {e for e in pair.old_edges - shared if e[0] not in updated}
    return frozenset(shared | new | old)


def _adjacency(edges: Iterable[Edge]) -> dict[str, list[str]]:
    adj: dict[str, list[str]] = defaultdict(list)
    for v, w in edges:
        adj[v].append(w)
    return adj


def reachable(edges: Iterable[Edge], start: str, reverse: bool = False) -> set[str]:
    adj: dict[str, list[str]] = defaultdict(list)
    for v, w in edges:
        if reverse:
            v, w = w, v
        adj[v].append(w)
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def find_cycle(edges: Iterable[Edge]) -> list[str] | None:
    """Return the node sequence of some directed cycle, or None if acyclic."""
    adj = _adjacency(edges)
    color: dict[str, int] = {}
    for root in list(adj):
        if color.get(root):
            continue
        stack = [(root, iter(adj[root]))]
        color[root] = 1
        path = [root]
        while stack:
            v, it = stack[-1]
            for w in it:
                c = color.get(w, 0)
                if c == 1:
                    return path[path.index(w):]
                if c == 0:
                    color[w] = 1
                    path.append(w)
                    stack.append((w, iter(adj[w])))
                    break
            else:
                color[v] = 2
                path.pop()
                stack.pop()
    return None


def carried_edges(pair: FlowPair, edges: frozenset[Edge]) -> frozenset[Edge]:
    """Edges of ``edges`` on some source-terminal route."""
    fwd = reachable(edges, pair.source)
    bwd = reachable(edges, pair.terminal, reverse=True)
    return frozenset(e for e in edges if e[0] in fwd and e[1] in bwd)


def transient_edges(
    pair: FlowPair,
    schedule: UpdateSchedule,
    round: int,
    position: int | None = None,
) -> TransientState:
    """Active edge sets of ``pair`` after and during global round ``round``.

    ``position`` is the pair's slot in the schedule; it defaults to
    ``pair.index``. Round 0 is the initial state.
    """
    if round < 0 or round > schedule.horizon:
        raise ValueError(f"round {round} outside [0, {schedule.horizon}]")
    pos = pair.index if position is None else position
    after = active_edges(pair, schedule.updated_by(pos, round))
    if round == 0:
        return TransientState(pair.index, 0, after, after)
    before = active_edges(pair, schedule.updated_by(pos, round - 1))
    return TransientState(pair.index, round, after, before | after)


@dataclass(frozen=True)
class LoopCheck:
    loop_free: bool
    pair: int | None = None
    round: int | None = None
    cycle: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.loop_free


def check_loop_freedom(instance: Instance, schedule: UpdateSchedule) -> LoopCheck:
    for pos, p in enumerate(instance.pairs):
        for r in range(1, schedule.horizon + 1):
            st = transient_edges(p, schedule, r, pos)
            cyc = find_cycle(st.active_during)
            if cyc is not None:
                return LoopCheck(False, p.index, r, tuple(cyc))
    return LoopCheck(True)


@dataclass(frozen=True)
class ConnectivityCheck:
    connected: bool
    pair: int | None = None
    round: int | None = None
    witness: str | None = None

    def __bool__(self) -> bool:
        return self.connected


def _stranded(pair: FlowPair, edges: frozenset[Edge]) -> str | None:
    nxt = dict(edges)
    v, steps = pair.source, 0
    while v != pair.terminal:
        if v not in nxt or steps > len(nxt):
            return v
        v = nxt[v]
        steps += 1
    return None


def check_connectivity(instance: Instance, schedule: UpdateSchedule) -> ConnectivityCheck:
    """Every pair keeps a source-terminal route after every round.

    Additionally an old-only node must drop its rule strictly after the round
    in which its upstream anchor switched away from it, and a new-only node
    must install its rule no later than the round in which a node starts
    forwarding to it; otherwise traffic can reach it mid-round and find no
    rule.
    """
    for pos, p in enumerate(instance.pairs):
        for r in range(0, schedule.horizon + 1):
            after = active_edges(p, schedule.updated_by(pos, r))
            stuck = _stranded(p, after)
            if stuck is not None:
                return ConnectivityCheck(False, p.index, r, stuck)
        when = schedule.update_round(pos)
        for v, anchor in sorted(p.anchor.items()):
            if v in when and when[v] <= when.get(anchor, float("inf")):
                return ConnectivityCheck(False, p.index, when[v], v)
        for u in sorted(p.changing_nodes - p.old_only):
            w = p.new_next[u]
            if w in p.new_only and when.get(w, float("inf")) > when.get(u, float("inf")):
                return ConnectivityCheck(False, p.index, when.get(u), w)
    return ConnectivityCheck(True)


def pair_round_load_edges(
    pair: FlowPair, schedule: UpdateSchedule, r: int, position: int
) -> frozenset[Edge]:
    """Edges pair ``position`` loads during global round r (r may exceed horizon)."""
    h = schedule.horizon
    if r <= 0 or r > h:
        upd = schedule.updated_by(position, max(r, 0))
        return carried_edges(pair, active_edges(pair, upd))
    st = transient_edges(pair, schedule, r, position)
    return carried_edges(pair, st.active_during)


def round_loads(instance: Instance, schedule: UpdateSchedule, r: int) -> dict[Edge, float]:
    loads: dict[Edge, float] = defaultdict(float)
    for pos, p in enumerate(instance.pairs):
        for e in pair_round_load_edges(p, schedule, r, pos):
            loads[e] += p.demand
    return dict(loads)


def worst_case_load(
    instance: Instance, schedule: UpdateSchedule, round: int, edge: Edge
) -> float:
    """Worst-case load on ``edge`` over all in-round interleavings of ``round``."""
    if 1 <= round <= schedule.horizon:
        for pos, p in enumerate(instance.pairs):
            st = transient_edges(p, schedule, round, pos)
            cyc = find_cycle(st.active_during)
            if cyc is not None:
                raise LoopError(f"pair {p.index} loops in round {round}: {cyc}")
    return round_loads(instance, schedule, round).get(tuple(edge), 0.0)


@dataclass(frozen=True)
class Violation:
    round: int
    edge: Edge
    load: float
    capacity: float


@dataclass(frozen=True)
class AugmentationReport:
    rounds_used: int
    per_edge_peak: dict[Edge, float]
    alpha_min: float
    beta_min: float
    loop_free: bool
    connected: bool
    violations: tuple[Violation, ...] = field(default=())
    loop: LoopCheck | None = None
    capacity: dict[Edge, float] = field(default_factory=dict, repr=False)

    def is_valid(self, alpha: float = 1.0, beta: float = 0.0, tol: float = TOL) -> bool:
        """Loop free and every peak within ``alpha * c + beta``."""
        return self.loop_free and all(
            peak <= alpha * self.capacity[e] + beta + tol
            for e, peak in self.per_edge_peak.items()
        )

    @property
    def summary(self) -> tuple[float, float, int, bool]:
        return (self.alpha_min, self.beta_min, self.rounds_used, self.loop_free)


def assess(instance: Instance, schedule: UpdateSchedule) -> AugmentationReport:
    """Per-edge peak transient loads and the tight (alpha, beta) they require."""
    cap = instance.network.capacity
    h = schedule.horizon
    peak: dict[Edge, float] = defaultdict(float)
    violations = []
    # round 0 is the all-old state, round h+1 the all-new state
    for r in range(0, h + 2):
        for e, load in round_loads(instance, schedule, r).items():
            if load > peak[e]:
                peak[e] = load
            if 1 <= r <= h and load > cap[e] + TOL:
                violations.append(Violation(r, e, load, cap[e]))
    alpha = max([1.0] + [peak[e] / cap[e] for e in peak])
    beta = max([0.0] + [peak[e] - cap[e] for e in peak])
    loop = check_loop_freedom(instance, schedule)
    conn = check_connectivity(instance, schedule)
    report = AugmentationReport(
        rounds_used=h,
        per_edge_peak=dict(sorted(peak.items())),
        alpha_min=alpha,
        beta_min=beta,
        loop_free=loop.loop_free,
        connected=conn.connected,
        violations=tuple(sorted(violations, key=lambda x: (x.round, x.edge))),
        loop=loop,
        capacity=dict(cap),
    )
    return report


def write_report(report: AugmentationReport) -> str:
    lines = [
        "[summary]",
        f"alpha_min {format_number(report.alpha_min)}",
        f"beta_min {format_number(report.beta_min)}",
        f"rounds {report.rounds_used}",
        f"loop_free {str(report.loop_free).lower()}",
        f"connected {str(report.connected).lower()}",
        "[peaks]",
    ]
    lines += [f"{v} {w} {format_number(x)}" for (v, w), x in report.per_edge_peak.items()]
    lines.append("[violations]")
    lines += [
        f"{x.round} {x.edge[0]} {x.edge[1]} {format_number(x.load)} {format_number(x.capacity)}"
        for x in report.violations
    ]
    return "\n".join(lines) + "\n"


def read_report_summary(document: str) -> dict[str, object]:
    """Parse the summary section of a report document."""
    out: dict[str, object] = {}
    section = None
    for line in document.splitlines():
        line = line.strip()
        if line.startswith("["):
            section = line.strip("[]")
            continue
        if section != "summary" or not line:
            continue
        key, value = line.split()
        if key in ("loop_free", "connected"):
            out[key] = value == "true"
        elif key == "rounds":
            out[key] = int(value)
        else:
            out[key] = float(value)
    return out
