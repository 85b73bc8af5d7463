"""Core domain types: networks, flow pairs, instances and update schedules.

Node identifiers are opaque strings. Paths are stored as edge sequences so
membership queries ("is edge e on the old path of pair i") are set lookups.

The instance document format (``*.inst``) is line oriented::

    # comment
    [nodes]
    s
    a
    t
    [edges]
    s a 1
    a t 1
    [pairs]
    0 s t 1 | s a t | s a t

Edge lines are ``tail head capacity``; pair lines are
``index source terminal demand | old path nodes | new path nodes``.
Tokens are separated by whitespace, so node ids must not contain whitespace,
``|`` or ``#``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property

Edge = tuple[str, str]

TOL = 1e-9


class InstanceFormatError(ValueError):
    """Raised when an instance or schedule document cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InstanceSemanticError(ValueError):
    """Raised when a parsed instance violates a model invariant."""


def format_number(x: float) -> str:
    """Shortest round-tripping text for a float; integral values print bare."""
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def nodes_to_edges(nodes: Sequence[str]) -> tuple[Edge, ...]:
    return tuple(zip(nodes[:-1], nodes[1:]))


def edges_to_nodes(edges: Sequence[Edge]) -> tuple[str, ...]:
    if not edges:
        return ()
    return (edges[0][0],) + tuple(e[1] for e in edges)


@dataclass(frozen=True)
class Network:
    """Directed capacitated graph."""

    nodes: frozenset[str]
    capacity: Mapping[Edge, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(
            self, "capacity", {tuple(e): float(c) for e, c in self.capacity.items()}
        )

    @property
    def edges(self) -> frozenset[Edge]:
        return frozenset(self.capacity)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def m(self) -> int:
        return len(self.capacity)

    @property
    def cmax(self) -> float:
        return max(self.capacity.values(), default=0.0)

    def with_capacities(self, capacity: Mapping[Edge, float]) -> Network:
        return Network(self.nodes, capacity)


@dataclass(frozen=True)
class FlowPair:
    """An old and an updated path between the same source and terminal."""

    index: int
    source: str
    terminal: str
    old_path: tuple[Edge, ...]
    new_path: tuple[Edge, ...]
    demand: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "old_path", tuple(tuple(e) for e in self.old_path))
        object.__setattr__(self, "new_path", tuple(tuple(e) for e in self.new_path))
        object.__setattr__(self, "demand", float(self.demand))

    @classmethod
    def from_nodes(
        cls,
        index: int,
        old_nodes: Sequence[str],
        new_nodes: Sequence[str],
        demand: float,
    ) -> FlowPair:
        return cls(
            index,
            old_nodes[0],
            old_nodes[-1],
            nodes_to_edges(old_nodes),
            nodes_to_edges(new_nodes),
            demand,
        )

    def with_demand(self, demand: float) -> FlowPair:
        return FlowPair(
            self.index, self.source, self.terminal, self.old_path, self.new_path, demand
        )

    @cached_property
    def old_nodes(self) -> tuple[str, ...]:
        return edges_to_nodes(self.old_path) or (self.source,)

    @cached_property
    def new_nodes(self) -> tuple[str, ...]:
        return edges_to_nodes(self.new_path) or (self.source,)

    @cached_property
    def old_edges(self) -> frozenset[Edge]:
        return frozenset(self.old_path)

    @cached_property
    def new_edges(self) -> frozenset[Edge]:
        return frozenset(self.new_path)

    @cached_property
    def all_edges(self) -> frozenset[Edge]:
        return self.old_edges | self.new_edges

    @cached_property
    def all_nodes(self) -> frozenset[str]:
        return frozenset(self.old_nodes) | frozenset(self.new_nodes)

    @cached_property
    def old_next(self) -> dict[str, str]:
        return dict(self.old_path)

    @cached_property
    def new_next(self) -> dict[str, str]:
        return dict(self.new_path)

    @property
    def trivial(self) -> bool:
        return self.old_path == self.new_path

    @cached_property
    def changing_nodes(self) -> frozenset[str]:
        """Nodes whose forwarding rule differs between the two paths."""
        return frozenset(
            v
            for v in self.all_nodes
            if v != self.terminal and self.old_next.get(v) != self.new_next.get(v)
        )

    @cached_property
    def old_only(self) -> frozenset[str]:
        return frozenset(self.old_nodes) - frozenset(self.new_nodes)

    @cached_property
    def new_only(self) -> frozenset[str]:
        return frozenset(self.new_nodes) - frozenset(self.old_nodes)

    @cached_property
    def branching(self) -> frozenset[str]:
        """Shared nodes with distinct old and new outgoing edges."""
        return frozenset(
            v
            for v in self.old_next
            if v in self.new_next and self.old_next[v] != self.new_next[v]
        )

    @cached_property
    def merging(self) -> frozenset[str]:
        """Shared nodes with distinct old and new incoming edges."""
        old_prev = {w: v for v, w in self.old_path}
        new_prev = {w: v for v, w in self.new_path}
        return frozenset(
            w for w in old_prev if w in new_prev and old_prev[w] != new_prev[w]
        )

    @cached_property
    def anchor(self) -> dict[str, str]:
        """Map each old-only node to the nearest old-path ancestor on the new path.

        Old-only nodes may drop their rule only after this ancestor has
        switched away from them.
        """
        result: dict[str, str] = {}
        last = self.source
        for v in self.old_nodes:
            if v in self.old_only:
                result[v] = last
            else:
                last = v
        return result


@dataclass(frozen=True)
class Instance:
    network: Network
    pairs: tuple[FlowPair, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", tuple(self.pairs))

    @property
    def k(self) -> int:
        return len(self.pairs)

    def pair(self, index: int) -> FlowPair:
        for p in self.pairs:
            if p.index == index:
                return p
        raise KeyError(index)


@dataclass(frozen=True)
class UpdateSchedule:
    """Per-pair update rounds plus per-pair start offsets.

    ``rounds[i]`` is the round list of the i-th pair of the instance (by
    position, not by ``FlowPair.index``). Global round of local round ``r``
    (1-based) of pair i is ``offsets[i] + r``.
    """

    rounds: tuple[tuple[frozenset[str], ...], ...]
    offsets: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        rounds = tuple(tuple(frozenset(u) for u in pr) for pr in self.rounds)
        object.__setattr__(self, "rounds", rounds)
        offsets = tuple(int(o) for o in self.offsets) or (0,) * len(rounds)
        if len(offsets) != len(rounds):
            raise ValueError("one offset per pair required")
        if any(o < 0 for o in offsets):
            raise ValueError("offsets must be non-negative")
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def empty(cls, k: int) -> UpdateSchedule:
        return cls(tuple(() for _ in range(k)))

    @classmethod
    def from_global(cls, per_pair: Sequence[Sequence[Iterable[str]]]) -> UpdateSchedule:
        """Build from per-pair lists indexed by global round (index 0 is round 1).

        Leading empty rounds become the pair's offset; trailing ones are dropped.
        """
        rounds, offsets = [], []
        for seq in per_pair:
            rs = [frozenset(u) for u in seq]
            while rs and not rs[-1]:
                rs.pop()
            off = 0
            while rs and not rs[0]:
                rs.pop(0)
                off += 1
            rounds.append(tuple(rs))
            offsets.append(off)
        return cls(tuple(rounds), tuple(offsets))

    @property
    def horizon(self) -> int:
        return max(
            (o + len(r) for o, r in zip(self.offsets, self.rounds) if r), default=0
        )

    def pair_rounds(self, i: int) -> int:
        return len(self.rounds[i])

    def update_round(self, i: int) -> dict[str, int]:
        """Global round in which each node of pair i updates."""
        out = {}
        for r, nodes in enumerate(self.rounds[i], start=1):
            for v in nodes:
                out[v] = self.offsets[i] + r
        return out

    def updated_by(self, i: int, r: int) -> frozenset[str]:
        """Nodes of pair i updated in global rounds <= r."""
        local = r - self.offsets[i]
        if local <= 0:
            return frozenset()
        return frozenset().union(*self.rounds[i][:local])

    def with_offsets(self, offsets: Sequence[int]) -> UpdateSchedule:
        return UpdateSchedule(self.rounds, tuple(offsets))


# -- validation ---------------------------------------------------------------


def _path_violations(network: Network, pair: FlowPair, label: str, path) -> list[str]:
    out = []
    tag = f"pair {pair.index}"
    if not path:
        return [f"{tag}: {label} path is empty"]
    for a, b in zip(path, path[1:]):
        if a[1] != b[0]:
            return [f"{tag}: {label} path is not contiguous"]
    nodes = edges_to_nodes(path)
    if nodes[0] != pair.source or nodes[-1] != pair.terminal:
        out.append(f"{tag}: {label} path does not run from source to terminal")
    if len(set(nodes)) != len(nodes):
        out.append(f"{tag}: {label} path not simple")
    for e in path:
        if e not in network.capacity:
            out.append(f"{tag}: {label} path uses edge {e[0]}->{e[1]} not in network")
    return out


def validate_instance(instance: Instance) -> list[str]:
    """Return every violated model invariant; empty when the instance is sound."""
    net = instance.network
    violations = []
    for (v, w), c in sorted(net.capacity.items()):
        if v not in net.nodes or w not in net.nodes:
            violations.append(f"edge {v}->{w} has an undeclared endpoint")
        if v == w:
            violations.append(f"edge {v}->{w} is a self-loop")
        if not c > 0 or math.isnan(c):
            violations.append(f"edge {v}->{w} capacity must be positive")
    seen = set()
    for p in instance.pairs:
        if p.index in seen:
            violations.append(f"duplicate pair index {p.index}")
        seen.add(p.index)
        if p.source == p.terminal:
            violations.append(f"pair {p.index}: source equals terminal")
            continue
        if not p.demand > 0:
            violations.append(f"pair {p.index}: demand must be positive")
        violations += _path_violations(net, p, "old", p.old_path)
        violations += _path_violations(net, p, "new", p.new_path)
    for label, attr in (("old", "old_edges"), ("new", "new_edges")):
        load: dict[Edge, float] = {}
        for p in instance.pairs:
            for e in getattr(p, attr):
                load[e] = load.get(e, 0.0) + p.demand
        for e in sorted(load):
            c = net.capacity.get(e)
            if c is not None and load[e] > c + TOL:
                violations.append(f"{label} flows exceed capacity on ({e[0]},{e[1]})")
    return violations


def validate_schedule(instance: Instance, schedule: UpdateSchedule) -> list[str]:
    """Structural checks: every changing node updated exactly once, nothing else."""
    out = []
    if len(schedule.rounds) != instance.k:
        return [f"schedule has {len(schedule.rounds)} pairs, instance has {instance.k}"]
    for pos, p in enumerate(instance.pairs):
        seen: set[str] = set()
        for r, nodes in enumerate(schedule.rounds[pos], start=1):
            dup = seen & nodes
            if dup:
                out.append(f"pair {p.index}: {sorted(dup)} updated twice")
            seen |= nodes
        if seen != p.changing_nodes:
            missing = sorted(p.changing_nodes - seen)
            extra = sorted(seen - p.changing_nodes)
            if missing:
                out.append(f"pair {p.index}: nodes never updated {missing}")
            if extra:
                out.append(f"pair {p.index}: nodes need no update {extra}")
    return out


# -- serialization ------------------------------------------------------------


def write_instance(instance: Instance) -> str:
    net = instance.network
    lines = ["[nodes]"]
    lines += sorted(net.nodes)
    lines.append("[edges]")
    for (v, w) in sorted(net.capacity):
        lines.append(f"{v} {w} {format_number(net.capacity[(v, w)])}")
    lines.append("[pairs]")
    for p in sorted(instance.pairs, key=lambda p: p.index):
        lines.append(
            f"{p.index} {p.source} {p.terminal} {format_number(p.demand)}"
            f" | {' '.join(p.old_nodes)} | {' '.join(p.new_nodes)}"
        )
    return "\n".join(lines) + "\n"


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def read_instance(document: str) -> Instance:
    """Parse an instance document and enforce the model invariants."""
    section = None
    nodes: list[str] = []
    capacity: dict[Edge, float] = {}
    pairs: list[FlowPair] = []
    for lineno, raw in enumerate(document.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        if line.startswith("["):
            name = line.strip("[]").strip()
            if name not in ("nodes", "edges", "pairs"):
                raise InstanceFormatError(f"unknown section [{name}]", lineno)
            section = name
            continue
        if section is None:
            raise InstanceFormatError("content before first section header", lineno)
        if section == "nodes":
            if len(line.split()) != 1:
                raise InstanceFormatError("node line must hold one identifier", lineno)
            nodes.append(line)
        elif section == "edges":
            tok = line.split()
            if len(tok) == 2:
                raise InstanceSemanticError(
                    f"line {lineno}: edge without capacity ({tok[0]},{tok[1]})"
                )
            if len(tok) != 3:
                raise InstanceFormatError("edge line must be 'tail head capacity'", lineno)
            try:
                c = float(tok[2])
            except ValueError:
                raise InstanceFormatError(f"bad capacity {tok[2]!r}", lineno) from None
            capacity[(tok[0], tok[1])] = c
        else:
            parts = line.split("|")
            if len(parts) != 3:
                raise InstanceFormatError(
                    "pair line must be 'id source terminal demand | old | new'", lineno
                )
            head = parts[0].split()
            if len(head) != 4:
                raise InstanceFormatError("pair header needs 4 fields", lineno)
            try:
                idx, demand = int(head[0]), float(head[3])
            except ValueError:
                raise InstanceFormatError("bad pair index or demand", lineno) from None
            old, new = parts[1].split(), parts[2].split()
            if len(old) < 2 or len(new) < 2:
                raise InstanceFormatError("paths need at least two nodes", lineno)
            if (old[0], old[-1]) != (head[1], head[2]) or (new[0], new[-1]) != (
                head[1],
                head[2],
            ):
                raise InstanceSemanticError(
                    f"line {lineno}: pair {idx} paths do not match source/terminal"
                )
            pairs.append(FlowPair.from_nodes(idx, old, new, demand))
    if len(set(nodes)) != len(nodes):
        raise InstanceSemanticError("duplicate node identifier")
    instance = Instance(Network(frozenset(nodes), capacity), tuple(pairs))
    violations = validate_instance(instance)
    if violations:
        raise InstanceSemanticError("; ".join(violations))
    return instance


def write_schedule(schedule: UpdateSchedule, instance: Instance) -> str:
    """Schedule document: ``pair offset | round1 nodes | round2 nodes ...``.

    Empty rounds are written as ``-``.
    """
    lines = [f"# horizon {schedule.horizon}", "[schedule]"]
    for pos, p in enumerate(instance.pairs):
        rounds = " | ".join(" ".join(sorted(u)) or "-" for u in schedule.rounds[pos])
        line = f"{p.index} {schedule.offsets[pos]}"
        if rounds:
            line += " | " + rounds
        lines.append(line)
    return "\n".join(lines) + "\n"


def read_schedule(document: str, instance: Instance) -> UpdateSchedule:
    by_index = {p.index: pos for pos, p in enumerate(instance.pairs)}
    rounds: list = [()] * instance.k
    offsets = [0] * instance.k
    seen = set()
    for lineno, raw in enumerate(document.splitlines(), start=1):
        line = _strip(raw)
        if not line or line == "[schedule]":
            continue
        parts = [s.strip() for s in line.split("|")]
        head = parts[0].split()
        if len(head) != 2:
            raise InstanceFormatError("schedule line must start 'pair offset'", lineno)
        try:
            idx, off = int(head[0]), int(head[1])
        except ValueError:
            raise InstanceFormatError("bad pair index or offset", lineno) from None
        if idx not in by_index:
            raise InstanceFormatError(f"unknown pair {idx}", lineno)
        seen.add(idx)
        pos = by_index[idx]
        offsets[pos] = off
        rounds[pos] = tuple(
            frozenset() if s == "-" else frozenset(s.split()) for s in parts[1:]
        )
    return UpdateSchedule(tuple(rounds), tuple(offsets))


def _nodes(path: str | Sequence[str]) -> Sequence[str]:
    return path.split() if isinstance(path, str) else path


def make_instance(
    edges: Iterable[tuple[str, str, float]],
    pairs: Iterable[tuple[Sequence[str], Sequence[str], float]],
    nodes: Iterable[str] = (),
) -> Instance:
    """Convenience constructor from ``(tail, head, cap)`` and node-list pairs.

    A path may also be given as one whitespace-separated string.
    """
    capacity = {(v, w): c for v, w, c in edges}
    all_nodes = set(nodes)
    for v, w in capacity:
        all_nodes.update((v, w))
    flow_pairs = tuple(
        FlowPair.from_nodes(i, _nodes(old), _nodes(new), d) for i, (old, new, d) in enumerate(pairs)
    )
    return Instance(Network(frozenset(all_nodes), capacity), flow_pairs)
