"""Reduction gadgets from 3-CNF formulas to augmented update scheduling.

Node names carry their role so that schedules can be read back without side
tables:

``s``, ``t``
    global source and terminal shared by every flow
``w1.j``, ``w2.j``, ``w.j.k``
    entry, exit and ladder nodes of the gadget of variable j
``u.i``, ``v.i``
    ends of the shared edge of clause i
``u.i.p``, ``v.i.p``
    ends of the occurrence edge of the p-th literal of clause i
``bin``, ``bout``
    private connectors of the updated blocking route

Flows: ``true`` and ``false`` traverse every variable gadget, the ladder
flows ``ladder k`` (k = 0..sqrt_a, the last one blocking) likewise, and the
three ``clause p`` flows traverse every clause gadget.
"""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from .checker import assess
from .netmodel import FlowPair, Instance, Network, UpdateSchedule, nodes_to_edges

Literal = int  # DIMACS convention: +j is x_j, -j is its negation


@dataclass(frozen=True)
class Cnf3:
    num_vars: int
    clauses: tuple[tuple[Literal, Literal, Literal], ...]
    dropped: int = 0

    @classmethod
    def build(cls, num_vars: int, clauses: Sequence[Sequence[int]]) -> Cnf3:
        """Validate clauses and drop the tautological ones."""
        kept, dropped = [], 0
        for c in clauses:
            c = tuple(int(x) for x in c)
            if len(c) != 3:
                raise ValueError(f"clause {c} does not have exactly 3 literals")
            if any(x == 0 or abs(x) > num_vars for x in c):
                raise ValueError(f"clause {c} uses an undeclared variable")
            if any(-x in c for x in c):
                dropped += 1
                continue
            kept.append(c)
        return cls(num_vars, tuple(kept), dropped)

    def satisfied_by(self, assignment: Mapping[int, bool]) -> int | None:
        """Index of the first clause the assignment falsifies, or None."""
        for i, c in enumerate(self.clauses):
            if not any(assignment.get(abs(x), False) == (x > 0) for x in c):
                return i
        return None

    def is_satisfiable(self) -> bool:
        """Brute force; intended for the tiny formulas gadgets are built from."""
        for bits in range(1 << self.num_vars):
            asg = {j: bool(bits >> (j - 1) & 1) for j in range(1, self.num_vars + 1)}
            if self.satisfied_by(asg) is None:
                return True
        return False

    def used_vars(self) -> list[int]:
        return sorted({abs(x) for c in self.clauses for x in c})


def read_dimacs(text: str) -> Cnf3:
    num_vars, lits = None, []
    for line in text.splitlines():
        line = line.strip()
        if not line or line[0] in "c%":
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"bad problem line: {line!r}")
            num_vars = int(parts[2])
            continue
        lits += [int(x) for x in line.split()]
    if num_vars is None:
        raise ValueError("missing 'p cnf' line")
    clauses, cur = [], []
    for x in lits:
        if x == 0:
            clauses.append(cur)
            cur = []
        else:
            cur.append(x)
    if cur:
        raise ValueError("last clause is not terminated by 0")
    return Cnf3.build(num_vars, clauses)


def write_dimacs(cnf: Cnf3) -> str:
    lines = [f"p cnf {cnf.num_vars} {len(cnf.clauses)}"]
    lines += [" ".join(map(str, c)) + " 0" for c in cnf.clauses]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GadgetParams:
    epsilon: float
    variant: str = "mult"

    def __post_init__(self) -> None:
        if self.variant not in ("mult", "add"):
            raise ValueError(f"unknown variant {self.variant!r}")
        hi = 1 / 3 if self.variant == "mult" else 1.0
        if not 0 < self.epsilon < hi:
            raise ValueError(f"epsilon must lie in (0, {hi:g})")

    @property
    def sqrt_a(self) -> int:
        if self.variant == "add":
            return 0
        return math.floor(1 / (2 * self.epsilon)) + 1

    @property
    def a(self) -> int:
        return self.sqrt_a**2

    @property
    def unit(self) -> float:
        """Demand of the truth-value and clause flows."""
        return float(self.a) if self.variant == "mult" else 1.0

    def augmentation(self, cmax: float) -> tuple[float, float]:
        """(alpha, beta) the reduction is tight for."""
        if self.variant == "mult":
            return (2 - self.epsilon, 0.0)
        return (1.0, cmax / 3 - self.epsilon)


@dataclass(frozen=True)
class GadgetInstance:
    instance: Instance
    cnf: Cnf3
    params: GadgetParams
    node_roles: dict[str, tuple] = field(repr=False)
    flow_roles: dict[int, tuple] = field(repr=False)

    def flow(self, *role) -> int:
        for i, r in self.flow_roles.items():
            if r == tuple(role):
                return i
        raise KeyError(role)

    @property
    def augmentation(self) -> tuple[float, float]:
        return self.params.augmentation(self.instance.network.cmax)


def _node_roles(cnf: Cnf3, sqrt_a: int) -> dict[str, tuple]:
    roles: dict[str, tuple] = {"s": ("source",), "t": ("terminal",)}
    for j in cnf.used_vars():
        roles[f"w1.{j}"] = ("entry", j)
        roles[f"w2.{j}"] = ("exit", j)
        for k in range(sqrt_a + 1):
            roles[f"w.{j}.{k}"] = ("ladder", j, k)
    for i, c in enumerate(cnf.clauses, start=1):
        roles[f"u.{i}"] = ("clause-in", i)
        roles[f"v.{i}"] = ("clause-out", i)
        for p, lit in enumerate(c, start=1):
            roles[f"u.{i}.{p}"] = ("occ-in", i, p, lit)
            roles[f"v.{i}.{p}"] = ("occ-out", i, p, lit)
    roles["bin"] = ("blocking-in",)
    roles["bout"] = ("blocking-out",)
    return roles


def _build(cnf: Cnf3, params: GadgetParams) -> GadgetInstance:
    if not cnf.clauses:
        raise ValueError("formula has no clauses after dropping tautologies")
    A, q = params.a, params.sqrt_a
    mult = params.variant == "mult"
    unit = params.unit
    vars_ = cnf.used_vars()
    clauses = list(enumerate(cnf.clauses, start=1))

    cap: dict = {}

    def occ_chain(j: int, positive: bool) -> list[str]:
        out = []
        for i, c in clauses:
            for p, lit in enumerate(c, start=1):
                if abs(lit) == j and (lit > 0) == positive:
                    out += [f"u.{i}.{p}", f"v.{i}.{p}"]
        return out

    def through_vars(inner) -> list[str]:
        path = ["s"]
        for j in vars_:
            path += [f"w1.{j}"] + inner(j) + [f"w2.{j}"]
        return path + ["t"]

    ladder_cap = (lambda k: 2 * A + k * q) if mult else (lambda k: 2.0)
    gadget_edges: dict = {}
    flows: list[tuple[tuple, list[str], list[str], float]] = []
    for positive, name in ((True, "true"), (False, "false")):
        old = through_vars(lambda j: occ_chain(j, positive))
        new = through_vars(lambda j: [f"w.{j}.0"])
        flows.append(((name,), old, new, unit))
        for j in vars_:
            seg = [f"w1.{j}"] + occ_chain(j, positive) + [f"w2.{j}"]
            for e in nodes_to_edges(seg):
                gadget_edges[e] = unit
    for k in range(q + 1):
        d = ladder_cap(k) if mult else 1.0
        old = through_vars(lambda j: [f"w.{j}.{k}"])
        if k < q:
            new = through_vars(lambda j: [f"w.{j}.{k + 1}"])
        else:
            new = ["s", "bin"]
            for i, _ in reversed(clauses):
                new += [f"u.{i}", f"v.{i}"]
            new += ["bout", "t"]
        flows.append((("ladder", k), old, new, d))
        for j in vars_:
            for e in nodes_to_edges([f"w1.{j}", f"w.{j}.{k}", f"w2.{j}"]):
                gadget_edges[e] = ladder_cap(k)
    for p in (1, 2, 3):
        old, new = ["s"], ["s"]
        for i, _ in clauses:
            old += [f"u.{i}", f"v.{i}"]
            new += [f"u.{i}", f"u.{i}.{p}", f"v.{i}.{p}", f"v.{i}"]
            gadget_edges[(f"u.{i}", f"v.{i}")] = 3 * unit
            for e in nodes_to_edges([f"u.{i}", f"u.{i}.{p}", f"v.{i}.{p}", f"v.{i}"]):
                gadget_edges[e] = unit
        flows.append((("clause", p), old + ["t"], new + ["t"], unit))

    # connectors carry every flow routed over them
    load: dict = defaultdict(float)
    for _, old, new, d in flows:
        for e in set(nodes_to_edges(old)) | set(nodes_to_edges(new)):
            load[e] += d
    for e, x in load.items():
        cap[e] = gadget_edges.get(e, x)
    pairs = []
    flow_roles = {}
    for idx, (role, old, new, d) in enumerate(flows):
        pairs.append(FlowPair.from_nodes(idx, old, new, d))
        flow_roles[idx] = role
    roles = _node_roles(cnf, q)
    used = {v for e in cap for v in e}
    roles = {v: r for v, r in roles.items() if v in used}
    network = Network(frozenset(used), cap)
    return GadgetInstance(Instance(network, tuple(pairs)), cnf, params, roles, flow_roles)


def build_multiplicative(cnf: Cnf3, epsilon: float) -> GadgetInstance:
    return _build(cnf, GadgetParams(epsilon, "mult"))


def build_additive(cnf: Cnf3, epsilon: float) -> GadgetInstance:
    return _build(cnf, GadgetParams(epsilon, "add"))


def _as_mapping(assignment) -> dict[int, bool]:
    if isinstance(assignment, Mapping):
        return {int(j): bool(v) for j, v in assignment.items()}
    return {j: bool(v) for j, v in enumerate(assignment, start=1)}


def schedule_from_assignment(gadget: GadgetInstance, assignment) -> UpdateSchedule:
    """The canonical schedule certifying a satisfying assignment.

    Rounds: the chosen truth flows; one satisfying clause flow per clause;
    the blocking flow; the remaining ladder flows from the top down; the
    other truth flows; the remaining clause flows. Old-only nodes drop their
    rule one round after their anchor switched.
    """
    asg = _as_mapping(assignment)
    cnf = gadget.cnf
    bad = cnf.satisfied_by(asg)
    if bad is not None:
        raise ValueError(f"assignment falsifies clause {bad + 1}: {cnf.clauses[bad]}")
    q = gadget.params.sqrt_a
    inst = gadget.instance
    H = q + 5
    plan: list[list[set[str]]] = [[set() for _ in range(H)] for _ in inst.pairs]

    def schedule_switch(pos: int, branch: str, r: int) -> None:
        """Switch at ``branch`` in round r, with the new-only nodes that follow it."""
        p = inst.pairs[pos]
        plan[pos][r - 1].add(branch)
        v = p.new_next[branch]
        while v in p.new_only:
            plan[pos][r - 1].add(v)
            v = p.new_next[v]
        for w, anchor in p.anchor.items():
            if anchor == branch:
                plan[pos][r].add(w)

    t_pos, f_pos = gadget.flow("true"), gadget.flow("false")
    for j in cnf.used_vars():
        first, second = (t_pos, f_pos) if asg.get(j, False) else (f_pos, t_pos)
        schedule_switch(first, f"w1.{j}", 1)
        schedule_switch(second, f"w1.{j}", q + 4)
    for i, c in enumerate(cnf.clauses, start=1):
        chosen = next(p for p, lit in enumerate(c, start=1) if asg.get(abs(lit), False) == (lit > 0))
        for p in (1, 2, 3):
            schedule_switch(gadget.flow("clause", p), f"u.{i}", 2 if p == chosen else q + 5)
    for k in range(q, -1, -1):
        pos = gadget.flow("ladder", k)
        r = 3 + (q - k)
        if k == q:
            schedule_switch(pos, "s", r)
        else:
            for j in cnf.used_vars():
                schedule_switch(pos, f"w1.{j}", r)
    return UpdateSchedule.from_global(plan)


def assignment_from_schedule(gadget: GadgetInstance, schedule: UpdateSchedule) -> dict[int, bool]:
    """Read x_j = true iff the true flow switched at gadget j before the false flow."""
    alpha, beta = gadget.augmentation
    report = assess(gadget.instance, schedule)
    if not (report.is_valid(alpha, beta) and report.connected):
        raise ValueError("schedule is not valid at the gadget's augmentation level")
    blocking = gadget.flow("ladder", gadget.params.sqrt_a)
    if "s" not in schedule.update_round(blocking):
        raise ValueError("the blocking flow is never updated")
    when_t = schedule.update_round(gadget.flow("true"))
    when_f = schedule.update_round(gadget.flow("false"))
    asg = {}
    for j in range(1, gadget.cnf.num_vars + 1):
        node = f"w1.{j}"
        asg[j] = node in when_t and when_t[node] < when_f.get(node, math.inf)
    bad = gadget.cnf.satisfied_by(asg)
    if bad is not None:
        raise AssertionError(f"extracted assignment falsifies clause {bad + 1}")
    return asg


def write_roles(gadget: GadgetInstance) -> str:
    """Role-map sidecar document: node roles then flow roles."""
    lines = [f"# variant {gadget.params.variant} epsilon {gadget.params.epsilon!r}", "[nodes]"]
    lines += [f"{v} " + " ".join(map(str, r)) for v, r in sorted(gadget.node_roles.items())]
    lines.append("[flows]")
    lines += [f"{i} " + " ".join(map(str, r)) for i, r in sorted(gadget.flow_roles.items())]
    return "\n".join(lines) + "\n"
