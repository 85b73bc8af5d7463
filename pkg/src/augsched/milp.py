"""Mixed integer program for optimal update schedules.

The model has one block of variables per (round, pair) and couples pairs only
through the per-edge capacity rows. Constraints carry a tag naming the rule
they implement so that tests can audit the inventory:

========================  ============================================
tag                       meaning
========================  ============================================
UpdateOnce                every non-terminal node of a pair updates once
OldFlow / UpdatedFlow     round-0 activity is exactly the old path
MaxRoute                  R bounds the last update round (min-R only)
remainActive              shared edges stay active
update-edge-update        a new edge is active once its tail updated
old-edge-update           an old edge is active until its tail updated
Trans1 / Trans2           during-round activity covers both endpoints
level                     ordering labels forbid during-round cycles
isFork / notFork          branching indicator follows the node update
isJoin / notJoin          merging indicator bounded by both inflows
ValidFlows                flow only on edges active during the round
FlowSource / FlowTerminal source emits, terminal absorbs one (or two)
flow-all                  conservation with branch/merge slack
CapacityCheck             demand-weighted flow within augmented capacity
========================  ============================================

Optional tightenings (off in the plain model):

``TransUpper``
    an edge is active during a round only if active before or after it.
``OldOnlyAfter``
    an old-only node is removed strictly after its anchor switched.
``NewOnlyFirst``
    a node switches onto a new-only node no earlier than that node's update.
``AfterReach`` / ``AfterRoute``
    the forwarding state after every round routes the source to the terminal.
``Reach`` / ``CoReach`` / ``Carried``
    ``flow_model="reach"`` replaces the unit-flow rows by reachability lower
    bounds, so the capacity rows see exactly the edges on some
    source-terminal route of the during-round digraph.
"""

from __future__ import annotations

import functools
import importlib.util
import os
import re
import shutil
import subprocess
import sys
import tempfile
import warnings
from collections import defaultdict
from dataclasses import dataclass, field

from .netmodel import Edge, Instance, UpdateSchedule, format_number, validate_instance

INT_TOL = 1e-6

MODES = ("rounds", "alpha", "beta")
FLOW_MODELS = ("basic", "reach")


class MilpError(RuntimeError):
    """Encoding, solving or decoding failed."""


class SolverMissing(MilpError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "B" binary, "I" integer, "C" continuous
    lb: float = 0.0
    ub: float | None = 1.0


@dataclass(frozen=True)
class Constraint:
    tag: str
    terms: tuple[tuple[str, float], ...]
    sense: str  # "<=", ">=", "="
    rhs: float


@dataclass(frozen=True)
class MilpOptions:
    flow_model: str = "reach"
    binary_flows: bool = False
    strict: bool = True

    def __post_init__(self) -> None:
        if self.flow_model not in FLOW_MODELS:
            raise ValueError(f"unknown flow model {self.flow_model!r}")


BASIC_OPTIONS = MilpOptions(flow_model="basic", strict=False)


@dataclass
class MilpModel:
    instance: Instance
    mode: str
    horizon: int
    alpha: float | None
    beta: float | None
    options: MilpOptions
    variables: dict[str, Variable] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    objective: tuple[tuple[str, float], ...] = ()

    def count(self, tag: str) -> int:
        return sum(1 for c in self.constraints if c.tag == tag)

    def tags(self) -> dict[str, int]:
        out: dict[str, int] = defaultdict(int)
        for c in self.constraints:
            out[c.tag] += 1
        return dict(out)

    def symbol_count(self, symbol: str) -> int:
        return sum(1 for n in self.variables if parse_name(n)[0] == symbol)


@dataclass(frozen=True)
class MilpSolution:
    status: str  # "optimal", "feasible", "infeasible", "timeout", "error"
    objective: float | None = None
    values: dict[str, float] = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.status in ("optimal", "feasible")


# -- naming ------------------------------------------------------------------

_SAFE = re.compile(r"[A-Za-z0-9]")


def _enc(label: str) -> str:
    return "".join(ch if _SAFE.match(ch) else f".{ord(ch):x}." for ch in label)


def _dec(token: str) -> str:
    return re.sub(r"\.([0-9a-f]+)\.", lambda m: chr(int(m.group(1), 16)), token)


def var_name(symbol: str, r: int | None = None, key=None, i: int | None = None) -> str:
    """Variable name encoding (symbol, round, node or edge, pair) losslessly."""
    parts = [symbol]
    if r is not None:
        parts.append(str(r))
    if key is not None:
        if isinstance(key, tuple):
            parts += [_enc(key[0]), _enc(key[1])]
        else:
            parts.append(_enc(key))
    if i is not None:
        parts.append(str(i))
    return "_".join(parts)


_EDGE_SYMBOLS = {"y", "g", "f"}
_NODE_SYMBOLS = {"x", "L", "U", "o", "p", "q", "a"}


def parse_name(name: str) -> tuple:
    """Inverse of :func:`var_name`."""
    parts = name.split("_")
    sym = parts[0]
    if sym in _EDGE_SYMBOLS:
        return (sym, int(parts[1]), (_dec(parts[2]), _dec(parts[3])), int(parts[4]))
    if sym in _NODE_SYMBOLS:
        return (sym, int(parts[1]), _dec(parts[2]), int(parts[3]))
    return (sym,)


# -- encoding ----------------------------------------------------------------


class _Builder:
    def __init__(self, model: MilpModel):
        self.m = model

    def var(self, name: str, kind: str, lb: float = 0.0, ub: float | None = 1.0) -> str:
        if name not in self.m.variables:
            self.m.variables[name] = Variable(name, kind, lb, ub)
        return name

    def add(self, tag: str, terms, sense: str, rhs: float) -> None:
        merged: dict[str, float] = defaultdict(float)
        for n, c in terms:
            merged[n] += c
        clean = tuple((n, c) for n, c in merged.items() if c != 0)
        self.m.constraints.append(Constraint(tag, clean, sense, float(rhs)))


def encode(
    instance: Instance,
    mode: str = "rounds",
    *,
    rounds: int | None = None,
    alpha: float = 1.0,
    beta: float = 0.0,
    horizon: int | None = None,
    options: MilpOptions = MilpOptions(),
) -> MilpModel:
    """Build the program for one objective mode.

    ``mode="rounds"`` minimises R for fixed ``alpha``/``beta`` over a horizon
    of ``horizon`` rounds (default ``k*(n-1)``). ``mode="alpha"`` or
    ``"beta"`` minimises that augmentation over exactly ``rounds`` rounds
    with the other one fixed.
    """
    if mode not in MODES:
        raise ValueError(f"unknown objective mode {mode!r}")
    problems = validate_instance(instance)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))
    n = instance.network.n
    k = instance.k
    limit = max(1, k * (n - 1))
    if mode == "rounds":
        if alpha < 1 or beta < 0:
            raise ValueError("need alpha >= 1 and beta >= 0")
        K = limit if horizon is None else horizon
        if K < 1 or K > limit:
            raise ValueError(f"horizon must lie in [1, {limit}]")
    else:
        if rounds is None or rounds < 1:
            raise ValueError("minimising augmentation needs a fixed R >= 1")
        if rounds > limit:
            raise ValueError(f"R must not exceed {limit}")
        if (mode == "alpha" and beta < 0) or (mode == "beta" and alpha < 1):
            raise ValueError("need alpha >= 1 and beta >= 0")
        K = rounds
    model = MilpModel(
        instance,
        mode,
        K,
        None if mode == "alpha" else alpha,
        None if mode == "beta" else beta,
        options,
    )
    b = _Builder(model)
    if mode == "rounds":
        R = b.var("R", "I", 0, K)
        model.objective = ((R, 1.0),)
    elif mode == "alpha":
        model.objective = ((b.var("alpha", "C", 1.0, None), 1.0),)
    else:
        model.objective = ((b.var("beta", "C", 0.0, None), 1.0),)

    flows: dict[tuple[int, Edge], list[tuple[str, float]]] = defaultdict(list)
    for i, p in enumerate(instance.pairs):
        _encode_pair(b, instance, i, K, mode, options, flows)
    cap = instance.network.capacity
    for r in range(1, K + 1):
        for e in sorted(cap):
            terms = list(flows.get((r, e), ()))
            if not terms:
                continue
            rhs = 0.0
            if mode == "alpha":
                terms.append(("alpha", -cap[e]))
                rhs = beta
            elif mode == "beta":
                terms.append(("beta", -1.0))
                rhs = alpha * cap[e]
            else:
                rhs = alpha * cap[e] + beta
            b.add("CapacityCheck", terms, "<=", rhs)
    return model


def _encode_pair(b, instance, i, K, mode, options, flows):
    p = instance.pairs[i]
    n = instance.network.n
    nodes = sorted(p.all_nodes)
    movers = [v for v in nodes if v != p.terminal]
    edges = sorted(p.all_edges)
    shared = p.old_edges & p.new_edges
    fork = {v for v in nodes if v in p.old_next and v in p.new_next and p.old_next[v] != p.new_next[v]}
    old_in = {w: v for v, w in p.old_edges}
    new_in = {w: v for v, w in p.new_edges}
    join = {v for v in nodes if v in old_in and v in new_in and old_in[v] != new_in[v]}

    X = {(r, v): b.var(var_name("x", r, v, i), "B") for r in range(1, K + 1) for v in movers}
    Y = {(r, e): b.var(var_name("y", r, e, i), "B") for r in range(0, K + 1) for e in edges}

    def upto(v, r):
        return [(X[(q, v)], 1.0) for q in range(1, r + 1)]

    for v in movers:
        b.add("UpdateOnce", upto(v, K), "=", 1)
    for e in edges:
        if e in p.old_edges:
            b.add("OldFlow", [(Y[(0, e)], 1.0)], "=", 1)
        else:
            b.add("UpdatedFlow", [(Y[(0, e)], 1.0)], "=", 0)

    for r in range(1, K + 1):
        if mode == "rounds":
            for v in movers:
                b.add("MaxRoute", [("R", 1.0), (X[(r, v)], -float(r))], ">=", 0)
        for e in edges:
            y = Y[(r, e)]
            if e in shared:
                b.add("remainActive", [(y, 1.0)], "=", 1)
            elif e in p.new_edges:
                b.add("update-edge-update", [(y, 1.0)] + [(x, -1.0) for x, _ in upto(e[0], r)], "=", 0)
            else:
                b.add("old-edge-update", [(y, 1.0)] + [(x, 1.0) for x, _ in upto(e[0], r)], "=", 1)
        G, F = {}, {}
        for e in edges:
            g = G[e] = b.var(var_name("g", r, e, i), "B")
            F[e] = b.var(var_name("f", r, e, i), "B" if options.binary_flows else "C")
            b.add("Trans1", [(g, 1.0), (Y[(r - 1, e)], -1.0)], ">=", 0)
            b.add("Trans2", [(g, 1.0), (Y[(r, e)], -1.0)], ">=", 0)
            if options.strict:
                b.add("TransUpper", [(g, 1.0), (Y[(r - 1, e)], -1.0), (Y[(r, e)], -1.0)], "<=", 0)
            ov = b.var(var_name("o", r, e[0], i), "I", 1, n)
            ow = b.var(var_name("o", r, e[1], i), "I", 1, n)
            # gamma <= (o_w - o_v - 1)/(n-1) + 1, scaled by n-1
            b.add("level", [(g, float(n - 1)), (ov, 1.0), (ow, -1.0)], "<=", n - 2)
        if options.flow_model == "basic":
            _basic_flows(b, p, i, r, nodes, edges, fork, join, old_in, new_in, X, G, F)
        else:
            _reach_flows(b, p, i, r, nodes, edges, G, F)
        for e in edges:
            flows[(r, e)].append((F[e], p.demand))
        if options.strict:
            _strict_rows(b, p, i, r, nodes, edges, X, Y, upto)


def _basic_flows(b, p, i, r, nodes, edges, fork, join, old_in, new_in, X, G, F):
    L, U = {}, {}
    for v in nodes:
        L[v] = b.var(var_name("L", r, v, i), "B")
        U[v] = b.var(var_name("U", r, v, i), "B")
        if v in fork:
            b.add("isFork", [(L[v], 1.0), (X[(r, v)], -1.0)], "=", 0)
        else:
            b.add("notFork", [(L[v], 1.0)], "=", 0)
        if v in join:
            for w in (old_in[v], new_in[v]):
                b.add("isJoin", [(U[v], 1.0), (F[(w, v)], -1.0)], "<=", 0)
        else:
            b.add("notJoin", [(U[v], 1.0)], "=", 0)
    for e in edges:
        b.add("ValidFlows", [(F[e], 1.0), (G[e], -1.0)], "<=", 0)
    out_e, in_e = defaultdict(list), defaultdict(list)
    for e in edges:
        out_e[e[0]].append(e)
        in_e[e[1]].append(e)
    s, t = p.source, p.terminal
    b.add("FlowSource", [(F[e], 1.0) for e in out_e[s]] + [(L[s], -1.0)], "=", 1)
    b.add("FlowTerminal", [(F[e], 1.0) for e in in_e[t]] + [(U[t], -1.0)], "=", 1)
    for v in nodes:
        if v in (s, t):
            continue
        terms = [(F[e], 1.0) for e in out_e[v]] + [(F[e], -1.0) for e in in_e[v]]
        b.add("flow-all", terms + [(L[v], -1.0), (U[v], 1.0)], "=", 0)


def _reach_flows(b, p, i, r, nodes, edges, G, F):
    s, t = p.source, p.terminal
    P = {v: b.var(var_name("p", r, v, i), "C") for v in nodes if v != s}
    Q = {v: b.var(var_name("q", r, v, i), "C") for v in nodes if v != t}
    for e in edges:
        b.add("ValidFlows", [(F[e], 1.0), (G[e], -1.0)], "<=", 0)
    for v, w in edges:
        g = G[(v, w)]
        # reach_w >= reach_v + g - 1, with reach_s = 1
        if w != s:
            terms = [(P[w], 1.0), (g, -1.0)] + ([(P[v], -1.0)] if v != s else [])
            b.add("Reach", terms, ">=", -1 if v != s else 0)
        if v != t:
            terms = [(Q[v], 1.0), (g, -1.0)] + ([(Q[w], -1.0)] if w != t else [])
            b.add("CoReach", terms, ">=", -1 if w != t else 0)
        terms = [(F[(v, w)], 1.0), (g, -1.0)]
        rhs = -1.0
        if v != s:
            terms.append((P[v], -1.0))
            rhs -= 1
        if w != t:
            terms.append((Q[w], -1.0))
            rhs -= 1
        b.add("Carried", terms, ">=", rhs + 1)


def _strict_rows(b, p, i, r, nodes, edges, X, Y, upto):
    for v, a in sorted(p.anchor.items()):
        # v updated by round r implies its anchor updated by round r-1
        b.add("OldOnlyAfter", upto(v, r) + [(x, -1.0) for x, _ in upto(a, r - 1)], "<=", 0)
    for u in sorted(p.changing_nodes - p.old_only):
        w = p.new_next[u]
        if w in p.new_only:
            # u switches onto new-only w no earlier than w installs its rule
            b.add("NewOnlyFirst", upto(u, r) + [(x, -1.0) for x, _ in upto(w, r)], "<=", 0)
    s = p.source
    A = {v: b.var(var_name("a", r, v, i), "C") for v in nodes if v != s}
    for e in edges:
        v, w = e
        if w == s:
            continue
        terms = [(A[w], 1.0), (Y[(r, e)], -1.0)] + ([(A[v], -1.0)] if v != s else [])
        b.add("AfterReach", terms, ">=", -1 if v != s else 0)
    for v in sorted(p.new_only):
        b.add("AfterRoute", [(A[v], 1.0)] + [(x, -1.0) for x, _ in upto(v, r)], "<=", 0)


# -- export ------------------------------------------------------------------


def _expr(terms) -> str:
    chunks = []
    for idx, (n, c) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        coef = "" if mag == 1 else f"{format_number(mag)} "
        if idx == 0:
            chunks.append(f"{'-' if c < 0 else ''}{coef}{n}")
        else:
            chunks.append(f"{sign} {coef}{n}")
    lines, line = [], ""
    for ch in chunks:
        if len(line) + len(ch) > 200:
            lines.append(line)
            line = "   "
        line += (" " if line.strip() else "") + ch
    lines.append(line)
    return "\n".join(lines)


def export(model: MilpModel) -> str:
    """Deterministic LP-format text of ``model``."""
    out = [
        f"\\ mode {model.mode} horizon {model.horizon}",
        "Minimize",
        f" obj: {_expr(model.objective)}",
        "Subject To",
    ]
    for idx, c in enumerate(model.constraints):
        lhs = _expr(c.terms) if c.terms else f"0 {next(iter(model.variables))}"
        out.append(f" {c.tag.replace('-', '.')}.{idx}: {lhs} {c.sense} {format_number(c.rhs)}")
    out.append("Bounds")
    ints, bins = [], []
    for v in model.variables.values():
        if v.kind == "B":
            bins.append(v.name)
            continue
        if v.kind == "I":
            ints.append(v.name)
        ub = "+inf" if v.ub is None else format_number(v.ub)
        out.append(f" {format_number(v.lb)} <= {v.name} <= {ub}")
    if ints:
        out.append("General")
        out += [f" {n}" for n in ints]
    if bins:
        out.append("Binary")
        out += [f" {n}" for n in bins]
    out.append("End")
    return "\n".join(out) + "\n"


# -- decoding ----------------------------------------------------------------


def decode(model: MilpModel, solution: MilpSolution) -> UpdateSchedule:
    """Schedule with U_i^r = nodes whose update variable is one in round r.

    No-op updates (nodes whose forwarding rule does not change) are dropped,
    together with leading rounds in which a pair changes nothing, which
    become its offset.
    """
    if not solution.solved:
        raise MilpError(f"cannot decode a solution with status {solution.status}")
    inst = model.instance
    rounds = [[set() for _ in range(model.horizon)] for _ in range(inst.k)]
    for name, var in model.variables.items():
        if var.kind in ("B", "I"):
            val = solution.values.get(name, 0.0)
            if abs(val - round(val)) > INT_TOL:
                raise MilpError(f"{name} = {val} is not integral")
        if not name.startswith("x_"):
            continue
        _, r, v, i = parse_name(name)
        if solution.values.get(name, 0.0) > 0.5 and v in inst.pairs[i].changing_nodes:
            rounds[i][r - 1].add(v)
    return UpdateSchedule.from_global(rounds)


# -- external solvers --------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _find_cbc() -> str | None:
    found = shutil.which("cbc")
    if found:
        return found
    try:
        import pulp
    except ImportError:
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        path = pulp.PULP_CBC_CMD().path
    return path if path and os.path.exists(path) else None


def _highs_available() -> bool:
    return importlib.util.find_spec("highspy") is not None


def available_solvers() -> list[str]:
    out = []
    if _find_cbc():
        out.append("cbc")
    if _highs_available():
        out.append("highs")
    return out


def _parse_cbc(text: str) -> MilpSolution:
    lines = text.splitlines()
    if not lines:
        raise MilpError("empty solution file")
    head = lines[0].lower()
    if "infeasible" in head:
        return MilpSolution("infeasible")
    m = re.search(r"objective value\s+(\S+)", head)
    obj = float(m.group(1)) if m else None
    if head.startswith("optimal"):
        status = "optimal"
    elif "stopped" in head:
        # an incumbent found before a time or node limit
        status = "feasible" if len(lines) > 1 else "timeout"
    else:
        raise MilpError(f"unrecognised solver status line: {lines[0]!r}")
    values = {}
    for line in lines[1:]:
        parts = line.replace("**", " ").split()
        if len(parts) >= 3:
            values[parts[1]] = float(parts[2])
    return MilpSolution(status, obj, values)


def parse_solution(text: str) -> MilpSolution:
    """Parse the ``status``/``objective`` header plus ``var value`` lines."""
    status, obj, values = None, None, {}
    for raw in text.splitlines():
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "status":
            status = parts[1]
        elif parts[0] == "objective":
            obj = None if parts[1] == "none" else float(parts[1])
        elif len(parts) == 2:
            values[parts[0]] = float(parts[1])
        else:
            raise MilpError(f"unparseable solution line: {raw!r}")
    if status is None:
        raise MilpError("solution has no status line")
    return MilpSolution(status, obj, values)


def solve_external(
    text: str, solver_cmd: str = "cbc", time_limit: float | None = None
) -> MilpSolution:
    """Solve LP-format ``text`` with an external solver process.

    ``solver_cmd`` is ``"cbc"``, ``"highs"``, or a command template with
    ``{model}`` and ``{solution}`` placeholders whose output file uses the
    ``status``/``objective``/``var value`` format of :func:`parse_solution`.
    """
    with tempfile.TemporaryDirectory() as tmp:
        lp = os.path.join(tmp, "model.lp")
        sol = os.path.join(tmp, "solution.txt")
        with open(lp, "w") as fh:
            fh.write(text)
        if solver_cmd == "cbc":
            exe = _find_cbc()
            if exe is None:
                raise SolverMissing("cbc not found")
            cmd = [exe, lp]
            if time_limit:
                cmd += ["sec", str(time_limit)]
            cmd += ["solve", "solu", sol]
            parser = _parse_cbc
        elif solver_cmd == "highs":
            if not _highs_available():
                raise SolverMissing("highspy not installed")
            cmd = [sys.executable, "-m", "augsched.highs_runner", lp, sol]
            if time_limit:
                cmd.append(str(time_limit))
            parser = parse_solution
        else:
            cmd = solver_cmd.format(model=lp, solution=sol).split()
            if shutil.which(cmd[0]) is None:
                raise SolverMissing(f"{cmd[0]} not found")
            parser = parse_solution
        wall = None if time_limit is None else time_limit * 2 + 30
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True, timeout=wall)
        except subprocess.TimeoutExpired:
            return MilpSolution("timeout")
        if proc.returncode != 0:
            raise MilpError(f"solver exited with {proc.returncode}: {proc.stderr.strip()[:500]}")
        if not os.path.exists(sol):
            raise MilpError("solver produced no solution file")
        with open(sol) as fh:
            return parser(fh.read())


def solve(model: MilpModel, solver_cmd: str = "cbc", time_limit: float | None = None):
    """Export, solve and decode; returns (solution, schedule or None)."""
    sol = solve_external(export(model), solver_cmd, time_limit)
    return sol, (decode(model, sol) if sol.solved else None)
