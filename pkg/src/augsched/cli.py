"""Command-line harness: generate, schedule, assess, encode, solve, exact, gadget, sweep.

Every command reads and writes the plain-text documents owned by the library
modules. ``sweep`` emits one CSV table; its column schema is::

    topology,seed,algorithm,alpha,rounds,beta_min,feasible,wall_time_s,status

Per-instance rows come first in canonical order (topology, seed, algorithm,
alpha), followed by ``ALL`` aggregate rows holding the mean rounds and mean
beta_min over feasible rows and the feasibility percentage.
"""

from __future__ import annotations

import argparse
import csv
import io
import re
import sys
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from . import exact, milp
from .checker import assess, write_report
from .delay import DelayConfig, delay_optimize
from .greedy import greedy_all
from .hardness import (
    build_additive,
    build_multiplicative,
    read_dimacs,
    schedule_from_assignment,
    write_roles,
)
from .netmodel import (
    Instance,
    UpdateSchedule,
    format_number,
    read_instance,
    read_schedule,
    write_instance,
    write_schedule,
)
from .workload import TopologyError, WorkloadConfig, build_instance, ingest_topology, is_oversized

ALGORITHMS = ("greedy", "delay", "milp", "exact")
COLUMNS = ("topology", "seed", "algorithm", "alpha", "rounds", "beta_min", "feasible", "wall_time_s", "status")


class CliError(RuntimeError):
    """A command could not produce its output."""


def default_alpha_grid() -> tuple[float, ...]:
    return tuple(round(1 + 0.05 * i, 10) for i in range(21))


def parse_alpha_grid(text: str) -> tuple[float, ...]:
    """``lo:hi:step`` or a comma-separated list."""
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        n = int(round((hi - lo) / step))
        grid = tuple(round(lo + step * i, 10) for i in range(n + 1))
    else:
        grid = tuple(float(x) for x in text.split(",") if x.strip())
    return grid


@dataclass(frozen=True)
class ExactLimits:
    max_nodes_per_pair: int = 12
    max_pairs: int = 10
    max_horizon: int = 10

    def budget(self, timeout: float | None) -> exact.SearchBudget:
        return exact.SearchBudget(self.max_nodes_per_pair, self.max_pairs, self.max_horizon, timeout)


@dataclass(frozen=True)
class SweepSpec:
    alphas: tuple[float, ...] = field(default_factory=default_alpha_grid)
    algorithms: tuple[str, ...] = ("greedy", "delay", "exact")
    time_limit: float | None = None
    out: str | None = None
    beta: float = 0.0
    delay: DelayConfig = DelayConfig()
    limits: ExactLimits = ExactLimits()
    solver_cmd: str = "cbc"
    milp_options: milp.MilpOptions = milp.MilpOptions()
    record_time: bool = False

    def __post_init__(self) -> None:
        if not self.alphas:
            raise ValueError("empty alpha grid")
        if any(not 1 <= a <= 2 for a in self.alphas):
            raise ValueError("alpha grid must lie within [1, 2]")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown or not self.algorithms:
            raise ValueError(f"unknown algorithms {sorted(unknown)}")


# -- topologies and instances -------------------------------------------------

def bundled_topologies() -> list[tuple[str, str]]:
    """(name, GraphML document) for the topologies shipped with the package."""
    data = resources.files("augsched") / "data"
    return sorted(
        (p.name[: -len(".graphml")], p.read_text())
        for p in data.iterdir()
        if p.name.endswith(".graphml")
    )


def load_topologies(directory: str | Path | None) -> list[tuple[str, str]]:
    if directory is None:
        return bundled_topologies()
    paths = sorted(Path(directory).glob("*.graphml"))
    return [(p.stem, p.read_text()) for p in paths]


def instance_label(path: str | Path) -> tuple[str, str]:
    """(topology, seed) from a ``NAME-sSEED.inst`` file name."""
    stem = Path(path).stem
    m = re.fullmatch(r"(.+)-s(\d+)", stem)
    return (m.group(1), m.group(2)) if m else (stem, "")


def cmd_generate(
    topology_dir: str | Path | None,
    config: WorkloadConfig,
    out_dir: str | Path,
    seeds: Sequence[int] = (0,),
    max_nodes: int = 100,
    log=None,
) -> list[Path]:
    """One instance document per usable topology per seed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, doc in load_topologies(topology_dir):
        try:
            net = ingest_topology(doc)
        except TopologyError as exc:
            _log(log, f"skip {name}: {exc}")
            continue
        if is_oversized(net, max_nodes):
            _log(log, f"skip {name}: {net.n} nodes exceed {max_nodes}")
            continue
        for seed in seeds:
            inst = build_instance(net, config, seed=seed)
            path = out / f"{name}-s{seed}.inst"
            path.write_text(write_instance(inst))
            written.append(path)
    return written


def _log(log, msg: str) -> None:
    if log is not None:
        print(msg, file=log)


# -- scheduling -----------------------------------------------------------------

def _checked(instance: Instance, schedule: UpdateSchedule, alpha: float | None = None, beta: float = 0.0):
    report = assess(instance, schedule)
    if not (report.loop_free and report.connected):
        raise CliError("produced schedule fails loop freedom or connectivity")
    if alpha is not None and not report.is_valid(alpha, beta):
        raise CliError(f"produced schedule is not ({alpha}, {beta})-valid")
    return report


def cmd_schedule(
    instance: Instance,
    algorithm: str,
    *,
    alpha: float = 1.0,
    beta: float = 0.0,
    delay: DelayConfig = DelayConfig(),
    limits: ExactLimits = ExactLimits(),
    solver_cmd: str = "cbc",
    time_limit: float | None = None,
    options: milp.MilpOptions = milp.MilpOptions(),
):
    """Schedule one instance; returns (schedule, report) after validation.

    ``greedy`` and ``delay`` ignore the augmentation; ``exact`` and ``milp``
    minimise rounds subject to it.
    """
    if algorithm == "greedy":
        sched = greedy_all(instance)
        return sched, _checked(instance, sched)
    if algorithm == "delay":
        sched = delay_optimize(instance, greedy_all(instance), delay)
        return sched, _checked(instance, sched)
    if algorithm == "exact":
        res = exact.optimal_rounds(instance, alpha, beta, limits.budget(time_limit))
        if not res.feasible:
            raise CliError(f"no schedule within {limits.max_horizon} rounds at ({alpha}, {beta})")
        return res.schedule, _checked(instance, res.schedule, alpha, beta)
    if algorithm == "milp":
        model = milp.encode(instance, "rounds", alpha=alpha, beta=beta, options=options)
        sol, sched = milp.solve(model, solver_cmd, time_limit)
        if sched is None:
            raise CliError(f"solver status {sol.status}")
        return sched, _checked(instance, sched, alpha, beta)
    raise ValueError(f"unknown algorithm {algorithm!r}")


# -- sweep --------------------------------------------------------------------

def _row(label, algorithm, alpha, rounds, beta_min, feasible, wall, status):
    return {
        "topology": label[0],
        "seed": label[1],
        "algorithm": algorithm,
        "alpha": format_number(alpha),
        "rounds": "" if rounds is None else str(rounds),
        "beta_min": "" if beta_min is None else format_number(beta_min),
        "feasible": "" if feasible is None else str(feasible).lower(),
        "wall_time_s": "" if wall is None else f"{wall:.3f}",
        "status": status,
    }


def _sweep_task(task) -> list[dict[str, str]]:
    path, algorithm, spec = task
    label = instance_label(path)
    instance = read_instance(Path(path).read_text())
    clock = time.perf_counter
    rows = []
    if algorithm in ("greedy", "delay"):
        t0 = clock()
        try:
            sched, report = cmd_schedule(instance, algorithm, delay=spec.delay)
        except (CliError, ValueError) as exc:
            return [_row(label, algorithm, a, None, None, None, None, f"error: {exc}") for a in spec.alphas]
        wall = clock() - t0 if spec.record_time else None
        for a in spec.alphas:
            ok = report.is_valid(a, spec.beta)
            rows.append(_row(label, algorithm, a, sched.horizon, report.beta_min, ok, wall, "ok"))
        return rows
    for a in spec.alphas:
        t0 = clock()
        status, rounds, beta_min, feasible = "ok", None, None, None
        try:
            if algorithm == "exact":
                res = exact.optimal_rounds(instance, a, spec.beta, spec.limits.budget(spec.time_limit))
                sched = res.schedule
                status = res.status
            else:
                model = milp.encode(instance, "rounds", alpha=a, beta=spec.beta, options=spec.milp_options)
                sol, sched = milp.solve(model, spec.solver_cmd, spec.time_limit)
                status = sol.status
            feasible = sched is not None
            if sched is not None:
                report = _checked(instance, sched, a, spec.beta)
                rounds, beta_min = sched.horizon, report.beta_min
            elif status not in ("infeasible",):
                feasible = None
        except exact.BudgetExceeded as exc:
            status = f"budget: {exc}"
        except milp.SolverMissing:
            status = "solver-missing"
        except (milp.MilpError, CliError, ValueError) as exc:
            status = f"error: {exc}"
        wall = clock() - t0 if spec.record_time else None
        rows.append(_row(label, algorithm, a, rounds, beta_min, feasible, wall, status))
    return rows


def _sort_key(row: dict[str, str]):
    seed = int(row["seed"]) if row["seed"].isdigit() else -1
    return (row["topology"], seed, row["seed"], ALGORITHMS.index(row["algorithm"]), float(row["alpha"]))


def aggregate(rows: Sequence[dict[str, str]], spec: SweepSpec) -> list[dict[str, str]]:
    """Per (algorithm, alpha): mean rounds, mean beta_min, percent feasible."""
    out = []
    for algorithm in spec.algorithms:
        for a in spec.alphas:
            key = format_number(a)
            sel = [r for r in rows if r["algorithm"] == algorithm and r["alpha"] == key]
            decided = [r for r in sel if r["feasible"]]
            ok = [r for r in decided if r["feasible"] == "true"]
            rounds = [int(r["rounds"]) for r in ok]
            betas = [float(r["beta_min"]) for r in ok]
            out.append({
                "topology": "ALL",
                "seed": "",
                "algorithm": algorithm,
                "alpha": key,
                "rounds": format_number(round(sum(rounds) / len(rounds), 6)) if rounds else "",
                "beta_min": format_number(round(sum(betas) / len(betas), 6)) if betas else "",
                "feasible": format_number(round(100 * len(ok) / len(decided), 4)) if decided else "",
                "wall_time_s": "",
                "status": f"aggregate {len(decided)}/{len(sel)}",
            })
    return out


def sweep_rows(instances: Sequence[str | Path], spec: SweepSpec, jobs: int = 1) -> list[dict[str, str]]:
    tasks = [(str(p), alg, spec) for p in instances for alg in spec.algorithms]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sweep_task, tasks))
    else:
        chunks = [_sweep_task(t) for t in tasks]
    rows = sorted((r for c in chunks for r in c), key=_sort_key)
    return rows + aggregate(rows, spec)


def cmd_sweep(instances: Sequence[str | Path], spec: SweepSpec, jobs: int = 1) -> str:
    """CSV table for every (instance, algorithm, alpha); written to ``spec.out`` if set."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(sweep_rows(instances, spec, jobs))
    text = buf.getvalue()
    if spec.out is not None:
        Path(spec.out).write_text(text)
    return text


# -- argument parsing ---------------------------------------------------------

def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _limits(args) -> ExactLimits:
    return ExactLimits(args.max_nodes_per_pair, args.max_pairs, args.max_horizon)


def _milp_options(args) -> milp.MilpOptions:
    if args.plain:
        return replace(milp.BASIC_OPTIONS, binary_flows=args.binary_flows)
    return milp.MilpOptions(args.flow_model, args.binary_flows, strict=True)


def _read_inst(path: str) -> Instance:
    return read_instance(Path(path).read_text())


def _run_generate(args) -> int:
    config = WorkloadConfig(
        pair_count=args.pairs,
        growth_factor=args.growth,
        rng_seed=args.seed,
        weights=args.weights,
        waypoint_mode=args.waypoint_mode,
        baseline_count=args.baseline_count,
    )
    if args.seeds < 1:
        raise CliError("--seeds must be at least 1")
    seeds = range(args.seed, args.seed + args.seeds)
    paths = cmd_generate(args.topology_dir, config, args.out or ".", seeds, args.max_nodes, log=sys.stderr)
    for p in paths:
        print(p)
    return 0


def _run_schedule(args) -> int:
    inst = _read_inst(args.instance)
    sched, report = cmd_schedule(
        inst,
        args.algorithm,
        alpha=args.alpha,
        beta=args.beta,
        delay=DelayConfig(args.delay_threshold, args.delay_objective),
        limits=_limits(args),
        solver_cmd=args.solver_cmd,
        time_limit=args.time_limit,
        options=_milp_options(args),
    )
    _emit(write_schedule(sched, inst), args.out)
    if args.report:
        Path(args.report).write_text(write_report(report))
    a, b, r, _ = report.summary
    print(f"rounds {r} alpha_min {format_number(a)} beta_min {format_number(b)}", file=sys.stderr)
    return 0


def _run_assess(args) -> int:
    inst = _read_inst(args.instance)
    sched = read_schedule(Path(args.schedule).read_text(), inst)
    _emit(write_report(assess(inst, sched)), args.out)
    return 0


def _encode(args) -> milp.MilpModel:
    inst = _read_inst(args.instance)
    return milp.encode(
        inst,
        args.objective,
        rounds=args.rounds,
        alpha=args.alpha,
        beta=args.beta,
        horizon=args.horizon,
        options=_milp_options(args),
    )


def _run_encode(args) -> int:
    model = _encode(args)
    _emit(milp.export(model), args.out)
    print(f"{len(model.variables)} variables, {len(model.constraints)} constraints", file=sys.stderr)
    return 0


def _run_solve(args) -> int:
    model = _encode(args)
    sol, sched = milp.solve(model, args.solver_cmd, args.time_limit)
    obj = "none" if sol.objective is None else format_number(sol.objective)
    print(f"status {sol.status} objective {obj}", file=sys.stderr)
    if sched is None:
        return 1
    _checked(model.instance, sched)
    _emit(write_schedule(sched, model.instance), args.out)
    return 0


def _run_exact(args) -> int:
    inst = _read_inst(args.instance)
    budget = _limits(args).budget(args.time_limit)
    if args.objective == "rounds":
        res = exact.optimal_rounds(inst, args.alpha, args.beta, budget)
    else:
        if args.rounds is None:
            raise CliError("--rounds is required for the alpha and beta objectives")
        solver = exact.optimal_alpha if args.objective == "alpha" else exact.optimal_beta
        res = solver(inst, args.rounds, budget)
    value = "none" if res.value is None else format_number(res.value)
    print(f"status {res.status} value {value}", file=sys.stderr)
    if not res.feasible:
        return 1
    _checked(inst, res.schedule)
    _emit(write_schedule(res.schedule, inst), args.out)
    return 0


def _run_gadget(args) -> int:
    cnf = read_dimacs(Path(args.cnf).read_text())
    build = build_multiplicative if args.variant == "mult" else build_additive
    gadget = build(cnf, args.epsilon)
    prefix = args.out or Path(args.cnf).with_suffix("").as_posix()
    Path(prefix + ".inst").write_text(write_instance(gadget.instance))
    Path(prefix + ".roles").write_text(write_roles(gadget))
    a, b = gadget.augmentation
    print(f"augmentation alpha {format_number(a)} beta {format_number(b)}", file=sys.stderr)
    if args.assignment is not None:
        lits = [int(x) for x in args.assignment.replace(",", " ").split()]
        assignment = {abs(x): x > 0 for x in lits}
        sched = schedule_from_assignment(gadget, assignment)
        _checked(gadget.instance, sched, a, b)
        Path(prefix + ".sched").write_text(write_schedule(sched, gadget.instance))
    return 0


def _run_sweep(args) -> int:
    spec = SweepSpec(
        alphas=parse_alpha_grid(args.alphas) if args.alphas else default_alpha_grid(),
        algorithms=tuple(a.strip() for a in args.algorithms.split(",")),
        time_limit=args.time_limit,
        out=None if args.out in (None, "-") else args.out,
        beta=args.beta,
        delay=DelayConfig(args.delay_threshold, args.delay_objective),
        limits=_limits(args),
        solver_cmd=args.solver_cmd,
        milp_options=_milp_options(args),
        record_time=args.record_time,
    )
    text = cmd_sweep(args.instances, spec, jobs=args.jobs)
    if spec.out is None:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base random seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--out", help="output path (stdout when omitted)")

    aug = argparse.ArgumentParser(add_help=False)
    aug.add_argument("--alpha", type=float, default=1.0)
    aug.add_argument("--beta", type=float, default=0.0)

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--solver-cmd", default="cbc", help="cbc, highs, or a command template")
    solver.add_argument("--time-limit", type=float, default=None, help="seconds per solve")
    solver.add_argument("--flow-model", choices=milp.FLOW_MODELS, default="reach")
    solver.add_argument("--binary-flows", action="store_true")
    solver.add_argument("--plain", action="store_true", help="omit the strict rows and use unit flows")

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--max-nodes-per-pair", type=int, default=ExactLimits.max_nodes_per_pair)
    search.add_argument("--max-pairs", type=int, default=ExactLimits.max_pairs)
    search.add_argument("--max-horizon", type=int, default=ExactLimits.max_horizon)

    delay = argparse.ArgumentParser(add_help=False)
    delay.add_argument("--delay-threshold", type=int, default=3)
    delay.add_argument("--delay-objective", choices=("mult", "add"), default="mult")

    p = argparse.ArgumentParser(prog="augsched", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="build instances from topologies")
    g.add_argument("topology_dir", nargs="?", help="directory of .graphml files (bundled set if omitted)")
    g.add_argument("--pairs", type=int, default=WorkloadConfig.pair_count)
    g.add_argument("--growth", type=float, default=WorkloadConfig.growth_factor)
    g.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    g.add_argument("--max-nodes", type=int, default=100)
    g.add_argument("--weights", choices=("shared", "per-pair"), default="shared")
    g.add_argument("--waypoint-mode", choices=("independent", "same"), default="independent")
    g.add_argument("--baseline-count", type=int, default=None)
    g.set_defaults(run=_run_generate)

    s = sub.add_parser("schedule", parents=[common, aug, solver, search, delay], help="compute a schedule")
    s.add_argument("instance")
    s.add_argument("--algorithm", choices=ALGORITHMS, default="greedy")
    s.add_argument("--report", help="also write the checker report here")
    s.set_defaults(run=_run_schedule)

    a = sub.add_parser("assess", parents=[common], help="check a schedule")
    a.add_argument("instance")
    a.add_argument("schedule")
    a.set_defaults(run=_run_assess)

    for name, run, extra in (("encode", _run_encode, []), ("solve", _run_solve, [])):
        e = sub.add_parser(name, parents=[common, aug, solver, *extra], help=f"{name} the integer program")
        e.add_argument("instance")
        e.add_argument("--objective", choices=milp.MODES, default="rounds")
        e.add_argument("--rounds", type=int, default=None, help="fixed horizon for alpha/beta objectives")
        e.add_argument("--horizon", type=int, default=None, help="round limit for the rounds objective")
        e.set_defaults(run=run)

    x = sub.add_parser("exact", parents=[common, aug, search], help="exhaustive optimum")
    x.add_argument("instance")
    x.add_argument("--objective", choices=milp.MODES, default="rounds")
    x.add_argument("--rounds", type=int, default=None)
    x.add_argument("--time-limit", type=float, default=None)
    x.set_defaults(run=_run_exact)

    h = sub.add_parser("gadget", parents=[common], help="hardness gadget from a DIMACS formula")
    h.add_argument("cnf")
    h.add_argument("--variant", choices=("mult", "add"), default="mult")
    h.add_argument("--epsilon", type=float, default=0.25)
    h.add_argument("--assignment", help="literals such as '1 -2 3'; writes PREFIX.sched")
    h.set_defaults(run=_run_gadget)

    w = sub.add_parser("sweep", parents=[common, solver, search, delay], help="augmentation sweep to CSV")
    w.add_argument("instances", nargs="+")
    w.add_argument("--algorithms", default="greedy,delay,exact")
    w.add_argument("--alphas", help="lo:hi:step or comma list (default 1:2:0.05)")
    w.add_argument("--beta", type=float, default=0.0)
    w.add_argument("--record-time", action="store_true", help="fill wall_time_s (breaks byte determinism)")
    w.set_defaults(run=_run_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except (CliError, milp.MilpError, exact.BudgetExceeded, TopologyError) as exc:
        print(f"augsched {args.command}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"augsched {args.command}: {exc}", file=sys.stderr)
        return 2
