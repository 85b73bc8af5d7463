"""Command-line shim solving an LP-format file with HiGHS.

Usage: ``python -m augsched.highs_runner MODEL.lp SOLUTION.txt [TIME_LIMIT]``.
The solution file holds ``status``, ``objective`` and ``var value`` lines.
"""

from __future__ import annotations

import sys


def main(argv: list[str] | None = None) -> int:
    import highspy

    args = sys.argv[1:] if argv is None else argv
    if len(args) not in (2, 3):
        print(__doc__, file=sys.stderr)
        return 2
    model, out = args[0], args[1]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("random_seed", 0)
    if len(args) == 3:
        h.setOptionValue("time_limit", float(args[2]))
    if h.readModel(model) != highspy.HighsStatus.kOk:
        print(f"cannot read {model}", file=sys.stderr)
        return 1
    h.run()
    st = h.getModelStatus()
    S = highspy.HighsModelStatus
    has_sol = h.getInfo().primal_solution_status == 2
    if st == S.kOptimal:
        status = "optimal"
    elif st in (S.kInfeasible, S.kUnboundedOrInfeasible):
        status = "infeasible"
    elif st in (S.kTimeLimit, S.kIterationLimit, S.kSolutionLimit, S.kInterrupt):
        status = "feasible" if has_sol else "timeout"
    else:
        status = "error"
    lines = [f"status {status}"]
    if status in ("optimal", "feasible"):
        lines.append(f"objective {h.getInfo().objective_function_value!r}")
        lp = h.getLp()
        values = h.getSolution().col_value
        for name, val in zip(lp.col_names_, values):
            lines.append(f"{name} {val!r}")
    else:
        lines.append("objective none")
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
