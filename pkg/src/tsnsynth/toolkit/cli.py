"""Command-line interface: gen, solve-exact, solve-sa, verify, export-gcl,
render, experiment."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from ..annealer import SAParams, solve_pipeline_sa
from ..errors import InfeasibleError
from ..exact import solve_pipeline_exact
from ..model import expand_security_model, validate_model
from ..verify import verify_solution
from . import experiment as exp
from .fileio import dumps_model, dumps_solution, loads_model, loads_solution
from .gcl import dumps_gcl, export_gcl
from .generator import TestCaseSpec, generate_case
from .render import render


def _load_config(path) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _sa_params(args, config: dict) -> SAParams:
    params = SAParams()
    fields = {f.name for f in dataclasses.fields(SAParams)}
    overrides = {k: v for k, v in config.get("sa", {}).items() if k in fields}
    params = dataclasses.replace(params, **overrides)
    if args.seed is not None:
        params.seed = args.seed
    if getattr(args, "iterations", None) is not None:
        params.max_iterations = args.iterations
    if args.budget is not None:
        params.max_seconds = args.budget
    if params.max_iterations is None and params.max_seconds is None:
        params.max_seconds = 60.0
    return params


def _write(path, text: str) -> None:
    if path == "-" or path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_gen(args) -> int:
    from ..model import GlobalConstants

    config = _load_config(args.config)
    fields = {f.name for f in dataclasses.fields(TestCaseSpec)}
    overrides = {k: v for k, v in config.get("generator", {}).items() if k in fields}
    for tup in ("stream_size", "rl_range", "period_set"):
        if tup in overrides:
            overrides[tup] = tuple(overrides[tup])
    spec = TestCaseSpec(n_es=args.es, n_sw=args.sw, n_tasks=args.tasks,
                        seed=args.seed or 0, **overrides)
    constants = GlobalConstants(**config.get("constants", {}))
    model = generate_case(spec, constants)
    diags = validate_model(model)
    if diags:
        for d in diags:
            print(f"generator produced invalid model: {d}", file=sys.stderr)
        return 2
    _write(args.out, dumps_model(model))
    return 0


def cmd_solve_exact(args) -> int:
    model = loads_model(Path(args.case).read_text())
    try:
        res = solve_pipeline_exact(model, budget=args.budget or 60.0,
                                   mode=args.mode, node_cap=args.node_cap)
    except InfeasibleError as err:
        print(f"infeasible at stage {err.stage}: {err}", file=sys.stderr)
        return 3
    _write(args.out, dumps_solution(res.solution))
    print(f"p_int={res.p_int} route_cost={res.route_cost} "
          f"schedule_cost={res.schedule_cost} total={res.total_cost} "
          f"optimal={int(res.optimal)}", file=sys.stderr)
    return 0


def cmd_solve_sa(args) -> int:
    model = loads_model(Path(args.case).read_text())
    params = _sa_params(args, _load_config(args.config))
    try:
        res, p_int = solve_pipeline_sa(model, params)
    except InfeasibleError as err:
        print(f"infeasible at stage {err.stage}: {err}", file=sys.stderr)
        return 3
    _write(args.out, dumps_solution(res.solution))
    if args.log is not None:
        lines = [f"{i} {t:.6f} {c} {b}" for i, t, c, b in res.log]
        Path(args.log).write_text("\n".join(lines) + "\n")
    ttff = "-" if res.time_to_first_feasible is None else \
        f"{res.time_to_first_feasible:.3f}"
    print(f"p_int={p_int} cost={res.cost} feasible={int(res.feasible)} "
          f"iterations={res.iterations} ttff={ttff}"
          + ("" if res.feasible else f" offenders={','.join(res.offenders)}"),
          file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    model = loads_model(Path(args.case).read_text())
    solution = loads_solution(Path(args.solution).read_text())
    expanded = expand_security_model(model)
    if expanded.security_apps:
        if solution.schedule.p_int is None:
            print("solution carries no P_int for a secured model", file=sys.stderr)
            return 255
        expanded = expanded.with_p_int(solution.schedule.p_int)
    report = verify_solution(expanded, solution, args.strictness)
    _write(args.report, report.to_text())
    return min(len(report.violations), 255)


def cmd_export_gcl(args) -> int:
    model = loads_model(Path(args.case).read_text())
    solution = loads_solution(Path(args.solution).read_text())
    expanded = expand_security_model(model)
    if expanded.security_apps and solution.schedule.p_int is not None:
        expanded = expanded.with_p_int(solution.schedule.p_int)
    try:
        gcls = export_gcl(expanded, solution)
    except ValueError as err:
        print(str(err), file=sys.stderr)
        return 3
    _write(args.out, dumps_gcl(gcls))
    return 0


def cmd_render(args) -> int:
    model = loads_model(Path(args.case).read_text())
    solution = None
    if args.solution:
        solution = loads_solution(Path(args.solution).read_text())
    expanded = expand_security_model(model)
    if expanded.security_apps and solution is not None \
            and solution.schedule.p_int is not None:
        expanded = expanded.with_p_int(solution.schedule.p_int)
    _write(args.out, render(expanded, solution, args.target))
    return 0


def cmd_experiment(args) -> int:
    if args.batch == "impact":
        batches = exp.small_task_batches(n_cases=args.cases, seed0=args.seed or 0)
        specs = [spec for group in batches.values() for spec in group]
        toggles = True
    else:
        specs = [TestCaseSpec(n_es=args.es, n_sw=args.sw, n_tasks=args.tasks,
                              seed=(args.seed or 0) + i, label=f"case{i}")
                 for i in range(args.cases)]
        toggles = args.toggles
    rows = exp.run_experiment(specs, engines=tuple(args.engines.split(",")),
                              budget=args.budget or 60.0, toggles=toggles,
                              workers=args.workers)
    _write(args.out, exp.to_csv(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsnsynth",
        description="TSN configuration synthesis: routes, TESLA interval, "
                    "task and gate schedules")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--budget", type=float, default=None,
                       help="wall-clock budget in seconds")
        p.add_argument("--config", default=None, help="JSON config file")

    p = sub.add_parser("gen", help="generate a synthetic test case")
    common(p)
    p.add_argument("--es", type=int, default=16)
    p.add_argument("--sw", type=int, default=8)
    p.add_argument("--tasks", type=int, default=24)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve-exact", help="exact branch-and-bound pipeline")
    common(p)
    p.add_argument("--case", required=True)
    p.add_argument("--mode", choices=("strict", "relaxed"), default="strict")
    p.add_argument("--node-cap", type=int, default=2_000_000,
                   help="search node budget")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_solve_exact)

    p = sub.add_parser("solve-sa", help="simulated annealing pipeline")
    common(p)
    p.add_argument("--case", required=True)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--out", default="-")
    p.add_argument("--log", default=None, help="iteration log file")
    p.set_defaults(func=cmd_solve_sa)

    p = sub.add_parser("verify", help="re-check a solution; exit code = violations")
    common(p)
    p.add_argument("--case", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--strictness", choices=("printed", "queue"), default="queue")
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-gcl", help="emit gate control lists")
    common(p)
    p.add_argument("--case", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_export_gcl)

    p = sub.add_parser("render", help="SVG gantt or route view")
    common(p)
    p.add_argument("--case", required=True)
    p.add_argument("--solution", default=None)
    p.add_argument("--target", choices=("gantt", "routes"), default="gantt")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("experiment", help="batch runs with metrics table")
    common(p)
    p.add_argument("--batch", default=None, help='"impact" for the 4-batch set')
    p.add_argument("--cases", type=int, default=10)
    p.add_argument("--es", type=int, default=16)
    p.add_argument("--sw", type=int, default=8)
    p.add_argument("--tasks", type=int, default=24)
    p.add_argument("--engines", default="sa-first")
    p.add_argument("--toggles", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
