"""Batch experiment driver: per (test case, engine, toggles) run, measure
cost, feasibility, runtime, time to first feasible, and mean bandwidth/CPU
utilization, as a machine-readable table."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

from ..annealer import SAParams, solve_pipeline_sa
from ..errors import InfeasibleError
from ..exact import solve_pipeline_exact
from ..model import SystemModel, expand_security_model
from ..routing import bandwidth_utilization
from ..solution import Solution
from .generator import TestCaseSpec, generate_case, without_redundancy, without_security

FIELDS = ("case", "engine", "security", "redundancy", "feasible", "cost",
          "wall_s", "ttff_s", "mean_bandwidth", "mean_cpu")


@dataclass(frozen=True)
class ExperimentRow:
    case: str
    engine: str
    security: bool
    redundancy: bool
    feasible: bool
    cost: Optional[int]
    wall_s: float
    ttff_s: Optional[float]
    mean_bandwidth: float
    mean_cpu: float

    def as_record(self) -> dict:
        return {
            "case": self.case, "engine": self.engine,
            "security": int(self.security), "redundancy": int(self.redundancy),
            "feasible": int(self.feasible),
            "cost": "" if self.cost is None else self.cost,
            "wall_s": f"{self.wall_s:.3f}",
            "ttff_s": "" if self.ttff_s is None else f"{self.ttff_s:.3f}",
            "mean_bandwidth": f"{self.mean_bandwidth:.6f}",
            "mean_cpu": f"{self.mean_cpu:.6f}",
        }


def mean_bandwidth(model: SystemModel, solution: Solution) -> float:
    util = bandwidth_utilization(model, solution.routes)
    if not util:
        return 0.0
    return sum(float(u) for u in util.values()) / len(util)


def mean_cpu(model: SystemModel) -> float:
    """Mean fraction of each ES consumed by tasks plus MAC operations."""
    load = {es: 0.0 for es in model.network.end_systems}
    for t in model.tasks.values():
        if t.period:
            load[t.es] += t.wcet / t.period
    for s in model.streams.values():
        if not s.secure or not s.period:
            continue
        hash_t = model.network.end_systems[model.sender_es(s)].hash_time
        load[model.sender_es(s)] += hash_t / s.period
        for es in model.receiver_ess(s):
            load[es] += model.network.end_systems[es].hash_time / s.period
    return sum(load.values()) / len(load) if load else 0.0


def toggle_variants(security: bool, redundancy: bool):
    def apply(model: SystemModel) -> SystemModel:
        out = model
        if not security:
            out = without_security(out)
        if not redundancy:
            out = without_redundancy(out)
        return out
    return apply


def run_one(spec: TestCaseSpec, engine: str, security: bool, redundancy: bool,
            budget: float, sa_seed: int = 0) -> ExperimentRow:
    base = generate_case(spec)
    model = toggle_variants(security, redundancy)(base)
    name = spec.label or f"case{spec.seed}"
    started = time.monotonic()
    try:
        if engine == "exact":
            res = solve_pipeline_exact(model, budget=budget)
            wall = time.monotonic() - started
            expanded = res.model
            solution = res.solution
            feasible = True
            ttff = wall
            value = res.total_cost
        elif engine in ("sa", "sa-first"):
            params = SAParams(seed=sa_seed, max_seconds=budget,
                              stop_at_first_feasible=(engine == "sa-first"))
            res, _ = solve_pipeline_sa(model, params)
            wall = time.monotonic() - started
            expanded = expand_security_model(model)
            if expanded.security_apps:
                expanded = expanded.with_p_int(res.solution.schedule.p_int)
            solution = res.solution
            feasible = res.feasible
            ttff = res.time_to_first_feasible
            value = res.cost
        else:
            raise ValueError(f"unknown engine {engine!r}")
    except InfeasibleError:
        return ExperimentRow(case=name, engine=engine, security=security,
                             redundancy=redundancy, feasible=False, cost=None,
                             wall_s=time.monotonic() - started, ttff_s=None,
                             mean_bandwidth=0.0, mean_cpu=0.0)
    return ExperimentRow(
        case=name, engine=engine, security=security, redundancy=redundancy,
        feasible=feasible, cost=value, wall_s=wall, ttff_s=ttff,
        mean_bandwidth=mean_bandwidth(expanded, solution),
        mean_cpu=mean_cpu(expanded))


def run_experiment(specs: list[TestCaseSpec], engines=("sa-first",),
                   budget: float = 60.0, toggles: bool = True,
                   workers: int = 1) -> list[ExperimentRow]:
    """Each case runs once per engine and, with toggles on, once per
    security/redundancy combination (4 runs, baseline first)."""
    combos = [(False, False), (False, True), (True, False), (True, True)] \
        if toggles else [(True, True)]
    jobs = [(spec, engine, sec, red, budget)
            for spec in specs for engine in engines for sec, red in combos]
    if workers <= 1:
        return [run_one(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_star, jobs))


def _run_star(job):
    return run_one(*job)


def to_csv(rows: list[ExperimentRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_record())
    return buf.getvalue()


def small_task_batches(n_cases: int = 25, seed0: int = 0) -> dict[str, list[TestCaseSpec]]:
    """The four stream-size x task-size batches (8 switches, 16 ESs)."""
    out = {}
    for name, sizes, cap in (
        ("batch0-large-streams-small-tasks", (1000, 1500), 0.02),
        ("batch1-large-streams-large-tasks", (1000, 1500), 0.10),
        ("batch2-small-streams-large-tasks", (1, 250), 0.10),
        ("batch3-small-streams-small-tasks", (1, 250), 0.02),
    ):
        out[name] = [TestCaseSpec(n_es=16, n_sw=8, stream_size=sizes,
                                  wcet_fraction_cap=cap, seed=seed0 + i,
                                  label=f"{name}-{i}")
                     for i in range(n_cases)]
    return out
