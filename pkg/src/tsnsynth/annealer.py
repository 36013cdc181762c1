"""Simulated annealing over solutions (routes, schedule).

Moves either re-route one (stream copy, receiver) pair onto another of its
precomputed k-shortest candidate paths, or swap the scheduling order of two
normal applications; order swaps are followed by the secure-stream latency
optimization, routing moves only reschedule. One seeded generator drives
every random draw in a fixed call order, so runs are reproducible.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Optional

from . import tesla
from .errors import InfeasibleError
from .heuristic import (PrecedenceGraph, asap_schedule, build_precedence_graph,
                        initial_order, optimize_latency, swap_apps)
from .model import SystemModel, communication_depth, expand_security_model
from .routing import (Path, RouteAssignment, diverse_shortest_paths,
                      find_disjoint_choices, graft_paths, overlap_count,
                      overlapping_streams, routing_cost)
from .solution import Solution, latency_sum


@dataclass
class SAParams:
    """Annealer knobs. The overlap and infeasibility penalties dominate any
    realistic latency sum, so feasible solutions always win; the remaining
    defaults are conservative and meant to be tuned per deployment."""

    t_start: float = 1000.0
    alpha: float = 0.999
    k: int = 8
    p_rmv: float = 0.3
    overlap_penalty: int = 50_000  # a
    infeasible_penalty: int = 10_000  # b
    reuse_weight: int = 10_000  # w, link weight for seeding later copies
    seed: int = 0
    max_iterations: Optional[int] = None
    max_seconds: Optional[float] = None
    backtrack_cap: int = 256
    stop_at_first_feasible: bool = False

    def validate(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0, 1)")
        if not (0.0 <= self.p_rmv <= 1.0):
            raise ValueError("p_rmv must be in [0, 1]")
        if min(self.t_start, self.k, self.overlap_penalty, self.infeasible_penalty,
               self.reuse_weight) <= 0:
            raise ValueError("t_start, k, a, b and w must be positive")


T_FLOOR = 1e-12


def acceptance_probability(delta: float, t: float) -> float:
    return math.exp(-delta / max(t, T_FLOOR))


@dataclass
class Candidate:
    """Mutable SA state: per (copy uid, receiver ES) an index into the fixed
    candidate path sets, plus the scheduling order."""

    choices: dict[tuple[str, str], int]
    order: list[str]


class AnnealContext:
    def __init__(self, model: SystemModel, params: SAParams, p_int: Optional[int]):
        params.validate()
        self.model = model
        self.params = params
        self.p_int = p_int
        self.graph: PrecedenceGraph = build_precedence_graph(model)
        self.paths: dict[tuple[str, str], list[Path]] = {}
        self._compute_candidate_paths()
        self.seed_choices: dict[tuple[str, str], int] = self._seed_disjoint_choices()

    def _compute_candidate_paths(self) -> None:
        model, params = self.model, self.params
        for sid, copies in sorted(model.distinct_streams().items()):
            used: dict[tuple[str, str], int] = {}
            for s in copies:
                root = model.sender_es(s)
                chosen: list[Path] = []
                for recv in model.receiver_ess(s):
                    if s.copy == 0 or params.k <= 1:
                        paths = diverse_shortest_paths(model.network, root, recv,
                                                       params.k)
                    else:
                        # weighted away from earlier copies, then topped up with
                        # the unweighted pool so every copy can reach every
                        # candidate the disjointness search may need
                        paths = diverse_shortest_paths(model.network, root, recv,
                                                       params.k, weights=used or None)
                        seen = set(paths)
                        paths = paths + [
                            p for p in diverse_shortest_paths(
                                model.network, root, recv, params.k)
                            if p not in seen]
                    if not paths:
                        raise InfeasibleError("routing", f"no path from {root} to {recv}",
                                              subjects=(s.uid,))
                    self.paths[(s.uid, recv)] = paths
                    chosen.append(paths[0])
                tree = graft_paths(root, chosen)
                for link in tree.links():
                    used[link] = params.reuse_weight

    def _seed_disjoint_choices(self) -> dict[tuple[str, str], int]:
        """Initial candidate indices: path 0 everywhere, except that redundant
        streams take the first index combination whose grafted copy trees are
        physically disjoint. Plain shortest paths routinely spread a
        multicast copy over several sender egress links, leaving no room for
        its siblings."""
        choices = {key: 0 for key in self.paths}
        for sid, copies in sorted(self.model.distinct_streams().items()):
            if copies[0].rl == 1:
                continue
            recvs = self.model.receiver_ess(copies[0])
            root = self.model.sender_es(copies[0])
            pools = {(ci, r): self.paths[(s.uid, r)]
                     for ci, s in enumerate(copies) for r in recvs}
            found = find_disjoint_choices(pools, root, len(copies), recvs)
            if found is None:
                # retry over the plain unweighted pools (the generator's
                # feasibility certificate used exactly these), then map the
                # found paths back to indices in the full candidate sets
                plain = {r: diverse_shortest_paths(self.model.network, root, r,
                                                   self.params.k) for r in recvs}
                sub = {(ci, r): plain[r] for ci in range(len(copies)) for r in recvs}
                hit = find_disjoint_choices(sub, root, len(copies), recvs)
                if hit is not None:
                    found = {}
                    for (ci, r), idx in hit.items():
                        path = plain[r][idx]
                        found[(ci, r)] = self.paths[(copies[ci].uid, r)].index(path)
            if found is not None:
                for (ci, r), idx in found.items():
                    choices[(copies[ci].uid, r)] = idx
        return choices

    def routes_for(self, cand: Candidate) -> RouteAssignment:
        trees = {}
        for uid, s in sorted(self.model.streams.items()):
            root = self.model.sender_es(s)
            picked = []
            for recv in self.model.receiver_ess(s):
                options = self.paths[(uid, recv)]
                picked.append(options[cand.choices.get((uid, recv), 0)])
            trees[uid] = graft_paths(root, picked)
        return RouteAssignment(trees=trees)

    def build(self, cand: Candidate, latency_opt: bool) -> Solution:
        routes = self.routes_for(cand)
        state = asap_schedule(self.model, routes, cand.order, self.graph, self.p_int,
                              self.params.backtrack_cap)
        if latency_opt:
            optimize_latency(state, self.graph)
        return Solution(routes=routes, schedule=state.to_schedule())


def initial_solution(ctx: AnnealContext) -> tuple[Candidate, Solution]:
    """Shortest candidate paths, adjusted so redundant copies start out
    disjoint where the candidate sets allow it; key applications first."""
    cand = Candidate(choices=dict(ctx.seed_choices),
                     order=initial_order(ctx.model, ctx.graph))
    return cand, ctx.build(cand, latency_opt=True)


def cost(model: SystemModel, solution: Solution, a: int, b: int) -> int:
    """a*route overlaps + total route length + b*infeasible apps + latencies."""
    return (a * overlap_count(model, solution.routes)
            + routing_cost(model, solution.routes, "strict")
            + b * len(solution.schedule.infeasible_apps)
            + latency_sum(model, solution.schedule))


def random_neighbour(ctx: AnnealContext, cand: Candidate, rng: random.Random,
                     ) -> tuple[Candidate, Solution]:
    new = Candidate(choices=dict(cand.choices), order=list(cand.order))
    if rng.random() < ctx.params.p_rmv and ctx.model.streams:
        uid = rng.choice(sorted(ctx.model.streams))
        stream = ctx.model.streams[uid]
        recv = rng.choice(ctx.model.receiver_ess(stream))
        options = ctx.paths[(uid, recv)]
        new.choices[(uid, recv)] = rng.randrange(len(options))
        return new, ctx.build(new, latency_opt=False)
    normals = [a.id for a in ctx.model.normal_apps]
    if len(normals) >= 2:
        d1, d2 = rng.sample(normals, 2)
        new.order = swap_apps(new.order, ctx.graph, d1, d2)
    return new, ctx.build(new, latency_opt=True)


@dataclass
class AnnealResult:
    solution: Solution
    cost: int
    feasible: bool
    offenders: tuple[str, ...]  # infeasible applications / overlapping streams
    iterations: int
    time_to_first_feasible: Optional[float]
    log: list[tuple[int, float, int, int]] = field(default_factory=list)


def anneal(model: SystemModel, params: SAParams, p_int: Optional[int] = None,
           ) -> AnnealResult:
    """Run the metaheuristic until the stopping criterion; the best feasible
    solution wins, otherwise the best found overall is returned flagged with
    the offending applications and streams."""
    if params.max_iterations is None and params.max_seconds is None:
        raise ValueError("no stopping criterion configured")
    rng = random.Random(params.seed)
    ctx = AnnealContext(model, params, p_int)
    a, b = params.overlap_penalty, params.infeasible_penalty

    started = time.monotonic()
    cand, sol = initial_solution(ctx)
    c = cost(model, sol, a, b)
    best_sol, best_c = sol, c
    feas_sol, feas_c = (sol, c) if sol.feasible(model) else (None, None)
    ttff = time.monotonic() - started if feas_sol is not None else None

    t = params.t_start
    log: list[tuple[int, float, int, int]] = [(0, t, c, best_c)]
    iteration = 0
    while True:
        if params.stop_at_first_feasible and feas_sol is not None:
            break
        if params.max_iterations is not None and iteration >= params.max_iterations:
            break
        if params.max_seconds is not None and time.monotonic() - started >= params.max_seconds:
            break
        iteration += 1
        new_cand, new_sol = random_neighbour(ctx, cand, rng)
        c_new = cost(model, new_sol, a, b)
        delta = c_new - c
        if delta < 0 or rng.random() < acceptance_probability(delta, t):
            cand, sol, c = new_cand, new_sol, c_new
            if c_new < best_c:
                best_sol, best_c = new_sol, c_new
            if new_sol.feasible(model) and (feas_c is None or c_new < feas_c):
                feas_sol, feas_c = new_sol, c_new
                if ttff is None:
                    ttff = time.monotonic() - started
        t = t * params.alpha
        log.append((iteration, t, c, best_c))

    if feas_sol is not None:
        return AnnealResult(solution=feas_sol, cost=feas_c, feasible=True, offenders=(),
                            iterations=iteration, time_to_first_feasible=ttff, log=log)
    offenders = tuple(sorted(best_sol.schedule.infeasible_apps)) + tuple(
        overlapping_streams(model, best_sol.routes))
    return AnnealResult(solution=best_sol, cost=best_c, feasible=False,
                        offenders=offenders, iterations=iteration,
                        time_to_first_feasible=None, log=log)


def solve_pipeline_sa(model: SystemModel, params: SAParams) -> tuple[AnnealResult, int]:
    """Expansion -> P_int -> annealing; returns the result and the bound P_int."""
    model = expand_security_model(model)
    hyper = model.hyperperiod
    if model.security_apps:
        p_int = tesla.optimize_p_int(
            [(app.id, app.period, communication_depth(app)) for app in model.normal_apps],
            hyper)
        model = model.with_p_int(p_int)
    else:
        p_int = hyper
    result = anneal(model, params, p_int)
    return result, p_int
