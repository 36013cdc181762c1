"""Exact schedule synthesis by branch-and-bound over integer offsets.

The constraint system is compiled to difference constraints (x_i + c <= x_j)
plus two kinds of decisions: the authentication interval of each secure
stream copy, and one two-sided disjunction per interacting instance pair of
entities sharing a resource (no-overlap) or a switch egress queue (frame
isolation). Branch-and-bound resolves decisions with bounds propagation and
forcing; a fully resolved leaf is a difference-constraint polytope whose
span objective is minimized exactly by LP (the matrix is totally unimodular,
so the optimum is integral).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

from . import tesla
from .errors import InfeasibleError
from .model import SystemModel, communication_depth, expand_security_model
from .routing import RouteAssignment, optimize_routes_exact, routing_cost
from .solution import (Resource, Schedule, Solution, latency_sum,
                       stream_blocks)


@dataclass
class _Option:
    cons: list[tuple[int, int, int]] = field(default_factory=list)  # x_i + c <= x_j
    caps: list[tuple[int, int]] = field(default_factory=list)  # hi[var] <= cap
    floors: list[tuple[int, int]] = field(default_factory=list)  # lo[var] >= floor


@dataclass
class _Decision:
    label: str
    entities: tuple[str, ...]
    options: list[_Option]


@dataclass
class ExactSolution:
    schedule: Schedule
    objective: int
    optimal: bool
    gap: Optional[int] = None


class _Compiler:
    """Builds variables, base difference constraints and decisions from the
    model, routes and P_int."""

    def __init__(self, model: SystemModel, routes: RouteAssignment, p_int: Optional[int]):
        self.model = model
        self.routes = routes
        self.p_int = p_int
        self.var_names: list = []
        self.var_index: dict = {}
        self.durations: list[int] = []
        self.periods: list[int] = []
        self.lo0: list[int] = []
        self.hi0: list[int] = []
        self.cons: list[tuple[int, int, int, str]] = []
        self.decisions: list[_Decision] = []
        self.occupants: dict[Resource, list[tuple[int, str, str]]] = {}
        self._build()

    def _var(self, name, duration: int, period: int, label: str) -> int:
        idx = len(self.var_names)
        self.var_index[name] = idx
        self.var_names.append(name)
        self.durations.append(duration)
        self.periods.append(period)
        self.lo0.append(0)
        self.hi0.append(period - duration)
        if period - duration < 0:
            raise InfeasibleError("schedule", f"{label} does not fit its period",
                                  subjects=(str(name),))
        return idx

    def _add(self, i: int, j: int, c: int, label: str) -> None:
        self.cons.append((i, j, c, label))

    def _build(self) -> None:
        model = self.model
        for app in model.applications:
            if app.period is None:
                raise InfeasibleError("schedule", f"{app.id} has an unbound period",
                                      subjects=(app.id,))
            for t in app.tasks:
                v = self._var(("task", t.id), t.wcet, t.period, f"task {t.id}")
                self.occupants.setdefault(t.es, []).append((v, "task", t.id))
            for a, b in app.internal_deps:
                va = self.var_index[("task", a)]
                vb = self.var_index[("task", b)]
                self._add(va, vb, model.tasks[a].wcet, f"dep {a}->{b}")

        for uid, stream in sorted(model.streams.items()):
            tree = self.routes.tree(uid)
            specs = stream_blocks(model, stream, tree)
            block_var: dict[Resource, int] = {}
            for spec in specs:
                v = self._var(("stream", uid, spec.resource), spec.duration,
                              stream.period, f"stream {uid}")
                block_var[spec.resource] = v
                self.occupants.setdefault(spec.resource, []).append((v, "stream", uid))
            for spec in specs:
                v = block_var[spec.resource]
                if spec.prev is not None:
                    p = block_var[spec.prev]
                    self._add(p, v, self.durations[p], f"S7 {uid}")
            sender_v = self.var_index[("task", stream.sender)]
            w = model.tasks[stream.sender].wcet
            first = specs[0] if stream.secure else None
            if stream.secure:
                self._add(sender_v, block_var[first.resource], w, f"T2.1 {uid}")
            else:
                root = tree.root
                for spec in specs:
                    if spec.prev is None:
                        self._add(sender_v, block_var[spec.resource], w, f"T2.2 {uid}")
            # receiver tasks
            finals = {es: block_var[(tree.path_to(es)[-2], es)]
                      for es in model.receiver_ess(stream)}
            for tid in stream.receivers:
                tv = self.var_index[("task", tid)]
                if stream.secure:
                    ev = block_var[model.tasks[tid].es]
                    self._add(ev, tv, self.durations[ev], f"T3.1 {uid}")
                else:
                    for es, fv in sorted(finals.items()):
                        self._add(fv, tv, self.durations[fv], f"T3.2 {uid}")
            if stream.secure:
                self._tesla_decision(uid, stream, tree, block_var, finals)

        self._overlap_decisions()
        self._isolation_decisions()

    def _tesla_decision(self, uid, stream, tree, block_var, finals) -> None:
        p = self.p_int
        if p is None:
            raise InfeasibleError("schedule", "secure streams require P_int",
                                  subjects=(uid,))
        options = []
        from .model import key_verification_task
        for phi in range(1, stream.period // p + 1):
            opt = _Option()
            for es, fv in sorted(finals.items()):
                opt.caps.append((fv, phi * p - 1 - self.durations[fv]))  # S5
            for es in sorted(finals):
                kv = key_verification_task(self.model, self.model.sender_es(stream), es)
                kv_v = self.var_index[("task", kv.id)]
                val_v = block_var[es]
                opt.cons.append((kv_v, val_v, kv.wcet + phi * p))  # S6
            options.append(opt)
        if not options:
            raise InfeasibleError("schedule", f"no authentication interval fits {uid}",
                                  subjects=(uid,))
        self.decisions.append(_Decision(f"S5/S6 {uid}", (uid,), options))

    @staticmethod
    def _interaction_shifts(t1: int, t2: int) -> list[int]:
        """Relative instance shifts D = k1*t1 - k2*t2 at which two periodic
        occupancies can interact: every multiple of gcd inside (-t1, t2)."""
        g = math.gcd(t1, t2)
        first = -((t1 - 1) // g) * g
        return [d for d in range(first, t2, g)]

    def _overlap_decisions(self) -> None:
        for res in sorted(self.occupants, key=lambda r: str(r)):
            users = self.occupants[res]
            switch_egress = (isinstance(res, tuple)
                             and self.model.network.is_switch(res[0]))
            for x in range(len(users)):
                for y in range(x + 1, len(users)):
                    v1, k1, id1 = users[x]
                    v2, k2, id2 = users[y]
                    if id1 == id2:
                        continue
                    if switch_egress and (k1, k2) == ("stream", "stream"):
                        continue  # implied by the S9 queue-window disjunction
                    t1, t2 = self.periods[v1], self.periods[v2]
                    d1, d2 = self.durations[v1], self.durations[v2]
                    label = "T4" if (k1, k2) == ("task", "task") else (
                        "S8" if (k1, k2) == ("stream", "stream") else "T5")
                    for d in self._interaction_shifts(t1, t2):
                        left = _Option(cons=[(v1, v2, d1 + d)])
                        right = _Option(cons=[(v2, v1, d2 - d)])
                        self.decisions.append(_Decision(
                            f"{label} {id1}|{id2}@{res}", (id1, id2), [left, right]))

    def _isolation_decisions(self) -> None:
        """Strong frame isolation on switch egress ports: the queue windows
        [ingress offset, egress end) of two streams must not overlap, which
        implies the printed S9."""
        model = self.model
        per_link: dict[tuple[str, str], list[tuple[str, int, int]]] = {}
        for uid, stream in sorted(model.streams.items()):
            tree = self.routes.tree(uid)
            for (a, b) in tree.links():
                if not model.network.is_switch(a):
                    continue
                parent = tree.successor[a]
                v_in = self.var_index[("stream", uid, (parent, a))]
                v_eg = self.var_index[("stream", uid, (a, b))]
                per_link.setdefault((a, b), []).append((uid, v_in, v_eg))
        for link in sorted(per_link):
            users = per_link[link]
            for x in range(len(users)):
                for y in range(x + 1, len(users)):
                    u1, in1, eg1 = users[x]
                    u2, in2, eg2 = users[y]
                    t1, t2 = self.periods[eg1], self.periods[eg2]
                    for d in self._interaction_shifts(t1, t2):
                        left = _Option(cons=[(eg1, in2, self.durations[eg1] + d)])
                        right = _Option(cons=[(eg2, in1, self.durations[eg2] - d)])
                        self.decisions.append(_Decision(
                            f"S9 {u1}|{u2}@{link}", (u1, u2), [left, right]))


class _Search:
    def __init__(self, comp: _Compiler, budget: float, node_cap: int):
        self.c = comp
        self.deadline = time.monotonic() + budget
        self.node_cap = node_cap
        self.nodes = 0
        self.best_obj: Optional[int] = None
        self.best_x: Optional[list[int]] = None
        self.timed_out = False
        self.open_lb: Optional[int] = None
        self.fail_label: Optional[str] = None
        n = len(comp.var_names)
        self.out_edges: list[list[tuple[int, int, str]]] = [[] for _ in range(n)]
        self.in_edges: list[list[tuple[int, int, str]]] = [[] for _ in range(n)]
        for i, j, cst, label in comp.cons:
            self.out_edges[i].append((j, cst, label))
            self.in_edges[j].append((i, cst, label))
        self.extra: list[tuple[int, int, int, str]] = []  # decision constraints
        self.extra_out: list[list[tuple[int, int, str]]] = [[] for _ in range(n)]
        self.extra_in: list[list[tuple[int, int, str]]] = [[] for _ in range(n)]
        self.apps = [(app.id, [comp.var_index[("task", t.id)] for t in app.tasks],
                      [t.wcet for t in app.tasks], app.period)
                     for app in comp.model.applications]
        # same-ES task groups serialize; the last of a group cannot end before
        # the group's earliest start plus its total work
        self.app_groups: list[list[tuple[list[int], int]]] = []
        for app in comp.model.applications:
            per_es: dict[str, list] = {}
            for t in app.tasks:
                per_es.setdefault(t.es, []).append(t)
            groups = []
            for tasks in per_es.values():
                if len(tasks) > 1:
                    groups.append(([comp.var_index[("task", t.id)] for t in tasks],
                                   sum(t.wcet for t in tasks)))
            self.app_groups.append(groups)
        self.span_floor = self._critical_paths()

    def _critical_paths(self) -> int:
        """Static objective floor: per application, the longest duration
        chain through its tasks and stream block layouts."""
        comp = self.c
        total = 0
        for app in comp.model.applications:
            length: dict[str, int] = {}
            node_dur: dict[str, int] = {}
            succ: dict[str, list[str]] = {}
            for t in app.tasks:
                node_dur[t.id] = t.wcet
                succ[t.id] = []
            for s in app.streams:
                chain = 0
                for es in comp.model.receiver_ess(s):
                    tree = comp.routes.tree(s.uid)
                    path = tree.path_to(es)
                    d = sum(comp.durations[comp.var_index[("stream", s.uid, l)]]
                            for l in zip(path, path[1:]))
                    chain = max(chain, d)
                if s.secure:
                    ess = comp.model.network.end_systems
                    chain += ess[comp.model.sender_es(s)].hash_time
                node_dur[s.uid] = chain
                succ[s.uid] = list(s.receivers)
                succ[s.sender].append(s.uid)
            for a, b in app.internal_deps:
                succ[a].append(b)

            def longest(k: str) -> int:
                if k not in length:
                    length[k] = 0
                    length[k] = node_dur[k] + max(
                        (longest(n) for n in succ[k]), default=0)
                return length[k]

            total += max((longest(t.id) for t in app.tasks), default=0)
        return total

    # -- propagation ---------------------------------------------------------

    def _push_extra(self, i: int, j: int, cst: int, label: str) -> None:
        self.extra.append((i, j, cst, label))
        self.extra_out[i].append((j, cst, label))
        self.extra_in[j].append((i, cst, label))

    def _pop_extra(self, mark: int) -> None:
        while len(self.extra) > mark:
            i, j, cst, label = self.extra.pop()
            self.extra_out[i].pop()
            self.extra_in[j].pop()

    def _propagate(self, lo, hi, seeds) -> bool:
        """Bounds fixpoint over active difference constraints; False on a
        contradiction (records the last constraint label involved)."""
        n = len(lo)
        counts = [0] * n
        work = list(seeds)
        limit = (n + 2) * 4
        while work:
            v = work.pop()
            counts[v] += 1
            if counts[v] > limit:
                self.fail_label = "positive precedence cycle"
                return False
            lov, hiv = lo[v], hi[v]
            for j, cst, label in self.out_edges[v]:
                if lov + cst > lo[j]:
                    lo[j] = lov + cst
                    if lo[j] > hi[j]:
                        self.fail_label = label
                        return False
                    work.append(j)
            for j, cst, label in self.extra_out[v]:
                if lov + cst > lo[j]:
                    lo[j] = lov + cst
                    if lo[j] > hi[j]:
                        self.fail_label = label
                        return False
                    work.append(j)
            for i, cst, label in self.in_edges[v]:
                if hiv - cst < hi[i]:
                    hi[i] = hiv - cst
                    if lo[i] > hi[i]:
                        self.fail_label = label
                        return False
                    work.append(i)
            for i, cst, label in self.extra_in[v]:
                if hiv - cst < hi[i]:
                    hi[i] = hiv - cst
                    if lo[i] > hi[i]:
                        self.fail_label = label
                        return False
                    work.append(i)
        return True

    def _apply_option(self, opt: _Option, lo, hi, label: str) -> bool:
        seeds = []
        for var, cap in opt.caps:
            if cap < hi[var]:
                hi[var] = cap
                if lo[var] > hi[var]:
                    self.fail_label = label
                    return False
                seeds.append(var)
        for var, floor in opt.floors:
            if floor > lo[var]:
                lo[var] = floor
                if lo[var] > hi[var]:
                    self.fail_label = label
                    return False
                seeds.append(var)
        mark = len(self.extra)
        for i, j, cst in opt.cons:
            self._push_extra(i, j, cst, label)
            seeds.extend((i, j))
        if not self._propagate(lo, hi, seeds):
            self._pop_extra(mark)
            return False
        return True

    def _option_possible(self, opt: _Option, lo, hi) -> bool:
        for var, cap in opt.caps:
            if lo[var] > cap:
                return False
        for var, floor in opt.floors:
            if floor > hi[var]:
                return False
        return all(lo[i] + cst <= hi[j] for i, j, cst in opt.cons)

    def _option_implied(self, opt: _Option, lo, hi) -> bool:
        for var, cap in opt.caps:
            if hi[var] > cap:
                return False
        for var, floor in opt.floors:
            if lo[var] < floor:
                return False
        return all(hi[i] + cst <= lo[j] for i, j, cst in opt.cons)

    # -- search --------------------------------------------------------------

    def _bound(self, lo, hi) -> int:
        total = 0
        for (_, tvars, wcets, _), groups in zip(self.apps, self.app_groups):
            if not tvars:
                continue
            latest_end = max(lo[v] + w for v, w in zip(tvars, wcets))
            for gvars, work in groups:
                latest_end = max(latest_end, min(lo[v] for v in gvars) + work)
            earliest_start = min(hi[v] for v in tvars)
            total += max(0, latest_end - earliest_start)
        return max(total, self.span_floor)

    def seed_incumbent(self, offsets: dict, objective: int) -> None:
        """Adopt a known-feasible schedule (e.g. the ASAP heuristic's) as the
        starting incumbent, after re-checking it against the compiled system."""
        x = [0] * len(self.c.var_names)
        for name, idx in self.c.var_index.items():
            if name not in offsets:
                return
            x[idx] = offsets[name]
        if not all(0 <= x[i] <= self.c.hi0[i] for i in range(len(x))):
            return
        if not all(x[i] + cst <= x[j] for i, j, cst, _ in self.c.cons):
            return
        for dec in self.c.decisions:
            if not any(
                all(x[i] + cst <= x[j] for i, j, cst in o.cons)
                and all(x[v] <= cap for v, cap in o.caps)
                and all(x[v] >= fl for v, fl in o.floors)
                for o in dec.options
            ):
                return
        self.best_x = x
        self.best_obj = objective

    def solve(self) -> None:
        lo = list(self.c.lo0)
        hi = list(self.c.hi0)
        if not self._propagate(lo, hi, range(len(lo))):
            raise InfeasibleError(
                "schedule", f"unsatisfiable at {self.fail_label}",
                subjects=(self.fail_label or "",))
        status = [0] * len(self.c.decisions)  # 0 undecided, 1 settled
        ok = self._node(lo, hi, status)
        if not ok and self.best_x is None and not self.timed_out:
            raise InfeasibleError(
                "schedule", f"proven infeasible ({self.fail_label})",
                subjects=(self.fail_label or "",))

    def _node(self, lo, hi, status) -> bool:
        self.nodes += 1
        if self.nodes > self.node_cap or time.monotonic() > self.deadline:
            self.timed_out = True
            lb = self._bound(lo, hi)
            self.open_lb = lb if self.open_lb is None else min(self.open_lb, lb)
            return False

        # forcing loop
        while True:
            if self.best_obj is not None and self._bound(lo, hi) >= self.best_obj:
                return False
            forced = None
            for idx, dec in enumerate(self.c.decisions):
                if status[idx]:
                    continue
                possible = [o for o in dec.options if self._option_possible(o, lo, hi)]
                if not possible:
                    self.fail_label = dec.label
                    return False
                if len(possible) == 1:
                    forced = (idx, possible[0])
                    break
                if any(self._option_implied(o, lo, hi) for o in possible):
                    status[idx] = 1
            if forced is None:
                break
            idx, opt = forced
            if not self._apply_option(opt, lo, hi, self.c.decisions[idx].label):
                return False
            status[idx] = 1

        open_idx = [i for i, s in enumerate(status) if not s]
        if not open_idx:
            return self._leaf(lo, hi)

        # when the cheap bound comes close, the LP relaxation (undecided
        # disjunctions dropped) often closes the remaining gap outright
        if self.best_obj is not None and \
                self._bound(lo, hi) * 4 >= self.best_obj * 3:
            lp = self._lp_objective(lo, hi)
            if lp is not None and lp >= self.best_obj:
                return False

        # branch on the decision with the fewest open options
        def openness(i):
            dec = self.c.decisions[i]
            return (sum(1 for o in dec.options
                        if self._option_possible(o, lo, hi)), i)

        idx = min(open_idx, key=openness)
        dec = self.c.decisions[idx]
        # look-ahead: propagate each option once, explore by ascending bound
        # (earliest-available side wins ties), pruning dominated options here
        scored = []
        for oi, opt in enumerate(dec.options):
            if not self._option_possible(opt, lo, hi):
                continue
            lo2, hi2 = list(lo), list(hi)
            mark = len(self.extra)
            if self._apply_option(opt, lo2, hi2, dec.label):
                tie = lo[opt.cons[0][0]] if opt.cons else oi
                scored.append((self._bound(lo2, hi2), tie, oi, opt))
            self._pop_extra(mark)
        scored.sort(key=lambda s: (s[0], s[1], s[2]))
        any_ok = False
        for bound, _, _, opt in scored:
            if self.best_obj is not None and bound >= self.best_obj:
                break
            lo2, hi2 = list(lo), list(hi)
            mark = len(self.extra)
            st2 = list(status)
            st2[idx] = 1
            if self._apply_option(opt, lo2, hi2, dec.label):
                if self._node(lo2, hi2, st2):
                    any_ok = True
            self._pop_extra(mark)
            if self.timed_out:
                break
        return any_ok

    # -- leaf ----------------------------------------------------------------

    def _objective_at(self, x) -> int:
        obj = 0
        for _, tvars, wcets, _ in self.apps:
            if tvars:
                obj += max(x[v] + w for v, w in zip(tvars, wcets)) - \
                    min(x[v] for v in tvars)
        return obj

    def _leaf(self, lo, hi) -> bool:
        # the earliest-offset point is always feasible at a leaf; when it
        # already meets the bound, the LP cannot improve on it
        lb = self._bound(lo, hi)
        asap_obj = self._objective_at(lo)
        if asap_obj <= lb:
            if self.best_obj is None or asap_obj < self.best_obj:
                self.best_obj = asap_obj
                self.best_x = list(lo)
            return True
        return self._leaf_lp(lo, hi)

    def _lp_solve(self, lo, hi):
        from scipy.optimize import linprog

        nv = len(lo)
        apps = [a for a in self.apps if a[1]]
        total = nv + 2 * len(apps)  # offsets, then E_l, S_l per app
        c_vec = [0.0] * total
        bounds = [(lo[i], hi[i]) for i in range(nv)]
        rows, rhs = [], []

        def row(entries, limit):
            r = [0.0] * total
            for col, coef in entries:
                r[col] = coef
            rows.append(r)
            rhs.append(limit)

        for i, j, cst, _ in list(self.c.cons) + self.extra:
            row([(i, 1.0), (j, -1.0)], -cst)
        for a, (app_id, tvars, wcets, period) in enumerate(apps):
            e_col, s_col = nv + 2 * a, nv + 2 * a + 1
            c_vec[e_col] = 1.0
            c_vec[s_col] = -1.0
            bounds.append((0, period))
            bounds.append((0, period))
            for v, w in zip(tvars, wcets):
                row([(v, 1.0), (e_col, -1.0)], -w)  # o + w <= E
                row([(s_col, 1.0), (v, -1.0)], 0)  # S <= o
        res = linprog(c=c_vec, A_ub=rows, b_ub=rhs, bounds=bounds, method="highs")
        if not res.success:
            return None
        return res.fun, list(res.x[:nv])

    def _lp_objective(self, lo, hi) -> Optional[int]:
        solved = self._lp_solve(lo, hi)
        if solved is None:
            return None
        return math.ceil(solved[0] - 1e-6)

    def _leaf_lp(self, lo, hi) -> bool:
        solved = self._lp_solve(lo, hi)
        if solved is None:
            return False
        value, raw = solved
        x = [round(v) for v in raw]
        obj = round(value)
        if not self._integral(raw, x) or not self._check(x):
            x, obj = self._fallback(lo, hi)
        if self.best_obj is None or obj < self.best_obj:
            self.best_obj = obj
            self.best_x = x
        return True

    def _integral(self, raw, rounded) -> bool:
        return all(abs(a - b) < 1e-6 for a, b in zip(raw, rounded))

    def _check(self, x) -> bool:
        return all(x[i] + cst <= x[j] for i, j, cst, _ in list(self.c.cons) + self.extra)

    def _fallback(self, lo, hi) -> tuple[list[int], int]:
        """Earliest-offset solution; feasible by propagation fixpoint."""
        x = list(lo)
        obj = 0
        for app_id, tvars, wcets, _ in self.apps:
            if tvars:
                obj += max(x[v] + w for v, w in zip(tvars, wcets)) - min(x[v] for v in tvars)
        return x, obj


def _heuristic_incumbent(model: SystemModel, routes: RouteAssignment,
                         p_int: Optional[int]) -> Optional[tuple[dict, int]]:
    from .heuristic import asap_schedule, build_precedence_graph, initial_order, \
        optimize_latency
    graph = build_precedence_graph(model)
    state = asap_schedule(model, routes, initial_order(model, graph), graph, p_int)
    if state.infeasible_apps:
        return None
    optimize_latency(state, graph)
    sched = state.to_schedule()
    offsets: dict = {}
    for tid, o in sched.task_offsets.items():
        offsets[("task", tid)] = o
    for (uid, res), o in sched.stream_offsets.items():
        offsets[("stream", uid, res)] = o
    objective = latency_sum(model, sched)
    return offsets, objective


def solve_schedule_exact(model: SystemModel, routes: RouteAssignment,
                         p_int: Optional[int], budget: float = 60.0,
                         node_cap: int = 2_000_000) -> ExactSolution:
    """Offsets satisfying S1-S9 and T1-T5 with minimal total application span.

    Raises InfeasibleError when the instance is proven infeasible; returns a
    best-found, non-optimal-flagged solution when the budget runs out first.
    The ASAP heuristic's schedule seeds the incumbent when it is admissible,
    which only tightens pruning and never changes the optimum.
    """
    comp = _Compiler(model, routes, p_int)
    search = _Search(comp, budget, node_cap)
    seed = _heuristic_incumbent(model, routes, p_int)
    if seed is not None:
        search.seed_incumbent(*seed)
    search.solve()
    if search.best_x is None:
        raise InfeasibleError("schedule", "budget exhausted before any leaf",
                              subjects=())
    x = search.best_x
    schedule = Schedule(p_int=p_int)
    for name, idx in comp.var_index.items():
        if name[0] == "task":
            schedule.task_offsets[name[1]] = x[idx]
        else:
            schedule.stream_offsets[(name[1], name[2])] = x[idx]
    gap = None
    if search.timed_out and search.open_lb is not None:
        gap = max(0, search.best_obj - min(search.open_lb, search.best_obj))
    return ExactSolution(schedule=schedule, objective=search.best_obj,
                         optimal=not search.timed_out, gap=gap)


@dataclass
class PipelineResult:
    model: SystemModel  # expanded, P_int bound
    solution: Solution
    p_int: int
    route_cost: int
    schedule_cost: int
    optimal: bool

    @property
    def total_cost(self) -> int:
        return self.route_cost + self.schedule_cost


def solve_pipeline_exact(model: SystemModel, budget: float = 60.0,
                         mode: str = "strict", k: int = 8,
                         node_cap: int = 2_000_000) -> PipelineResult:
    """The 3-stage decomposition: disjoint routes, then P_int, then offsets."""
    model = expand_security_model(model)
    routes = optimize_routes_exact(model, mode=mode, budget=budget, k=k)
    if model.security_apps:
        p_int = tesla.optimize_p_int(
            [(a.id, a.period, communication_depth(a)) for a in model.normal_apps],
            model.hyperperiod)
        model = model.with_p_int(p_int)
    else:
        p_int = model.hyperperiod
    exact = solve_schedule_exact(model, routes, p_int, budget=budget,
                                 node_cap=node_cap)
    sol = Solution(routes=routes, schedule=exact.schedule)
    return PipelineResult(model=model, solution=sol, p_int=p_int,
                          route_cost=routing_cost(model, routes, "strict"),
                          schedule_cost=exact.objective,
                          optimal=routes.optimal and exact.optimal)
