"""Independent solution checker: re-validates routes and schedules against
every constraint family by brute-force expansion of all task/frame instances
within the hyperperiod. Shares the domain model with the solvers but none of
their interval algebra; this is the repo's oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .model import SECURITY, Stream, SystemModel, TASK_KEY_VERIFY
from .solution import Solution

PRINTED = "printed"
QUEUE = "queue"


@dataclass(frozen=True)
class Violation:
    constraint: str
    entities: tuple[str, ...]
    detail: str

    def __str__(self) -> str:
        return f"{self.constraint} [{', '.join(self.entities)}] {self.detail}"


@dataclass
class VerifyReport:
    violations: list[Violation] = field(default_factory=list)
    strictness: str = PRINTED

    @property
    def ok(self) -> bool:
        return not self.violations

    def of(self, constraint: str) -> list[Violation]:
        return [v for v in self.violations if v.constraint == constraint]

    def to_text(self) -> str:
        if self.ok:
            return "verification passed: 0 violations\n"
        lines = [f"verification failed: {len(self.violations)} violations"]
        lines += [f"  {v}" for v in self.violations]
        return "\n".join(lines) + "\n"


def _instances(offset: int, duration: int, period: int, horizon: int,
               ) -> list[tuple[int, int]]:
    return [(offset + k * period, offset + k * period + duration)
            for k in range(horizon // period)]


def _overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


class _Checker:
    def __init__(self, model: SystemModel, solution: Solution, strictness: str):
        self.model = model
        self.sol = solution
        self.strictness = strictness
        self.out: list[Violation] = []
        self.horizon = model.hyperperiod
        self.skip_apps = set(solution.schedule.infeasible_apps)

    def add(self, constraint: str, entities: Iterable[str], detail: str) -> None:
        self.out.append(Violation(constraint, tuple(entities), detail))

    # -- routing ------------------------------------------------------------

    def check_routes(self) -> None:
        net = self.model.network
        for uid, stream in sorted(self.model.streams.items()):
            tree = self.sol.routes.trees.get(uid)
            if tree is None:
                self.add("R3.1", (uid,), "no route assigned")
                continue
            succ = tree.successor
            sender = self.model.sender_es(stream)
            receivers = set(self.model.receiver_ess(stream))
            if succ.get(sender) != sender:
                self.add("R3.2", (uid,), f"sender {sender} is not its own successor")
            for r in sorted(receivers):
                if r not in succ:
                    self.add("R3.1", (uid, r), "receiver has no successor")
            for n in sorted(succ):
                if net.is_es(n) and n != sender and n not in receivers:
                    self.add("R3.3", (uid, n), "non-receiver ES on route")
            for n in sorted(succ):
                walked, cur = {n}, n
                while True:
                    parent = succ.get(cur)
                    if parent is None:
                        self.add("R2", (uid, cur), "successor chain leaves the route")
                        break
                    if parent == cur:
                        if cur != sender:
                            self.add("R1", (uid, cur), "route rooted off the sender")
                        break
                    if parent in walked:
                        self.add("R1", (uid, n), "cycle in successor chain")
                        break
                    walked.add(parent)
                    cur = parent
            used = {p for n, p in succ.items() if p != n}
            for n in sorted(succ):
                if n != sender and n not in receivers and n not in used:
                    self.add("R2", (uid, n), "dangling node on route")
            for n, p in sorted(succ.items()):
                if p != n and (p, n) not in net.links:
                    self.add("R1", (uid, f"{p}->{n}"), "link does not exist")

        for (a, b), link in sorted(net.links.items()):
            load = 0.0
            for sid, copies in self.model.distinct_streams().items():
                if copies[0].period is None:
                    continue
                uses = any(
                    (a, b) in self._route_links(c.uid) for c in copies
                    if self.sol.routes.trees.get(c.uid) is not None)
                if uses:
                    load += self.model.wire_bytes(copies[0]) / copies[0].period
            if load > float(link.speed):
                self.add("R5", (f"{a}->{b}",), f"bandwidth {load:.4f} B/us exceeds link speed")

        for sid, copies in sorted(self.model.distinct_streams().items()):
            for c1, c2 in itertools.combinations(copies, 2):
                l1, l2 = self._route_links(c1.uid), self._route_links(c2.uid)
                for shared in sorted(set(l1) & set(l2)):
                    self.add("R6", (c1.uid, c2.uid),
                             f"copies share link {shared[0]}->{shared[1]}")

    def _route_links(self, uid: str) -> set[tuple[str, str]]:
        tree = self.sol.routes.trees.get(uid)
        if tree is None:
            return set()
        return {(p, n) for n, p in tree.successor.items() if p != n}

    # -- schedule -----------------------------------------------------------

    def _stream_resources(self, stream: Stream) -> tuple[list, list]:
        """(link resources in no particular order, ES resources) on route."""
        links = sorted(self._route_links(stream.uid))
        ess = []
        if stream.secure:
            ess.append(self.model.sender_es(stream))
            ess.extend(self.model.receiver_ess(stream))
        return links, ess

    def _link_dur(self, stream: Stream, link: tuple[str, str]) -> int:
        return self.model.link_duration(stream, self.model.network.links[link])

    def _scheduled(self, stream: Stream) -> bool:
        return self.model.app_of_stream[stream.uid].id not in self.skip_apps

    def check_schedule(self) -> None:
        model, sched = self.model, self.sol.schedule
        for app_id in sorted(self.skip_apps):
            self.add("FEAS", (app_id,), "application marked infeasible")

        # presence, domains, S1 deadlines
        for app in model.applications:
            if app.id in self.skip_apps:
                continue
            offs, ends = [], []
            for t in app.tasks:
                o = sched.task_offsets.get(t.id)
                if o is None:
                    self.add("MISSING", (t.id,), "task has no offset")
                    continue
                if o < 0 or o + t.wcet > t.period:
                    self.add("S3", (t.id,), f"task outside its period: o={o}")
                offs.append(o)
                ends.append(o + t.wcet)
            if offs and max(ends) - min(offs) > app.period:
                self.add("S1", (app.id,),
                         f"span {max(ends) - min(offs)} exceeds period {app.period}")
            for s in app.streams:
                links, ess = self._stream_resources(s)
                for res in links + ess:
                    o = sched.stream_offsets.get((s.uid, res))
                    if o is None:
                        self.add("MISSING", (s.uid,), f"no offset on {res}")
                        continue
                    dur = self._link_dur(s, res) if isinstance(res, tuple) else \
                        model.network.end_systems[res].hash_time
                    if o < 0 or o + dur > s.period:
                        self.add("S3", (s.uid, str(res)), f"block outside period: o={o}")
                extra = [r for (uid, r) in sched.stream_offsets
                         if uid == s.uid and r not in links + ess]
                for r in extra:
                    self.add("S2", (s.uid, str(r)), "offset on a resource off the route")

        self._check_precedence()
        self._check_tesla()
        self._check_no_overlap()
        self._check_isolation()

    def _block(self, stream: Stream, res) -> Optional[tuple[int, int]]:
        o = self.sol.schedule.stream_offsets.get((stream.uid, res))
        if o is None:
            return None
        dur = self._link_dur(stream, res) if isinstance(res, tuple) else \
            self.model.network.end_systems[res].hash_time
        return (o, o + dur)

    def _check_precedence(self) -> None:
        model, sched = self.model, self.sol.schedule
        for uid, stream in sorted(model.streams.items()):
            if not self._scheduled(stream) or self.sol.routes.trees.get(uid) is None:
                continue
            tree = self.sol.routes.trees[uid]
            sender_es = model.sender_es(stream)
            sender_end = None
            if stream.sender in sched.task_offsets:
                sender_end = sched.task_offsets[stream.sender] + model.tasks[stream.sender].wcet
            first_links = [(p, n) for n, p in tree.successor.items()
                           if p == sender_es and n != sender_es]
            for es in model.receiver_ess(stream):
                path = tree.path_to(es)
                hops = list(zip(path, path[1:]))
                for h1, h2 in zip(hops, hops[1:]):
                    b1, b2 = self._block(stream, h1), self._block(stream, h2)
                    if b1 and b2 and b1[1] > b2[0]:
                        self.add("S7.1", (uid,), f"{h1} ends {b1[1]} after {h2} starts {b2[0]}")
            if stream.secure:
                mac = self._block(stream, sender_es)
                if mac:
                    if sender_end is not None and sender_end > mac[0]:
                        self.add("T2.1", (uid, stream.sender),
                                 f"task ends {sender_end}, MAC generation starts {mac[0]}")
                    for fl in first_links:
                        b = self._block(stream, fl)
                        if b and mac[1] > b[0]:
                            self.add("S7.2", (uid,), f"MAC ends {mac[1]} after link starts {b[0]}")
                for es in model.receiver_ess(stream):
                    last = (tree.path_to(es)[-2], es)
                    arr, val = self._block(stream, last), self._block(stream, es)
                    if arr and val and arr[1] > val[0]:
                        self.add("S7.3", (uid, es),
                                 f"arrival ends {arr[1]}, validation starts {val[0]}")
            else:
                for fl in first_links:
                    b = self._block(stream, fl)
                    if b and sender_end is not None and sender_end > b[0]:
                        self.add("T2.2", (uid, stream.sender),
                                 f"task ends {sender_end}, link starts {b[0]}")
            # receiver tasks
            arrivals = []
            for es in model.receiver_ess(stream):
                last = (tree.path_to(es)[-2], es)
                b = self._block(stream, last)
                if b:
                    arrivals.append(b[1])
            for tid in stream.receivers:
                if tid not in sched.task_offsets:
                    continue
                o_t = sched.task_offsets[tid]
                if stream.secure:
                    val = self._block(stream, model.tasks[tid].es)
                    if val and val[1] > o_t:
                        self.add("T3.1", (uid, tid),
                                 f"validation ends {val[1]}, task starts {o_t}")
                else:
                    for a in arrivals:
                        if a > o_t:
                            self.add("T3.2", (uid, tid),
                                     f"arrival ends {a}, task starts {o_t}")
        # ES-internal dependencies
        for app in model.applications:
            if app.id in self.skip_apps:
                continue
            for a, b in app.internal_deps:
                if a in sched.task_offsets and b in sched.task_offsets:
                    end_a = sched.task_offsets[a] + model.tasks[a].wcet
                    if end_a > sched.task_offsets[b]:
                        self.add("T2.2", (a, b), "dependent task starts before producer ends")

    def _check_tesla(self) -> None:
        model, sched = self.model, self.sol.schedule
        p = sched.p_int
        secure = [s for s in model.streams.values() if s.secure and self._scheduled(s)]
        if secure and p is None:
            self.add("S5", ("P_int",), "secure streams present but no P_int")
            return
        for stream in sorted(secure, key=lambda s: s.uid):
            tree = self.sol.routes.trees.get(stream.uid)
            if tree is None:
                continue
            arrivals = []
            for es in model.receiver_ess(stream):
                b = self._block(stream, (tree.path_to(es)[-2], es))
                if b:
                    arrivals.append(b[1])
            if not arrivals:
                continue
            phi = max(arrivals) // p + 1  # smallest index after the last arrival interval
            if phi * p >= stream.period:
                self.add("S5", (stream.uid,),
                         f"arrival at {max(arrivals)} leaves no interval {phi} within the period")
                continue
            for es in model.receiver_ess(stream):
                kv = self._kv_task(model.sender_es(stream), es)
                if kv is None or kv.id not in sched.task_offsets:
                    self.add("S6", (stream.uid, es), "no scheduled key verification task")
                    continue
                kv_end = sched.task_offsets[kv.id] + kv.wcet
                val = self._block(stream, es)
                if val and val[0] < phi * p + kv_end:
                    self.add("S6", (stream.uid, es),
                             f"validation at {val[0]} before key instance ends {phi * p + kv_end}")

    def _kv_task(self, sender_es: str, receiver_es: str):
        for app in self.model.applications:
            if app.kind != SECURITY:
                continue
            for t in app.tasks:
                if t.kind == TASK_KEY_VERIFY and t.src == sender_es and t.es == receiver_es:
                    return t
        return None

    def _check_no_overlap(self) -> None:
        """S8 between stream blocks, T4 between tasks, T5 task-vs-MAC block,
        expanded over every instance pair inside the hyperperiod."""
        model, sched = self.model, self.sol.schedule
        per_resource: dict[object, list[tuple[int, int, str, str]]] = {}

        for app in model.applications:
            if app.id in self.skip_apps:
                continue
            for t in app.tasks:
                o = sched.task_offsets.get(t.id)
                if o is None:
                    continue
                for iv in _instances(o, t.wcet, t.period, self.horizon):
                    per_resource.setdefault(t.es, []).append(iv + ("task", t.id))
            for s in app.streams:
                links, ess = self._stream_resources(s)
                for res in links + ess:
                    b = self._block(s, res)
                    if b is None:
                        continue
                    for iv in _instances(b[0], b[1] - b[0], s.period, self.horizon):
                        per_resource.setdefault(res, []).append(iv + ("stream", s.uid))

        for res in sorted(per_resource, key=lambda r: str(r)):
            items = sorted(per_resource[res])
            for i, (s1, e1, k1, id1) in enumerate(items):
                for s2, e2, k2, id2 in items[i + 1:]:
                    if s2 >= e1:
                        break
                    if id1 == id2:
                        continue
                    if k1 == "task" and k2 == "task":
                        code = "T4"
                    elif k1 == "stream" and k2 == "stream":
                        code = "S8"
                    else:
                        code = "T5"
                    self.add(code, (id1, id2),
                             f"overlap on {res}: [{s1},{e1}) vs [{s2},{e2})")

    def _check_isolation(self) -> None:
        """S9: frames of different streams must not interleave in a switch
        egress queue. Printed form compares [ingress start, egress start)
        windows; queue strictness extends them to the egress end."""
        model, sched = self.model, self.sol.schedule
        per_link: dict[tuple[str, str], list[tuple[str, int, int, int, int]]] = {}
        for uid, stream in sorted(model.streams.items()):
            tree = self.sol.routes.trees.get(uid)
            if tree is None or not self._scheduled(stream):
                continue
            for (p, n) in sorted(self._route_links(uid)):
                if not model.network.is_switch(p):
                    continue
                ingress_parent = tree.successor.get(p)
                if ingress_parent is None or ingress_parent == p:
                    continue
                b_in = self._block(stream, (ingress_parent, p))
                b_eg = self._block(stream, (p, n))
                if b_in is None or b_eg is None:
                    continue
                per_link.setdefault((p, n), []).append(
                    (uid, stream.period, b_in[0], b_eg[0], b_eg[1]))

        for link in sorted(per_link):
            users = per_link[link]
            for (u1, t1, in1, eg1, end1), (u2, t2, in2, eg2, end2) in \
                    itertools.combinations(users, 2):
                if u1 == u2:
                    continue
                w1 = _instances(in1, (eg1 if self.strictness == PRINTED else end1) - in1,
                                t1, self.horizon)
                w2 = _instances(in2, (eg2 if self.strictness == PRINTED else end2) - in2,
                                t2, self.horizon)
                for a in w1:
                    for b in w2:
                        if _overlap(a, b):
                            self.add("S9", (u1, u2),
                                     f"queue windows interleave on {link[0]}->{link[1]}: "
                                     f"[{a[0]},{a[1]}) vs [{b[0]},{b[1]})")


def verify_solution(model: SystemModel, solution: Solution,
                    strictness: str = QUEUE) -> VerifyReport:
    """Exhaustive constraint re-check of a solution.

    Entities of applications the schedule marks infeasible are skipped (each
    such application is itself reported as a FEAS violation), so a feasible
    solution passes iff the report is empty.
    """
    checker = _Checker(model, solution, strictness)
    checker.check_routes()
    checker.check_schedule()
    report = VerifyReport(violations=checker.out, strictness=strictness)
    return report


# ---------------------------------------------------------------------------
# fault tolerance

def normalize_failures(failures: Iterable[tuple[str, str]]) -> set[tuple[str, str]]:
    return {tuple(sorted(f)) for f in failures}


def fault_tolerance_check(model: SystemModel, solution: Solution,
                          failures: Iterable[tuple[str, str]]) -> dict[str, bool]:
    """Per distinct stream: is at least one copy's route tree alive (touching
    no failed physical link) and complete under the given failure set?"""
    failed = normalize_failures(failures)
    out: dict[str, bool] = {}
    for sid, copies in sorted(model.distinct_streams().items()):
        delivered = False
        for s in copies:
            tree = solution.routes.trees.get(s.uid)
            if tree is None:
                continue
            links = {tuple(sorted(l)) for l in
                     ((p, n) for n, p in tree.successor.items() if p != n)}
            if links & failed:
                continue
            try:
                reaches = all(tree.path_to(es) for es in model.receiver_ess(s))
            except ValueError:
                reaches = False
            if reaches:
                delivered = True
                break
        out[sid] = delivered
    return out


def exhaustive_fault_check(model: SystemModel, solution: Solution,
                           ) -> list[tuple[str, tuple]]:
    """Enumerate every (rl-1)-subset of physical links per stream; return the
    (stream id, failure set) pairs that break delivery.

    Only failure sets drawn from the stream's own route links can break it
    (a cable no copy touches kills nothing), so the enumeration over all
    cables reduces to subsets of the per-stream union without losing
    exhaustiveness.
    """
    failures_found = []
    for sid, copies in sorted(model.distinct_streams().items()):
        n = copies[0].rl
        copy_links = []
        complete = []
        for s in copies:
            tree = solution.routes.trees.get(s.uid)
            if tree is None:
                copy_links.append(set())
                complete.append(False)
                continue
            copy_links.append({tuple(sorted(l)) for l in
                               ((p, m) for m, p in tree.successor.items() if p != m)})
            try:
                complete.append(all(tree.path_to(es) for es in model.receiver_ess(s)))
            except ValueError:
                complete.append(False)
        relevant = sorted(set().union(*copy_links)) if copy_links else []
        size = min(n - 1, len(relevant))
        for combo in itertools.combinations(relevant, size):
            hit = set(combo)
            delivered = any(ok and not (links & hit)
                            for ok, links in zip(complete, copy_links))
            if not delivered:
                failures_found.append((sid, combo))
    return failures_found
