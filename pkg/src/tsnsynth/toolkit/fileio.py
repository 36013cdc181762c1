"""Human-readable text formats for test cases and solutions.

Test cases carry the network, constants and the normal applications only;
security applications are regenerated deterministically by the model
expansion. Solutions carry P_int, routes (as link lists per stream copy) and
all offsets, so a case file plus a solution file reproduce a full Solution.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from ..model import (Application, EndSystem, GlobalConstants, Link, Network,
                     NORMAL, Stream, Switch, SystemModel, Task)
from ..routing import RouteAssignment, RouteTree
from ..solution import Resource, Schedule, Solution

CASE_HEADER = "tsn-testcase v1"
SOLUTION_HEADER = "tsn-solution v1"


def _sections(text: str, expected_header: str) -> tuple[dict[str, list[str]], list[str]]:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != expected_header:
        raise ValueError(f"expected header {expected_header!r}")
    sections: dict[str, list[str]] = {}
    order: list[str] = []
    current = None
    for ln in lines[1:]:
        if ln.startswith("[") and ln.endswith("]"):
            current = ln[1:-1]
            order.append(current)
            sections.setdefault(current, [])
        else:
            sections.setdefault(current or "", []).append(ln)
    return sections, order


def _kv(parts: Iterable[str]) -> dict[str, str]:
    out = {}
    for p in parts:
        k, _, v = p.partition("=")
        out[k] = v
    return out


# -- test cases ---------------------------------------------------------------

def dumps_model(model: SystemModel) -> str:
    lines = [CASE_HEADER, "[constants]"]
    c = model.constants
    lines += [f"mtu {c.mtu}", f"oh {c.oh}", f"key_size {c.key_size}",
              f"mac_size {c.mac_size}", f"sync_precision {c.sync_precision}"]
    lines.append("[nodes]")
    for e in sorted(model.network.end_systems.values(), key=lambda x: x.id):
        point = f" at={e.point[0]:.6f},{e.point[1]:.6f}" if e.point else ""
        lines.append(f"es {e.id} hash={e.hash_time}{point}")
    for s in sorted(model.network.switches.values(), key=lambda x: x.id):
        point = f" at={s.point[0]:.6f},{s.point[1]:.6f}" if s.point else ""
        lines.append(f"sw {s.id}{point}")
    lines.append("[links]")
    for (a, b), link in sorted(model.network.links.items()):
        lines.append(f"{a} {b} {link.speed}")
    for app in model.applications:
        if app.kind != NORMAL:
            continue
        lines.append(f"[application {app.id} period={app.period}]")
        for t in app.tasks:
            lines.append(f"task {t.id} es={t.es} wcet={t.wcet}")
        seen = set()
        for s in app.streams:
            if s.id in seen:
                continue
            seen.add(s.id)
            recv = ",".join(s.receivers)
            lines.append(f"stream {s.id} from={s.sender} to={recv} "
                         f"size={s.size} rl={s.rl} sl={int(s.secure)}")
        for a, b in app.internal_deps:
            lines.append(f"dep {a} {b}")
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> SystemModel:
    sections, order = _sections(text, CASE_HEADER)
    consts = {}
    for ln in sections.get("constants", []):
        k, _, v = ln.partition(" ")
        consts[k] = int(v)
    constants = GlobalConstants(**consts)

    ess, sws = [], []
    for ln in sections.get("nodes", []):
        parts = ln.split()
        kv = _kv(parts[2:])
        point = None
        if "at" in kv:
            x, _, y = kv["at"].partition(",")
            point = (float(x), float(y))
        if parts[0] == "es":
            ess.append(EndSystem(parts[1], int(kv["hash"]), point))
        elif parts[0] == "sw":
            sws.append(Switch(parts[1], point))
        else:
            raise ValueError(f"unknown node kind {parts[0]!r}")
    links = []
    for ln in sections.get("links", []):
        a, b, speed = ln.split()
        links.append(Link(a, b, Fraction(speed)))
    net = Network(ess, sws, links)

    apps = []
    for name in order:
        if not name.startswith("application "):
            continue
        head = name.split()
        app_id = head[1]
        kv = _kv(head[2:])
        period = int(kv["period"])
        tasks, streams, deps = [], [], []
        for ln in sections[name]:
            parts = ln.split()
            if parts[0] == "task":
                tkv = _kv(parts[2:])
                tasks.append(Task(parts[1], tkv["es"], int(tkv["wcet"]), period))
            elif parts[0] == "stream":
                skv = _kv(parts[2:])
                rl = int(skv["rl"])
                for copy in range(rl):
                    streams.append(Stream(
                        id=parts[1], copy=copy, sender=skv["from"],
                        receivers=tuple(skv["to"].split(",")),
                        size=int(skv["size"]), rl=rl,
                        secure=bool(int(skv["sl"])), period=period))
            elif parts[0] == "dep":
                deps.append((parts[1], parts[2]))
            else:
                raise ValueError(f"unknown application entry {parts[0]!r}")
        apps.append(Application(app_id, NORMAL, period, tuple(tasks),
                                tuple(streams), tuple(deps)))
    return SystemModel(net, apps, constants)


# -- solutions ----------------------------------------------------------------

def _res_str(res: Resource) -> str:
    return res if isinstance(res, str) else f"{res[0]}>{res[1]}"


def _res_parse(text: str) -> Resource:
    if ">" in text:
        a, _, b = text.partition(">")
        return (a, b)
    return text


def dumps_solution(solution: Solution) -> str:
    lines = [SOLUTION_HEADER]
    sched = solution.schedule
    lines.append(f"p_int {sched.p_int if sched.p_int is not None else '-'}")
    lines.append("[infeasible]")
    lines.extend(sorted(sched.infeasible_apps))
    lines.append("[routes]")
    for uid in sorted(solution.routes.trees):
        tree = solution.routes.trees[uid]
        hops = " ".join(f"{a}>{b}" for a, b in tree.links())
        lines.append(f"{uid} root={tree.root} {hops}")
    lines.append("[task-offsets]")
    for tid in sorted(sched.task_offsets):
        lines.append(f"{tid} {sched.task_offsets[tid]}")
    lines.append("[stream-offsets]")
    for (uid, res) in sorted(sched.stream_offsets,
                             key=lambda k: (k[0], _res_str(k[1]))):
        lines.append(f"{uid} {_res_str(res)} {sched.stream_offsets[(uid, res)]}")
    return "\n".join(lines) + "\n"


def loads_solution(text: str) -> Solution:
    sections, _ = _sections(text, SOLUTION_HEADER)
    p_int = None
    for ln in sections.get("", []):  # preamble before the first section
        if ln.startswith("p_int"):
            _, _, v = ln.partition(" ")
            p_int = None if v == "-" else int(v)
    trees = {}
    for ln in sections.get("routes", []):
        parts = ln.split()
        uid = parts[0]
        root = parts[1].partition("=")[2]
        successor = {root: root}
        receivers = []
        for hop in parts[2:]:
            a, _, b = hop.partition(">")
            successor[b] = a
        children = {p for n, p in successor.items() if p != n}
        for n in successor:
            if n != root and n not in children:
                receivers.append(n)
        trees[uid] = RouteTree(root=root, successor=successor,
                               receivers=tuple(sorted(receivers)))
    sched = Schedule(p_int=p_int)
    sched.infeasible_apps = set(sections.get("infeasible", []))
    for ln in sections.get("task-offsets", []):
        tid, _, off = ln.partition(" ")
        sched.task_offsets[tid] = int(off)
    for ln in sections.get("stream-offsets", []):
        uid, res, off = ln.split()
        sched.stream_offsets[(uid, _res_parse(res))] = int(off)
    return Solution(routes=RouteAssignment(trees=trees), schedule=sched)
