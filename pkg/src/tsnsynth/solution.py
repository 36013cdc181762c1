"""Shared solution data: schedules, per-stream block layouts, app spans.

A schedule stores one offset per task and per (stream copy, resource); every
variable repeats strictly periodically within the hyperperiod. Resources are
node ids (str) or directed links (src, dst).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .model import Application, Stream, SystemModel
from .routing import RouteAssignment, RouteTree

Resource = Union[str, tuple[str, str]]


def resource_label(r: Resource) -> str:
    return r if isinstance(r, str) else f"{r[0]}>{r[1]}"


@dataclass(frozen=True)
class BlockSpec:
    """One occupancy of a stream copy on one resource along its route."""

    resource: Resource
    duration: int
    prev: Optional[Resource]
    nexts: tuple[Resource, ...]


def stream_blocks(model: SystemModel, stream: Stream, tree: RouteTree) -> list[BlockSpec]:
    """Block layout in placement order.

    Secure streams occupy the sender ES (MAC generation), every route link,
    and each receiver ES (MAC validation); non-secure streams occupy links
    only. Links are ordered breadth-first from the sender so parents precede
    children; receiver ES blocks come last so every arrival time is known
    before the TESLA bound is evaluated.
    """
    children = tree.children()
    root = tree.root
    links: list[tuple[str, str]] = []
    frontier = [root]
    while frontier:
        node = frontier.pop(0)
        for child in children.get(node, []):
            links.append((node, child))
            frontier.append(child)

    recv_es = model.receiver_ess(stream)
    durations: dict[Resource, int] = {}
    for link in links:
        durations[link] = model.link_duration(stream, model.network.links[link])

    specs: list[BlockSpec] = []
    if stream.secure:
        sender = model.sender_es(stream)
        hash_t = model.network.end_systems[sender].hash_time
        first_links = tuple(l for l in links if l[0] == root)
        specs.append(BlockSpec(sender, hash_t, None, first_links))

    for link in links:
        a, b = link
        if stream.secure:
            prev: Optional[Resource] = a if a == root else _ingress(links, a)
        else:
            prev = None if a == root else _ingress(links, a)
        nexts: list[Resource] = [l for l in links if l[0] == b]
        if b in recv_es and stream.secure:
            nexts.append(b)
        specs.append(BlockSpec(link, durations[link], prev, tuple(nexts)))

    if stream.secure:
        for es in recv_es:
            hash_t = model.network.end_systems[es].hash_time
            specs.append(BlockSpec(es, hash_t, _ingress(links, es), ()))
    return specs


def _ingress(links: list[tuple[str, str]], node: str) -> tuple[str, str]:
    for l in links:
        if l[1] == node:
            return l
    raise ValueError(f"no route link enters {node}")


def final_link(tree: RouteTree, receiver_es: str) -> tuple[str, str]:
    path = tree.path_to(receiver_es)
    return (path[-2], path[-1])


@dataclass
class Schedule:
    task_offsets: dict[str, int] = field(default_factory=dict)
    stream_offsets: dict[tuple[str, Resource], int] = field(default_factory=dict)
    infeasible_apps: set[str] = field(default_factory=set)
    p_int: Optional[int] = None

    def task_end(self, model: SystemModel, task_id: str) -> int:
        return self.task_offsets[task_id] + model.tasks[task_id].wcet


def app_span(model: SystemModel, schedule: Schedule, app: Application) -> Optional[int]:
    """cost(lambda): last task end minus first task offset; None while any
    task is unscheduled."""
    offs, ends = [], []
    for t in app.tasks:
        o = schedule.task_offsets.get(t.id)
        if o is None:
            return None
        offs.append(o)
        ends.append(o + t.wcet)
    if not offs:
        return 0
    return max(ends) - min(offs)


def latency_sum(model: SystemModel, schedule: Schedule) -> int:
    total = 0
    for app in model.applications:
        if app.id in schedule.infeasible_apps:
            continue
        span = app_span(model, schedule, app)
        if span is not None:
            total += span
    return total


def arrival_ends(model: SystemModel, schedule: Schedule, stream: Stream,
                 tree: RouteTree) -> dict[str, int]:
    """Per receiver ES: end of the stream copy's final link block."""
    out = {}
    for es in model.receiver_ess(stream):
        link = final_link(tree, es)
        o = schedule.stream_offsets[(stream.uid, link)]
        out[es] = o + model.link_duration(stream, model.network.links[link])
    return out


@dataclass
class Solution:
    """What the annealer mutates and the verifier checks."""

    routes: RouteAssignment
    schedule: Schedule

    def feasible(self, model: SystemModel) -> bool:
        from .routing import overlap_count
        return not self.schedule.infeasible_apps and overlap_count(model, self.routes) == 0
