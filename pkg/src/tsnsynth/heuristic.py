"""ASAP list scheduling over block timelines, with backtracking and a
latency post-optimization for secure streams.

Every task and stream copy is placed as a chain (tree, for multicast) of
blocks along its route, at the earliest offset inside the feasible region of
its resource. Resources keep one timeline per period class; a block of any
period folds into every class, so cross-period conflicts are visible locally.

Queue determinism on switch egress ports rests on two mechanisms: a block's
placement region excludes the queue windows [ingress start, egress end) that
other streams already hold on the next egress link, and a block's upper
bound is the latest time its own link stays continuously clear after the
previous block's offset. When the earliest offset exceeds the upper bound,
the previous block is re-placed later (backtracking).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import tesla
from .model import (NORMAL, SECURITY, Stream, SystemModel, TASK_KEY_VERIFY,
                    key_verification_task)
from .routing import RouteAssignment
from .solution import Resource, Schedule, stream_blocks

OCC = "occ"
WIN = "win"


def fold_pieces(offset: int, duration: int, src_period: int, cls: int,
                ) -> list[tuple[int, int]]:
    """Half-open [lo, hi) pieces a periodic occupancy covers within one
    period of class `cls`, wrap-around split included."""
    if duration <= 0:
        return []
    if duration >= cls:
        return [(0, cls)]
    pieces = []
    reps = math.lcm(cls, src_period) // src_period
    for i in range(reps):
        start = (offset + i * src_period) % cls
        end = start + duration
        if end <= cls:
            pieces.append((start, end))
        else:
            pieces.append((start, cls))
            pieces.append((0, end - cls))
    return pieces


def _subtract(intervals: list[tuple[int, int]], lo: int, hi: int) -> None:
    if lo >= hi:
        return
    out = []
    for s, e in intervals:
        if e <= lo or s >= hi:
            out.append((s, e))
            continue
        if s < lo:
            out.append((s, lo))
        if hi < e:
            out.append((hi, e))
    intervals[:] = out


def interval_containing(intervals: list[tuple[int, int]], t: int,
                        ) -> Optional[tuple[int, int]]:
    for s, e in intervals:
        if s <= t < e:
            return (s, e)
    return None


def first_interval_ending_after(intervals: list[tuple[int, int]], t: int,
                                ) -> Optional[tuple[int, int]]:
    for s, e in intervals:
        if e > t:
            return (s, e)
    return None


class Timeline:
    """Occupancies and queue windows of one resource.

    `free(T)` is the transmission-free view a period-T block may be placed
    in; with `with_windows=True` other streams' queue windows count as
    blocked too (the queue-availability view used for bounds).
    """

    def __init__(self):
        self._placements: dict[int, tuple[int, int, int, str, str]] = {}
        self._next = 0
        self._cache: dict[tuple[int, bool], list[tuple[int, int]]] = {}

    def add(self, offset: int, duration: int, period: int, kind: str, owner: str) -> int:
        handle = self._next
        self._next += 1
        self._placements[handle] = (offset, duration, period, kind, owner)
        for (cls, with_windows), intervals in self._cache.items():
            if kind == WIN and not with_windows:
                continue
            for lo, hi in fold_pieces(offset, duration, period, cls):
                _subtract(intervals, lo, hi)
        return handle

    def remove(self, handle: int) -> None:
        del self._placements[handle]
        self._cache.clear()

    def free(self, period: int, with_windows: bool = False) -> list[tuple[int, int]]:
        key = (period, with_windows)
        if key not in self._cache:
            self._cache[key] = self._build(period, with_windows, None)
        return self._cache[key]

    def free_excluding(self, period: int, with_windows: bool, owner: str,
                       ) -> list[tuple[int, int]]:
        """Free view ignoring one stream/task's own placements (uncached)."""
        return self._build(period, with_windows, owner)

    def _build(self, period: int, with_windows: bool, skip_owner: Optional[str],
               ) -> list[tuple[int, int]]:
        intervals = [(0, period)]
        for offset, duration, p, kind, owner in self._placements.values():
            if owner == skip_owner or (kind == WIN and not with_windows):
                continue
            for lo, hi in fold_pieces(offset, duration, p, period):
                _subtract(intervals, lo, hi)
        return intervals

    def window_cuts(self, cls: int, exclude_owner: str) -> list[tuple[int, int]]:
        """Other streams' queue windows folded into class `cls`."""
        out = []
        for offset, duration, p, kind, owner in self._placements.values():
            if kind != WIN or owner == exclude_owner:
                continue
            out.extend(fold_pieces(offset, duration, p, cls))
        return out


# ---------------------------------------------------------------------------
# precedence graph

@dataclass(frozen=True)
class PNode:
    key: str  # task id or stream copy uid
    kind: str  # "task" | "stream"
    app_id: str


@dataclass
class PrecedenceGraph:
    nodes: dict[str, PNode]
    preds: dict[str, list[str]]
    succs: dict[str, list[str]]
    app_order: dict[str, list[str]]

    def order_for(self, app_id: str) -> list[str]:
        return self.app_order[app_id]


def build_precedence_graph(model: SystemModel,
                           routes: Optional[RouteAssignment] = None) -> PrecedenceGraph:
    """Expanded per-application DAGs: streams become nodes, one per copy."""
    nodes: dict[str, PNode] = {}
    preds: dict[str, list[str]] = {}
    succs: dict[str, list[str]] = {}

    def edge(a: str, b: str) -> None:
        succs[a].append(b)
        preds[b].append(a)

    app_order: dict[str, list[str]] = {}
    for app in model.applications:
        keys = []
        for t in app.tasks:
            nodes[t.id] = PNode(t.id, "task", app.id)
            preds[t.id] = []
            succs[t.id] = []
            keys.append(t.id)
        for s in app.streams:
            nodes[s.uid] = PNode(s.uid, "stream", app.id)
            preds[s.uid] = []
            succs[s.uid] = []
            keys.append(s.uid)
        for a, b in app.internal_deps:
            edge(a, b)
        for s in app.streams:
            edge(s.sender, s.uid)
            for r in s.receivers:
                edge(s.uid, r)
        app_order[app.id] = _topo_order(keys, preds, succs)

    return PrecedenceGraph(nodes=nodes, preds=preds, succs=succs, app_order=app_order)


def _topo_order(keys: list[str], preds, succs) -> list[str]:
    pending = {k: len(preds[k]) for k in keys}
    ready = sorted(k for k, c in pending.items() if c == 0)
    out = []
    while ready:
        k = ready.pop(0)
        out.append(k)
        newly = []
        for n in succs[k]:
            pending[n] -= 1
            if pending[n] == 0:
                newly.append(n)
        if newly:
            ready = sorted(ready + newly)
    if len(out) != len(keys):
        raise ValueError("application graph has a cycle")
    return out


def initial_order(model: SystemModel, graph: PrecedenceGraph) -> list[str]:
    """Application-level order: key applications first, then normal ones,
    each internally topological."""
    order: list[str] = []
    for app in model.applications:
        if app.kind == SECURITY:
            order.extend(graph.order_for(app.id))
    for app in model.applications:
        if app.kind == NORMAL:
            order.extend(graph.order_for(app.id))
    return order


def swap_apps(order: list[str], graph: PrecedenceGraph, app_a: str, app_b: str) -> list[str]:
    """Exchange the positions of two applications' node runs in the order."""
    if app_a == app_b:
        return list(order)
    chunks: list[tuple[str, list[str]]] = []
    for key in order:
        app = graph.nodes[key].app_id
        if chunks and chunks[-1][0] == app:
            chunks[-1][1].append(key)
        else:
            chunks.append((app, [key]))
    ia = [i for i, (a, _) in enumerate(chunks) if a == app_a]
    ib = [i for i, (a, _) in enumerate(chunks) if a == app_b]
    if len(ia) == 1 and len(ib) == 1:
        i, j = ia[0], ib[0]
        chunks[i], chunks[j] = chunks[j], chunks[i]
    return [k for _, chunk in chunks for k in chunk]


# ---------------------------------------------------------------------------
# blocks and the ASAP scheduler

@dataclass(eq=False)
class Block:
    entry: str
    resource: Resource
    duration: int
    period: int
    lower: int = 0
    upper: int = 0
    offset: Optional[int] = None
    prev: Optional["Block"] = None
    nexts: list["Block"] = field(default_factory=list)
    handles: tuple[int, ...] = ()

    @property
    def end(self) -> int:
        return self.offset + self.duration

    def on_link(self) -> bool:
        return isinstance(self.resource, tuple)


class SchedulerState:
    """Owns the timelines and placements of one scheduling run."""

    def __init__(self, model: SystemModel, routes: RouteAssignment, p_int: Optional[int],
                 backtrack_cap: int = 256):
        self.model = model
        self.routes = routes
        self.p_int = p_int
        self.backtrack_cap = backtrack_cap
        self.timelines: dict[Resource, Timeline] = {}
        self.task_offsets: dict[str, int] = {}
        self.infeasible_apps: set[str] = set()
        self.blocks: dict[str, list[Block]] = {}

    def timeline(self, resource: Resource) -> Timeline:
        if resource not in self.timelines:
            self.timelines[resource] = Timeline()
        return self.timelines[resource]

    def to_schedule(self) -> Schedule:
        stream_offsets = {}
        for entry, blocks in self.blocks.items():
            if entry in self.model.streams:
                for b in blocks:
                    stream_offsets[(entry, b.resource)] = b.offset
        return Schedule(task_offsets=dict(self.task_offsets),
                        stream_offsets=stream_offsets,
                        infeasible_apps=set(self.infeasible_apps),
                        p_int=self.p_int)


def asap_schedule(model: SystemModel, routes: RouteAssignment, order: Iterable[str],
                  graph: PrecedenceGraph, p_int: Optional[int],
                  backtrack_cap: int = 256) -> SchedulerState:
    """Place every entry of `order` at its earliest feasible offsets.

    An entry that cannot be placed marks its whole application infeasible and
    the application's remaining entries are skipped; blocks already placed
    stay, so partial schedules keep a cost gradient.
    """
    state = SchedulerState(model, routes, p_int, backtrack_cap)
    for key in order:
        node = graph.nodes[key]
        if node.app_id in state.infeasible_apps:
            continue
        if not _place_entry(state, graph, key):
            state.infeasible_apps.add(node.app_id)
    return state


def _make_blocks(state: SchedulerState, key: str) -> list[Block]:
    model = state.model
    if key in model.tasks:
        t = model.tasks[key]
        return [Block(entry=key, resource=t.es, duration=t.wcet, period=t.period,
                      upper=t.period - t.wcet)]
    stream = model.streams[key]
    specs = stream_blocks(model, stream, state.routes.tree(key))
    by_resource: dict[Resource, Block] = {}
    blocks = []
    for spec in specs:
        b = Block(entry=key, resource=spec.resource, duration=spec.duration,
                  period=stream.period, upper=stream.period - spec.duration)
        by_resource[spec.resource] = b
        blocks.append(b)
    for spec, b in zip(specs, blocks):
        if spec.prev is not None:
            b.prev = by_resource[spec.prev]
        b.nexts = [by_resource[r] for r in spec.nexts]
    return blocks


def _place_entry(state: SchedulerState, graph: PrecedenceGraph, key: str) -> bool:
    blocks = _make_blocks(state, key)
    if any(b.upper < 0 for b in blocks):
        return False
    i = 0
    backtracks = 0
    while True:
        b = blocks[i]
        lb = calculate_lower_bound(state, graph, key, b, blocks)
        if lb is None:
            return False
        b.lower = max(b.lower, lb)
        o = earliest_offset(b, feasible_region(state, b))
        if o is None:
            return False
        if o <= b.upper:
            b.offset = o
            for g in b.nexts:
                if g.on_link():
                    ub = _latest_queue_available(state, g, o)
                    g.upper = ub if ub is not None else -1
            i += 1
            if i == len(blocks):
                break
        else:
            prev = b.prev
            if prev is None:
                return False
            backtracks += 1
            if backtracks > state.backtrack_cap:
                return False
            raised = _earliest_queue_available(state, b, o)
            if raised is None:
                return False
            prev.lower = max(prev.lower + 1, raised)  # guarantee progress
            i = blocks.index(prev)
    _commit(state, key, blocks)
    return True


def calculate_lower_bound(state: SchedulerState, graph: PrecedenceGraph, key: str,
                          block: Block, blocks: list[Block]) -> Optional[int]:
    """Earliest start permitted by precedence, route order and TESLA.

    A first block waits for the entry's precedence-graph predecessors; a
    mid-route link block waits for the previous block's end; a receiver-ES
    block of a secure stream additionally waits for the key verification
    task instance of the copy's authentication interval. None when a
    required predecessor is itself unscheduled (failed application).
    """
    model = state.model
    if block.prev is None:
        lb = 0
        for pred in graph.preds[key]:
            if pred in model.tasks:
                o = state.task_offsets.get(pred)
                if o is None:
                    return None
                lb = max(lb, o + model.tasks[pred].wcet)
            else:
                end = _consumer_ready_time(state, pred, key)
                if end is None:
                    return None
                lb = max(lb, end)
        return lb
    if block.on_link():
        return block.prev.end
    # receiver-ES MAC validation: gated by this copy's authentication interval
    stream = model.streams[key]
    last_arrival = max(x.end for x in blocks if x.on_link())
    phi = tesla.auth_interval(last_arrival, state.p_int)
    kv = key_verification_task(model, model.sender_es(stream), block.resource)
    kv_offset = state.task_offsets.get(kv.id)
    if kv_offset is None:
        return None
    ready = tesla.earliest_auth_time(phi, state.p_int, kv_offset + kv.wcet)
    return max(ready, block.prev.end)


def _consumer_ready_time(state: SchedulerState, stream_uid: str,
                         consumer_task: str) -> Optional[int]:
    """When `consumer_task` may react to `stream_uid`: end of the MAC
    validation block on the consumer's ES for secure streams, arrival at
    every receiver ES otherwise."""
    model = state.model
    stream = model.streams[stream_uid]
    placed = state.blocks.get(stream_uid)
    if placed is None:
        return None
    if stream.secure:
        es = model.tasks[consumer_task].es
        for b in placed:
            if b.resource == es:
                return b.end
        return None
    return max(b.end for b in placed if b.on_link())


def feasible_region(state: SchedulerState, block: Block) -> list[tuple[int, int]]:
    """Inclusive offset ranges that can host `block`: free intervals on its
    resource, minus — for a link block — the queue windows other streams
    hold on the next egress links (TSN stream isolation)."""
    timeline = state.timeline(block.resource)
    region = [(s, e - block.duration) for s, e in timeline.free(block.period)
              if e - block.duration >= s]
    if block.on_link():
        for g in block.nexts:
            if not g.on_link():
                continue
            cuts = state.timeline(g.resource).window_cuts(block.period, block.entry)
            for lo, hi in cuts:
                region = [iv for pair in region for iv in _range_without(pair, lo, hi)]
    return region


def _range_without(pair: tuple[int, int], lo: int, hi: int) -> list[tuple[int, int]]:
    """Remove the half-open [lo, hi) from an inclusive offset range."""
    s, e = pair
    if hi <= s or lo > e:
        return [pair]
    out = []
    if s < lo:
        out.append((s, lo - 1))
    if hi <= e:
        out.append((hi, e))
    return out


def earliest_offset(block: Block, region: list[tuple[int, int]]) -> Optional[int]:
    """Smallest offset >= the block's lower bound inside the region."""
    for lo, hi in region:
        o = max(block.lower, lo)
        if o <= hi:
            return o
    return None


def _latest_queue_available(state: SchedulerState, block: Block, since: int,
                            ) -> Optional[int]:
    """Latest offset for `block` keeping its link continuously clear (no
    transmission, no foreign queue window) from `since` through its end."""
    free = state.timeline(block.resource).free(block.period, with_windows=True)
    iv = interval_containing(free, since % block.period)
    if iv is None:
        return None
    return iv[1] - block.duration


def _earliest_queue_available(state: SchedulerState, block: Block, target: int,
                              ) -> Optional[int]:
    """Backtracking bound: start of the first clear stretch on the block's
    resource that could still host the block at or beyond `target` (the
    offset that could not be used). Shorter gaps would only re-trigger the
    same conflict."""
    free = state.timeline(block.resource).free(block.period, with_windows=True)
    needed = min(target, block.period - block.duration) + block.duration
    iv = first_interval_ending_after(free, needed)
    if iv is None:
        return None
    return iv[0]


def _commit(state: SchedulerState, key: str, blocks: list[Block]) -> None:
    for b in blocks:
        tl = state.timeline(b.resource)
        handles = [tl.add(b.offset, b.duration, b.period, OCC, key)]
        if b.on_link() and b.prev is not None and b.prev.on_link():
            # queue window on a switch egress port: [ingress start, egress end)
            handles.append(tl.add(b.prev.offset, b.end - b.prev.offset,
                                  b.period, WIN, key))
        b.handles = tuple(handles)
    state.blocks[key] = blocks
    if key in state.model.tasks:
        state.task_offsets[key] = blocks[0].offset


# ---------------------------------------------------------------------------
# latency optimization for secure streams

def optimize_latency(state: SchedulerState,
                     graph: Optional[PrecedenceGraph] = None) -> None:
    """Shift secure streams (and finally their sender tasks) as late as the
    TESLA interval structure allows, then compact every application by
    lifting remaining entries toward their successors. Redundant copies are
    shifted one by one; the shared sender task moves only with the last."""
    model = state.model
    distinct = model.distinct_streams()
    for app in model.applications:
        if app.id in state.infeasible_apps:
            continue
        seen: set[str] = set()
        for s in app.streams:
            if not s.secure or s.id in seen:
                continue
            seen.add(s.id)
            copies = distinct[s.id]
            if any(c.uid not in state.blocks for c in copies):
                continue
            for extra in copies[1:]:
                optimize_latency_for_stream(state, extra.uid, move_task=False)
            optimize_latency_for_stream(state, copies[0].uid, move_task=True)
    if graph is None:
        graph = build_precedence_graph(model)
    _compact(state, graph)


def _compact(state: SchedulerState, graph: PrecedenceGraph) -> None:
    """Right-shift sweep in reverse topological order: every task and stream
    block moves as late as its successors and the resource state allow, while
    no application's last task end rises, so cost(lambda) never grows. Key
    verification tasks stay put (their end is the TESLA release bound that
    already-placed validation blocks rely on)."""
    model = state.model
    app_end: dict[str, int] = {}
    for app in model.applications:
        if app.id in state.infeasible_apps:
            continue
        ends = [state.task_offsets[t.id] + t.wcet for t in app.tasks
                if t.id in state.task_offsets]
        if ends:
            app_end[app.id] = max(ends)

    for app in model.applications:
        if app.id not in app_end:
            continue
        for key in reversed(graph.order_for(app.id)):
            if key in model.tasks:
                task = model.tasks[key]
                if task.kind == TASK_KEY_VERIFY or key not in state.task_offsets:
                    continue
                _lift_task(state, graph, task, app_end[app.id])
            elif key in state.blocks:
                _lift_stream(state, model.streams[key])


def _lift_task(state: SchedulerState, graph: PrecedenceGraph, task, end_cap: int,
               ) -> None:
    model = state.model
    caps = [end_cap - task.wcet]
    for succ in graph.succs[task.id]:
        if succ in model.tasks:
            if succ in state.task_offsets:
                caps.append(state.task_offsets[succ] - task.wcet)
        else:
            placed = state.blocks.get(succ)
            if placed is None:
                return  # an unscheduled outgoing stream pins the task
            stream = model.streams[succ]
            if stream.secure:
                caps.append(placed[0].offset - task.wcet)
            else:
                caps.append(min(b.offset for b in placed if b.prev is None)
                            - task.wcet)
    cap = min(caps)
    tb = state.blocks[task.id][0]
    if cap <= tb.offset:
        return
    free = state.timeline(tb.resource).free_excluding(tb.period, False, task.id)
    best = None
    for s, e in free:
        if e - tb.duration < s or s > cap:
            continue
        candidate = min(cap, e - tb.duration)
        if candidate >= tb.offset and (best is None or candidate > best):
            best = candidate
    if best is not None and best > tb.offset:
        _reseat(state, tb, best)
        state.task_offsets[task.id] = best


def _lift_stream(state: SchedulerState, stream: Stream) -> None:
    """Move a stream copy's blocks toward their consumers: the validation
    blocks toward the receiver tasks, link blocks toward their successors
    (secure arrivals stay inside their authentication interval), the MAC
    block toward the first links."""
    model = state.model
    tree = state.routes.tree(stream.uid)
    blocks = state.blocks[stream.uid]
    by_resource = {b.resource: b for b in blocks}
    recv_offsets = [state.task_offsets[t] for t in stream.receivers
                    if t in state.task_offsets]
    if len(recv_offsets) != len(stream.receivers):
        return
    phi = None
    if stream.secure:
        finals = [b.end for b in blocks
                  if b.on_link() and not any(n.on_link() for n in b.nexts)]
        phi = tesla.auth_interval(max(finals), state.p_int)
        for es in model.receiver_ess(stream):
            val = by_resource[es]
            gated = [state.task_offsets[t] for t in stream.receivers
                     if model.tasks[t].es == es and t in state.task_offsets]
            if gated:
                _move_block_right(state, val, min(gated) - val.duration)
    for es in model.receiver_ess(stream):
        path = tree.path_to(es)
        chain = [by_resource[(a, b)] for a, b in zip(path, path[1:])]
        for b in reversed(chain):
            if stream.secure:
                cap = min(g.offset for g in b.nexts) - b.duration
                if not any(g.on_link() for g in b.nexts):
                    cap = min(cap, phi * state.p_int - 1 - b.duration)
            else:
                caps = [g.offset for g in b.nexts]
                if not any(g.on_link() for g in b.nexts):
                    caps.extend(recv_offsets)  # every receiver waits for every arrival
                cap = min(caps) - b.duration
            _move_block_right(state, b, cap)
    first_blocks = [b for b in blocks if b.prev is None]
    for b in first_blocks:
        if not b.on_link():  # sender-ES MAC generation block
            _move_block_right(state, b, min(g.offset for g in b.nexts) - b.duration)


def optimize_latency_for_stream(state: SchedulerState, uid: str, move_task: bool) -> None:
    """Walk each receiver's block chain backwards, moving every block as far
    right as its successors, the TESLA interval boundary and the resource
    state allow; optionally close the gap to the sender task afterwards."""
    model = state.model
    stream = model.streams[uid]
    tree = state.routes.tree(uid)
    by_resource = {b.resource: b for b in state.blocks[uid]}
    finals = [b.end for b in state.blocks[uid]
              if b.on_link() and not any(n.on_link() for n in b.nexts)]
    phi = tesla.auth_interval(max(finals), state.p_int)
    receivers = model.receiver_ess(stream)

    for idx, es in enumerate(receivers):
        path = tree.path_to(es)
        chain = [by_resource[(a, b)] for a, b in zip(path, path[1:])]
        for b in reversed(chain):
            cap = min(g.offset for g in b.nexts) - b.duration if b.nexts else b.upper
            if not any(g.on_link() for g in b.nexts):
                # final hop: the arrival must stay inside interval phi-1
                cap = min(cap, phi * state.p_int - 1 - b.duration)
            _move_block_right(state, b, cap)
        if move_task and idx == len(receivers) - 1:
            first = chain[0]
            if first.prev is not None:  # sender-ES MAC generation block
                mac = first.prev
                cap = min(g.offset for g in mac.nexts) - mac.duration
                _move_block_right(state, mac, cap)
                anchor = mac.offset
            else:
                anchor = first.offset
            _move_sender_task(state, stream, anchor)


def _move_block_right(state: SchedulerState, block: Block, cap: int) -> None:
    if cap <= block.offset:
        return
    tl = state.timeline(block.resource)
    free = tl.free_excluding(block.period, block.on_link(), block.entry)
    if block.prev is not None:
        # keep the queue window [prev offset, end) clear of everyone else
        iv = interval_containing(free, block.prev.offset)
        if iv is None:
            return
        new_offset = min(cap, iv[1] - block.duration)
    else:
        new_offset = None
        for s, e in free:
            if e - block.duration < s or s > cap:
                continue
            candidate = min(cap, e - block.duration)
            if candidate >= block.offset and (new_offset is None or candidate > new_offset):
                new_offset = candidate
        if new_offset is None:
            return
    if new_offset <= block.offset:
        return
    _reseat(state, block, new_offset)


def _move_sender_task(state: SchedulerState, stream: Stream, anchor: int) -> None:
    model = state.model
    task = model.tasks[stream.sender]
    placed = state.blocks.get(task.id)
    if placed is None:
        return
    tb = placed[0]
    caps = [anchor - task.wcet]
    for s2 in model.streams.values():  # every outgoing stream still gates the task
        if s2.sender == task.id and state.blocks.get(s2.uid):
            caps.append(state.blocks[s2.uid][0].offset - task.wcet)
    app = model.app_of_task[task.id]
    for a, b in app.internal_deps:
        if a == task.id and b in state.task_offsets:
            caps.append(state.task_offsets[b] - task.wcet)
    cap = min(caps)
    if cap <= tb.offset:
        return
    free = state.timeline(tb.resource).free_excluding(tb.period, False, task.id)
    best = None
    for s, e in free:
        if e - tb.duration < s or s > cap:
            continue
        candidate = min(cap, e - tb.duration)
        if candidate >= tb.offset and (best is None or candidate > best):
            best = candidate
    if best is None or best <= tb.offset:
        return
    _reseat(state, tb, best)
    state.task_offsets[task.id] = best


def _reseat(state: SchedulerState, block: Block, new_offset: int) -> None:
    tl = state.timeline(block.resource)
    for h in block.handles:
        tl.remove(h)
    block.offset = new_offset
    handles = [tl.add(block.offset, block.duration, block.period, OCC, block.entry)]
    if block.on_link() and block.prev is not None and block.prev.on_link():
        handles.append(tl.add(block.prev.offset, block.end - block.prev.offset,
                              block.period, WIN, block.entry))
    block.handles = tuple(handles)
    # successors' queue windows are anchored at this block's offset; re-anchor
    # them so a stale early anchor cannot keep blocking the whole link
    for g in block.nexts:
        if g.offset is not None and len(g.handles) == 2:
            tlg = state.timeline(g.resource)
            tlg.remove(g.handles[1])
            win = tlg.add(block.offset, g.end - block.offset, g.period, WIN, g.entry)
            g.handles = (g.handles[0], win)
