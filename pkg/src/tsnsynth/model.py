"""Domain model: network, applications, TESLA security expansion.

All times are integer microseconds and link speeds are exact rationals
(bytes per microsecond), so every derived quantity stays exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional

from .errors import ModelError

NORMAL = "normal"
SECURITY = "security"

TASK_PLAIN = "normal"
TASK_KEY_RELEASE = "key_release"
TASK_KEY_VERIFY = "key_verify"


@dataclass(frozen=True)
class EndSystem:
    id: str
    hash_time: int  # duration of one hash computation, us
    point: Optional[tuple[float, float]] = None


@dataclass(frozen=True)
class Switch:
    id: str
    point: Optional[tuple[float, float]] = None


@dataclass(frozen=True)
class Link:
    """Directed link; full-duplex cables appear as two opposite links."""

    src: str
    dst: str
    speed: Fraction  # bytes per microsecond

    @property
    def key(self) -> tuple[str, str]:
        return (self.src, self.dst)


class Network:
    def __init__(self, end_systems: Iterable[EndSystem], switches: Iterable[Switch],
                 links: Iterable[Link]):
        self.end_systems = {e.id: e for e in end_systems}
        self.switches = {s.id: s for s in switches}
        self.links = {l.key: l for l in links}

    def is_es(self, node: str) -> bool:
        return node in self.end_systems

    def is_switch(self, node: str) -> bool:
        return node in self.switches

    @property
    def nodes(self) -> list[str]:
        return sorted(self.end_systems) + sorted(self.switches)

    def neighbours(self, node: str) -> list[str]:
        return sorted(dst for (src, dst) in self.links if src == node)

    def link(self, src: str, dst: str) -> Link:
        return self.links[(src, dst)]

    def undirected_links(self) -> list[tuple[str, str]]:
        """Physical cables as canonical (min, max) node pairs."""
        return sorted({tuple(sorted(k)) for k in self.links})


@dataclass(frozen=True)
class Task:
    id: str
    es: str
    wcet: int
    period: Optional[int] = None
    kind: str = TASK_PLAIN
    src: Optional[str] = None  # key_verify only: ES whose key chain is checked


@dataclass(frozen=True)
class Stream:
    """One redundant copy of a (possibly multicast) communication.

    Copies of the same distinct stream share `id` and differ in `copy`;
    `uid` identifies the copy everywhere downstream.
    """

    id: str
    copy: int
    sender: str  # task id
    receivers: tuple[str, ...]  # task ids
    size: int  # payload bytes
    rl: int
    secure: bool
    period: Optional[int] = None

    @property
    def uid(self) -> str:
        return f"{self.id}.{self.copy}"


@dataclass(frozen=True)
class Application:
    id: str
    kind: str  # NORMAL or SECURITY
    period: Optional[int]
    tasks: tuple[Task, ...]
    streams: tuple[Stream, ...]  # all redundant copies, materialized
    internal_deps: tuple[tuple[str, str], ...] = ()  # same-ES producer/consumer pairs

    def task_ids(self) -> list[str]:
        return [t.id for t in self.tasks]


@dataclass(frozen=True)
class GlobalConstants:
    mtu: int = 1500
    oh: int = 0  # header overhead bytes; appears in no equation, defaults to 0
    key_size: int = 16
    mac_size: int = 16
    sync_precision: int = 0  # carried as metadata only


class SystemModel:
    """Network + applications (+ generated security applications).

    Treated as immutable once expanded/validated; solver runs may share one
    instance freely.
    """

    def __init__(self, network: Network, applications: Iterable[Application],
                 constants: GlobalConstants = GlobalConstants()):
        self.network = network
        self.applications = tuple(applications)
        self.constants = constants
        self._index()

    def _index(self) -> None:
        self.tasks = {}
        self.streams = {}
        self.app_of_task = {}
        self.app_of_stream = {}
        for app in self.applications:
            for t in app.tasks:
                self.tasks[t.id] = t
                self.app_of_task[t.id] = app
            for s in app.streams:
                self.streams[s.uid] = s
                self.app_of_stream[s.uid] = app

    @property
    def normal_apps(self) -> tuple[Application, ...]:
        return tuple(a for a in self.applications if a.kind == NORMAL)

    @property
    def security_apps(self) -> tuple[Application, ...]:
        return tuple(a for a in self.applications if a.kind == SECURITY)

    @property
    def expanded(self) -> bool:
        return any(a.kind == SECURITY for a in self.applications) or not any(
            s.secure for s in self.streams.values())

    @property
    def hyperperiod(self) -> int:
        periods = [a.period for a in self.applications if a.period is not None]
        return hyperperiod(periods)

    def distinct_streams(self) -> dict[str, list[Stream]]:
        """Distinct stream id -> its redundant copies, in copy order."""
        out: dict[str, list[Stream]] = {}
        for app in self.applications:
            for s in app.streams:
                out.setdefault(s.id, []).append(s)
        for copies in out.values():
            copies.sort(key=lambda s: s.copy)
        return out

    def wire_bytes(self, stream: Stream) -> int:
        """On-wire frame size: payload + header overhead + MAC if secured."""
        extra = self.constants.mac_size if stream.secure else 0
        return stream.size + self.constants.oh + extra

    def link_duration(self, stream: Stream, link: Link) -> int:
        return ceil_div_frac(self.wire_bytes(stream), link.speed)

    def sender_es(self, stream: Stream) -> str:
        return self.tasks[stream.sender].es

    def receiver_ess(self, stream: Stream) -> list[str]:
        return sorted({self.tasks[tid].es for tid in stream.receivers})

    def with_p_int(self, p_int: int) -> "SystemModel":
        """Bind the symbolic security-application period to a concrete P_int."""
        apps = []
        for app in self.applications:
            if app.kind == SECURITY and app.period is None:
                apps.append(replace(
                    app,
                    period=p_int,
                    tasks=tuple(replace(t, period=p_int) for t in app.tasks),
                    streams=tuple(replace(s, period=p_int) for s in app.streams),
                ))
            else:
                apps.append(app)
        return SystemModel(self.network, apps, self.constants)


def ceil_div_frac(amount: int, rate: Fraction) -> int:
    """ceil(amount / rate) in exact arithmetic."""
    frac = Fraction(amount) / rate
    return -((-frac.numerator) // frac.denominator)


def hyperperiod(periods: Iterable[int]) -> int:
    periods = list(periods)
    if not periods:
        raise ModelError("hyperperiod of an empty period set")
    if any(p <= 0 for p in periods):
        raise ModelError("periods must be positive")
    return math.lcm(*periods)


def communication_depth(app: Application) -> int:
    """Longest chain of secure streams in the application DAG.

    Only edges bound to secure streams count; ES-internal dependencies and
    non-secure streams contribute 0 to the path length.
    """
    succ: dict[str, list[tuple[str, int]]] = {t.id: [] for t in app.tasks}
    for a, b in app.internal_deps:
        succ[a].append((b, 0))
    for s in app.streams:
        if s.copy != 0:
            continue  # copies duplicate the same dependency
        w = 1 if s.secure else 0
        for r in s.receivers:
            succ[s.sender].append((r, w))

    memo: dict[str, int] = {}

    def longest(tid: str) -> int:
        if tid not in memo:
            memo[tid] = 0  # guards against accidental cycles during recursion
            memo[tid] = max((w + longest(nxt) for nxt, w in succ[tid]), default=0)
        return memo[tid]

    return max((longest(t.id) for t in app.tasks), default=0)


class Diagnostic(NamedTuple):
    code: str
    subject: str
    message: str


def validate_model(model: SystemModel) -> list[Diagnostic]:
    """All invariant violations; an empty list means the model is well-formed."""
    out: list[Diagnostic] = []
    net = model.network

    dup = set(net.end_systems) & set(net.switches)
    for n in sorted(dup):
        out.append(Diagnostic("node-dup", n, "node id used as both ES and switch"))
    for e in net.end_systems.values():
        if e.hash_time <= 0:
            out.append(Diagnostic("hash-time", e.id, "hash time must be positive"))
    for (a, b), link in sorted(net.links.items()):
        if a == b:
            out.append(Diagnostic("self-link", a, "self links are not allowed"))
        for n in (a, b):
            if not (net.is_es(n) or net.is_switch(n)):
                out.append(Diagnostic("link-endpoint", f"{a}->{b}", f"unknown node {n}"))
        if link.speed <= 0:
            out.append(Diagnostic("link-speed", f"{a}->{b}", "speed must be positive"))
        rev = net.links.get((b, a))
        if rev is None:
            out.append(Diagnostic("full-duplex", f"{a}->{b}", "missing reverse link"))
        elif rev.speed != link.speed:
            out.append(Diagnostic("full-duplex", f"{a}->{b}", "reverse link speed differs"))

    seen_tasks: set[str] = set()
    for app in model.applications:
        if app.period is not None and app.period <= 0:
            out.append(Diagnostic("period", app.id, "period must be positive"))
        for t in app.tasks:
            if t.id in seen_tasks:
                out.append(Diagnostic("task-dup", t.id, "task id reused"))
            seen_tasks.add(t.id)
            if not net.is_es(t.es):
                out.append(Diagnostic("task-es", t.id, f"unknown end-system {t.es}"))
            if t.wcet <= 0:
                out.append(Diagnostic("task-wcet", t.id, "wcet must be positive"))
            elif app.period is not None and t.wcet > app.period:
                out.append(Diagnostic("task-wcet", t.id, "wcet exceeds period"))
            if t.period != app.period:
                out.append(Diagnostic("period-inherit", t.id, "task period differs from application"))
        task_ids = {t.id for t in app.tasks}
        by_id = {t.id: t for t in app.tasks}
        copies: dict[str, list[Stream]] = {}
        for s in app.streams:
            copies.setdefault(s.id, []).append(s)
            if s.period != app.period:
                out.append(Diagnostic("period-inherit", s.uid, "stream period differs from application"))
            if s.size > model.constants.mtu:
                out.append(Diagnostic("mtu", s.uid, f"size {s.size} exceeds MTU {model.constants.mtu}"))
            if s.size <= 0:
                out.append(Diagnostic("stream-size", s.uid, "size must be positive"))
            if not s.receivers:
                out.append(Diagnostic("stream-receivers", s.uid, "no destination tasks"))
            endpoints = (s.sender,) + s.receivers
            for tid in endpoints:
                if tid not in task_ids:
                    out.append(Diagnostic("stream-endpoint", s.uid,
                                          f"task {tid} not in application {app.id}"))
            if all(tid in by_id for tid in endpoints):
                src_es = by_id[s.sender].es
                for tid in s.receivers:
                    if by_id[tid].es == src_es:
                        out.append(Diagnostic("stream-loop", s.uid,
                                              f"receiver task {tid} shares ES with sender"))
        for sid, group in sorted(copies.items()):
            rl = group[0].rl
            if sorted(s.copy for s in group) != list(range(rl)):
                out.append(Diagnostic("copies", sid, f"expected copies 0..{rl - 1}"))
            first = group[0]
            for s in group[1:]:
                same = (s.sender == first.sender and s.receivers == first.receivers
                        and s.size == first.size and s.secure == first.secure
                        and s.rl == first.rl)
                if not same:
                    out.append(Diagnostic("copies", sid, "copies disagree on stream fields"))
        if _has_cycle(app):
            out.append(Diagnostic("cycle", app.id, "application graph has a cycle"))

    if any(s.secure for s in model.streams.values()):
        if model.constants.key_size <= 0 or model.constants.mac_size <= 0:
            out.append(Diagnostic("constants", "KS/MAC",
                                  "key and MAC sizes must be positive with secure streams"))
    return out


def _has_cycle(app: Application) -> bool:
    succ: dict[str, list[str]] = {t.id: [] for t in app.tasks}
    for a, b in app.internal_deps:
        if a in succ and b in succ:
            succ[a].append(b)
    for s in app.streams:
        if s.copy == 0 and s.sender in succ:
            succ[s.sender].extend(r for r in s.receivers if r in succ)
    state: dict[str, int] = {}

    def visit(v: str) -> bool:
        state[v] = 1
        for w in succ[v]:
            st = state.get(w)
            if st == 1 or (st is None and visit(w)):
                return True
        state[v] = 2
        return False

    return any(visit(t) for t in succ if t not in state)


def expand_security_model(model: SystemModel) -> SystemModel:
    """Generate the key-distribution applications required by TESLA.

    For every end-system that sends at least one secure stream: one security
    application holding a key release task on the sender, a multicast key
    stream (size = key size, redundancy = max over that sender's secure
    streams), and a key verification task on every end-system receiving a
    secure stream from it. Security applications carry a symbolic period
    (None) until P_int is bound. Idempotent.
    """
    if model.security_apps:
        return model

    senders: dict[str, list[Stream]] = {}
    for app in model.normal_apps:
        for s in app.streams:
            if s.secure:
                es = model.sender_es(s)
                senders.setdefault(es, []).append(s)

    sec_apps: list[Application] = []
    for es_id in sorted(senders):
        es = model.network.end_systems[es_id]
        if es.hash_time <= 0:
            raise ModelError(f"secure sender {es_id} has no usable hash time")
        secure = senders[es_id]
        recv_ess: list[str] = []
        for s in secure:
            for r in model.receiver_ess(s):
                if r not in recv_ess:
                    recv_ess.append(r)
        recv_ess.sort()
        rl = max(s.rl for s in secure)

        release = Task(id=f"kr_{es_id}", es=es_id, wcet=max(1, (es.hash_time + 1) // 2),
                       kind=TASK_KEY_RELEASE)
        verifiers = tuple(
            Task(id=f"kv_{es_id}_{r}", es=r,
                 wcet=model.network.end_systems[r].hash_time,
                 kind=TASK_KEY_VERIFY, src=es_id)
            for r in recv_ess)
        key_copies = tuple(
            Stream(id=f"k_{es_id}", copy=i, sender=release.id,
                   receivers=tuple(v.id for v in verifiers),
                   size=model.constants.key_size, rl=rl, secure=False)
            for i in range(rl))
        sec_apps.append(Application(
            id=f"sec_{es_id}", kind=SECURITY, period=None,
            tasks=(release,) + verifiers, streams=key_copies))

    return SystemModel(model.network, model.applications + tuple(sec_apps),
                       model.constants)


def key_verification_task(model: SystemModel, sender_es: str, receiver_es: str) -> Task:
    """The key verification task checking `sender_es`'s chain on `receiver_es`."""
    for app in model.security_apps:
        for t in app.tasks:
            if t.kind == TASK_KEY_VERIFY and t.src == sender_es and t.es == receiver_es:
                return t
    raise ModelError(f"no key verification task for {sender_es} on {receiver_es}")
