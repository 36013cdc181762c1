"""Synthetic test-case generation: geometric topologies and layer-by-layer
application DAGs."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from fractions import Fraction

from ..model import (Application, EndSystem, GlobalConstants, Link, Network,
                     NORMAL, Stream, Switch, SystemModel, Task)

GBIT_SPEED = Fraction(125)  # 1000 Mbit/s in bytes per microsecond


@dataclass(frozen=True)
class TestCaseSpec:
    __test__ = False  # keep pytest from collecting the dataclass

    n_es: int = 16
    n_sw: int = 8
    n_tasks: int = 24
    stream_size: tuple[int, int] = (1, 1500)
    wcet_fraction_cap: float = 0.06
    secure_prob: float = 0.3
    rl_range: tuple[int, int] = (1, 3)
    period_set: tuple[int, ...] = (10000, 15000, 20000, 50000)
    dag_depth: int = 3
    edge_prob: float = 0.5
    link_speed: Fraction = GBIT_SPEED
    hash_time: int = 10
    seed: int = 0
    label: str = ""

    def validate(self) -> None:
        if self.n_es < 1 or self.n_sw < 1 or self.n_tasks < 1:
            raise ValueError("counts must be >= 1")
        for p in (self.secure_prob, self.edge_prob):
            if not (0.0 <= p <= 1.0):
                raise ValueError("probabilities must be in [0, 1]")


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def generate_topology(n_sw: int, n_es: int, seed: int,
                      speed: Fraction = GBIT_SPEED, hash_time: int = 10) -> Network:
    """Random geometric topology: switches link to their nearest neighbours
    until each has degree 4 (or n_sw - 1 if fewer), every end-system links to
    its 3 closest switches."""
    rng = random.Random(seed)
    sw_ids = [f"SW{i + 1}" for i in range(n_sw)]
    es_ids = [f"ES{i + 1}" for i in range(n_es)]
    points = {n: (rng.random(), rng.random()) for n in sw_ids + es_ids}

    pairs: set[tuple[str, str]] = set()

    def connect(a: str, b: str) -> None:
        pairs.add((a, b))
        pairs.add((b, a))

    def degree(n: str) -> int:
        return sum(1 for (a, _) in pairs if a == n)

    target = min(4, n_sw - 1)
    for sw in sw_ids:
        others = sorted((o for o in sw_ids if o != sw),
                        key=lambda o: (_dist(points[sw], points[o]), o))
        for other in others:
            if degree(sw) >= target:
                break
            connect(sw, other)

    for es in es_ids:
        closest = sorted(sw_ids, key=lambda o: (_dist(points[es], points[o]), o))
        for sw in closest[:min(3, n_sw)]:
            connect(es, sw)

    return Network(
        end_systems=[EndSystem(e, hash_time, points[e]) for e in es_ids],
        switches=[Switch(s, points[s]) for s in sw_ids],
        links=[Link(a, b, speed) for a, b in sorted(pairs)],
    )


def generate_applications(spec: TestCaseSpec, seed: int, es_ids: list[str],
                          network: Network | None = None) -> list[Application]:
    """Layer-by-layer DAGs split into one application per weakly connected
    component; outgoing edges of a node merge into one multicast stream.

    When the network is given, each stream's redundancy level is clamped to
    the number of physically disjoint trees the topology actually supports
    for its receiver set (secure streams against the sender's whole secure
    receiver set, so the generated key streams stay routable too).
    """
    spec.validate()
    rng = random.Random(seed)
    n = spec.n_tasks
    layers = [rng.randrange(spec.dag_depth) for _ in range(n)]
    edges = []
    for u in range(n):
        for v in range(n):
            if layers[v] == layers[u] + 1 and rng.random() < spec.edge_prob:
                edges.append((u, v))

    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        parent[find(u)] = find(v)

    components: dict[int, list[int]] = {}
    for v in range(n):
        components.setdefault(find(v), []).append(v)

    task_es = [es_ids[rng.randrange(len(es_ids))] for _ in range(n)]
    drafts = []
    for ci, members in enumerate(sorted(components.values(), key=lambda m: m[0])):
        period = spec.period_set[rng.randrange(len(spec.period_set))]
        cap = max(1, int(spec.wcet_fraction_cap * period))
        tasks = tuple(Task(f"t{v}", task_es[v], rng.randint(1, cap), period)
                      for v in sorted(members))
        member_set = set(members)
        draft_streams = []
        deps: list[tuple[str, str]] = []
        for u in sorted(member_set):
            outs = sorted(v for (a, v) in edges if a == u)
            if not outs:
                continue
            same_es = [v for v in outs if task_es[v] == task_es[u]]
            remote = [v for v in outs if task_es[v] != task_es[u]]
            deps.extend((f"t{u}", f"t{v}") for v in same_es)
            if remote:
                size = rng.randint(*spec.stream_size)
                rl = rng.randint(*spec.rl_range)
                secure = rng.random() < spec.secure_prob
                draft_streams.append((u, remote, size, rl, secure, period))
        drafts.append((ci, period, tasks, draft_streams, deps))

    if network is not None:
        _clamp_redundancy(drafts, task_es, network)

    apps = []
    for ci, period, tasks, draft_streams, deps in drafts:
        streams = []
        for u, remote, size, rl, secure, speriod in draft_streams:
            for copy in range(rl):
                streams.append(Stream(
                    id=f"s{u}", copy=copy, sender=f"t{u}",
                    receivers=tuple(f"t{v}" for v in remote),
                    size=size, rl=rl, secure=secure, period=speriod))
        apps.append(Application(id=f"app{ci}", kind=NORMAL, period=period,
                                tasks=tasks, streams=tuple(streams),
                                internal_deps=tuple(deps)))
    return apps


def _clamp_redundancy(drafts, task_es, network: Network) -> None:
    """Reduce redundancy levels the topology cannot realize with physically
    disjoint trees: non-secure streams against their own receiver set, secure
    streams against the union of their sender's secure receivers (the
    generated key stream inherits max rl over that union)."""
    from ..routing import max_feasible_redundancy

    secure_union: dict[str, set[str]] = {}
    secure_max_rl: dict[str, int] = {}
    for _, _, _, draft_streams, _ in drafts:
        for u, remote, _, rl, secure, _ in draft_streams:
            if secure:
                es = task_es[u]
                secure_union.setdefault(es, set()).update(task_es[v] for v in remote)
                secure_max_rl[es] = max(secure_max_rl.get(es, 1), rl)

    union_cap = {
        es: max_feasible_redundancy(network, es, sorted(recvs), secure_max_rl[es])
        for es, recvs in secure_union.items() if secure_max_rl[es] > 1
    }
    for _, _, _, draft_streams, _ in drafts:
        for i, (u, remote, size, rl, secure, period) in enumerate(draft_streams):
            if rl == 1:
                continue
            root = task_es[u]
            recv = sorted({task_es[v] for v in remote})
            cap = max_feasible_redundancy(network, root, recv, rl)
            if secure:
                cap = min(cap, union_cap.get(root, cap))
            draft_streams[i] = (u, remote, size, min(rl, max(cap, 1)), secure, period)


def generate_case(spec: TestCaseSpec,
                  constants: GlobalConstants = GlobalConstants()) -> SystemModel:
    spec.validate()
    net = generate_topology(spec.n_sw, spec.n_es, spec.seed,
                            spec.link_speed, spec.hash_time)
    apps = generate_applications(spec, spec.seed + 1, sorted(net.end_systems), net)
    return SystemModel(net, apps, constants)


def without_security(model: SystemModel) -> SystemModel:
    """All streams at security level 0 (toggle for impact experiments)."""
    apps = []
    for app in model.applications:
        if app.kind != NORMAL:
            continue
        apps.append(replace(app, streams=tuple(
            replace(s, secure=False) for s in app.streams)))
    return SystemModel(model.network, apps, model.constants)


def without_redundancy(model: SystemModel) -> SystemModel:
    """All streams at redundancy level 1 (extra copies dropped)."""
    apps = []
    for app in model.applications:
        if app.kind != NORMAL:
            continue
        apps.append(replace(app, streams=tuple(
            replace(s, rl=1) for s in app.streams if s.copy == 0)))
    return SystemModel(model.network, apps, model.constants)
