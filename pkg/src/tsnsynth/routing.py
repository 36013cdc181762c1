"""Redundant multicast routing: successor-matrix trees, constraint checks,
k-shortest candidate paths and an exact branch-and-bound optimizer.

A route for one stream copy is a tree rooted at the sender end-system whose
leaves are the receiver end-systems; it is stored as a successor map
(node -> parent toward the root, root mapping to itself), which makes the
structural constraints purely local.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional

from .errors import InfeasibleError
from .model import Network, Stream, SystemModel

Path = tuple[str, ...]

RELAXED_OVERLAP_WEIGHT = 100


@dataclass(frozen=True)
class RouteTree:
    root: str
    successor: dict[str, str]  # node -> parent toward root; root -> root
    receivers: tuple[str, ...]

    def links(self) -> list[tuple[str, str]]:
        """Directed route links (parent, child), sorted."""
        return sorted((p, n) for n, p in self.successor.items() if p != n)

    def undirected_links(self) -> set[tuple[str, str]]:
        return {tuple(sorted(l)) for l in self.links()}

    def children(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for n, p in sorted(self.successor.items()):
            if p != n:
                out.setdefault(p, []).append(n)
        return out

    def path_to(self, receiver: str) -> Path:
        """Node sequence root..receiver."""
        seq = [receiver]
        seen = {receiver}
        while seq[-1] != self.root:
            nxt = self.successor.get(seq[-1])
            if nxt is None or nxt in seen:
                raise ValueError(f"broken route tree toward {receiver}")
            seq.append(nxt)
            seen.add(nxt)
        return tuple(reversed(seq))


@dataclass
class RouteAssignment:
    trees: dict[str, RouteTree]  # stream uid -> tree
    optimal: bool = True

    def tree(self, uid: str) -> RouteTree:
        return self.trees[uid]


def tree_from_paths(root: str, paths: Iterable[Path]) -> Optional[RouteTree]:
    """Merge per-receiver root->receiver paths into a tree.

    Returns None when the paths disagree on some node's successor (a
    diverge-and-rejoin union is not a tree).
    """
    successor: dict[str, str] = {root: root}
    receivers: list[str] = []
    for path in paths:
        if path[0] != root:
            return None
        for parent, node in zip(path, path[1:]):
            old = successor.get(node)
            if old is None:
                successor[node] = parent
            elif old != parent:
                return None
        if path[-1] not in receivers:
            receivers.append(path[-1])
    return RouteTree(root=root, successor=successor, receivers=tuple(sorted(receivers)))


def graft_paths(root: str, paths: Iterable[Path]) -> RouteTree:
    """Merge paths into a tree, letting earlier paths win at junctions.

    Each path is walked backwards from its receiver and attached at the
    first node already on the tree; the path's own prefix toward the root is
    discarded there, so the result is always a valid tree even for
    inconsistent path sets.
    """
    successor: dict[str, str] = {root: root}
    receivers: list[str] = []
    for path in paths:
        for parent, node in reversed(list(zip(path, path[1:]))):
            if node in successor:
                break
            successor[node] = parent
        target = path[-1]
        if target not in receivers:
            receivers.append(target)
    return RouteTree(root=root, successor=successor, receivers=tuple(sorted(receivers)))


# ---------------------------------------------------------------------------
# shortest paths

def _dijkstra(net: Network, src: str, dst: str,
              weights: Optional[dict[tuple[str, str], Fraction]],
              banned_nodes: frozenset[str], banned_edges: frozenset[tuple[str, str]],
              ) -> Optional[tuple[Fraction, Path]]:
    """Deterministic Dijkstra; equal-cost ties resolved by lexicographic path.

    Intermediate hops may only be switches.
    """
    best: dict[str, tuple] = {}
    heap: list[tuple] = [(Fraction(0), (src,))]
    while heap:
        dist, path = heapq.heappop(heap)
        node = path[-1]
        if node == dst:
            return dist, path
        if node in best and best[node] <= (dist, path):
            continue
        best[node] = (dist, path)
        for nxt in net.neighbours(node):
            if nxt in path or nxt in banned_nodes or (node, nxt) in banned_edges:
                continue
            if nxt != dst and net.is_es(nxt):
                continue
            w = weights.get((node, nxt), 1) if weights else 1
            heapq.heappush(heap, (dist + w, path + (nxt,)))
    return None


def path_weight(path: Path, weights: Optional[dict[tuple[str, str], Fraction]]) -> Fraction:
    if not weights:
        return Fraction(len(path) - 1)
    return sum((Fraction(weights.get(e, 1)) for e in zip(path, path[1:])), Fraction(0))


def k_shortest_paths(net: Network, src: str, dst: str, k: int,
                     weights: Optional[dict[tuple[str, str], Fraction]] = None,
                     ) -> list[Path]:
    """Up to k loop-free src->dst paths by ascending weight (Yen).

    No intermediate end-systems; equal-cost paths ordered by lexicographic
    node sequence for reproducibility. Empty when dst is unreachable.
    """
    if src == dst:
        raise ValueError("source and destination coincide")
    if k < 1:
        raise ValueError("k must be >= 1")
    first = _dijkstra(net, src, dst, weights, frozenset(), frozenset())
    if first is None:
        return []
    found: list[Path] = [first[1]]
    candidates: list[tuple[Fraction, Path]] = []
    seen = {first[1]}
    while len(found) < k:
        prev = found[-1]
        for i in range(len(prev) - 1):
            spur = prev[i]
            root_path = prev[: i + 1]
            banned_edges = {
                (p[i], p[i + 1]) for p in found
                if len(p) > i + 1 and p[: i + 1] == root_path
            }
            banned_nodes = frozenset(root_path[:-1])
            res = _dijkstra(net, spur, dst, weights, banned_nodes, frozenset(banned_edges))
            if res is None:
                continue
            total = root_path[:-1] + res[1]
            if total in seen:
                continue
            seen.add(total)
            heapq.heappush(candidates, (path_weight(total, weights), total))
        if not candidates:
            break
        found.append(heapq.heappop(candidates)[1])
    return found


def diverse_shortest_paths(net: Network, src: str, dst: str, k: int,
                           weights: Optional[dict[tuple[str, str], Fraction]] = None,
                           ) -> list[Path]:
    """k-shortest paths, enriched with the shortest path through every
    (first switch, last switch) combination.

    Plain k-shortest sets often funnel through one or two of an end-system's
    egress links; redundant multicast trees need candidates spread over all
    of them to have any chance of staying disjoint. k=1 stays a single
    candidate (no route exploration at all).
    """
    paths = k_shortest_paths(net, src, dst, k, weights)
    if k <= 1:
        return paths
    seen = set(paths)
    extras: list[tuple[Fraction, Path]] = []
    firsts = [n for n in net.neighbours(src) if net.is_switch(n)]
    lasts = [n for n in net.neighbours(dst) if net.is_switch(n)]
    for first in firsts:
        for last in lasts:
            res = _dijkstra(net, first, last, weights,
                            banned_nodes=frozenset({src, dst}),
                            banned_edges=frozenset())
            if res is None:
                continue
            candidate = (src,) + res[1] + (dst,)
            if len(set(candidate)) != len(candidate) or candidate in seen:
                continue
            seen.add(candidate)
            extras.append((path_weight(candidate, weights), candidate))
    extras.sort(key=lambda e: (e[0], e[1]))
    return paths + [p for _, p in extras]


def find_disjoint_choices(pools: dict[tuple[int, str], list[Path]], root: str,
                          n_copies: int, receivers: list[str],
                          node_budget: int = 60_000,
                          ) -> Optional[dict[tuple[int, str], int]]:
    """First (lexicographic) candidate-index combination whose grafted copy
    trees share no physical link; None when the pools admit none within the
    node budget. Deterministic: bounded by search nodes, never wall time.

    `pools` maps (copy index, receiver ES) to that pair's candidate paths.
    """
    slots = [(ci, r) for ci in range(n_copies) for r in receivers]
    succs: list[dict[str, str]] = [dict() for _ in range(n_copies)]
    links: list[set] = [set() for _ in range(n_copies)]
    picked: list[int] = []
    state = [node_budget]

    def descend(pos: int) -> bool:
        if pos == len(slots):
            return True
        state[0] -= 1
        if state[0] <= 0:
            return False
        ci, recv = slots[pos]
        for idx, path in enumerate(pools[(ci, recv)]):
            added = []
            ok = True
            for a, b in reversed(list(zip(path, path[1:]))):
                if b in succs[ci]:
                    break
                phys = (a, b) if a < b else (b, a)
                if any(phys in other for j, other in enumerate(links) if j != ci):
                    ok = False
                    break
                added.append((b, a, phys))
            if not ok:
                continue
            for b, a, phys in added:
                succs[ci][b] = a
                links[ci].add(phys)
            picked.append(idx)
            if descend(pos + 1):
                return True
            picked.pop()
            for b, a, phys in added:
                del succs[ci][b]
                links[ci].discard(phys)
            if state[0] <= 0:
                return False
        return False

    if descend(0):
        return {slot: idx for slot, idx in zip(slots, picked)}
    return None


def max_feasible_redundancy(net: Network, root: str, receivers: list[str],
                            rl: int, k: int = 8) -> int:
    """Largest copy count <= rl for which candidate-path pools admit
    physically disjoint trees from `root` to every receiver."""
    pools = {}
    for ci in range(rl):
        for r in receivers:
            pools[(ci, r)] = diverse_shortest_paths(net, root, r, k)
            if not pools[(ci, r)]:
                return 0
    for n in range(rl, 1, -1):
        if find_disjoint_choices(pools, root, n, receivers) is not None:
            return n
    return 1


def all_simple_paths(net: Network, src: str, dst: str, limit: int = 10000) -> list[Path]:
    """Every loop-free src->dst path without intermediate end-systems,
    ordered like k_shortest_paths output (hop count, then lexicographic)."""
    out: list[Path] = []

    def walk(path: list[str]) -> None:
        node = path[-1]
        if node == dst:
            out.append(tuple(path))
            return
        if len(out) >= limit:
            return
        for nxt in net.neighbours(node):
            if nxt in path:
                continue
            if nxt != dst and net.is_es(nxt):
                continue
            path.append(nxt)
            walk(path)
            path.pop()

    walk([src])
    out.sort(key=lambda p: (len(p), p))
    return out


# ---------------------------------------------------------------------------
# costs and constraint checks

def routing_cost(model: SystemModel, assign: RouteAssignment, mode: str = "strict") -> int:
    length = sum(len(t.links()) for t in assign.trees.values())
    if mode == "strict":
        return length
    if mode == "relaxed":
        return length + RELAXED_OVERLAP_WEIGHT * overlap_count(model, assign)
    raise ValueError(f"unknown mode {mode!r}")


def overlap_count(model: SystemModel, assign: RouteAssignment) -> int:
    """Redundant copies sharing a link, counted beyond the first, summed per
    distinct stream per directed link."""
    total = 0
    for sid, copies in model.distinct_streams().items():
        uses: dict[tuple[str, str], int] = {}
        for s in copies:
            tree = assign.trees.get(s.uid)
            if tree is None:
                continue
            for link in tree.links():
                uses[link] = uses.get(link, 0) + 1
        total += sum(c - 1 for c in uses.values() if c > 1)
    return total


def overlapping_streams(model: SystemModel, assign: RouteAssignment) -> list[str]:
    """Distinct stream ids whose redundant copies share at least one link."""
    out = []
    for sid, copies in sorted(model.distinct_streams().items()):
        seen: dict[tuple[str, str], int] = {}
        for s in copies:
            tree = assign.trees.get(s.uid)
            if tree is None:
                continue
            for link in tree.links():
                seen[link] = seen.get(link, 0) + 1
        if any(c > 1 for c in seen.values()):
            out.append(sid)
    return out


def bandwidth_utilization(model: SystemModel, assign: RouteAssignment,
                          ) -> dict[tuple[str, str], Fraction]:
    """Per directed link: sum over distinct streams of (wire size / period) /
    speed. Copies of one stream sharing a link are counted once (802.1CB)."""
    usage: dict[tuple[str, str], Fraction] = {k: Fraction(0) for k in model.network.links}
    for sid, copies in model.distinct_streams().items():
        links: set[tuple[str, str]] = set()
        for s in copies:
            tree = assign.trees.get(s.uid)
            if tree is not None:
                links.update(tree.links())
        rep = copies[0]
        if rep.period is None:
            continue
        demand = Fraction(model.wire_bytes(rep), rep.period)
        for link in links:
            usage[link] += demand / model.network.links[link].speed
    return usage


class RoutingViolation(NamedTuple):
    constraint: str
    stream: str
    subject: str
    message: str


def check_routing_constraints(model: SystemModel, assign: RouteAssignment,
                              mode: str = "strict") -> list[RoutingViolation]:
    out: list[RoutingViolation] = []
    net = model.network
    for uid, stream in sorted(model.streams.items()):
        tree = assign.trees.get(uid)
        if tree is None:
            out.append(RoutingViolation("R3.1", uid, uid, "stream has no route"))
            continue
        sender = model.sender_es(stream)
        recv = set(model.receiver_ess(stream))
        succ = tree.successor

        if succ.get(sender) != sender:
            out.append(RoutingViolation("R3.2", uid, sender,
                                        "sender ES must be its own successor"))
        for r in sorted(recv):
            if r not in succ:
                out.append(RoutingViolation("R3.1", uid, r, "receiver ES has no successor"))
        for n in sorted(succ):
            if net.is_es(n) and n != sender and n not in recv:
                out.append(RoutingViolation("R3.3", uid, n,
                                            "non-receiver ES on the route"))

        # R1/R4: consistent path lengths back to the sender (no cycles)
        for n in sorted(succ):
            seen = {n}
            cur = n
            ok = False
            while True:
                nxt = succ.get(cur)
                if nxt is None or (nxt in seen and nxt != cur):
                    break
                if nxt == cur:
                    ok = cur == sender
                    break
                seen.add(nxt)
                cur = nxt
            if not ok:
                out.append(RoutingViolation("R1", uid, n,
                                            "successor chain does not reach the sender"))
                break

        # R2: loose ends — referenced nodes continue, on-route switches are used
        referenced = {p for n, p in succ.items() if p != n}
        for m in sorted(referenced):
            if m not in succ:
                out.append(RoutingViolation("R2", uid, m,
                                            "node referenced as successor has none itself"))
        for m in sorted(succ):
            if m != sender and m not in recv and m not in referenced:
                out.append(RoutingViolation("R2", uid, m, "dangling on-route node"))

        for parent, child in tree.links():
            if (parent, child) not in net.links:
                out.append(RoutingViolation("R1", uid, f"{parent}->{child}",
                                            "route uses a non-existent link"))

    # R5: bandwidth under 100% per link
    for key, util in sorted(bandwidth_utilization(model, assign).items()):
        if util > 1:
            out.append(RoutingViolation("R5", "", f"{key[0]}->{key[1]}",
                                        f"bandwidth utilization {float(util):.3f} > 1"))

    if mode == "strict":
        for sid, copies in sorted(model.distinct_streams().items()):
            for a, b in itertools.combinations(copies, 2):
                ta, tb = assign.trees.get(a.uid), assign.trees.get(b.uid)
                if ta is None or tb is None:
                    continue
                shared = set(ta.links()) & set(tb.links())
                for link in sorted(shared):
                    out.append(RoutingViolation(
                        "R6", sid, f"{link[0]}->{link[1]}",
                        f"copies {a.uid} and {b.uid} share a link"))
    return out


# ---------------------------------------------------------------------------
# exact optimizer

@dataclass
class _StreamSearch:
    """Branch-and-bound over candidate per-receiver paths for one distinct
    stream: copies must merge into consistent trees and (strict mode) stay
    link-disjoint across copies."""

    copies: list[Stream]
    receivers: list[str]
    root: str
    candidates: dict[str, list[Path]]  # per receiver
    mode: str
    deadline: float
    best_cost: float = float("inf")
    best: Optional[list[RouteTree]] = None
    timed_out: bool = False

    def run(self) -> None:
        order = [(ci, r) for ci in range(len(self.copies)) for r in self.receivers]
        self._descend(order, 0, [dict() for _ in self.copies], 0)

    def _descend(self, order, idx, succs, cost) -> None:
        if time.monotonic() > self.deadline:
            self.timed_out = True
            return
        if cost + self._bound(order, idx, succs) >= self.best_cost:
            return
        if idx == len(order):
            self.best_cost = cost
            self.best = [
                RouteTree(root=self.root, successor=dict(s) | {self.root: self.root},
                          receivers=tuple(self.receivers))
                for s in succs
            ]
            return
        ci, recv = order[idx]
        succ = succs[ci]
        for path in self.candidates[recv]:
            added = self._graft_extend(succ, path, ci, succs)
            if added is None:
                continue
            new_links, penalty = added
            for n, p in new_links:
                succ[n] = p
            self._descend(order, idx + 1, succs, cost + len(new_links) + penalty)
            for n, _ in new_links:
                del succ[n]
            if self.timed_out:
                return

    def _bound(self, order, idx, succs) -> int:
        remaining = 0
        for ci, recv in order[idx:]:
            if recv not in succs[ci]:
                remaining += 1  # the final hop into an unconnected receiver is new
        return remaining

    def _graft_extend(self, succ, path: Path, ci: int, succs):
        """Links added by grafting `path` onto the copy's partial tree (walked
        back from the receiver to the junction); None when strict mode and a
        new link is already on a sibling copy."""
        new_links: list[tuple[str, str]] = []
        penalty = 0
        for parent, node in reversed(list(zip(path, path[1:]))):
            if node in succ:
                break
            phys = tuple(sorted((parent, node)))
            shared = any(
                n2 != p2 and tuple(sorted((p2, n2))) == phys
                for cj, other in enumerate(succs) if cj != ci
                for n2, p2 in other.items())
            if shared:
                if self.mode == "strict":
                    return None  # copies must be physically disjoint
                penalty += RELAXED_OVERLAP_WEIGHT
            new_links.append((node, parent))
        return new_links, penalty


def candidate_paths(net: Network, src: str, dst: str, k: int) -> list[Path]:
    """Candidate pool for the exact search: exhaustive on tiny topologies so
    the branch-and-bound provably matches full enumeration, k-shortest plus
    first/last-hop diversity otherwise."""
    if len(net.end_systems) + len(net.switches) <= 8:
        return all_simple_paths(net, src, dst)
    return diverse_shortest_paths(net, src, dst, k)


def optimize_routes_exact(model: SystemModel, mode: str = "strict",
                          budget: float = 60.0, k: int = 8) -> RouteAssignment:
    """Minimum-length routing satisfying R1-R6 (strict) or R1-R5 (relaxed).

    Streams are independent in the objective, so each distinct stream is
    solved to optimality on its own; the rarely-binding R5 bandwidth cap is
    verified on the combination afterwards.
    """
    deadline = time.monotonic() + budget
    trees: dict[str, RouteTree] = {}
    optimal = True
    for sid, copies in sorted(model.distinct_streams().items()):
        root = model.sender_es(copies[0])
        receivers = model.receiver_ess(copies[0])
        cands = {r: candidate_paths(model.network, root, r, k) for r in receivers}
        for r, paths in cands.items():
            if not paths:
                raise InfeasibleError("routing", f"no path from {root} to {r} for {sid}",
                                      subjects=(sid,))
        search = _StreamSearch(copies=list(copies), receivers=receivers, root=root,
                               candidates=cands, mode=mode, deadline=deadline)
        search.run()
        if search.best is None:
            if search.timed_out:
                raise InfeasibleError("routing", f"budget exhausted before a route for {sid}",
                                      subjects=(sid,))
            raise InfeasibleError(
                "routing",
                f"stream {sid} (rl={copies[0].rl}) has no disjoint candidate routes",
                subjects=(sid,))
        optimal = optimal and not search.timed_out
        for s, tree in zip(copies, search.best):
            trees[s.uid] = tree

    assign = RouteAssignment(trees=trees, optimal=optimal)
    over = [v for v in check_routing_constraints(model, assign, "relaxed")
            if v.constraint == "R5"]
    if over:
        raise InfeasibleError("routing", f"bandwidth exceeded on {over[0].subject}",
                              subjects=(over[0].subject,))
    return assign
