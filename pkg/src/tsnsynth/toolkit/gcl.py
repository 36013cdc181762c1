"""Gate Control List export: per egress port, timed open/close entries over
one hyperperiod for the scheduled traffic class."""

from __future__ import annotations

from dataclasses import dataclass

from ..model import SystemModel
from ..routing import overlap_count
from ..solution import Solution

GCL_HEADER = "tsn-gcl v1"


@dataclass(frozen=True)
class GateControlList:
    link: tuple[str, str]
    entries: tuple[tuple[int, str], ...]  # (time, "o" | "C"), strictly increasing

    def open_windows(self) -> list[tuple[int, int]]:
        out = []
        for (t1, s1), (t2, _) in zip(self.entries, self.entries[1:]):
            if s1 == "o":
                out.append((t1, t2))
        return out


def export_gcl(model: SystemModel, solution: Solution) -> dict[tuple[str, str], GateControlList]:
    """One GCL per network link; back-to-back frames merge into one window.

    Refused for infeasible solutions: a gate plan for a schedule with
    unplaced applications or overlapping redundant routes is meaningless.
    """
    if solution.schedule.infeasible_apps:
        raise ValueError("refusing to export GCLs for an infeasible schedule: "
                         + ", ".join(sorted(solution.schedule.infeasible_apps)))
    if overlap_count(model, solution.routes) > 0:
        raise ValueError("refusing to export GCLs while redundant copies overlap")

    horizon = model.hyperperiod
    windows: dict[tuple[str, str], list[tuple[int, int]]] = {
        key: [] for key in model.network.links}
    for (uid, res), offset in solution.schedule.stream_offsets.items():
        if not isinstance(res, tuple):
            continue
        stream = model.streams[uid]
        dur = model.link_duration(stream, model.network.links[res])
        for k in range(horizon // stream.period):
            start = offset + k * stream.period
            windows[res].append((start, start + dur))

    out = {}
    for key in sorted(windows):
        merged: list[tuple[int, int]] = []
        for start, end in sorted(windows[key]):
            if merged and start == merged[-1][1]:
                merged[-1] = (merged[-1][0], end)
            elif merged and start < merged[-1][1]:
                raise ValueError(f"overlapping frames on {key}: cannot derive gates")
            else:
                merged.append((start, end))
        entries = []
        for start, end in merged:
            entries.append((start, "o"))
            entries.append((end, "C"))
        out[key] = GateControlList(link=key, entries=tuple(entries))
    return out


def frames_from_gcl(gcls: dict[tuple[str, str], GateControlList],
                    ) -> dict[tuple[str, str], list[tuple[int, int]]]:
    """Open windows per link; the round-trip image of the schedule's merged
    link occupancy."""
    return {key: gcl.open_windows() for key, gcl in sorted(gcls.items())}


def dumps_gcl(gcls: dict[tuple[str, str], GateControlList]) -> str:
    lines = [GCL_HEADER]
    for key in sorted(gcls):
        lines.append(f"[{key[0]}>{key[1]}]")
        for t, state in gcls[key].entries:
            lines.append(f"{t} {state}")
    return "\n".join(lines) + "\n"
