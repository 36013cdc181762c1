"""Deterministic SVG rendering: Gantt schedules and route overlays.

Output is plain generated SVG with fixed float formatting, so identical
inputs produce byte-identical documents (golden-file friendly).
"""

from __future__ import annotations

import math
from typing import Optional

from ..model import SystemModel, TASK_KEY_RELEASE, TASK_KEY_VERIFY
from ..solution import Solution, resource_label

ROW_H = 22
LEFT = 130
WIDTH = 1000
TOP = 30

TASK_FILL = "#5b8ff9"
KEY_RELEASE_FILL = "#e8a0d8"
KEY_VERIFY_FILL = "#6abf69"
STREAM_FILL = "#e06666"
KEY_STREAM_FILL = "#f6b26b"
MAC_FILL = "#b30000"
PALETTE = ("#e06666", "#6fa8dc", "#93c47d", "#f6b26b", "#8e7cc3",
           "#76a5af", "#c27ba0", "#a64d79")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _rect(x, y, w, h, fill, title) -> str:
    return (f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
            f'height="{_fmt(h)}" fill="{fill}" stroke="#333" stroke-width="0.5">'
            f"<title>{title}</title></rect>")


def render(model: SystemModel, solution: Optional[Solution], target: str) -> str:
    if target == "gantt":
        return render_gantt(model, solution)
    if target == "routes":
        return render_routes(model, solution)
    raise ValueError(f"unknown render target {target!r}")


def render_gantt(model: SystemModel, solution: Optional[Solution]) -> str:
    horizon = model.hyperperiod
    sched = solution.schedule if solution else None
    rows: list = sorted(model.network.end_systems)
    used_links = sorted({res for (_, res) in (sched.stream_offsets if sched else {})
                         if isinstance(res, tuple)},
                        key=lambda r: (r[0], r[1]))
    rows += used_links
    height = TOP + ROW_H * (len(rows) + 1) + 20
    scale = WIDTH / horizon if horizon else 1.0

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" '
             f'width="{LEFT + WIDTH + 20}" height="{height}" '
             f'font-family="monospace" font-size="11">']
    parts.append(f'<text x="{LEFT}" y="14">schedule over hyperperiod '
                 f'{horizon} us</text>')
    row_y = {r: TOP + i * ROW_H for i, r in enumerate(rows)}
    for r, y in row_y.items():
        parts.append(f'<text x="4" y="{y + 14}">{resource_label(r)}</text>')
        parts.append(f'<line x1="{LEFT}" y1="{y + ROW_H - 2}" '
                     f'x2="{LEFT + WIDTH}" y2="{y + ROW_H - 2}" '
                     f'stroke="#ccc" stroke-width="0.5"/>')

    if sched is not None:
        for tid in sorted(sched.task_offsets):
            task = model.tasks[tid]
            fill = {TASK_KEY_RELEASE: KEY_RELEASE_FILL,
                    TASK_KEY_VERIFY: KEY_VERIFY_FILL}.get(task.kind, TASK_FILL)
            y = row_y[task.es]
            for k in range(horizon // task.period):
                start = sched.task_offsets[tid] + k * task.period
                parts.append(_rect(LEFT + start * scale, y + 3,
                                   max(task.wcet * scale, 1.0), ROW_H - 8,
                                   fill, f"{tid} [{start},{start + task.wcet})"))
        for (uid, res) in sorted(sched.stream_offsets,
                                 key=lambda k: (k[0], resource_label(k[1]))):
            stream = model.streams[uid]
            offset = sched.stream_offsets[(uid, res)]
            if isinstance(res, tuple):
                dur = model.link_duration(stream, model.network.links[res])
                fill = KEY_STREAM_FILL if uid.startswith("k_") else STREAM_FILL
            else:
                dur = model.network.end_systems[res].hash_time
                fill = MAC_FILL
            y = row_y[res]
            for k in range(horizon // stream.period):
                start = offset + k * stream.period
                parts.append(_rect(LEFT + start * scale, y + 3,
                                   max(dur * scale, 1.0), ROW_H - 8,
                                   fill, f"{uid} [{start},{start + dur})"))
        if sched.p_int:
            t = sched.p_int
            while t < horizon:
                x = LEFT + t * scale
                parts.append(f'<line x1="{_fmt(x)}" y1="{TOP}" x2="{_fmt(x)}" '
                             f'y2="{height - 20}" stroke="#000" '
                             f'stroke-dasharray="6,4" stroke-width="1"/>')
                t += sched.p_int
        if sched.infeasible_apps:
            names = ", ".join(sorted(sched.infeasible_apps))
            parts.append(f'<text x="{LEFT}" y="{height - 6}" fill="#b30000">'
                         f'infeasible: {names}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _positions(model: SystemModel) -> dict[str, tuple[float, float]]:
    nodes = model.network.nodes
    pos = {}
    missing = []
    for n in nodes:
        point = (model.network.end_systems[n].point
                 if model.network.is_es(n) else model.network.switches[n].point)
        if point is None:
            missing.append(n)
        else:
            pos[n] = point
    for i, n in enumerate(sorted(missing)):  # deterministic circle fallback
        angle = 2 * math.pi * i / max(len(missing), 1)
        pos[n] = (0.5 + 0.4 * math.cos(angle), 0.5 + 0.4 * math.sin(angle))
    return pos


def render_routes(model: SystemModel, solution: Optional[Solution]) -> str:
    size = 640
    pad = 50
    pos = {n: (pad + p[0] * (size - 2 * pad), pad + p[1] * (size - 2 * pad))
           for n, p in _positions(model).items()}
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
             f'height="{size + 40}" font-family="monospace" font-size="11">']
    for a, b in model.network.undirected_links():
        x1, y1 = pos[a]
        x2, y2 = pos[b]
        parts.append(f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
                     f'y2="{_fmt(y2)}" stroke="#bbb" stroke-width="1.5"/>')
    if solution is not None:
        distinct = sorted({model.streams[uid].id for uid in solution.routes.trees
                           if uid in model.streams})
        colors = {sid: PALETTE[i % len(PALETTE)] for i, sid in enumerate(distinct)}
        for uid in sorted(solution.routes.trees):
            if uid not in model.streams:
                continue
            sid = model.streams[uid].id
            shift = 1.5 * (model.streams[uid].copy + 1)
            for a, b in solution.routes.trees[uid].links():
                x1, y1 = pos[a]
                x2, y2 = pos[b]
                parts.append(f'<line x1="{_fmt(x1 + shift)}" y1="{_fmt(y1 + shift)}" '
                             f'x2="{_fmt(x2 + shift)}" y2="{_fmt(y2 + shift)}" '
                             f'stroke="{colors[sid]}" stroke-width="2">'
                             f"<title>{uid}</title></line>")
        legend_y = size + 10
        for i, sid in enumerate(distinct):
            parts.append(f'<text x="{10 + 90 * i}" y="{legend_y}" '
                         f'fill="{colors[sid]}">{sid}</text>')
    for n in model.network.nodes:
        x, y = pos[n]
        shape = ("circle" if model.network.is_es(n) else "square")
        if shape == "circle":
            parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="10" '
                         f'fill="#fff" stroke="#333"/>')
        else:
            parts.append(f'<rect x="{_fmt(x - 9)}" y="{_fmt(y - 9)}" width="18" '
                         f'height="18" fill="#eee" stroke="#333"/>')
        parts.append(f'<text x="{_fmt(x - 12)}" y="{_fmt(y - 12)}">{n}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
