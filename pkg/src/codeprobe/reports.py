"""CSV and SVG emission for probe evaluation results."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from .probe import AggregateRow, EvalReport

EVAL_HEADER = ["task", "graph_kind", "layer", "seed", "mcc", "macro_f1",
               "n_test"]


def task_graph_kind(task: str) -> str:
    """Graph kind encoded in a task name ('-' for non-graph tasks)."""
    if task.startswith(("relation_", "ingraph_")):
        return task.split("_", 1)[1].upper()
    return "-"
AGGREGATE_HEADER = ["task", "layer", "mcc_mean", "mcc_min", "mcc_max",
                    "macro_f1_mean", "macro_f1_min", "macro_f1_max", "n_runs"]


def write_eval_csv(reports: Sequence[EvalReport], path: Path | str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(EVAL_HEADER)
        for r in sorted(reports, key=lambda r: (r.task, r.layer, r.seed)):
            writer.writerow([r.task, task_graph_kind(r.task), r.layer, r.seed,
                             f"{r.mcc:.6f}", f"{r.macro_f1:.6f}", r.n_test])


def write_aggregate_csv(rows: Sequence[AggregateRow], path: Path | str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(AGGREGATE_HEADER)
        for row in sorted(rows, key=lambda r: (r.task, r.layer)):
            writer.writerow([
                row.task, row.layer, f"{row.mcc_mean:.6f}", f"{row.mcc_min:.6f}",
                f"{row.mcc_max:.6f}", f"{row.macro_f1_mean:.6f}",
                f"{row.macro_f1_min:.6f}", f"{row.macro_f1_max:.6f}", row.n_runs,
            ])


def read_aggregate_csv(path: Path | str) -> list[dict]:
    with open(path, newline="") as handle:
        return [dict(row) for row in csv.DictReader(handle)]


def render_layer_curves_svg(
    rows: Sequence[AggregateRow], path: Path | str, metric: str = "mcc_mean",
    width: int = 640, height: int = 400,
) -> None:
    """Score-vs-layer line chart, one series per task."""
    series: dict[str, list[tuple[int, float]]] = {}
    for row in rows:
        value = getattr(row, metric)
        series.setdefault(row.task, []).append((row.layer, value))
    for points in series.values():
        points.sort()

    margin = 50
    layers = sorted({layer for pts in series.values() for layer, _ in pts})
    lo_x, hi_x = (min(layers), max(layers)) if layers else (0, 1)
    if hi_x == lo_x:
        hi_x = lo_x + 1
    lo_y, hi_y = -1.0, 1.0

    def sx(layer: float) -> float:
        return margin + (layer - lo_x) / (hi_x - lo_x) * (width - 2 * margin)

    def sy(value: float) -> float:
        return height - margin - (value - lo_y) / (hi_y - lo_y) * (height - 2 * margin)

    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
               "#8c564b", "#e377c2"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{sy(0):.1f}" x2="{width - margin}" '
        f'y2="{sy(0):.1f}" stroke="#cccccc" stroke-dasharray="4 4"/>',
    ]
    for layer in layers:
        parts.append(
            f'<text x="{sx(layer):.1f}" y="{height - margin + 16}" '
            f'font-size="10" text-anchor="middle">{layer}</text>'
        )
    for tick in (-1.0, -0.5, 0.0, 0.5, 1.0):
        parts.append(
            f'<text x="{margin - 6}" y="{sy(tick) + 3:.1f}" font-size="10" '
            f'text-anchor="end">{tick:g}</text>'
        )
    for i, (task, points) in enumerate(sorted(series.items())):
        color = palette[i % len(palette)]
        coords = " ".join(f"{sx(layer):.1f},{sy(value):.1f}" for layer, value in points)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{coords}"/>')
        for layer, value in points:
            parts.append(f'<circle cx="{sx(layer):.1f}" cy="{sy(value):.1f}" '
                         f'r="2.5" fill="{color}"/>')
        parts.append(f'<text x="{width - margin + 4}" '
                     f'y="{sy(points[-1][1]) + 3:.1f}" font-size="10" '
                     f'fill="{color}">{task}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))
