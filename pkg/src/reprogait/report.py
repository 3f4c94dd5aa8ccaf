"""Report emission: results CSV, structured summary, and an R^2 chart.

All three artifacts are pure functions of the sweep report (floats at 17
significant digits in the CSV/summary, fixed 2-decimal coordinates in
the SVG), so emitting the same report twice is byte-identical.
"""

import json
import os

import numpy as np

from .checkpoint import fmt17
from .errors import ConfigError, FormatError
from .evaluate import StrategyResult, SweepReport

RESULTS_CSV = "results.csv"
SUMMARY_JSON = "summary.json"
CHART_SVG = "r2_vs_ratio.svg"

_CHART_COLORS = {
    "cross": "#888888",
    "direct": "#d95f02",
    "refurbished": "#1b9e77",
}


def results_to_csv_text(report):
    lines = ["strategy,train_ratio,amputee_id,r2,seed"]
    for res in report.results:
        for sid, value in zip(res.amputee_ids, res.r2_values):
            lines.append(
                f"{res.strategy},{fmt17(res.train_ratio)},{sid},"
                f"{fmt17(value)},{res.seed}"
            )
    return "\n".join(lines) + "\n"


def results_from_csv_text(text):
    lines = text.splitlines()
    if not lines or lines[0] != "strategy,train_ratio,amputee_id,r2,seed":
        raise FormatError("line 1: bad results header")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != 5:
            raise FormatError(f"line {i}: expected 5 cells, got {len(cells)}")
        rows.append(
            {
                "strategy": cells[0],
                "train_ratio": float(cells[1]),
                "amputee_id": cells[2],
                "r2": float(cells[3]),
                "seed": int(cells[4]),
            }
        )
    return rows


def report_from_rows(rows, provenance=None):
    """Rebuild a SweepReport from parsed CSV rows (used by cmd_report)."""
    grouped = {}
    order = []
    for row in rows:
        key = (row["strategy"], row["train_ratio"])
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(row)
    results = []
    for strategy, ratio in order:
        group = grouped[(strategy, ratio)]
        values = [g["r2"] for g in group]
        results.append(
            StrategyResult(
                strategy=strategy,
                train_ratio=ratio,
                amputee_ids=[g["amputee_id"] for g in group],
                r2_values=values,
                mean=float(np.mean(values)),
                std=float(np.std(values)),
                seed=group[0]["seed"],
            )
        )
    return SweepReport(results=results, provenance=provenance or {})


def summary_document(report):
    rows = []
    for res in report.results:
        rows.append(
            {
                "strategy": res.strategy,
                "train_ratio": res.train_ratio,
                "mean_r2": res.mean,
                "std_r2": res.std,
                "display": f"{res.mean:.2f} +/- {res.std:.2f}",
                "per_amputee": dict(zip(res.amputee_ids, res.r2_values)),
                "seed": res.seed,
            }
        )
    return {
        "format_version": 1,
        "aggregation": report.aggregation,
        "rows": rows,
        "provenance": report.provenance,
    }


def _svg_polyline(points, color, dashed=False):
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    dash = ' stroke-dasharray="6,4"' if dashed else ""
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="2"{dash} '
        f'points="{coords}" />'
    )


def chart_svg_text(report):
    """R^2 vs train ratio, one polyline per strategy (cross: flat baseline)."""
    width, height = 640, 420
    left, right, top, bottom = 70, 30, 30, 60
    per_strategy = {}
    for res in report.results:
        per_strategy.setdefault(res.strategy, []).append((res.train_ratio, res.mean))
    ratios = sorted(
        {r for s, pts in per_strategy.items() if s != "cross" for r, _ in pts}
    )
    if not ratios:
        ratios = [res.train_ratio for res in report.results] or [0.0, 1.0]
    x_lo, x_hi = min(ratios), max(ratios)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.05, x_hi + 0.05
    means = [res.mean for res in report.results]
    y_lo = min(0.0, min(means) - 0.1)
    y_hi = 1.0

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right)

    def sy(y):
        return height - bottom - (y - y_lo) / (y_hi - y_lo) * (height - top - bottom)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white" />',
        f'<line x1="{left}" y1="{sy(y_lo):.2f}" x2="{left}" y2="{sy(y_hi):.2f}" '
        'stroke="black" />',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" '
        f'y2="{height - bottom}" stroke="black" />',
    ]
    for ratio in ratios:
        x = sx(ratio)
        parts.append(
            f'<line x1="{x:.2f}" y1="{height - bottom}" x2="{x:.2f}" '
            f'y2="{height - bottom + 5}" stroke="black" />'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{height - bottom + 20}" font-size="12" '
            f'text-anchor="middle">{ratio:g}</text>'
        )
    tick = np.ceil(y_lo / 0.2) * 0.2
    while tick <= y_hi + 1e-9:
        y = sy(tick)
        parts.append(
            f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" '
            'stroke="black" />'
        )
        parts.append(
            f'<text x="{left - 10}" y="{y + 4:.2f}" font-size="12" '
            f'text-anchor="end">{tick:.1f}</text>'
        )
        tick += 0.2
    parts.append(
        f'<text x="{(left + width - right) / 2:.2f}" y="{height - 15}" '
        'font-size="13" text-anchor="middle">train ratio</text>'
    )
    parts.append(
        f'<text x="18" y="{(top + height - bottom) / 2:.2f}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 18 '
        f'{(top + height - bottom) / 2:.2f})">mean R^2</text>'
    )
    legend_y = top + 10
    for strategy in sorted(per_strategy):
        color = _CHART_COLORS.get(strategy, "#333333")
        pts = sorted(per_strategy[strategy])
        if strategy == "cross":
            level = pts[0][1]
            line = [(sx(x_lo), sy(level)), (sx(x_hi), sy(level))]
            parts.append(_svg_polyline(line, color, dashed=True))
        else:
            parts.append(_svg_polyline([(sx(r), sy(v)) for r, v in pts], color))
        parts.append(
            f'<rect x="{width - right - 150}" y="{legend_y - 9}" width="12" '
            f'height="12" fill="{color}" />'
        )
        parts.append(
            f'<text x="{width - right - 132}" y="{legend_y + 2}" '
            f'font-size="12">{strategy}</text>'
        )
        legend_y += 18
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(report, out_dir):
    """Write results.csv, summary.json and r2_vs_ratio.svg; byte-stable."""
    if not report.results:
        raise ConfigError("cannot emit an empty report")
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "csv": os.path.join(out_dir, RESULTS_CSV),
        "summary": os.path.join(out_dir, SUMMARY_JSON),
        "chart": os.path.join(out_dir, CHART_SVG),
    }
    with open(paths["csv"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(results_to_csv_text(report))
    with open(paths["summary"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary_document(report), fh, sort_keys=True, indent=1)
        fh.write("\n")
    with open(paths["chart"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(chart_svg_text(report))
    return paths
