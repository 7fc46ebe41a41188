"""File outputs: CSV tables, the final-state dump, and SVG renderings.

All CSVs are UTF-8, comma-separated, '.' decimal, LF line endings, with fixed
headers; floats are written with repr so reruns are byte-identical and values
round-trip. SVGs are plain SVG 1.1 documents drawn only from data that is
also persisted, so every plot can be regenerated offline.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, config_to_dict
from .engine import IndicatorRow, ReplicationStats, SimState
from .governance import DecisionRecord


def _fmt(value) -> str:
    return repr(float(value))


def write_history_csv(path: str | Path, history: list[IndicatorRow], n_mayors: int) -> None:
    header = ["step", "total_accessibility", "total_travel_time", "link_count"]
    header += [f"mayor_{i}_objective" for i in range(n_mayors)]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in history:
            record = [row.step, _fmt(row.total_accessibility), _fmt(row.total_travel_time), row.link_count]
            record += [_fmt(x) for x in row.mayor_objectives]
            writer.writerow(record)


def write_decisions_csv(path: str | Path, decisions: list[DecisionRecord]) -> None:
    header = ["step", "level", "mayor_id", "chosen_a", "chosen_b", "obj_before", "obj_after", "n_candidates"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for rec in decisions:
            chosen_a = "" if rec.chosen is None else rec.chosen[0]
            chosen_b = "" if rec.chosen is None else rec.chosen[1]
            mayor = "" if rec.mayor is None else rec.mayor
            writer.writerow([rec.step, rec.level, mayor, chosen_a, chosen_b,
                             _fmt(rec.objective_before), _fmt(rec.objective_after), rec.n_candidates])


def write_final_state_json(path: str | Path, state: SimState) -> None:
    """Full dump for offline verification: land use, network, times, densities."""
    doc = {
        "config": config_to_dict(state.config),
        "step": state.step_index,
        "workers": state.metropolis.workers.tolist(),
        "jobs": state.metropolis.jobs.tolist(),
        "territory": state.metropolis.territory.tolist(),
        "links": [
            {
                "from": l.a,
                "to": l.b,
                "length_km": l.length_km,
                "v_link": l.v_link,
                "capacity": l.capacity,
                "flow": l.flow,
                "congested_time": l.congested_time,
            }
            for l in state.network.links
        ],
        "travel_times": state.travel_times.tolist(),
        "worker_density_history": [dens.tolist() for dens in state.density_history],
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def write_replicate_summary_csv(path: str | Path, stats: ReplicationStats) -> None:
    header = [
        "n", "mean_accessibility", "mean_travel_time",
        "cov_acc_acc", "cov_acc_time", "cov_time_time",
        "axis_major", "axis_minor", "angle_rad",
    ]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerow([
            stats.n, _fmt(stats.mean[0]), _fmt(stats.mean[1]),
            _fmt(stats.covariance[0, 0]), _fmt(stats.covariance[0, 1]), _fmt(stats.covariance[1, 1]),
            _fmt(stats.axis_lengths[0]), _fmt(stats.axis_lengths[1]), _fmt(stats.angle_rad),
        ])


def write_sweep_csv(path: str | Path, rows: list[dict]) -> None:
    header = ["configuration", "xi", "seed", "total_accessibility", "total_travel_time"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            acc = "" if row["total_accessibility"] is None else _fmt(row["total_accessibility"])
            ttt = "" if row["total_travel_time"] is None else _fmt(row["total_travel_time"])
            writer.writerow([row["configuration"], _fmt(row["xi"]), row["seed"], acc, ttt])


def write_trend_csv(path: str | Path, trends: dict[str, float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["configuration", "spearman_xi_accessibility"])
        for name in sorted(trends):
            writer.writerow([name, _fmt(trends[name])])


def write_cell_scores_csv(path: str | Path, scores, mu: float) -> None:
    """Worker-side score sheet per cell and category, for map rendering.

    P is the logit share the relocation step would use on these utilities.
    """
    from .landuse import CellScore, choice_probabilities

    assert isinstance(scores, CellScore)
    n, s = scores.worker_access.shape
    shares = np.stack([choice_probabilities(scores.worker_utility[:, cat], mu) for cat in range(s)], axis=1)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["cell_id", "s", "X", "F", "U", "P"])
        for cell in range(n):
            for cat in range(s):
                writer.writerow([cell, cat,
                                 _fmt(scores.worker_access[cell, cat]),
                                 _fmt(scores.worker_form[cell, cat]),
                                 _fmt(scores.worker_utility[cell, cat]),
                                 _fmt(shares[cell, cat])])


# ---------------------------------------------------------------------------
# SVG rendering


_SVG_HEAD = '<?xml version="1.0" encoding="UTF-8"?>\n<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n'

_TERRITORY_COLORS = ["#666666", "#c03030", "#3060c0", "#c08020", "#7030a0", "#208060"]


def _density_fill(value: float, peak: float) -> str:
    share = 0.0 if peak <= 0 else min(value / peak, 1.0)
    level = int(round(255 - 195 * share))
    return f"rgb({level},255,{level})"


def render_map_svg(
    path: str | Path,
    config: ScenarioConfig,
    density: np.ndarray,
    territory: np.ndarray,
    links: list[tuple[int, int]],
) -> None:
    """Worker-density map with territory borders and the regional links."""
    px = 36
    rows, cols = config.grid_rows, config.grid_cols
    w, h = cols * px + 20, rows * px + 20
    peak = float(np.max(density)) if density.size else 0.0
    parts = [_SVG_HEAD.format(w=w, h=h)]
    parts.append(f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>\n')

    def cell_xy(cell: int) -> tuple[float, float]:
        r, c = divmod(cell, cols)
        return 10 + c * px, 10 + r * px

    for cell in range(rows * cols):
        x, y = cell_xy(cell)
        parts.append(
            f'<rect x="{x}" y="{y}" width="{px}" height="{px}" '
            f'fill="{_density_fill(float(density[cell]), peak)}" stroke="#dddddd" stroke-width="0.5"/>\n'
        )
    # Borders between cells assigned to different mayors.
    for cell in range(rows * cols):
        r, c = divmod(cell, cols)
        x, y = cell_xy(cell)
        color = _TERRITORY_COLORS[int(territory[cell]) % len(_TERRITORY_COLORS)]
        if c + 1 < cols and territory[cell] != territory[cell + 1]:
            parts.append(f'<line x1="{x + px}" y1="{y}" x2="{x + px}" y2="{y + px}" stroke="{color}" stroke-width="2"/>\n')
        if r + 1 < rows and territory[cell] != territory[cell + cols]:
            parts.append(f'<line x1="{x}" y1="{y + px}" x2="{x + px}" y2="{y + px}" stroke="{color}" stroke-width="2"/>\n')
    for a, b in links:
        ra, ca = divmod(a, cols)
        rb, cb = divmod(b, cols)
        x1, y1 = 10 + (ca + 0.5) * px, 10 + (ra + 0.5) * px
        x2, y2 = 10 + (cb + 0.5) * px, 10 + (rb + 0.5) * px
        parts.append(f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" stroke="#202020" stroke-width="3"/>\n')
    for i, center in enumerate(config.centers):
        r, c = center.position
        x, y = 10 + (c + 0.5) * px, 10 + (r + 0.5) * px
        color = _TERRITORY_COLORS[i % len(_TERRITORY_COLORS)]
        parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="5" fill="{color}" stroke="black"/>\n')
    parts.append("</svg>\n")
    Path(path).write_text("".join(parts), encoding="utf-8")


def _frame(parts: list[str], x0: float, y0: float, x1: float, y1: float,
           xlabel: str, ylabel: str, xrange: tuple[float, float], yrange: tuple[float, float]) -> None:
    parts.append(f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" fill="none" stroke="black"/>\n')
    parts.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{y1 + 32:.1f}" font-size="12" text-anchor="middle">{xlabel}</text>\n')
    parts.append(
        f'<text x="{x0 - 48:.1f}" y="{(y0 + y1) / 2:.1f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 {x0 - 48:.1f} {(y0 + y1) / 2:.1f})">{ylabel}</text>\n'
    )
    parts.append(f'<text x="{x0}" y="{y1 + 16:.1f}" font-size="10" text-anchor="middle">{xrange[0]:.4g}</text>\n')
    parts.append(f'<text x="{x1}" y="{y1 + 16:.1f}" font-size="10" text-anchor="middle">{xrange[1]:.4g}</text>\n')
    parts.append(f'<text x="{x0 - 4:.1f}" y="{y1}" font-size="10" text-anchor="end">{yrange[0]:.4g}</text>\n')
    parts.append(f'<text x="{x0 - 4:.1f}" y="{y0 + 10:.1f}" font-size="10" text-anchor="end">{yrange[1]:.4g}</text>\n')


def render_ellipse_svg(path: str | Path, stats: ReplicationStats) -> None:
    """Mean point and 1-sigma variation ellipse in accessibility/time axes."""
    w, h = 480, 360
    x0, y0, x1, y1 = 70, 20, w - 20, h - 50
    span_x = max(float(stats.axis_lengths[0]), 1e-9) * 3
    span_y = span_x
    cx, cy = float(stats.mean[0]), float(stats.mean[1])
    xrange = (cx - span_x, cx + span_x)
    yrange = (cy - span_y, cy + span_y)

    def sx(x: float) -> float:
        return x0 + (x - xrange[0]) / (xrange[1] - xrange[0]) * (x1 - x0)

    def sy(y: float) -> float:
        return y1 - (y - yrange[0]) / (yrange[1] - yrange[0]) * (y1 - y0)

    parts = [_SVG_HEAD.format(w=w, h=h)]
    parts.append(f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>\n')
    _frame(parts, x0, y0, x1, y1, "total accessibility", "total travel time (h)", xrange, yrange)
    for ax, ay in stats.finals:
        parts.append(f'<circle cx="{sx(float(ax)):.2f}" cy="{sy(float(ay)):.2f}" r="2" fill="#9090d0"/>\n')
    rx = float(stats.axis_lengths[0]) / (xrange[1] - xrange[0]) * (x1 - x0)
    ry = float(stats.axis_lengths[1]) / (yrange[1] - yrange[0]) * (y1 - y0)
    angle_deg = -math.degrees(stats.angle_rad)  # SVG y grows downward
    parts.append(
        f'<ellipse cx="0" cy="0" rx="{max(rx, 1.0):.2f}" ry="{max(ry, 1.0):.2f}" fill="none" stroke="#c03030" '
        f'stroke-width="1.5" transform="translate({sx(cx):.2f} {sy(cy):.2f}) rotate({angle_deg:.2f})"/>\n'
    )
    parts.append(f'<circle cx="{sx(cx):.2f}" cy="{sy(cy):.2f}" r="3.5" fill="#c03030"/>\n')
    parts.append("</svg>\n")
    Path(path).write_text("".join(parts), encoding="utf-8")


def render_sweep_svg(path: str | Path, curves: dict[str, tuple[list[float], list[float]]]) -> None:
    """Mean final accessibility against the local-decision share, one curve per configuration."""
    w, h = 520, 380
    x0, y0, x1, y1 = 80, 20, w - 150, h - 50
    all_y = [y for _, ys in curves.values() for y in ys]
    lo, hi = (min(all_y), max(all_y)) if all_y else (0.0, 1.0)
    pad = (hi - lo) * 0.08 or max(abs(hi), 1.0) * 0.05
    yrange = (lo - pad, hi + pad)
    xrange = (0.0, 1.0)

    def sx(x: float) -> float:
        return x0 + (x - xrange[0]) / (xrange[1] - xrange[0]) * (x1 - x0)

    def sy(y: float) -> float:
        return y1 - (y - yrange[0]) / (yrange[1] - yrange[0]) * (y1 - y0)

    parts = [_SVG_HEAD.format(w=w, h=h)]
    parts.append(f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>\n')
    _frame(parts, x0, y0, x1, y1, "share of local decisions", "mean total accessibility", xrange, yrange)
    for i, name in enumerate(sorted(curves)):
        xs, ys = curves[name]
        color = _TERRITORY_COLORS[i % len(_TERRITORY_COLORS)]
        points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>\n')
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>\n')
        ly = y0 + 16 + i * 16
        parts.append(f'<line x1="{x1 + 10}" y1="{ly - 4}" x2="{x1 + 30}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>\n')
        parts.append(f'<text x="{x1 + 34}" y="{ly}" font-size="11">{name}</text>\n')
    parts.append("</svg>\n")
    Path(path).write_text("".join(parts), encoding="utf-8")
