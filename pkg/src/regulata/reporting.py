"""Run artifacts: trajectory CSV, self-contained SVG plots, JSON report.

Everything renders to strings so the service can ship artifacts over the
wire and the command line can write the same bytes to disk. Trajectory
values are printed with 17 significant digits, which round-trips every
double exactly; reports are plain JSON with non-finite numbers mapped to
null.
"""

import json
import math
from xml.sax.saxutils import escape

import numpy as np

from . import scenarios

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 70, 20, 40, 45
_MAX_POINTS = 2000


def trajectory_csv(traj):
    """One CSV with time, every state column, and every derived signal."""
    keys = [k for k in traj.derived if not k.startswith("_")]
    header = ["t", *traj.labels, *keys]
    columns = [traj.times]
    columns.extend(traj.states[:, i] for i in range(traj.states.shape[1]))
    columns.extend(np.asarray(traj.derived[k], dtype=float) for k in keys)
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(f"{val:.17g}" for val in row))
    return "\n".join(lines) + "\n"


def json_safe(obj):
    """Recursively convert a report to plain JSON types; nan and inf
    become null so the file parses everywhere."""
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def report_json(report):
    return json.dumps(json_safe(report), indent=2) + "\n"


def _ticks(lo, hi):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        lo, hi = 0.0, 1.0
    if hi - lo < 1e-300:
        pad = max(abs(lo), 1.0) * 0.1
        lo, hi = lo - pad, hi + pad
    return lo, hi, np.linspace(lo, hi, 5)


def _fmt(val, log_scale):
    if log_scale:
        return f"{10.0 ** val:.1e}"
    return f"{val:.4g}"


def render_svg(times, series, title, log_y=False):
    """Line plot of named series against time as a standalone SVG string.

    Non-finite samples break the line rather than being interpolated over.
    A log-scale plot shows log10 of the values, floored at 1e-16 so exact
    zeros stay on the canvas.
    """
    times = np.asarray(times, dtype=float)
    stride = max(1, int(math.ceil(times.size / _MAX_POINTS)))
    t = times[::stride]
    plotted = []
    lo_y, hi_y = math.inf, -math.inf
    for label, values in series:
        y = np.asarray(values, dtype=float)[::stride]
        if log_y:
            y = np.where(np.isfinite(y), np.log10(np.maximum(np.abs(y), 1e-16)),
                         np.nan)
        finite = y[np.isfinite(y)]
        if finite.size:
            lo_y = min(lo_y, float(finite.min()))
            hi_y = max(hi_y, float(finite.max()))
        plotted.append((label, y))
    lo_y, hi_y, yticks = _ticks(lo_y if lo_y < math.inf else 0.0,
                                hi_y if hi_y > -math.inf else 1.0)
    lo_t, hi_t, tticks = _ticks(float(t[0]), float(t[-1]))

    def px(tv):
        return _ML + (tv - lo_t) / (hi_t - lo_t) * (_W - _ML - _MR)

    def py(yv):
        return _H - _MB - (yv - lo_y) / (hi_y - lo_y) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{escape(title)}</text>',
    ]
    axis = 'stroke="#444" stroke-width="1"'
    parts.append(f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" '
                 f'y2="{_H - _MB}" {axis}/>')
    parts.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
                 f'{axis}/>')
    for tv in tticks:
        x = px(tv)
        parts.append(f'<line x1="{x:.1f}" y1="{_H - _MB}" x2="{x:.1f}" '
                     f'y2="{_H - _MB + 4}" {axis}/>')
        parts.append(f'<text x="{x:.1f}" y="{_H - _MB + 18}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{_fmt(tv, False)}</text>')
    for yv in yticks:
        y = py(yv)
        parts.append(f'<line x1="{_ML - 4}" y1="{y:.1f}" x2="{_ML}" '
                     f'y2="{y:.1f}" {axis}/>')
        parts.append(f'<line x1="{_ML}" y1="{y:.1f}" x2="{_W - _MR}" '
                     f'y2="{y:.1f}" stroke="#ddd" stroke-width="0.5"/>')
        parts.append(f'<text x="{_ML - 8}" y="{y + 4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">'
                     f'{escape(_fmt(yv, log_y))}</text>')
    parts.append(f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 8}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12">t</text>')

    for idx, (label, y) in enumerate(plotted):
        color = PALETTE[idx % len(PALETTE)]
        points = []
        runs = []
        for tv, yv in zip(t, y):
            if math.isfinite(yv):
                points.append(f"{px(tv):.2f},{py(yv):.2f}")
            elif points:
                runs.append(points)
                points = []
        if points:
            runs.append(points)
        for run in runs:
            if len(run) == 1:
                x0, y0 = run[0].split(",")
                parts.append(f'<circle cx="{x0}" cy="{y0}" r="1.5" '
                             f'fill="{color}"/>')
            else:
                parts.append(f'<polyline points="{" ".join(run)}" fill="none" '
                             f'stroke="{color}" stroke-width="1.3"/>')
        ly = _MT + 14 + 16 * idx
        lx = _W - _MR - 150
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 28}" y="{ly}" font-family="sans-serif" '
                     f'font-size="11">{escape(str(label))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def scenario_artifacts(cfg, traj, report):
    """Render the artifact set for one finished run, entirely in memory.

    Returns {"report": str|None, "csv": str|None, "svgs": {name: str}},
    honoring the emit_* switches in the config.
    """
    arts = {"report": None, "csv": None, "svgs": {}}
    if cfg.values.get("emit_report", True):
        arts["report"] = report_json(report)
    if cfg.values.get("emit_csv", True):
        arts["csv"] = trajectory_csv(traj)
    if cfg.values.get("emit_svg", True):
        for name, signals, log_y in scenarios.plot_groups(cfg, traj):
            series = []
            for sig in signals:
                try:
                    series.append((sig, traj.signal(sig)))
                except KeyError:
                    continue
            if series:
                arts["svgs"][name] = render_svg(
                    traj.times, series, title=name.replace("_", " "),
                    log_y=log_y,
                )
    return arts
