"""Deterministic, atomic output helpers: CSV/JSON writers and a small SVG line chart."""

from __future__ import annotations

import json
import math
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np


def format_vertex(v) -> str:
    return "(" + ",".join(str(int(c)) for c in v) + ")"


@contextmanager
def atomic_writer(path):
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return repr(x)
        return x
    return obj


def write_json(path, payload) -> None:
    with atomic_writer(path) as fh:
        json.dump(_plain(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def checked(value, tolerance) -> dict:
    """A reported number together with the tolerance it was checked against."""
    return {"value": _plain(value), "tolerance": _plain(tolerance)}


def write_rows(path, header, rows) -> None:
    import csv
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def line_chart_svg(path, series: dict, title: str, xlabel: str, ylabel: str,
                   logy: bool = False, width: int = 640, height: int = 400) -> None:
    """Minimal SVG polyline chart.  ``series`` maps labels to ``(x, y)`` arrays."""
    pad = 60
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    if logy:
        ys = np.log10(np.clip(np.abs(ys), 1e-300, None))
    finite = np.isfinite(ys)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys[finite].min()), float(ys[finite].max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    sx = lambda x: pad + (x - x0) / (x1 - x0) * (width - 2 * pad)
    sy = lambda y: height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
           f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle" font-size="12">{xlabel}</text>',
           f'<text x="15" y="{height / 2:.1f}" font-size="12" transform="rotate(-90 15 {height / 2:.1f})"'
           f' text-anchor="middle">{ylabel}{" (log10)" if logy else ""}</text>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>']
    for val, anchor, x, y in ((x0, "start", pad, height - pad + 15), (x1, "end", width - pad, height - pad + 15)):
        out.append(f'<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="10">{val:.4g}</text>')
    for val, y in ((y0, height - pad), (y1, pad)):
        out.append(f'<text x="{pad - 5}" y="{y}" text-anchor="end" font-size="10">{val:.4g}</text>')
    for i, (label, (x, y)) in enumerate(series.items()):
        y = np.asarray(y, float)
        if logy:
            y = np.log10(np.clip(np.abs(y), 1e-300, None))
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(np.asarray(x, float), y) if np.isfinite(b))
        col = colors[i % len(colors)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{width - pad - 5}" y="{pad + 15 * (i + 1)}" text-anchor="end" '
                   f'font-size="11" fill="{col}">{label}</text>')
    out.append("</svg>")
    with atomic_writer(path) as fh:
        fh.write("\n".join(out) + "\n")
