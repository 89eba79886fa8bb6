"""CSV and SVG writers for experiment results."""

from __future__ import annotations

import csv
import io
import math
from datetime import datetime, timezone
from pathlib import Path
from xml.sax.saxutils import escape

from . import __version__

TIMESTAMP_PREFIX = "# generated: "


def format_value(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, complex):
        return f"{x.real:.17g}{x.imag:+.17g}j"
    if isinstance(x, float):
        return f"{x:.17g}"
    if x is None:
        return ""
    return str(x)


def write_csv(path, command: str, params: dict, columns, rows, status: str = "ok") -> None:
    """Write rows under a self-describing ``#`` comment header.

    Everything except the timestamp line is a deterministic function of the
    inputs.
    """
    buf = io.StringIO()
    buf.write(f"# qcfstab {__version__}\n")
    buf.write(f"# command: {command}\n")
    for key in sorted(params):
        buf.write(f"# {key}: {format_value(params[key])}\n")
    buf.write(f"# status: {status}\n")
    buf.write(f"{TIMESTAMP_PREFIX}{datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in columns])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> tuple[dict, list[dict]]:
    """Parse a file written by :func:`write_csv` into (metadata, rows)."""
    meta, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = value
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def write_svg_lines(path, series: dict, xlabel: str, ylabel: str, logy: bool = True) -> None:
    """Static line plot, one polyline per entry of ``series`` (label -> (x, y))."""
    W, H, m = 640, 420, 60
    xs = [x for xv, _ in series.values() for x in xv]
    ys = [y for _, yv in series.values() for y in yv if math.isfinite(y) and (y > 0 or not logy)]
    ty = (lambda y: math.log10(y)) if logy else (lambda y: y)
    x0, x1 = min(xs), max(xs)
    y0, y1 = ty(min(ys)), ty(max(ys))
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def px(x):
        return m + (x - x0) / (x1 - x0) * (W - 2 * m)

    def py(y):
        return H - m - (ty(y) - y0) / (y1 - y0) * (H - 2 * m)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{m}" y1="{H - m}" x2="{W - m}" y2="{H - m}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{H - m}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{H / 2}" transform="rotate(-90 15 {H / 2})" text-anchor="middle">{escape(ylabel)}</text>',
        f'<text x="{m}" y="{H - m + 18}" text-anchor="middle">{x0:g}</text>',
        f'<text x="{W - m}" y="{H - m + 18}" text-anchor="middle">{x1:g}</text>',
        f'<text x="{m - 6}" y="{H - m}" text-anchor="end">{min(ys):.3g}</text>',
        f'<text x="{m - 6}" y="{m + 4}" text-anchor="end">{max(ys):.3g}</text>',
    ]
    for i, (label, (xv, yv)) in enumerate(series.items()):
        colour = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(
            f"{px(x):.2f},{py(y):.2f}"
            for x, y in zip(xv, yv)
            if math.isfinite(y) and (y > 0 or not logy)
        )
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        out.append(
            f'<text x="{W - m - 5}" y="{m + 16 * (i + 1)}" text-anchor="end" fill="{colour}">{escape(str(label))}</text>'
        )
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
