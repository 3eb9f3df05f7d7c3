"""Minimal deterministic SVG charts; every figure is also written as CSV."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT, PAD = 720, 360, 48
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Frame:
    def __init__(self, xlo, xhi, ylo, yhi):
        if xhi == xlo:
            xhi = xlo + 1.0
        if yhi == ylo:
            ylo, yhi = ylo - 1.0, yhi + 1.0
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def x(self, v):
        return PAD + (v - self.xlo) / (self.xhi - self.xlo) * (WIDTH - 2 * PAD)

    def y(self, v):
        return HEIGHT - PAD - (v - self.ylo) / (self.yhi - self.ylo) * (HEIGHT - 2 * PAD)


def _svg(title: str, body: list[str], frame: _Frame, xlabel: str = "", ylabel: str = "") -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<text x="{PAD - 4}" y="{_fmt(frame.y(frame.yhi))}" text-anchor="end" font-size="10">'
        f'{frame.yhi:.4g}</text>',
        f'<text x="{PAD - 4}" y="{_fmt(frame.y(frame.ylo))}" text-anchor="end" font-size="10">'
        f'{frame.ylo:.4g}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="11">'
        f'{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" font-size="11" transform="rotate(-90 14 {HEIGHT / 2})" '
        f'text-anchor="middle">{escape(ylabel)}</text>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def line_chart(title: str, series: dict, markers=(), xlabel: str = "index",
               ylabel: str = "value") -> str:
    """``series`` maps a legend label to a y-array plotted against its index."""
    arrays = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    finite = np.concatenate([a[np.isfinite(a)] for a in arrays.values()] or [np.zeros(1)])
    n = max((a.size for a in arrays.values()), default=1)
    frame = _Frame(0, max(n - 1, 1), float(finite.min()), float(finite.max()))
    body = []
    for i, (label, a) in enumerate(arrays.items()):
        pts = " ".join(f"{_fmt(frame.x(k))},{_fmt(frame.y(v))}" for k, v in enumerate(a)
                       if math.isfinite(v))
        color = COLORS[i % len(COLORS)]
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>')
        body.append(f'<text x="{WIDTH - PAD}" y="{PAD + 14 * i}" text-anchor="end" '
                    f'font-size="11" fill="{color}">{escape(label)}</text>')
    for m in markers:
        xm = _fmt(frame.x(m))
        body.append(f'<line x1="{xm}" y1="{PAD}" x2="{xm}" y2="{HEIGHT - PAD}" '
                    f'stroke="black" stroke-dasharray="4,3"/>')
    return _svg(title, body, frame, xlabel, ylabel)


def bar_chart(title: str, x, heights, band: float | None = None, xlabel: str = "",
              ylabel: str = "") -> str:
    """Vertical bars at positions ``x``; ``band`` draws dashed lines at +/- band."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(heights, dtype=float)
    lo = min(0.0, float(h.min()) if h.size else 0.0, -(band or 0.0))
    hi = max(0.0, float(h.max()) if h.size else 1.0, band or 0.0)
    step = float(np.min(np.diff(x))) if x.size > 1 else 1.0
    frame = _Frame(float(x.min()) - step / 2 if x.size else 0, float(x.max()) + step / 2
                   if x.size else 1, lo, hi)
    width = max(1.0, frame.x(step) - frame.x(0) - 1.0)
    body = []
    for xi, hi_ in zip(x, h):
        top, bottom = frame.y(max(hi_, 0.0)), frame.y(min(hi_, 0.0))
        body.append(f'<rect x="{_fmt(frame.x(xi) - width / 2)}" y="{_fmt(top)}" '
                    f'width="{_fmt(width)}" height="{_fmt(bottom - top)}" fill="{COLORS[0]}"/>')
    if band:
        for b in (band, -band):
            yb = _fmt(frame.y(b))
            body.append(f'<line x1="{PAD}" y1="{yb}" x2="{WIDTH - PAD}" y2="{yb}" '
                        f'stroke="{COLORS[1]}" stroke-dasharray="5,4"/>')
    return _svg(title, body, frame, xlabel, ylabel)


def table_csv(header, rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return out.getvalue()


def write_figure(out_dir: Path, name: str, svg: str, csv_text: str) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{name}.svg").write_text(svg)
    (out_dir / f"{name}.csv").write_text(csv_text)


def freedman_diaconis_bins(x, minimum: int = 10) -> int:
    x = np.asarray(x, dtype=float)
    q75, q25 = np.percentile(x, [75, 25])
    width = 2.0 * (q75 - q25) / np.cbrt(x.size)
    if not width > 0:
        return minimum
    return max(minimum, int(np.ceil((x.max() - x.min()) / width)))
