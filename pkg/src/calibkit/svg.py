"""Self-contained SVG reliability diagrams."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence
from xml.sax.saxutils import escape

from .harness import BinSummary
from .metrics import ReliabilityCurve

ANNOTATIONS = frozenset({"diagonal", "random", "histogram"})

WIDTH = HEIGHT = 420
LEFT, RIGHT, TOP, BOTTOM = 56, 16, 28, 48
PLOT_W = WIDTH - LEFT - RIGHT
PLOT_H = HEIGHT - TOP - BOTTOM
HIST_FRACTION = 0.35  # tallest histogram bar relative to plot height


@dataclass(frozen=True)
class DiagramSpec:
    bins: Sequence[BinSummary]
    histogram: Sequence[int]
    class_count: int
    annotations: FrozenSet[str] = field(default=ANNOTATIONS)
    title: Optional[str] = None

    def __post_init__(self):
        if len(self.histogram) != len(self.bins):
            raise ValueError("histogram needs one count per bin")
        unknown = set(self.annotations) - ANNOTATIONS
        if unknown:
            raise ValueError(f"unknown annotations: {sorted(unknown)}")

    @property
    def included_count(self) -> int:
        return int(sum(self.histogram))


def diagram_spec(bins: Sequence[BinSummary], curve: ReliabilityCurve, class_count: int,
                 annotations=ANNOTATIONS, title: Optional[str] = None) -> DiagramSpec:
    """Pair bootstrap bin summaries with the confidence histogram of ``curve``."""
    return DiagramSpec(list(bins), [b.count for b in curve.bins], class_count,
                       frozenset(annotations), title)


def _x(v: float) -> str:
    return f"{LEFT + v * PLOT_W:.2f}"


def _y(v: float) -> str:
    return f"{TOP + (1.0 - v) * PLOT_H:.2f}"


def _clip(v: float) -> float:
    return min(1.0, max(0.0, v))


def render_diagram(spec: DiagramSpec, path=None) -> str:
    """Render the diagram; write it to ``path`` when given. Output is byte-stable."""
    out: List[str] = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if spec.title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="18" text-anchor="middle" font-size="13">'
                   f'{escape(spec.title)}</text>')

    if "histogram" in spec.annotations and spec.included_count:
        peak = max(spec.histogram)
        out.append('<g id="histogram" fill="#d9d9d9" stroke="#bdbdbd" stroke-width="0.5">')
        for b, count in zip(spec.bins, spec.histogram):
            if count == 0:
                continue
            h = HIST_FRACTION * count / peak
            out.append(f'<rect x="{_x(b.lower)}" y="{_y(h)}" width="{(b.upper - b.lower) * PLOT_W:.2f}" '
                       f'height="{h * PLOT_H:.2f}" data-count="{count}"/>')
        out.append('</g>')

    # axes and ticks
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>')
    for i in range(6):
        v = i / 5
        out.append(f'<text x="{_x(v)}" y="{TOP + PLOT_H + 16}" text-anchor="middle">{v:.1f}</text>')
        out.append(f'<text x="{LEFT - 6}" y="{float(_y(v)) + 4:.2f}" text-anchor="end">{v:.1f}</text>')
    out.append(f'<text x="{LEFT + PLOT_W / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle">Confidence</text>')
    out.append(f'<text x="14" y="{TOP + PLOT_H / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {TOP + PLOT_H / 2:.2f})">Accuracy</text>')

    if "diagonal" in spec.annotations:
        out.append(f'<line id="diagonal" x1="{_x(0)}" y1="{_y(0)}" x2="{_x(1)}" y2="{_y(1)}" '
                   'stroke="#555555" stroke-dasharray="4 3"/>')
    if "random" in spec.annotations:
        r = 1.0 / spec.class_count
        out.append(f'<line id="random-guess" x1="{_x(0)}" y1="{_y(r)}" x2="{_x(1)}" y2="{_y(r)}" '
                   f'stroke="#d62728" stroke-dasharray="2 3" data-value="{r:.6f}"/>')

    filled = [b for b in spec.bins if b.replicates > 0 and b.accuracy_mean is not None]
    if filled:
        upper = [f"{_x(b.confidence_mean)},{_y(_clip(b.accuracy_mean + b.accuracy_std))}" for b in filled]
        lower = [f"{_x(b.confidence_mean)},{_y(_clip(b.accuracy_mean - b.accuracy_std))}" for b in filled]
        out.append(f'<polygon id="std-band" points="{" ".join(upper + lower[::-1])}" '
                   'fill="#1f77b4" fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{_x(b.confidence_mean)},{_y(b.accuracy_mean)}" for b in filled)
        out.append(f'<polyline id="calibration" points="{pts}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
        for b in filled:
            out.append(f'<circle cx="{_x(b.confidence_mean)}" cy="{_y(b.accuracy_mean)}" r="2.5" fill="#1f77b4"/>')
    out.append('</svg>')
    doc = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(doc)
    return doc
