"""Coefficient plots: estimates with 95% CI caps and a zero line.

The SVG is written by hand so that identical input always yields identical
bytes (no timestamps, ids or font metrics from a plotting backend).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .estimator import Z95


@dataclass
class CoefPlotArtifact:
    labels: tuple
    estimates: tuple
    lo: tuple
    hi: tuple
    zero_line: bool = True
    title: str = ""
    display: tuple = ()

    @classmethod
    def from_series(cls, labels, estimates, ses, title="", display=None):
        b = [float(v) for v in estimates]
        s = [float(v) for v in ses]
        return cls(tuple(labels), tuple(b),
                   tuple(bi - Z95 * si for bi, si in zip(b, s)),
                   tuple(bi + Z95 * si for bi, si in zip(b, s)),
                   True, title, tuple(display) if display else tuple(labels))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "beta", "lo", "hi"])
        for row in zip(self.labels, self.estimates, self.lo, self.hi):
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()

    def to_json(self):
        return json.dumps({
            "labels": list(self.labels), "display": list(self.display),
            "estimates": list(self.estimates), "lo": list(self.lo), "hi": list(self.hi),
            "zero_line": self.zero_line, "title": self.title,
        }, indent=2) + "\n"

    def to_svg(self, width=720, height=420):
        return render_svg(self, width, height)


def emit_coefplot(fit, order, title="", display=None):
    """Plot the coefficients of ``fit`` named in ``order``, in that order."""
    missing = [lab for lab in order if lab not in fit.labels]
    if missing:
        raise ValidationError(f"labels not in fit: {missing}")
    idx = [fit.labels.index(lab) for lab in order]
    return CoefPlotArtifact.from_series(order, fit.beta[idx], fit.se[idx], title=title, display=display)


def _esc(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def _ticks(lo, hi, n=5):
    span = hi - lo
    raw = span / max(n - 1, 1)
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = np.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(v) < 1e-12 * span else float(v))
        v += step
    return ticks


def render_svg(plot, width=720, height=420):
    left, right, top, bottom = 80, 20, 40 if plot.title else 20, 70
    pw, ph = width - left - right, height - top - bottom
    values = list(plot.lo) + list(plot.hi) + ([0.0] if plot.zero_line else [])
    finite = [v for v in values if np.isfinite(v)]
    ymin, ymax = (min(finite), max(finite)) if finite else (-1.0, 1.0)
    if ymax == ymin:
        ymin, ymax = ymin - 1.0, ymax + 1.0
    pad = 0.08 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad

    def sy(v):
        return top + (ymax - v) / (ymax - ymin) * ph

    n = len(plot.labels)
    slot = pw / max(n, 1)

    def sx(i):
        return left + (i + 0.5) * slot

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if plot.title:
        out.append(f'<text x="{width / 2:.2f}" y="24" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="15">{_esc(plot.title)}</text>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')
    for t in _ticks(ymin, ymax):
        y = sy(t)
        out.append(f'<line x1="{left - 4}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 7}" y="{y + 4:.2f}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{t:.3g}</text>')
    if plot.zero_line:
        y0 = sy(0.0)
        out.append(f'<line x1="{left}" y1="{y0:.2f}" x2="{left + pw}" y2="{y0:.2f}" stroke="#555555" '
                   f'stroke-dasharray="4 3" class="zero-line"/>')
    cap = min(8.0, slot / 4)
    for i, (lab, b, lo, hi) in enumerate(zip(plot.display or plot.labels, plot.estimates, plot.lo, plot.hi)):
        x = sx(i)
        out.append(f'<g class="coef" data-label="{_esc(plot.labels[i])}">')
        out.append(f'<line x1="{x:.2f}" y1="{sy(lo):.2f}" x2="{x:.2f}" y2="{sy(hi):.2f}" stroke="black"/>')
        for v in (lo, hi):
            out.append(f'<line x1="{x - cap:.2f}" y1="{sy(v):.2f}" x2="{x + cap:.2f}" y2="{sy(v):.2f}" '
                       f'stroke="black"/>')
        out.append(f'<circle cx="{x:.2f}" cy="{sy(b):.2f}" r="3.5" fill="black"/>')
        out.append("</g>")
        ly = top + ph + 16
        out.append(f'<text x="{x:.2f}" y="{ly:.2f}" text-anchor="end" font-family="sans-serif" font-size="11" '
                   f'transform="rotate(-35 {x:.2f} {ly:.2f})">{_esc(lab)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
