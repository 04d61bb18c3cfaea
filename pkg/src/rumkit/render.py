"""Hand-written SVG output for line figures, reduced figures and tilings.

Each drawn line or segment is one ``<line>`` element; frames use ``<rect>``
so that element counts can be checked against the data.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .formats import atomic_write_text
from .geometry import LineFigure, Segment

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _f(x: float) -> str:
    return f"{x:.6f}".rstrip("0").rstrip(".") if x == x else "0"


def _doc(width: int, height: int, view: tuple, body: list[str]) -> str:
    x0, y0, w, h = view
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="{_f(x0)} {_f(y0)} {_f(w)} {_f(h)}">')
    return "\n".join([head, *body, "</svg>"]) + "\n"


def _line(p, q, color="#000000", width=0.005, cls=None) -> str:
    c = f' class="{cls}"' if cls else ""
    # y is flipped so that the picture has the usual orientation
    return (f'<line x1="{_f(p[0])}" y1="{_f(-p[1])}" x2="{_f(q[0])}" y2="{_f(-q[1])}" '
            f'stroke="{color}" stroke-width="{_f(width)}"{c}/>')


def figure_svg(F: LineFigure, extent: float = 1.0, size: int = 400) -> str:
    """Lines through the origin clipped to ``[-extent, extent]^2``."""
    body = [f'<rect x="{_f(-extent)}" y="{_f(-extent)}" width="{_f(2 * extent)}" '
            f'height="{_f(2 * extent)}" fill="white" stroke="#999999" stroke-width="{_f(extent / 200)}"/>']
    for i, L in enumerate(F):
        d = L.direction
        t = extent / max(abs(d[0]), abs(d[1]))
        body.append(_line(-t * d, t * d, PALETTE[i % len(PALETTE)], extent / 150))
    return _doc(size, size, (-extent, -extent, 2 * extent, 2 * extent), body)


def segments_svg(segments: list[Segment], size: int = 400) -> str:
    """Reduced figure on the unit square ``[-1/2, 1/2)^2``."""
    body = ['<rect x="-0.5" y="-0.5" width="1" height="1" fill="white" stroke="#999999" '
            'stroke-width="0.003"/>']
    for s in segments:
        body.append(_line(s.start, s.end, "#1f3a93", 0.002))
    return _doc(size, size, (-0.52, -0.52, 1.04, 1.04), body)


def tiling_svg(t, size: int = 800) -> str:
    """Tile edges coloured by the grid family of their edge vector."""
    fw = t.framework
    fam = fw.bar_families()
    P = fw.joints
    lo, hi = P.min(axis=0), P.max(axis=0)
    pad = 0.02 * float(np.max(hi - lo))
    width = float(np.max(hi - lo)) / 600
    body = []
    for (i, j), f in zip(fw.bars, fam):
        body.append(_line(P[i], P[j], PALETTE[int(f) % len(PALETTE)], width, f"family-{int(f)}"))
    view = (lo[0] - pad, -hi[1] - pad, hi[0] - lo[0] + 2 * pad, hi[1] - lo[1] + 2 * pad)
    return _doc(size, size, view, body)


def emit_figure_svg(obj, path, style: dict | None = None):
    """Render a line figure, a list of reduced segments, a spectrum figure or a tiling."""
    from .multigrid import Tiling
    from .spectra import ReducedFigure, SpectrumFigure

    style = style or {}
    if isinstance(obj, Tiling):
        text = tiling_svg(obj, style.get("size", 800))
    elif isinstance(obj, ReducedFigure):
        text = segments_svg(obj.segments, style.get("size", 400))
    elif isinstance(obj, SpectrumFigure):
        T = style.get("truncation")
        if T is not None:
            text = segments_svg(obj.reduced(T).segments, style.get("size", 400))
        else:
            text = figure_svg(obj.figure, style.get("extent", 1.0), style.get("size", 400))
    elif isinstance(obj, LineFigure):
        text = figure_svg(obj, style.get("extent", 1.0), style.get("size", 400))
    elif isinstance(obj, (list, tuple)):
        text = segments_svg(list(obj), style.get("size", 400))
    else:
        raise ValidationError(f"cannot render {type(obj).__name__}")
    atomic_write_text(path, text)
