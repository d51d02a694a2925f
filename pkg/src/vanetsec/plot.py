"""Deterministic SVG line plots of result rows.

Output depends only on the rows and the axis choice: no timestamps, no
random ids, fixed number formatting. Identical input renders identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence, Union
from xml.sax.saxutils import escape

from .sweep import ResultRow

__all__ = ["AxesSpec", "emit_plot"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
_SCENARIO_FIELDS = ("r", "alpha", "sigma", "rho", "L", "pm")
_LABELS = {"pm": "p_m", "L": "L (m)", "rho": "density (veh/m)", "p_succ": "P_succ", "r": "r (m)"}

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 30, 60


@dataclass(frozen=True)
class AxesSpec:
    x: str = "pm"
    y: str = "p_succ"
    title: str = ""


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if v == v else "nan"


def _tick(v: float) -> str:
    return f"{v:.4g}"


def _as_dict(row: Union[ResultRow, Mapping[str, Any]]) -> dict:
    return row.as_dict() if isinstance(row, ResultRow) else dict(row)


def _series(rows: list[dict], axes: AxesSpec) -> dict[str, list[dict]]:
    varying = [
        f for f in _SCENARIO_FIELDS
        if f not in (axes.x, axes.y) and len({r.get(f) for r in rows}) > 1
    ]
    groups: dict[str, list[dict]] = {}
    for r in rows:
        parts = [str(r.get("method")), str(r.get("model"))]
        parts += [f"{f}={_tick(r[f])}" for f in varying if r.get(f) is not None]
        groups.setdefault(" ".join(parts), []).append(r)
    return groups


def emit_plot(rows: Sequence[Union[ResultRow, Mapping[str, Any]]], axes: AxesSpec = AxesSpec()) -> str:
    """Render one polyline per series (method, model and any other varying scenario field)."""
    if not rows:
        raise ValueError("nothing to plot")
    data = [_as_dict(r) for r in rows]
    for r in data:
        for f in (axes.x, axes.y):
            if not isinstance(r.get(f), (int, float)) or isinstance(r.get(f), bool):
                raise ValueError(f"rows lack a numeric {f!r} column")
    groups = _series(data, axes)
    for label, pts in groups.items():
        xs = [p[axes.x] for p in pts]
        if len(set(xs)) != len(xs):
            raise ValueError(f"series {label!r} has repeated {axes.x} values: rows mix incompatible axes")

    xs = [r[axes.x] for r in data]
    ys = [r[axes.y] for r in data]
    x0, x1 = min(xs), max(xs)
    if x0 == x1:
        pad = abs(x0) * 0.1 or 0.5
        x0, x1 = x0 - pad, x1 + pad
    if axes.y == "p_succ":
        y0, y1 = 0.0, 1.0
    else:
        y0, y1 = min(ys), max(ys)
        if y0 == y1:
            y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
    ]
    if axes.title:
        out.append(f'<text x="{W / 2:.0f}" y="18" text-anchor="middle" font-size="14">{escape(axes.title)}</text>')
    out.append(
        f'<path d="M{LEFT},{TOP} V{TOP + ph} H{LEFT + pw}" fill="none" stroke="black" stroke-width="1"/>'
    )
    for k in range(6):
        xv = x0 + (x1 - x0) * k / 5
        yv = y0 + (y1 - y0) * k / 5
        out.append(f'<line x1="{_fmt(px(xv))}" y1="{TOP + ph}" x2="{_fmt(px(xv))}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(
            f'<text x="{_fmt(px(xv))}" y="{TOP + ph + 18}" text-anchor="middle" font-size="11">{_tick(xv)}</text>'
        )
        out.append(f'<line x1="{LEFT - 5}" y1="{_fmt(py(yv))}" x2="{LEFT}" y2="{_fmt(py(yv))}" stroke="black"/>')
        out.append(
            f'<text x="{LEFT - 8}" y="{_fmt(py(yv) + 4)}" text-anchor="end" font-size="11">{_tick(yv)}</text>'
        )
    out.append(
        f'<text x="{LEFT + pw / 2:.0f}" y="{H - 15}" text-anchor="middle" font-size="12">'
        f"{escape(_LABELS.get(axes.x, axes.x))}</text>"
    )
    out.append(
        f'<text x="18" y="{TOP + ph / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {TOP + ph / 2:.0f})">{escape(_LABELS.get(axes.y, axes.y))}</text>'
    )

    for i, (label, pts) in enumerate(sorted(groups.items())):
        color = PALETTE[i % len(PALETTE)]
        pts = sorted(pts, key=lambda p: p[axes.x])
        coords = " ".join(f"{_fmt(px(p[axes.x]))},{_fmt(py(p[axes.y]))}" for p in pts)
        out.append(f'<g class="series" data-label="{escape(label)}">')
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for p in pts:
            out.append(
                f'<circle class="marker" cx="{_fmt(px(p[axes.x]))}" cy="{_fmt(py(p[axes.y]))}" r="3" fill="{color}"/>'
            )
        out.append("</g>")
        ly = TOP + 12 + 18 * i
        out.append(
            f'<g class="legend"><line x1="{LEFT + pw + 12}" y1="{ly}" x2="{LEFT + pw + 32}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/><text x="{LEFT + pw + 36}" y="{ly + 4}" font-size="10">'
            f"{escape(label)}</text></g>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
