"""Minimal deterministic SVG line charts for layer-wise scores.

Hand-rolled rather than using a plotting library so that re-exporting the
same report is byte-identical (no embedded timestamps, ids, or versions).
"""

from __future__ import annotations

WIDTH = 640
HEIGHT = 400
MARGIN_LEFT = 64
MARGIN_RIGHT = 20
MARGIN_TOP = 36
MARGIN_BOTTOM = 44

N_X = 10  # layers 1..10
N_Y_TICKS = 4


def _fmt(x: float) -> str:
    return f"{x:.4f}".rstrip("0").rstrip(".") or "0"


def layer_chart(title: str, points: dict[int, float], y_label: str) -> str:
    """SVG line chart of score vs layer (1..10).

    The y axis spans [0, max(score) * 1.1] (always including 0); layers
    without a value break the line. The axis maximum is exposed as a
    data-y-max attribute on the root element.
    """
    values = list(points.values())
    y_max = max(values) * 1.1 if values and max(values) > 0 else 1.0

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(layer: int) -> float:
        return MARGIN_LEFT + (layer - 1) / (N_X - 1) * plot_w

    def sy(v: float) -> float:
        return MARGIN_TOP + (1.0 - v / y_max) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" data-y-max="{_fmt(y_max)}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]

    # axes
    x0, y0 = MARGIN_LEFT, MARGIN_TOP + plot_h
    parts.append(
        f'<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{MARGIN_LEFT + plot_w}" y2="{y0}" stroke="black"/>'
    )
    for layer in range(1, N_X + 1):
        x = sx(layer)
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(x)}" y="{y0 + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{layer}</text>'
        )
    for k in range(N_Y_TICKS + 1):
        v = y_max * k / N_Y_TICKS
        y = sy(v)
        parts.append(
            f'<line x1="{x0 - 4}" y1="{_fmt(y)}" x2="{x0}" y2="{_fmt(y)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x0 - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(v)}</text>'
        )
    parts.append(
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 8}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">axial layer</text>'
    )
    parts.append(
        f'<text x="16" y="{MARGIN_TOP + plot_h // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {MARGIN_TOP + plot_h // 2})">{y_label}</text>'
    )

    # series: consecutive layers form segments, gaps break the line
    if points:
        segments: list[list[int]] = [[]]
        for layer in range(1, N_X + 1):
            if layer in points:
                segments[-1].append(layer)
            elif segments[-1]:
                segments.append([])
        for seg in segments:
            if len(seg) >= 2:
                coords = " ".join(f"{_fmt(sx(l))},{_fmt(sy(points[l]))}" for l in seg)
                parts.append(
                    f'<polyline points="{coords}" fill="none" stroke="#1f6fb2" '
                    f'stroke-width="2"/>'
                )
        for layer in sorted(points):
            parts.append(
                f'<circle cx="{_fmt(sx(layer))}" cy="{_fmt(sy(points[layer]))}" r="3" '
                f'fill="#1f6fb2"/>'
            )
    else:
        parts.append(
            f'<text x="{WIDTH // 2}" y="{MARGIN_TOP + plot_h // 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13" fill="#777">no data</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
