"""Deterministic SVG rendering of scenes and plans.

Objects draw as category-colored rectangles with id labels, stacked objects
as inset badges on their base, and plan trajectories as polylines with
dashed approach legs and solid carry legs.  Output bytes depend only on the
inputs.
"""

from __future__ import annotations

from pathlib import Path

from .costs import CostConfig
from .scene import Plan, SceneState

CATEGORY_COLORS = {
    "primary_base": "#8da0cb",
    "secondary_base": "#66c2a5",
    "low_mass": "#ffd92f",
    "high_mass": "#fc8d62",
}

_SCALE = 400  # px per table unit
_PAD = 24


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _px(x: float, y: float, table_h: float) -> tuple[float, float]:
    # y grows upward on the table, downward in SVG
    return (_PAD + x * _SCALE, _PAD + (table_h - y) * _SCALE)


def render_svg(
    scene: SceneState,
    plan: Plan | None = None,
    cost: CostConfig | None = None,
    title: str = "",
) -> str:
    w, h = scene.table
    width = 2 * _PAD + w * _SCALE
    height = 2 * _PAD + h * _SCALE + 18
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_fmt(width)}" height="{_fmt(height)}">',
        f'<rect x="{_PAD}" y="{_PAD}" width="{_fmt(w * _SCALE)}" height="{_fmt(h * _SCALE)}" '
        'fill="#fbfbf8" stroke="#333" stroke-width="2"/>',
    ]
    if title:
        parts.append(f'<text x="{_PAD}" y="16" font-family="monospace" font-size="12">{title}</text>')
    for spec in scene.objects:
        if scene.forest.base(spec.id) is not None:
            continue
        x, y = scene.position(spec.id)
        px, py = _px(x - spec.width / 2, y + spec.depth / 2, h)
        color = CATEGORY_COLORS[spec.category.value]
        parts.append(
            f'<rect x="{_fmt(px)}" y="{_fmt(py)}" width="{_fmt(spec.width * _SCALE)}" '
            f'height="{_fmt(spec.depth * _SCALE)}" fill="{color}" stroke="#333" stroke-width="1"/>'
        )
        cx, cy = _px(x, y, h)
        parts.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(cy)}" font-family="monospace" font-size="10" '
            f'text-anchor="middle">{spec.id}</text>'
        )
        # badges for the stack riding on this root
        for level, rider in enumerate(scene.forest.above(spec.id)):
            rspec = scene.spec(rider)
            inset = 6 * (level + 1)
            bx, by = _px(x - rspec.width / 2, y + rspec.depth / 2, h)
            parts.append(
                f'<rect x="{_fmt(bx + inset)}" y="{_fmt(by + inset)}" '
                f'width="{_fmt(max(rspec.width * _SCALE - 2 * inset, 4))}" '
                f'height="{_fmt(max(rspec.depth * _SCALE - 2 * inset, 4))}" '
                f'fill="{CATEGORY_COLORS[rspec.category.value]}" fill-opacity="0.9" '
                'stroke="#333" stroke-width="1" stroke-dasharray="3,2"/>'
            )
            parts.append(
                f'<text x="{_fmt(bx + inset + 3)}" y="{_fmt(by + inset + 10)}" font-family="monospace" '
                f'font-size="8">{rider} on {scene.forest.base(rider)}</text>'
            )
    if plan is not None and plan.actions:
        manip = scene.manipulator
        for k, action in enumerate(plan.actions):
            if action.pick is None or action.place is None:
                continue
            ax, ay = _px(*manip, h)
            bx, by = _px(*action.pick, h)
            cx, cy = _px(*action.place, h)
            parts.append(
                f'<polyline points="{_fmt(ax)},{_fmt(ay)} {_fmt(bx)},{_fmt(by)}" fill="none" '
                'stroke="#999" stroke-width="1.5" stroke-dasharray="5,4"/>'
            )
            parts.append(
                f'<polyline points="{_fmt(bx)},{_fmt(by)} {_fmt(cx)},{_fmt(cy)}" fill="none" '
                'stroke="#d33" stroke-width="2"/>'
            )
            parts.append(
                f'<text x="{_fmt((bx + cx) / 2 + 3)}" y="{_fmt((by + cy) / 2 - 3)}" '
                f'font-family="monospace" font-size="9" fill="#d33">{k}</text>'
            )
            manip = action.place
        if cost is not None:
            hx, hy = _px(*manip, h)
            gx, gy = _px(*cost.home, h)
            parts.append(
                f'<polyline points="{_fmt(hx)},{_fmt(hy)} {_fmt(gx)},{_fmt(gy)}" fill="none" '
                'stroke="#999" stroke-width="1.5" stroke-dasharray="2,3"/>'
            )
    label = f"total cost {plan.total_cost:.4f}" if plan is not None else "no plan"
    parts.append(
        f'<text x="{_PAD}" y="{_fmt(2 * _PAD + h * _SCALE - 6 + 18)}" font-family="monospace" '
        f'font-size="12">{label}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(
    scene: SceneState,
    path: str | Path,
    plan: Plan | None = None,
    cost: CostConfig | None = None,
    title: str = "",
) -> None:
    Path(path).write_text(render_svg(scene, plan, cost, title))
